//! Seeded generator of small drug-like molecules: chains with optional
//! branches, terminal groups and isolated rings (never fused).

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conform::generate_conformers;
use crate::molio::{morgan_fingerprint, parse_smiles, MolGraph};

const TERMINALS: [&str; 8] = ["O", "N", "F", "Cl", "C#N", "C(=O)O", "C(=O)N", "OC"];

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    budget: i32,
    ring_label: u32,
}

impl Gen<'_> {
    fn chain(&mut self, after_hetero: bool) -> String {
        if self.budget <= 0 {
            return String::new();
        }
        let roll = self.rng.gen_range(0..100);
        if roll < 22 && self.budget >= 5 && self.ring_label < 3 {
            return self.ring();
        }
        self.budget -= 1;
        let (atom, hetero) = match roll {
            22..=60 => ("C", false),
            61..=68 if !after_hetero => ("O", true),
            69..=76 if !after_hetero => ("N", true),
            77..=84 => ("C(C)", false),
            85..=89 => ("C(=O)", false),
            90..=93 => ("C(F)", false),
            94..=96 => ("C(C)(C)", false),
            _ => ("C", false),
        };
        let mut s = atom.to_string();
        if self.rng.gen_bool(0.12) || self.budget <= 0 {
            if self.rng.gen_bool(0.5) && self.budget > 0 {
                let t = TERMINALS[self.rng.gen_range(0..TERMINALS.len())];
                if !hetero || (t.starts_with('C') && t != "Cl") {
                    s.push_str(t);
                }
            }
            self.budget = self.budget.min(0);
            return s;
        }
        s + &self.chain(hetero)
    }

    fn ring(&mut self) -> String {
        self.ring_label += 1;
        let d = self.ring_label;
        let kind = self.rng.gen_range(0..7);
        let size = if kind == 4 || kind == 5 { 5 } else { 6 };
        self.budget -= size;
        let rest = if self.budget > 0 && self.rng.gen_bool(0.7) {
            self.chain(false)
        } else {
            String::new()
        };
        let branch = |r: &str| if r.is_empty() { String::new() } else { format!("({r})") };
        match kind {
            0 => format!("c{d}ccc{}cc{d}", branch(&rest)),
            1 => format!("c{d}cccc{}c{d}", branch(&rest)),
            2 => format!("c{d}ccccc{d}{rest}"),
            3 => format!("C{d}CCC{}CC{d}", branch(&rest)),
            4 => format!("C{d}CCC{}C{d}", branch(&rest)),
            5 => format!("C{d}COC{}C{d}", branch(&rest)),
            _ => format!("c{d}ccc{}nc{d}", branch(&rest)),
        }
    }
}

/// One SMILES string with roughly `3..=18` heavy atoms.
fn toy_smiles(rng: &mut ChaCha8Rng) -> String {
    let budget = rng.gen_range(3..=18);
    let mut g = Gen {
        rng,
        budget,
        ring_label: 0,
    };
    let lead = if g.rng.gen_bool(0.3) { "C" } else { "" };
    let s = g.chain(false);
    format!("{lead}{s}")
}

/// `n` distinct molecules named `toy0000`, `toy0001`, ... Every one parses and
/// embeds. Deterministic in `seed`.
///
/// # Panics
/// If the generator cannot find `n` distinct molecules (far beyond any
/// practical `n`).
pub fn toy_molecules(n: usize, seed: u64) -> Vec<MolGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        assert!(attempts < 200 * n + 1000, "toy generator exhausted after {attempts} attempts");
        let smi = toy_smiles(&mut rng);
        let Ok(mut g) = parse_smiles(&smi) else {
            continue;
        };
        // different strings can spell the same molecule
        let key = (g.atom_count(), morgan_fingerprint(&g, 3, 2048).iter_ones().collect::<Vec<_>>());
        if g.atom_count() < 3 || !seen.insert(key) || generate_conformers(&g, 1, 0).is_err() {
            continue;
        }
        g.name = format!("toy{:04}", out.len());
        out.push(g);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molio::to_smiles;

    #[test]
    fn deterministic_and_distinct() {
        let a = toy_molecules(60, 7);
        let b = toy_molecules(60, 7);
        let sa: Vec<String> = a.iter().map(to_smiles).collect();
        assert_eq!(sa, b.iter().map(to_smiles).collect::<Vec<_>>());
        assert_ne!(sa, toy_molecules(60, 8).iter().map(to_smiles).collect::<Vec<_>>());
        assert_eq!(a[59].name, "toy0059");
        assert!(a.iter().all(|g| (3..=24).contains(&g.atom_count())));
        assert!(a.iter().any(|g| !g.rings().is_empty()));
        assert!(a.iter().any(|g| g.rings().is_empty()));
    }
}
