//! ECFP-style circular fingerprints.
//!
//! Hashing is a fixed splitmix/murmur-style 64-bit finalizer folded over
//! little-endian `u64` words, so bit positions are identical on every platform:
//!
//! ```text
//! h0 = SEED ^ (len * K_LEN)
//! h  = fmix64(h ^ word.wrapping_mul(K_WORD)).rotate_left(27).wrapping_mul(5).wrapping_add(K_ADD)
//! ```
//!
//! Initial atom words: `[atomic_number | degree << 8 | (charge + 128) << 16
//! | h_count << 24 | aromatic << 32]`. Each iteration hashes
//! `[iteration, own_code, (bond_code, neighbor_code)...]` with the pairs
//! sorted ascending.

use serde::{Deserialize, Serialize};

use super::graph::MolGraph;
use super::{MolError, Result};

const SEED: u64 = 0x6a09_e667_f3bc_c908;
const K_LEN: u64 = 0x9e37_79b9_7f4a_7c15;
const K_WORD: u64 = 0x87c3_7b91_1142_53d5;
const K_ADD: u64 = 0x52dc_e729;

fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

pub(crate) fn hash_words(words: &[u64]) -> u64 {
    let mut h = SEED ^ (words.len() as u64).wrapping_mul(K_LEN);
    for &w in words {
        h = fmix64(h ^ w.wrapping_mul(K_WORD))
            .rotate_left(27)
            .wrapping_mul(5)
            .wrapping_add(K_ADD);
    }
    fmix64(h)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitFingerprint {
    words: Vec<u64>,
    nbits: usize,
    radius: u32,
}

impl BitFingerprint {
    pub fn new(nbits: usize, radius: u32) -> Self {
        BitFingerprint {
            words: vec![0; nbits.div_ceil(64)],
            nbits,
            radius,
        }
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.nbits, "bit {bit} out of range");
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        bit < self.nbits && (self.words[bit / 64] >> (bit % 64)) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(move |&b| self.get(b))
    }

    /// Bits as `0.0`/`1.0` values.
    pub fn to_dense(&self) -> Vec<f32> {
        (0..self.nbits).map(|b| if self.get(b) { 1.0 } else { 0.0 }).collect()
    }
}

/// Morgan fingerprint. `radius = 2` is ECFP4.
///
/// # Panics
/// If `nbits` is not a power of two.
pub fn morgan_fingerprint(graph: &MolGraph, radius: u32, nbits: usize) -> BitFingerprint {
    assert!(nbits.is_power_of_two(), "nbits must be a power of two");
    let mask = (nbits - 1) as u64;
    let mut fp = BitFingerprint::new(nbits, radius);
    let mut codes: Vec<u64> = graph
        .atoms()
        .iter()
        .map(|a| {
            let word = a.element.atomic_number() as u64
                | (a.degree as u64 & 0xff) << 8
                | ((a.formal_charge + 128) as u64 & 0xff) << 16
                | (a.h_count as u64 & 0xff) << 24
                | (a.aromatic as u64) << 32;
            hash_words(&[word])
        })
        .collect();
    for &c in &codes {
        fp.set((c & mask) as usize);
    }
    for iteration in 1..=radius {
        let next: Vec<u64> = (0..graph.atom_count())
            .map(|i| {
                let mut pairs: Vec<(u64, u64)> = graph
                    .neighbors(i)
                    .iter()
                    .map(|&(nb, b)| (graph.bonds()[b].order.code() as u64, codes[nb]))
                    .collect();
                pairs.sort_unstable();
                let mut words = Vec::with_capacity(2 + 2 * pairs.len());
                words.push(iteration as u64);
                words.push(codes[i]);
                for (o, c) in pairs {
                    words.push(o);
                    words.push(c);
                }
                hash_words(&words)
            })
            .collect();
        for &c in &next {
            fp.set((c & mask) as usize);
        }
        codes = next;
    }
    fp
}

/// `|a ∧ b| / |a ∨ b|`; two empty fingerprints score 1.0.
pub fn tanimoto_2d(a: &BitFingerprint, b: &BitFingerprint) -> Result<f64> {
    if a.nbits != b.nbits {
        return Err(MolError::LengthMismatch(a.nbits, b.nbits));
    }
    let (mut both, mut either) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        both += (x & y).count_ones();
        either += (x | y).count_ones();
    }
    if either == 0 {
        return Ok(1.0);
    }
    Ok(both as f64 / either as f64)
}

#[cfg(test)]
mod tests {
    use super::super::parse_smiles;
    use super::*;

    fn fp_from_bits(nbits: usize, bits: &[usize]) -> BitFingerprint {
        let mut fp = BitFingerprint::new(nbits, 0);
        for &b in bits {
            fp.set(b);
        }
        fp
    }

    #[test]
    fn methane_radius_zero_sets_one_bit() {
        let g = parse_smiles("C").unwrap();
        for nbits in [1, 64, 2048] {
            assert_eq!(morgan_fingerprint(&g, 0, nbits).count_ones(), 1);
        }
    }

    #[test]
    fn equivalent_smiles_match() {
        let a = morgan_fingerprint(&parse_smiles("CCO").unwrap(), 2, 2048);
        let b = morgan_fingerprint(&parse_smiles("OCC").unwrap(), 2, 2048);
        assert_eq!(a, b);
        let c = morgan_fingerprint(&parse_smiles("CCN").unwrap(), 2, 2048);
        assert_ne!(a, c);
    }

    #[test]
    fn tanimoto_cases() {
        let a = fp_from_bits(64, &[1, 2, 3]);
        assert_eq!(tanimoto_2d(&a, &a).unwrap(), 1.0);
        let b = fp_from_bits(64, &[4, 5]);
        assert_eq!(tanimoto_2d(&a, &b).unwrap(), 0.0);
        // |a∧b| = 2, |a∨b| = 8
        let x = fp_from_bits(64, &[0, 1, 2, 3, 4]);
        let y = fp_from_bits(64, &[3, 4, 5, 6, 7]);
        assert_eq!(tanimoto_2d(&x, &y).unwrap(), 0.25);
        let empty = BitFingerprint::new(64, 0);
        assert_eq!(tanimoto_2d(&empty, &empty).unwrap(), 1.0);
        assert!(matches!(
            tanimoto_2d(&a, &BitFingerprint::new(128, 0)),
            Err(MolError::LengthMismatch(64, 128))
        ));
    }

    #[test]
    fn hash_is_pinned() {
        // frozen so fingerprints stay bit-identical across releases
        assert_eq!(hash_words(&[]), fmix64(SEED));
        let h = hash_words(&[6]);
        assert_eq!(h, hash_words(&[6]));
        assert_ne!(h, hash_words(&[7]));
        assert_ne!(hash_words(&[1, 2]), hash_words(&[2, 1]));
    }
}
