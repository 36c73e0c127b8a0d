use serde::{Deserialize, Serialize};

use super::element::Element;
use super::rings::{self, Ring};
use super::{MolError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum; aromatic bonds count as one here and
    /// the shared pi electron is accounted for by the caller.
    pub fn valence(self) -> u32 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    /// Stable small-integer code (1..=4) used by hashing and featurization.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<BondOrder> {
        Some(match code {
            1 => BondOrder::Single,
            2 => BondOrder::Double,
            3 => BondOrder::Triple,
            4 => BondOrder::Aromatic,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i32,
    pub aromatic: bool,
    /// Attached hydrogens (hydrogens are never graph nodes).
    pub h_count: u32,
    /// Heavy-atom degree; recomputed by [`MolGraph::new`].
    pub degree: u32,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            formal_charge: 0,
            aromatic: false,
            h_count: 0,
            degree: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn new(begin: usize, end: usize, order: BondOrder) -> Self {
        Bond { begin, end, order }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }
}

/// A connected heavy-atom molecular graph with perceived rings.
#[derive(Debug, Clone, PartialEq)]
pub struct MolGraph {
    pub name: String,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    rings: Vec<Ring>,
    ring_bond: Vec<bool>,
}

impl MolGraph {
    /// Validates and assembles a graph. Degrees are recomputed from `bonds`.
    pub fn new(name: impl Into<String>, mut atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self> {
        let n = atoms.len();
        if n == 0 {
            return Err(MolError::InvalidGraph("molecule has no atoms".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (bi, b) in bonds.iter().enumerate() {
            if b.begin >= n || b.end >= n {
                return Err(MolError::InvalidGraph(format!(
                    "bond {bi} references atom outside 0..{n}"
                )));
            }
            if b.begin == b.end {
                return Err(MolError::InvalidGraph(format!("bond {bi} is a self loop")));
            }
            if adjacency[b.begin].iter().any(|&(nb, _)| nb == b.end) {
                return Err(MolError::InvalidGraph(format!(
                    "duplicate bond between atoms {} and {}",
                    b.begin, b.end
                )));
            }
            adjacency[b.begin].push((b.end, bi));
            adjacency[b.end].push((b.begin, bi));
        }
        for (i, atom) in atoms.iter_mut().enumerate() {
            atom.degree = adjacency[i].len() as u32;
            if atom.element == Element::H {
                return Err(MolError::InvalidGraph(format!(
                    "atom {i} is hydrogen; hydrogens must be implicit"
                )));
            }
        }
        for (i, atom) in atoms.iter().enumerate() {
            let used: u32 =
                adjacency[i].iter().map(|&(_, bi)| bonds[bi].order.valence()).sum::<u32>() + atom.h_count;
            let max = atom
                .element
                .valences(atom.formal_charge)
                .last()
                .copied()
                .unwrap_or(0);
            if used > max {
                return Err(MolError::Valence {
                    atom: i,
                    element: atom.element.symbol(),
                    valence: used,
                });
            }
        }
        if !is_connected(&adjacency) {
            return Err(MolError::UnsupportedFeature(
                "disconnected (multi-component) molecule".into(),
            ));
        }
        let rings = rings::sssr(n, &bonds, &adjacency);
        let mut ring_bond = vec![false; bonds.len()];
        for r in &rings {
            for &b in &r.bonds {
                ring_bond[b] = true;
            }
        }
        Ok(MolGraph {
            name: name.into(),
            atoms,
            bonds,
            adjacency,
            rings,
            ring_bond,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// `(neighbor, bond index)` pairs of atom `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    /// Smallest set of smallest rings.
    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn is_ring_bond(&self, bond: usize) -> bool {
        self.ring_bond[bond]
    }

    pub fn is_ring_atom(&self, atom: usize) -> bool {
        self.adjacency[atom].iter().any(|&(_, b)| self.ring_bond[b])
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|&&(nb, _)| nb == b).map(|&(_, bi)| bi)
    }

    /// Molecular weight including implicit hydrogens.
    pub fn molecular_weight(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.element.mass() + a.h_count as f64 * Element::H.mass())
            .sum()
    }

    /// Rings whose atoms and bonds are all aromatic.
    pub fn aromatic_rings(&self) -> impl Iterator<Item = &Ring> {
        self.rings.iter().filter(move |r| {
            r.atoms.iter().all(|&a| self.atoms[a].aromatic)
                && r.bonds.iter().all(|&b| self.bonds[b].order == BondOrder::Aromatic)
        })
    }

    /// Returns a copy with atoms reordered so that new atom `k` is old atom
    /// `order[k]`. Bond order in the list follows the original bond list.
    pub fn permuted(&self, order: &[usize]) -> Result<MolGraph> {
        let n = self.atoms.len();
        if order.len() != n {
            return Err(MolError::InvalidGraph("permutation length mismatch".into()));
        }
        let mut inverse = vec![usize::MAX; n];
        for (new, &old) in order.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(MolError::InvalidGraph("not a permutation".into()));
            }
            inverse[old] = new;
        }
        let atoms = order.iter().map(|&old| self.atoms[old].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond::new(inverse[b.begin], inverse[b.end], b.order))
            .collect();
        MolGraph::new(self.name.clone(), atoms, bonds)
    }
}

fn is_connected(adjacency: &[Vec<(usize, usize)>]) -> bool {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &(v, _) in &adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}
