use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::graph::Bond;

/// A ring as a closed walk: `atoms[k]` is bonded to `atoms[k + 1]` through
/// `bonds[k]`, and the last atom closes back to the first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ring {
    pub atoms: Vec<usize>,
    pub bonds: Vec<usize>,
}

impl Ring {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn contains_atom(&self, atom: usize) -> bool {
        self.atoms.contains(&atom)
    }
}

/// Smallest set of smallest rings for a connected graph.
///
/// Candidates are the shortest cycle through each bond plus the fundamental
/// cycles of a BFS spanning tree; they are then accepted in order of size if
/// linearly independent over GF(2) until the cycle rank `E - V + 1` is reached.
pub(crate) fn sssr(n_atoms: usize, bonds: &[Bond], adjacency: &[Vec<(usize, usize)>]) -> Vec<Ring> {
    let rank = (bonds.len() + 1).saturating_sub(n_atoms);
    if rank == 0 {
        return Vec::new();
    }
    let mut candidates: Vec<Ring> = Vec::new();
    for (bi, b) in bonds.iter().enumerate() {
        if let Some(path) = shortest_path_avoiding(adjacency, b.begin, b.end, bi) {
            candidates.push(ring_from_path(&path, bi, bonds));
        }
    }
    candidates.extend(fundamental_cycles(n_atoms, bonds, adjacency));
    candidates.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.bonds.cmp(&b.bonds)));

    let words = bonds.len().div_ceil(64);
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new(); // (pivot bit, reduced vector)
    let mut selected = Vec::new();
    let mut seen: Vec<Vec<usize>> = Vec::new();
    for ring in candidates {
        let mut key = ring.bonds.clone();
        key.sort_unstable();
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let mut v = vec![0u64; words];
        for &b in &ring.bonds {
            v[b / 64] ^= 1 << (b % 64);
        }
        for (pivot, row) in &basis {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (x, y) in v.iter_mut().zip(row) {
                    *x ^= y;
                }
            }
        }
        if let Some(pivot) = first_set_bit(&v) {
            basis.push((pivot, v));
            selected.push(ring);
            if selected.len() == rank {
                break;
            }
        }
    }
    selected
}

fn first_set_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

/// Atom path from `from` to `to` not using bond `skip`, shortest by BFS.
fn shortest_path_avoiding(
    adjacency: &[Vec<(usize, usize)>],
    from: usize,
    to: usize,
    skip: usize,
) -> Option<Vec<(usize, usize)>> {
    let n = adjacency.len();
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        if u == to {
            break;
        }
        for &(v, bi) in &adjacency[u] {
            if bi == skip || seen[v] {
                continue;
            }
            seen[v] = true;
            prev[v] = Some((u, bi));
            queue.push_back(v);
        }
    }
    if !seen[to] {
        return None;
    }
    // (atom, bond leading to the next atom along the path)
    let mut path = Vec::new();
    let mut cur = to;
    while let Some((p, bi)) = prev[cur] {
        path.push((p, bi));
        cur = p;
    }
    path.reverse();
    Some(path)
}

fn ring_from_path(path: &[(usize, usize)], closing_bond: usize, bonds: &[Bond]) -> Ring {
    let mut atoms: Vec<usize> = path.iter().map(|&(a, _)| a).collect();
    let mut ring_bonds: Vec<usize> = path.iter().map(|&(_, b)| b).collect();
    let last_bond = bonds[*ring_bonds.last().expect("path has at least one bond")];
    let last_atom = last_bond.other(*atoms.last().unwrap());
    atoms.push(last_atom);
    ring_bonds.push(closing_bond);
    Ring {
        atoms,
        bonds: ring_bonds,
    }
}

fn fundamental_cycles(n: usize, bonds: &[Bond], adjacency: &[Vec<(usize, usize)>]) -> Vec<Ring> {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut depth = vec![usize::MAX; n];
    let mut tree_bond = vec![false; bonds.len()];
    depth[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &(v, bi) in &adjacency[u] {
            if depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                parent[v] = Some((u, bi));
                tree_bond[bi] = true;
                queue.push_back(v);
            }
        }
    }
    let mut out = Vec::new();
    for (bi, b) in bonds.iter().enumerate() {
        if tree_bond[bi] {
            continue;
        }
        // walk both endpoints up to their lowest common ancestor
        let (mut x, mut y) = (b.begin, b.end);
        let mut left = vec![(x, usize::MAX)];
        let mut right = vec![(y, usize::MAX)];
        while x != y {
            if depth[x] >= depth[y] {
                let (p, pb) = parent[x].unwrap();
                left.last_mut().unwrap().1 = pb;
                left.push((p, usize::MAX));
                x = p;
            } else {
                let (p, pb) = parent[y].unwrap();
                right.last_mut().unwrap().1 = pb;
                right.push((p, usize::MAX));
                y = p;
            }
        }
        // left: begin .. lca ; right: end .. lca
        right.pop();
        let mut atoms: Vec<usize> = left.iter().map(|&(a, _)| a).collect();
        let mut ring_bonds: Vec<usize> = left[..left.len() - 1].iter().map(|&(_, b)| b).collect();
        for &(a, b) in right.iter().rev() {
            ring_bonds.push(b);
            atoms.push(a);
        }
        ring_bonds.push(bi);
        out.push(Ring {
            atoms,
            bonds: ring_bonds,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_smiles;

    fn ring_sizes(smiles: &str) -> Vec<usize> {
        let g = parse_smiles(smiles).unwrap();
        let mut s: Vec<usize> = g.rings().iter().map(|r| r.len()).collect();
        s.sort();
        s
    }

    #[test]
    fn ring_counts() {
        assert_eq!(ring_sizes("CCO"), Vec::<usize>::new());
        assert_eq!(ring_sizes("c1ccccc1"), vec![6]);
        assert_eq!(ring_sizes("c1ccc2ccccc2c1"), vec![6, 6]);
        assert_eq!(ring_sizes("C1CC2CCC1C2"), vec![5, 5]);
        assert_eq!(ring_sizes("C12C3C4C1C5C2C3C45"), vec![4, 4, 4, 4, 4]);
    }

    #[test]
    fn ring_walk_is_closed() {
        let g = parse_smiles("c1ccc2ccccc2c1").unwrap();
        for r in g.rings() {
            for k in 0..r.len() {
                let a = r.atoms[k];
                let b = r.atoms[(k + 1) % r.len()];
                assert_eq!(g.bond_between(a, b), Some(r.bonds[k]));
            }
        }
    }
}
