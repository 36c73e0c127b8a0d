//! Toy conformer generator: spanning-tree embedding with ideal bond lengths
//! and angles, isolated rings as planar regular polygons, and rotatable
//! torsions drawn from {180°, 60°, 300°}.

use std::collections::{HashSet, VecDeque};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::geometry::{ideal_bond_length, Hybridization};
use super::{ConformError, Conformer, ConformerSet, Point};
use crate::molio::{BondOrder, MolGraph};

/// Torsion grid, in the order used for exhaustive enumeration.
const TORSIONS_DEG: [f64; 3] = [180.0, 60.0, 300.0];
/// Nonbonded pairs closer than this fraction of their vdW sum clash.
const CLASH_FRACTION: f64 = 0.7;
/// Draw budget per requested conformer when sampling.
const DRAWS_PER_CONF: usize = 100;
/// Half the tetrahedral angle: tilt of the two exocyclic bonds on an sp3 ring atom.
const HALF_TETRAHEDRAL: f64 = 109.5 / 2.0;

/// Single, acyclic bonds whose endpoints both have heavy degree ≥ 2, in bond order.
pub fn rotatable_bonds(graph: &MolGraph) -> Vec<usize> {
    graph
        .bonds()
        .iter()
        .enumerate()
        .filter(|&(i, b)| {
            b.order == BondOrder::Single
                && !graph.is_ring_bond(i)
                && graph.atoms()[b.begin].degree >= 2
                && graph.atoms()[b.end].degree >= 2
        })
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Copy)]
struct RingFrame {
    centroid: Point,
    normal: Point,
}

struct Embedder<'a> {
    graph: &'a MolGraph,
    hyb: Vec<Hybridization>,
    ring_of: Vec<Option<usize>>,
    /// torsion slot for each bond, if rotatable
    torsion_slot: Vec<Option<usize>>,
    /// atom pairs separated by three or more bonds, with their clash threshold
    nonbonded: Vec<(usize, usize, f64)>,
}

fn unsupported(graph: &MolGraph, reason: &str) -> ConformError {
    ConformError::UnsupportedTopology {
        name: graph.name.clone(),
        reason: reason.to_string(),
    }
}

impl<'a> Embedder<'a> {
    fn new(graph: &'a MolGraph) -> Result<Self, ConformError> {
        let n = graph.atom_count();
        let mut ring_of = vec![None; n];
        for (ri, ring) in graph.rings().iter().enumerate() {
            for &a in &ring.atoms {
                if ring_of[a].is_some() {
                    return Err(unsupported(graph, "fused, spiro or bridged ring system"));
                }
                ring_of[a] = Some(ri);
            }
        }
        if graph.atoms().iter().any(|a| a.degree > 4) {
            return Err(unsupported(graph, "atom with more than four heavy neighbors"));
        }
        let hyb = (0..n).map(|i| Hybridization::of(graph, i)).collect();
        let mut torsion_slot = vec![None; graph.bonds().len()];
        for (k, b) in rotatable_bonds(graph).into_iter().enumerate() {
            torsion_slot[b] = Some(k);
        }
        let mut nonbonded = Vec::new();
        for i in 0..n {
            let dist = bfs_distances(graph, i);
            for (j, &dij) in dist.iter().enumerate().skip(i + 1) {
                if dij >= 3 {
                    let r = graph.atoms()[i].element.vdw_radius() + graph.atoms()[j].element.vdw_radius();
                    nonbonded.push((i, j, CLASH_FRACTION * r));
                }
            }
        }
        Ok(Embedder {
            graph,
            hyb,
            ring_of,
            torsion_slot,
            nonbonded,
        })
    }

    fn n_torsions(&self) -> usize {
        self.torsion_slot.iter().flatten().count()
    }

    fn bond_length(&self, bond: usize) -> f64 {
        let b = self.graph.bonds()[bond];
        let atoms = self.graph.atoms();
        ideal_bond_length(atoms[b.begin].element, atoms[b.end].element, b.order)
    }

    fn torsion(&self, bond: usize, torsions: &[f64]) -> f64 {
        self.torsion_slot[bond].map_or(PI, |k| torsions[k])
    }

    fn ring_radius(&self, ring: usize) -> f64 {
        let r = &self.graph.rings()[ring];
        let side = r.bonds.iter().map(|&b| self.bond_length(b)).sum::<f64>() / r.len() as f64;
        side / (2.0 * (PI / r.len() as f64).sin())
    }

    fn exocyclic_count(&self, atom: usize) -> usize {
        let ring = self.ring_of[atom].map(|r| &self.graph.rings()[r]);
        self.graph
            .neighbors(atom)
            .iter()
            .filter(|&&(nb, _)| !ring.is_some_and(|r| r.contains_atom(nb)))
            .count()
    }

    fn build(&self, torsions: &[f64]) -> Vec<Point> {
        let g = self.graph;
        let n = g.atom_count();
        let mut pos: Vec<Option<Point>> = vec![None; n];
        let mut frames: Vec<Option<RingFrame>> = vec![None; g.rings().len()];
        let mut queue = VecDeque::new();

        match self.ring_of[0] {
            Some(r) => {
                let ring = &g.rings()[r];
                let radius = self.ring_radius(r);
                for (k, &a) in ring.atoms.iter().enumerate() {
                    let t = 2.0 * PI * k as f64 / ring.len() as f64;
                    pos[a] = Some(Point::new(radius * t.cos(), radius * t.sin(), 0.0));
                    queue.push_back(a);
                }
                frames[r] = Some(RingFrame {
                    centroid: Point::zeros(),
                    normal: Point::z(),
                });
            }
            None => {
                pos[0] = Some(Point::zeros());
                queue.push_back(0);
            }
        }

        while let Some(c) = queue.pop_front() {
            let children: Vec<(usize, usize)> = g
                .neighbors(c)
                .iter()
                .copied()
                .filter(|&(q, _)| pos[q].is_none())
                .collect();
            if children.is_empty() {
                continue;
            }
            let dirs = match self.ring_of[c] {
                Some(r) => self.ring_exo_directions(c, frames[r].unwrap(), &pos, children.len()),
                None => self.tree_directions(c, &pos, torsions, children.len()),
            };
            for (&(q, b), d) in children.iter().zip(dirs) {
                let pc = pos[c].unwrap();
                match self.ring_of[q] {
                    Some(r) => {
                        let phi = self.torsion(b, torsions);
                        let frame = self.place_ring(c, q, r, b, d, phi, &mut pos);
                        frames[r] = Some(frame);
                        let ring = &g.rings()[r];
                        let iq = ring.atoms.iter().position(|&a| a == q).unwrap();
                        for k in 0..ring.len() {
                            queue.push_back(ring.atoms[(iq + k) % ring.len()]);
                        }
                    }
                    None => {
                        pos[q] = Some(pc + d * self.bond_length(b));
                        queue.push_back(q);
                    }
                }
            }
        }
        pos.into_iter().map(|p| p.expect("connected graph is fully embedded")).collect()
    }

    /// Reference atom for dihedrals about bond `p -> c`: a placed neighbor of
    /// `p` other than `c`.
    fn dihedral_reference(&self, p: usize, c: usize, pos: &[Option<Point>]) -> Option<Point> {
        self.graph
            .neighbors(p)
            .iter()
            .find(|&&(nb, _)| nb != c && pos[nb].is_some())
            .and_then(|&(nb, _)| pos[nb])
    }

    /// Directions (unit) for `count` new neighbors of a non-ring atom `c`.
    fn tree_directions(&self, c: usize, pos: &[Option<Point>], torsions: &[f64], count: usize) -> Vec<Point> {
        let pc = pos[c].unwrap();
        let placed = self
            .graph
            .neighbors(c)
            .iter()
            .find(|&&(nb, _)| pos[nb].is_some())
            .copied();
        let hyb = self.hyb[c];
        let theta = hyb.angle();
        let offsets: &[f64] = match hyb {
            Hybridization::Sp => &[0.0],
            Hybridization::Sp2 => &[0.0, PI],
            Hybridization::Sp3 => &[0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0],
        };
        let (parent_pos, reference, phi0, mut out) = match placed {
            Some((p, b)) => (
                pos[p].unwrap(),
                self.dihedral_reference(p, c, pos),
                self.torsion(b, torsions),
                Vec::new(),
            ),
            None => {
                // root of the tree: first bond along +x, the rest arranged around it
                let first = Point::x();
                (pc + first, None, PI, vec![first])
            }
        };
        let bc = (pc - parent_pos).normalize();
        let normal = reference
            .map(|g| (parent_pos - g).cross(&bc))
            .filter(|v| v.norm() > 1e-6)
            .unwrap_or_else(|| fallback_perpendicular(&bc))
            .normalize();
        let m1 = normal.cross(&bc);
        let mut k = 0;
        while out.len() < count {
            let phi = phi0 + offsets[k % offsets.len()];
            let dir = -bc * theta.cos() + (m1 * phi.cos() + normal * phi.sin()) * theta.sin();
            out.push(dir.normalize());
            k += 1;
        }
        out
    }

    /// Exocyclic directions for new neighbors of ring atom `c`.
    fn ring_exo_directions(&self, c: usize, frame: RingFrame, pos: &[Option<Point>], count: usize) -> Vec<Point> {
        let pc = pos[c].unwrap();
        let radial = (pc - frame.centroid).normalize();
        let m = self.exocyclic_count(c);
        let slots: Vec<Point> = if m <= 1 {
            vec![radial]
        } else {
            let a = HALF_TETRAHEDRAL.to_radians();
            vec![
                radial * a.cos() + frame.normal * a.sin(),
                radial * a.cos() - frame.normal * a.sin(),
            ]
        };
        let ring = &self.graph.rings()[self.ring_of[c].unwrap()];
        let mut taken = vec![false; slots.len()];
        for &(nb, _) in self.graph.neighbors(c) {
            if ring.contains_atom(nb) {
                continue;
            }
            if let Some(p) = pos[nb] {
                let d = (p - pc).normalize();
                let best = (0..slots.len())
                    .filter(|&s| !taken[s])
                    .max_by(|&x, &y| slots[x].dot(&d).total_cmp(&slots[y].dot(&d)));
                if let Some(s) = best {
                    taken[s] = true;
                }
            }
        }
        let free: Vec<Point> = (0..slots.len()).filter(|&s| !taken[s]).map(|s| slots[s]).collect();
        (0..count).map(|k| free[k.min(free.len() - 1)]).collect()
    }

    /// Places ring `ring` entered through bond `bond` from atom `c` to ring atom `q`.
    #[allow(clippy::too_many_arguments)]
    fn place_ring(
        &self,
        c: usize,
        q: usize,
        ring: usize,
        bond: usize,
        dir: Point,
        phi: f64,
        pos: &mut [Option<Point>],
    ) -> RingFrame {
        let pc = pos[c].unwrap();
        let bc = dir;
        let normal = self
            .dihedral_reference(c, q, pos)
            .map(|g| (pc - g).cross(&bc))
            .filter(|v| v.norm() > 1e-6)
            .unwrap_or_else(|| fallback_perpendicular(&bc))
            .normalize();
        let m1 = normal.cross(&bc);
        let w = (m1 * phi.cos() + normal * phi.sin()).normalize();
        let u = -bc;
        let v = u.cross(&w);
        let alpha = if self.exocyclic_count(q) >= 2 {
            HALF_TETRAHEDRAL.to_radians()
        } else {
            0.0
        };
        let radial = u * alpha.cos() - v * alpha.sin();
        let ring_normal = u * alpha.sin() + v * alpha.cos();
        let pq = pc + bc * self.bond_length(bond);
        let radius = self.ring_radius(ring);
        let centroid = pq - radial * radius;
        let r = &self.graph.rings()[ring];
        let iq = r.atoms.iter().position(|&a| a == q).unwrap();
        for k in 0..r.len() {
            let t = 2.0 * PI * k as f64 / r.len() as f64;
            pos[r.atoms[(iq + k) % r.len()]] = Some(centroid + (radial * t.cos() + w * t.sin()) * radius);
        }
        RingFrame {
            centroid,
            normal: ring_normal,
        }
    }

    /// Sum of clash depths over nonbonded pairs; zero means clash-free.
    fn clash_score(&self, coords: &[Point]) -> f64 {
        self.nonbonded
            .iter()
            .map(|&(i, j, limit)| (limit - (coords[i] - coords[j]).norm()).max(0.0))
            .sum()
    }
}

fn fallback_perpendicular(v: &Point) -> Point {
    let axes = [Point::x(), Point::y(), Point::z()];
    let e = axes
        .iter()
        .min_by(|a, b| a.dot(v).abs().total_cmp(&b.dot(v).abs()))
        .unwrap();
    e.cross(v)
}

fn bfs_distances(graph: &MolGraph, from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; graph.atom_count()];
    dist[from] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in graph.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn combo_torsions(combo: &[u8]) -> Vec<f64> {
    combo.iter().map(|&d| TORSIONS_DEG[d as usize].to_radians()).collect()
}

/// Generates up to `max_confs` clash-free conformers.
///
/// With `3^r ≤ max_confs` torsion combinations (r rotatable bonds) all are
/// enumerated; otherwise combinations are drawn uniformly without
/// replacement from a `seed`-ed generator, at most `100 × max_confs` draws.
/// When nothing passes the clash filter the least clashing sample is
/// returned with `clash_fallback` set.
pub fn generate_conformers(graph: &MolGraph, max_confs: usize, seed: u64) -> Result<ConformerSet, ConformError> {
    if max_confs == 0 {
        return Err(ConformError::InvalidArgument("max_confs must be at least 1".into()));
    }
    let emb = Embedder::new(graph)?;
    let r = emb.n_torsions();
    let total = 3u64.checked_pow(r as u32);

    let mut accepted: Vec<Conformer> = Vec::new();
    let mut fallback: Option<(f64, Vec<Point>)> = None;
    let mut consider = |combo: &[u8], accepted: &mut Vec<Conformer>| {
        let coords = emb.build(&combo_torsions(combo));
        let score = emb.clash_score(&coords);
        if score == 0.0 {
            accepted.push(Conformer::new(coords));
        } else if fallback.as_ref().is_none_or(|(best, _)| score < *best) {
            fallback = Some((score, coords));
        }
    };

    match total {
        Some(t) if t <= max_confs as u64 => {
            for idx in 0..t {
                let mut combo = vec![0u8; r];
                let mut x = idx;
                for d in combo.iter_mut() {
                    *d = (x % 3) as u8;
                    x /= 3;
                }
                consider(&combo, &mut accepted);
            }
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut seen: HashSet<Vec<u8>> = HashSet::new();
            for _ in 0..DRAWS_PER_CONF * max_confs {
                if accepted.len() >= max_confs || total.is_some_and(|t| seen.len() as u64 >= t) {
                    break;
                }
                let combo: Vec<u8> = (0..r).map(|_| rng.gen_range(0..3u8)).collect();
                if seen.insert(combo.clone()) {
                    consider(&combo, &mut accepted);
                }
            }
        }
    }

    if accepted.is_empty() {
        let (_, coords) = fallback.expect("at least one sample was built");
        let mut c = Conformer::new(coords);
        c.clash_fallback = true;
        accepted.push(c);
    }
    Ok(ConformerSet {
        graph: graph.clone(),
        conformers: accepted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molio::parse_smiles;

    fn gen(smiles: &str, k: usize) -> ConformerSet {
        generate_conformers(&parse_smiles(smiles).unwrap(), k, 42).unwrap()
    }

    fn check_bond_lengths(set: &ConformerSet) {
        let g = &set.graph;
        for conf in &set.conformers {
            for b in g.bonds() {
                let d = (conf.coords[b.begin] - conf.coords[b.end]).norm();
                let ideal = ideal_bond_length(g.atoms()[b.begin].element, g.atoms()[b.end].element, b.order);
                // ring sides are the ring's mean bond length
                assert!((d - ideal).abs() < 0.1, "{}: {d} vs {ideal}", g.name);
            }
        }
    }

    #[test]
    fn rotatable_bond_cases() {
        assert!(rotatable_bonds(&parse_smiles("CC").unwrap()).is_empty());
        assert_eq!(rotatable_bonds(&parse_smiles("CCCC").unwrap()), vec![1]);
        assert!(rotatable_bonds(&parse_smiles("c1ccccc1").unwrap()).is_empty());
        assert!(rotatable_bonds(&parse_smiles("CC=CC").unwrap()).is_empty());
    }

    #[test]
    fn methane_at_origin() {
        let s = gen("C", 10);
        assert_eq!(s.len(), 1);
        assert_eq!(s.conformers[0].coords, vec![Point::zeros()]);
    }

    #[test]
    fn ethane_bond_length() {
        let s = gen("CC", 10);
        assert_eq!(s.len(), 1);
        let c = &s.conformers[0].coords;
        assert!(((c[0] - c[1]).norm() - 1.54).abs() < 1e-12);
    }

    #[test]
    fn butane_has_at_most_three() {
        let s = gen("CCCC", 10);
        assert!((1..=3).contains(&s.len()));
        let dihedrals: Vec<f64> = s
            .conformers
            .iter()
            .map(|c| dihedral(c.coords[0], c.coords[1], c.coords[2], c.coords[3]).to_degrees())
            .collect();
        assert!((dihedrals[0].abs() - 180.0).abs() < 1e-6, "{dihedrals:?}");
        // angle C1-C2-C3 is tetrahedral
        let c = &s.conformers[0].coords;
        let ang = (c[0] - c[1]).angle(&(c[2] - c[1])).to_degrees();
        assert!((ang - 109.5).abs() < 1e-9);
    }

    #[test]
    fn rings_are_regular_polygons() {
        let s = gen("c1ccccc1", 5);
        assert_eq!(s.len(), 1);
        check_bond_lengths(&s);
        for name in ["Cc1ccccc1", "CC1CCCCC1", "CC1(C)CCCC1", "OCCc1ccncc1", "c1ccccc1Cc1ccccc1"] {
            let s = gen(name, 10);
            check_bond_lengths(&s);
            assert!(s.conformers.iter().all(|c| !c.clash_fallback), "{name}");
        }
    }

    #[test]
    fn sp_and_sp2_geometry() {
        let s = gen("CC#CC", 3);
        let c = &s.conformers[0].coords;
        let ang = (c[0] - c[1]).angle(&(c[2] - c[1])).to_degrees();
        assert!((ang - 180.0).abs() < 1e-6);
        let s = gen("CC(=O)C", 3);
        let c = &s.conformers[0].coords;
        for (a, b) in [(0, 2), (0, 3), (2, 3)] {
            let ang = (c[a] - c[1]).angle(&(c[b] - c[1])).to_degrees();
            assert!((ang - 120.0).abs() < 1e-6);
        }
    }

    #[test]
    fn fused_rings_rejected() {
        let e = generate_conformers(&parse_smiles("c1ccc2ccccc2c1").unwrap(), 10, 0).unwrap_err();
        assert!(matches!(e, ConformError::UnsupportedTopology { .. }));
        let e = generate_conformers(&parse_smiles("C1CC11CC1").unwrap(), 10, 0).unwrap_err();
        assert!(matches!(e, ConformError::UnsupportedTopology { .. }));
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let g = parse_smiles("CCCCCCCCCC").unwrap();
        let a = generate_conformers(&g, 10, 7).unwrap();
        let b = generate_conformers(&g, 10, 7).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a.conformers, b.conformers);
        let c = generate_conformers(&g, 10, 8).unwrap();
        assert_ne!(a.conformers, c.conformers);
    }

    fn dihedral(a: Point, b: Point, c: Point, d: Point) -> f64 {
        let b1 = b - a;
        let b2 = c - b;
        let b3 = d - c;
        let n1 = b1.cross(&b2);
        let n2 = b2.cross(&b3);
        let m = n1.cross(&b2.normalize());
        m.dot(&n2).atan2(n1.dot(&n2))
    }
}
