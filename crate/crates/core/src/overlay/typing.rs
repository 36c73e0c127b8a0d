use super::{GaussianAtom, PharmacophoreKind, PharmacophorePoint};
use crate::conform::{Conformer, ConformerSet, Point};
use crate::molio::{Element, MolGraph};

/// One shape Gaussian per heavy atom at its vdW radius.
pub fn shape_gaussians(conf: &Conformer, graph: &MolGraph) -> Vec<GaussianAtom> {
    graph
        .atoms()
        .iter()
        .zip(&conf.coords)
        .map(|(a, &c)| GaussianAtom::new(c, a.element.vdw_radius()))
        .collect()
}

/// Pharmacophore kinds of one atom.
///
/// donor: N/O carrying H. acceptor: O always, N unless positively charged or
/// aromatic with three connections. cation: N⁺. anion: O⁻/S⁻. hydrophobe:
/// carbon without heteroatom neighbors.
pub fn atom_kinds(graph: &MolGraph, atom: usize) -> Vec<PharmacophoreKind> {
    let a = &graph.atoms()[atom];
    let mut kinds = Vec::new();
    let n_or_o = matches!(a.element, Element::N | Element::O);
    if n_or_o && a.h_count >= 1 {
        kinds.push(PharmacophoreKind::Donor);
    }
    let acceptor = match a.element {
        Element::O => true,
        Element::N => a.formal_charge <= 0 && !(a.aromatic && a.degree + a.h_count >= 3),
        _ => false,
    };
    if acceptor {
        kinds.push(PharmacophoreKind::Acceptor);
    }
    if a.element == Element::N && a.formal_charge > 0 {
        kinds.push(PharmacophoreKind::Cation);
    }
    if matches!(a.element, Element::O | Element::S) && a.formal_charge < 0 {
        kinds.push(PharmacophoreKind::Anion);
    }
    if a.element == Element::C
        && graph
            .neighbors(atom)
            .iter()
            .all(|&(nb, _)| !graph.atoms()[nb].element.is_hetero())
    {
        kinds.push(PharmacophoreKind::Hydrophobe);
    }
    kinds
}

/// Color points: per-atom features in atom order, then aromatic ring centroids.
pub fn color_features(conf: &Conformer, graph: &MolGraph) -> Vec<PharmacophorePoint> {
    let mut out = Vec::new();
    for (i, &c) in conf.coords.iter().enumerate() {
        for kind in atom_kinds(graph, i) {
            out.push(PharmacophorePoint::new(kind, c));
        }
    }
    for ring in graph.aromatic_rings() {
        let sum: Point = ring.atoms.iter().map(|&a| conf.coords[a]).sum();
        out.push(PharmacophorePoint::new(
            PharmacophoreKind::AromaticRing,
            sum / ring.atoms.len() as f64,
        ));
    }
    out
}

pub fn gaussianize(conf: &Conformer, graph: &MolGraph) -> (Vec<GaussianAtom>, Vec<PharmacophorePoint>) {
    (shape_gaussians(conf, graph), color_features(conf, graph))
}

/// Fills `features` of every conformer in the set.
pub fn assign_features(set: &mut ConformerSet) {
    for conf in &mut set.conformers {
        conf.features = color_features(conf, &set.graph);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conform::generate_conformers;
    use crate::molio::parse_smiles;

    fn typed(smiles: &str) -> (Vec<GaussianAtom>, Vec<PharmacophorePoint>) {
        let g = parse_smiles(smiles).unwrap();
        let set = generate_conformers(&g, 1, 0).unwrap();
        gaussianize(&set.conformers[0], &g)
    }

    fn count(points: &[PharmacophorePoint], kind: PharmacophoreKind) -> usize {
        points.iter().filter(|p| p.kind == kind).count()
    }

    #[test]
    fn methane() {
        let (shape, color) = typed("C");
        assert_eq!(shape.len(), 1);
        let expected = GaussianAtom::new(Point::zeros(), 1.70);
        assert_eq!(shape[0], expected);
        assert_eq!(color.len(), 1);
        assert_eq!(color[0].kind, PharmacophoreKind::Hydrophobe);
    }

    #[test]
    fn benzene() {
        let (shape, color) = typed("c1ccccc1");
        assert_eq!(shape.len(), 6);
        assert_eq!(count(&color, PharmacophoreKind::Hydrophobe), 6);
        assert_eq!(count(&color, PharmacophoreKind::AromaticRing), 1);
        assert_eq!(color.len(), 7);
        let ring = color.last().unwrap();
        let centroid: Point = shape.iter().map(|g| g.center).sum::<Point>() / 6.0;
        assert!((ring.center - centroid).norm() < 1e-12);
    }

    #[test]
    fn water_is_donor_and_acceptor() {
        let (shape, color) = typed("O");
        assert_eq!(shape.len(), 1);
        assert_eq!(color.len(), 2);
        assert_eq!(color[0].kind, PharmacophoreKind::Donor);
        assert_eq!(color[1].kind, PharmacophoreKind::Acceptor);
        assert_eq!(color[0].center, color[1].center);
    }

    #[test]
    fn nitrogen_rules() {
        let (_, c) = typed("c1ccncc1");
        assert_eq!(count(&c, PharmacophoreKind::Acceptor), 1);
        assert_eq!(count(&c, PharmacophoreKind::Donor), 0);
        let (_, c) = typed("c1cc[nH]c1");
        assert_eq!(count(&c, PharmacophoreKind::Acceptor), 0);
        assert_eq!(count(&c, PharmacophoreKind::Donor), 1);
        let (_, c) = typed("C[NH3+]");
        assert_eq!(count(&c, PharmacophoreKind::Cation), 1);
        assert_eq!(count(&c, PharmacophoreKind::Acceptor), 0);
        assert_eq!(count(&c, PharmacophoreKind::Donor), 1);
        let (_, c) = typed("CC(=O)[O-]");
        assert_eq!(count(&c, PharmacophoreKind::Anion), 1);
        assert_eq!(count(&c, PharmacophoreKind::Acceptor), 2);
        // the carboxyl carbon has O neighbors
        assert_eq!(count(&c, PharmacophoreKind::Hydrophobe), 1);
    }
}
