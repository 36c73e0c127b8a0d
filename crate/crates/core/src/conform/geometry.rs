use crate::molio::{BondOrder, Element, MolGraph};

/// Ideal bond length in Å.
///
/// | bond | single | double | triple | aromatic |
/// |------|--------|--------|--------|----------|
/// | C–C  | 1.54   | 1.34   | 1.20   | 1.39     |
/// | C–N  | 1.47   | 1.28   | 1.16   | 1.34     |
/// | C–O  | 1.43   | 1.21   |        | 1.36     |
/// | C–S  | 1.82   | 1.60   |        | 1.71     |
/// | C–P  | 1.84   | 1.67   |        | 1.71     |
/// | C–B  | 1.56   |        |        | 1.45     |
/// | C–F / Cl / Br / I | 1.35 / 1.77 / 1.94 / 2.14 | | | |
/// | N–N  | 1.45   | 1.25   | 1.10   | 1.35     |
/// | N–O  | 1.40   | 1.21   |        | 1.30     |
/// | N–S  | 1.68   | 1.54   |        | 1.62     |
/// | O–O  | 1.48   |        |        |          |
/// | O–S  | 1.58   | 1.43   |        |          |
/// | O–P  | 1.60   | 1.48   |        |          |
/// | S–S  | 2.05   |        |        |          |
///
/// Other pairs use the sum of single-bond covalent radii, shortened by 0.20
/// (double), 0.34 (triple) or 0.12 Å (aromatic).
pub fn ideal_bond_length(a: Element, b: Element, order: BondOrder) -> f64 {
    use BondOrder::*;
    use Element::*;
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    let tabulated = match (x, y, order) {
        (C, C, Single) => Some(1.54),
        (C, C, Double) => Some(1.34),
        (C, C, Triple) => Some(1.20),
        (C, C, Aromatic) => Some(1.39),
        (C, N, Single) => Some(1.47),
        (C, N, Double) => Some(1.28),
        (C, N, Triple) => Some(1.16),
        (C, N, Aromatic) => Some(1.34),
        (C, O, Single) => Some(1.43),
        (C, O, Double) => Some(1.21),
        (C, O, Aromatic) => Some(1.36),
        (C, S, Single) => Some(1.82),
        (C, S, Double) => Some(1.60),
        (C, S, Aromatic) => Some(1.71),
        (C, P, Single) => Some(1.84),
        (C, P, Double) => Some(1.67),
        (C, P, Aromatic) => Some(1.71),
        (B, C, Single) => Some(1.56),
        (B, C, Aromatic) => Some(1.45),
        (C, F, Single) => Some(1.35),
        (C, Cl, Single) => Some(1.77),
        (C, Br, Single) => Some(1.94),
        (C, I, Single) => Some(2.14),
        (N, N, Single) => Some(1.45),
        (N, N, Double) => Some(1.25),
        (N, N, Triple) => Some(1.10),
        (N, N, Aromatic) => Some(1.35),
        (N, O, Single) => Some(1.40),
        (N, O, Double) => Some(1.21),
        (N, O, Aromatic) => Some(1.30),
        (N, S, Single) => Some(1.68),
        (N, S, Double) => Some(1.54),
        (N, S, Aromatic) => Some(1.62),
        (O, O, Single) => Some(1.48),
        (O, S, Single) => Some(1.58),
        (O, S, Double) => Some(1.43),
        (O, P, Single) => Some(1.60),
        (O, P, Double) => Some(1.48),
        (S, S, Single) => Some(2.05),
        _ => None,
    };
    tabulated.unwrap_or_else(|| {
        let shorten = match order {
            Single => 0.0,
            Double => 0.20,
            Triple => 0.34,
            Aromatic => 0.12,
        };
        a.covalent_radius() + b.covalent_radius() - shorten
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hybridization {
    Sp,
    Sp2,
    Sp3,
}

impl Hybridization {
    /// Ideal bond angle in radians.
    pub fn angle(self) -> f64 {
        match self {
            Hybridization::Sp => std::f64::consts::PI,
            Hybridization::Sp2 => 120f64.to_radians(),
            Hybridization::Sp3 => 109.5f64.to_radians(),
        }
    }

    /// Number of bond directions around the atom.
    pub fn slots(self) -> usize {
        match self {
            Hybridization::Sp => 2,
            Hybridization::Sp2 => 3,
            Hybridization::Sp3 => 4,
        }
    }

    /// From bond orders: a triple bond or two double bonds on a 2-coordinate
    /// atom is sp; any double or aromatic bond is sp2 while at most three
    /// neighbors; everything else sp3.
    pub fn of(graph: &MolGraph, atom: usize) -> Hybridization {
        let mut doubles = 0;
        let mut triples = 0;
        let mut aromatic = graph.atoms()[atom].aromatic;
        for &(_, b) in graph.neighbors(atom) {
            match graph.bonds()[b].order {
                BondOrder::Double => doubles += 1,
                BondOrder::Triple => triples += 1,
                BondOrder::Aromatic => aromatic = true,
                BondOrder::Single => {}
            }
        }
        let degree = graph.neighbors(atom).len();
        if (triples > 0 || doubles >= 2) && degree <= 2 {
            Hybridization::Sp
        } else if (doubles > 0 || aromatic || triples > 0) && degree <= 3 {
            Hybridization::Sp2
        } else {
            Hybridization::Sp3
        }
    }
}
