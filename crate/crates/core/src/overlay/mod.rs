//! First-order Gaussian shape and pharmacophore ("color") overlap, rigid
//! overlay optimization and best-over-conformers scoring.

mod optimize;
mod typing;
mod volume;

pub use optimize::{best_pair_score, optimize_overlay, OverlayOptions};
pub use typing::{assign_features, atom_kinds, color_features, gaussianize, shape_gaussians};
pub use volume::{
    color_overlap, color_tanimoto, overlap_value_and_gradient, overlap_volume, overlap_volume_raw, rotation_from_raw,
    shape_tanimoto,
};

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::conform::{principal_frame, ConformerSet, Point};

/// Gaussian amplitude used for every shape atom and color point.
pub const GAUSSIAN_WEIGHT: f64 = 2.7;
/// Radius of every pharmacophore Gaussian, Å.
pub const COLOR_SIGMA: f64 = 1.0;

/// Exponent giving a Gaussian of amplitude `p` the volume of a sphere of radius `sigma`.
pub fn gaussian_alpha(sigma: f64, p: f64) -> f64 {
    std::f64::consts::PI * (3.0 * p / (4.0 * std::f64::consts::PI)).powf(2.0 / 3.0) / (sigma * sigma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianAtom {
    pub center: Point,
    pub alpha: f64,
    pub weight: f64,
}

impl GaussianAtom {
    pub fn new(center: Point, sigma: f64) -> Self {
        GaussianAtom {
            center,
            alpha: gaussian_alpha(sigma, GAUSSIAN_WEIGHT),
            weight: GAUSSIAN_WEIGHT,
        }
    }

    /// `p (π/α)^{3/2}`
    pub fn self_volume(&self) -> f64 {
        self.weight * (std::f64::consts::PI / self.alpha).powf(1.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PharmacophoreKind {
    Donor,
    Acceptor,
    Cation,
    Anion,
    Hydrophobe,
    AromaticRing,
}

impl PharmacophoreKind {
    pub const ALL: [PharmacophoreKind; 6] = [
        PharmacophoreKind::Donor,
        PharmacophoreKind::Acceptor,
        PharmacophoreKind::Cation,
        PharmacophoreKind::Anion,
        PharmacophoreKind::Hydrophobe,
        PharmacophoreKind::AromaticRing,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct PharmacophorePoint {
    pub kind: PharmacophoreKind,
    pub center: Point,
    pub alpha: f64,
    pub weight: f64,
}

impl PharmacophorePoint {
    pub fn new(kind: PharmacophoreKind, center: Point) -> Self {
        PharmacophorePoint {
            kind,
            center,
            alpha: gaussian_alpha(COLOR_SIGMA, GAUSSIAN_WEIGHT),
            weight: GAUSSIAN_WEIGHT,
        }
    }

    pub(crate) fn as_gaussian(&self) -> GaussianAtom {
        GaussianAtom {
            center: self.center,
            alpha: self.alpha,
            weight: self.weight,
        }
    }
}

/// `x -> rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform { rotation, translation }
    }

    /// Rotation matrix from the quaternion polynomial; exactly `I` for the identity.
    pub fn matrix(&self) -> Matrix3<f64> {
        let q = self.rotation.quaternion();
        rotation_from_raw(&[q.w, q.i, q.j, q.k])
    }

    pub fn apply(&self, p: &Point) -> Point {
        self.matrix() * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        RigidTransform {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Result of overlaying B onto A: `transform` maps B's coordinates into A's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayResult {
    pub shape_tanimoto: f64,
    pub color_tanimoto: f64,
    pub transform: RigidTransform,
    pub conformer_pair: (usize, usize),
    /// Number of `optimize_overlay` runs behind this result.
    pub evaluations: usize,
}

/// A conformer ready for overlay: Gaussians, color points, self-overlaps and
/// the principal frame used for starting poses.
#[derive(Debug, Clone)]
pub struct OverlayMolecule {
    pub shape: Vec<GaussianAtom>,
    pub color: Vec<PharmacophorePoint>,
    pub self_shape: f64,
    pub self_color: f64,
    pub(crate) frame_rotation: Matrix3<f64>,
    pub(crate) frame_centroid: Point,
}

impl OverlayMolecule {
    pub fn new(shape: Vec<GaussianAtom>, color: Vec<PharmacophorePoint>) -> Self {
        let centers: Vec<Point> = shape.iter().map(|g| g.center).collect();
        let frame = principal_frame(&crate::conform::Conformer::new(centers));
        let id = RigidTransform::identity();
        let self_shape = overlap_volume(&shape, &shape, &id);
        let self_color = color_overlap(&color, &color, &id);
        OverlayMolecule {
            shape,
            color,
            self_shape,
            self_color,
            frame_rotation: frame.axes,
            frame_centroid: frame.centroid,
        }
    }

    pub fn from_conformer(conf: &crate::conform::Conformer, graph: &crate::molio::MolGraph) -> Self {
        let (shape, color) = gaussianize(conf, graph);
        Self::new(shape, color)
    }

    /// One prepared molecule per conformer of the set.
    pub fn from_set(set: &ConformerSet) -> Vec<Self> {
        set.conformers
            .iter()
            .map(|c| Self::from_conformer(c, &set.graph))
            .collect()
    }
}
