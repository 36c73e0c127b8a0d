use nalgebra::{Matrix3, SymmetricEigen};

use super::{Conformer, Point};

const DEGENERATE_EPS: f64 = 1e-9;

/// Centroid plus principal axes of the (unweighted) gyration tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalFrame {
    pub centroid: Point,
    /// Columns are the unit principal axes, largest eigenvalue first.
    pub axes: Matrix3<f64>,
    /// Gyration-tensor eigenvalues, descending.
    pub eigenvalues: [f64; 3],
    /// All eigenvalues coincide within 1e-9; `axes` is then the identity.
    pub degenerate: bool,
}

impl PrincipalFrame {
    /// Maps lab coordinates into the frame: `axesᵀ (x − centroid)`.
    pub fn to_local(&self, p: &Point) -> Point {
        self.axes.transpose() * (p - self.centroid)
    }
}

pub fn centroid(points: &[Point]) -> Point {
    let sum: Point = points.iter().sum();
    sum / points.len() as f64
}

fn gyration_tensor(points: &[Point], c: &Point) -> Matrix3<f64> {
    let mut s = Matrix3::zeros();
    for p in points {
        let d = p - c;
        s += d * d.transpose();
    }
    s / points.len() as f64
}

/// Sorted eigen decomposition, eigenvalues descending.
fn sorted_eigen(m: Matrix3<f64>) -> ([f64; 3], Matrix3<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.map(|k| eig.eigenvalues[k]);
    let vectors = Matrix3::from_columns(&order.map(|k| eig.eigenvectors.column(k).into_owned()));
    (values, vectors)
}

/// Principal frame of a conformer.
///
/// Each axis is oriented so its largest-magnitude component is positive; if
/// that leaves a left-handed frame the third axis is flipped, so `det = +1`.
///
/// # Panics
/// On an empty conformer.
pub fn principal_frame(conf: &Conformer) -> PrincipalFrame {
    frame_of_points(&conf.coords)
}

pub(crate) fn frame_of_points(points: &[Point]) -> PrincipalFrame {
    assert!(!points.is_empty(), "principal frame of an empty point set");
    let c = centroid(points);
    let (values, mut axes) = sorted_eigen(gyration_tensor(points, &c));
    if values[0] - values[2] <= DEGENERATE_EPS {
        return PrincipalFrame {
            centroid: c,
            axes: Matrix3::identity(),
            eigenvalues: values,
            degenerate: true,
        };
    }
    for k in 0..3 {
        let mut col = axes.column(k).into_owned();
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col = -col;
        }
        axes.set_column(k, &col);
    }
    if axes.determinant() < 0.0 {
        let flipped = -axes.column(2).into_owned();
        axes.set_column(2, &flipped);
    }
    PrincipalFrame {
        centroid: c,
        axes,
        eigenvalues: values,
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeDescriptors {
    /// `sqrt(mean |x − centroid|²)`, Å.
    pub radius_of_gyration: f64,
    /// Eigenvalues of the unit-mass inertia tensor, ascending (Å²).
    pub principal_moments: [f64; 3],
}

pub fn shape_descriptors(conf: &Conformer) -> ShapeDescriptors {
    let pts = &conf.coords;
    assert!(!pts.is_empty(), "descriptors of an empty conformer");
    let c = centroid(pts);
    let mut inertia = Matrix3::zeros();
    let mut sq = 0.0;
    for p in pts {
        let d = p - c;
        let r2 = d.norm_squared();
        sq += r2;
        inertia += Matrix3::identity() * r2 - d * d.transpose();
    }
    let (mut values, _) = sorted_eigen(inertia);
    values.reverse();
    ShapeDescriptors {
        radius_of_gyration: (sq / pts.len() as f64).sqrt(),
        principal_moments: values.map(|v| v.max(0.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn conf(points: &[[f64; 3]]) -> Conformer {
        Conformer::new(points.iter().map(|p| Point::new(p[0], p[1], p[2])).collect())
    }

    #[test]
    fn single_atom_frame() {
        let f = principal_frame(&conf(&[[1.0, 2.0, 3.0]]));
        assert_eq!(f.centroid, Point::new(1.0, 2.0, 3.0));
        assert_eq!(f.axes, Matrix3::identity());
        assert!(f.degenerate);
    }

    #[test]
    fn two_atoms_on_x() {
        let f = principal_frame(&conf(&[[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]));
        let first = f.axes.column(0);
        assert!((first - Vector3::x()).norm() < 1e-12);
        assert!((f.axes.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_cloud_frame_is_proper_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let pts: Vec<[f64; 3]> = (0..12)
                .map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0)])
                .collect();
            let c = conf(&pts);
            let f = principal_frame(&c);
            let should_be_identity = f.axes.transpose() * f.axes;
            assert!((should_be_identity - Matrix3::identity()).abs().max() < 1e-12);
            assert!((f.axes.determinant() - 1.0).abs() < 1e-12);
            // reconstruction of the gyration tensor
            let diag = Matrix3::from_diagonal(&Vector3::from(f.eigenvalues));
            let rebuilt = f.axes * diag * f.axes.transpose();
            let s = gyration_tensor(&c.coords, &f.centroid);
            assert!((rebuilt - s).abs().max() < 1e-9);
        }
    }

    #[test]
    fn descriptor_cases() {
        let d = shape_descriptors(&conf(&[[0.0, 0.0, 0.0]]));
        assert_eq!(d.radius_of_gyration, 0.0);
        assert_eq!(d.principal_moments, [0.0, 0.0, 0.0]);
        let d = shape_descriptors(&conf(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]));
        assert!((d.radius_of_gyration - 1.0).abs() < 1e-15);
        assert!(d.principal_moments[0].abs() < 1e-12);
        assert!((d.principal_moments[1] - 2.0).abs() < 1e-12);
        assert!((d.principal_moments[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn descriptors_rigid_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<[f64; 3]> = (0..15)
            .map(|_| [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)])
            .collect();
        let c = conf(&pts);
        let d0 = shape_descriptors(&c);
        for _ in 0..10 {
            let axis = Vector3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            let rot = Rotation3::new(axis * 6.0).into_inner();
            let t = Point::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), 3.0);
            let d1 = shape_descriptors(&c.transformed(&rot, &t));
            assert!((d1.radius_of_gyration - d0.radius_of_gyration).abs() < 1e-9);
            for k in 0..3 {
                assert!((d1.principal_moments[k] - d0.principal_moments[k]).abs() < 1e-9);
            }
        }
    }
}
