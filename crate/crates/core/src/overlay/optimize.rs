use nalgebra::{Matrix3, Quaternion, Rotation3, SMatrix, SVector, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::volume::{color_kernel, rotation_from_raw, tanimoto, OverlapKernel};
use super::{GaussianAtom, OverlayMolecule, OverlayResult, RigidTransform};
use crate::conform::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayOptions {
    /// Extra seeded random-rotation starts on top of the four inertial ones.
    pub random_starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop when an accepted step gains less than `tolerance · (V_AA + V_BB)/2`.
    pub tolerance: f64,
}

impl Default for OverlayOptions {
    fn default() -> Self {
        OverlayOptions {
            random_starts: 0,
            seed: 0,
            max_iterations: 200,
            tolerance: 1e-6,
        }
    }
}

/// Longest first step, Å (rotation steps measured as displacement at the rms radius).
const MAX_STEP: f64 = 0.5;
const MIN_STEP: f64 = 1e-10;
const ARMIJO: f64 = 1e-4;

fn to_local(shape: &[GaussianAtom], rot: &Matrix3<f64>, c: &Point) -> Vec<GaussianAtom> {
    let rt = rot.transpose();
    shape
        .iter()
        .map(|g| GaussianAtom {
            center: rt * (g.center - c),
            ..*g
        })
        .collect()
}

fn normalized(q: [f64; 4]) -> [f64; 4] {
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.map(|x| x / n)
}

/// `exp(ω) ⊗ q`: rotates the pose by the rotation vector `ω` applied on the left.
fn rotate_left(q: &[f64; 4], omega: &Vector3<f64>) -> [f64; 4] {
    let angle = omega.norm();
    let (s, c) = (0.5 * angle).sin_cos();
    let axis = if angle > 0.0 { omega / angle } else { Vector3::zeros() };
    let (w1, x1, y1, z1) = (c, s * axis.x, s * axis.y, s * axis.z);
    let [w2, x2, y2, z2] = *q;
    normalized([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])
}

/// Value and gradient in pose tangent coordinates `(r·ω, t)`, where `ω`
/// rotates the placed B about the origin and `r` is the rms radius.
fn tangent_value_grad(kernel: &OverlapKernel, q: &[f64; 4], t: &Vector3<f64>, r: f64) -> (f64, SVector<f64, 6>) {
    let rot = rotation_from_raw(q);
    let (v, g_rot, g_t) = kernel.value_grad(&rot, t);
    // Σ_j (R b_j) × g_j from M = Σ_j g_j (R b_j)ᵀ
    let m = g_rot * rot.transpose();
    let g_omega = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let mut g = SVector::<f64, 6>::zeros();
    g.fixed_rows_mut::<3>(0).copy_from(&(g_omega / r));
    g.fixed_rows_mut::<3>(3).copy_from(&g_t);
    (v, g)
}

/// Quasi-Newton (BFGS) ascent with Armijo backtracking from one start.
/// Returns the final (value, q, t).
fn ascend(kernel: &OverlapKernel, q0: [f64; 4], r: f64, opts: &OverlayOptions, tol: f64) -> (f64, [f64; 4], Vector3<f64>) {
    let mut q = q0;
    let mut t = Vector3::zeros();
    let (mut v, mut g) = tangent_value_grad(kernel, &q, &t, r);
    let mut h = SMatrix::<f64, 6, 6>::identity();
    let mut fresh = true;
    for _ in 0..opts.max_iterations {
        let mut p = h * g;
        let slope = g.dot(&p);
        if slope.is_nan() || slope <= 0.0 {
            if fresh {
                break;
            }
            h = SMatrix::identity();
            fresh = true;
            continue;
        }
        let len = p.norm();
        if len > MAX_STEP {
            p *= MAX_STEP / len;
        }
        let slope = g.dot(&p);
        let mut step = 1.0;
        let mut accepted = None;
        while step * p.norm() >= MIN_STEP {
            let s = p * step;
            let qn = rotate_left(&q, &(s.fixed_rows::<3>(0) / r));
            let tn = t + s.fixed_rows::<3>(3);
            let vn = kernel.value(&rotation_from_raw(&qn), &tn);
            if vn > v + ARMIJO * step * slope {
                accepted = Some((vn, qn, tn, s));
                break;
            }
            step *= 0.5;
        }
        let Some((vn, qn, tn, s)) = accepted else {
            if fresh {
                break;
            }
            h = SMatrix::identity();
            fresh = true;
            continue;
        };
        let gain = vn - v;
        q = qn;
        t = tn;
        let (v2, g2) = tangent_value_grad(kernel, &q, &t, r);
        // BFGS on f = −V: y = ∇f_new − ∇f_old
        let y = g - g2;
        let sy = s.dot(&y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let i = SMatrix::<f64, 6, 6>::identity();
            let left = i - s * y.transpose() * rho;
            h = left * h * left.transpose() + s * s.transpose() * rho;
            fresh = false;
        }
        v = v2;
        g = g2;
        if gain < tol {
            break;
        }
    }
    (v, q, t)
}

fn quat_from_matrix(m: &Matrix3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m))
}

/// Maximizes shape overlap of `b` onto `a` over rigid poses of `b`; the
/// returned transform maps `b` into `a`'s frame.
///
/// Both molecules are moved into their principal frames; ascent starts from
/// the identity and the 180° flips about each axis (plus optional random
/// rotations). Color is scored at the best shape pose.
///
/// The search always runs with the same molecule of the pair held fixed
/// (more atoms, then larger self-overlap), so swapping the arguments gives
/// the same scores and the inverse transform.
pub fn optimize_overlay(a: &OverlayMolecule, b: &OverlayMolecule, opts: &OverlayOptions) -> OverlayResult {
    if reference_key(b) > reference_key(a) {
        let mut r = optimize_directed(b, a, opts);
        r.transform = r.transform.inverse();
        r
    } else {
        optimize_directed(a, b, opts)
    }
}

fn reference_key(m: &OverlayMolecule) -> (usize, OrdF64, usize, OrdF64) {
    (m.shape.len(), OrdF64(m.self_shape), m.color.len(), OrdF64(m.self_color))
}

#[derive(PartialEq, PartialOrd)]
struct OrdF64(f64);

fn optimize_directed(a: &OverlayMolecule, b: &OverlayMolecule, opts: &OverlayOptions) -> OverlayResult {
    let a_loc = to_local(&a.shape, &a.frame_rotation, &a.frame_centroid);
    let b_loc = to_local(&b.shape, &b.frame_rotation, &b.frame_centroid);
    let kernel = OverlapKernel::new(&a_loc, &b_loc);
    let spread = |pts: &[GaussianAtom]| pts.iter().map(|g| g.center.norm_squared()).sum::<f64>() / pts.len().max(1) as f64;
    let r = (0.5 * (spread(&a_loc) + spread(&b_loc))).max(0.25).sqrt();
    let tol = opts.tolerance * 0.5 * (a.self_shape + b.self_shape);

    let mut starts: Vec<[f64; 4]> = vec![
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];
    if opts.random_starts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.random_starts {
            let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            starts.push(normalized(q));
        }
    }

    let mut best: Option<(f64, [f64; 4], Vector3<f64>)> = None;
    for q0 in starts {
        let res = ascend(&kernel, q0, r, opts, tol);
        if best.as_ref().is_none_or(|b| res.0 > b.0) {
            best = Some(res);
        }
    }
    let (v, q, t) = best.expect("at least one start");

    // lab pose: x -> Ra (R(q) Rbᵀ (x − cb) + t) + ca
    let qa = quat_from_matrix(&a.frame_rotation);
    let qb = quat_from_matrix(&b.frame_rotation);
    let ql = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
    let rotation = qa * ql * qb.inverse();
    let translation = a.frame_rotation * t + a.frame_centroid - rotation * b.frame_centroid;
    let transform = RigidTransform::new(rotation, translation);

    let shape_tanimoto = tanimoto(v, a.self_shape, b.self_shape);
    let color_tanimoto = match (a.color.is_empty(), b.color.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let vab = color_kernel(&a.color, &b.color).value(&transform.matrix(), &transform.translation);
            tanimoto(vab, a.self_color, b.self_color)
        }
    };
    OverlayResult {
        shape_tanimoto,
        color_tanimoto,
        transform,
        conformer_pair: (0, 0),
        evaluations: 1,
    }
}

/// Best overlay over all `k_A × k_B` conformer pairs; ties keep the lower indices.
pub fn best_pair_score(a: &[OverlayMolecule], b: &[OverlayMolecule], opts: &OverlayOptions) -> OverlayResult {
    assert!(!a.is_empty() && !b.is_empty(), "best_pair_score needs conformers on both sides");
    let mut best: Option<OverlayResult> = None;
    let mut calls = 0;
    for (i, ma) in a.iter().enumerate() {
        for (j, mb) in b.iter().enumerate() {
            let mut r = optimize_overlay(ma, mb, opts);
            calls += 1;
            r.conformer_pair = (i, j);
            if best.as_ref().is_none_or(|bst| r.shape_tanimoto > bst.shape_tanimoto) {
                best = Some(r);
            }
        }
    }
    let mut best = best.unwrap();
    best.evaluations = calls;
    best
}
