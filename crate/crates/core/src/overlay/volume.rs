use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use super::{GaussianAtom, PharmacophorePoint, RigidTransform};
use crate::conform::Point;

/// Rotation matrix of the (not necessarily unit) quaternion `[w, x, y, z]`,
/// as the homogeneous quadratic polynomial. Orthogonal only for unit input.
pub fn rotation_from_raw(q: &[f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = *q;
    Matrix3::new(
        w * w + x * x - y * y - z * z,
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        w * w - x * x + y * y - z * z,
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        w * w - x * x - y * y + z * z,
    )
}

/// `∂R/∂q_k` for k = w, x, y, z.
fn rotation_partials(q: &[f64; 4]) -> [Matrix3<f64>; 4] {
    let [w, x, y, z] = *q;
    [
        Matrix3::new(w, -z, y, z, w, -x, -y, x, w) * 2.0,
        Matrix3::new(x, y, z, y, -x, -w, z, w, -x) * 2.0,
        Matrix3::new(-y, x, w, x, y, z, -w, z, -y) * 2.0,
        Matrix3::new(-z, -w, x, w, -z, y, x, y, z) * 2.0,
    ]
}

/// Precomputed pair constants for a fixed (A, B) pair of Gaussian lists:
/// `c_ij = p_i p_j (π/(α_i+α_j))^{3/2}` and `k_ij = α_i α_j/(α_i+α_j)`.
pub(crate) struct OverlapKernel {
    a: Vec<Point>,
    b: Vec<Point>,
    c: Vec<f64>,
    k: Vec<f64>,
}

impl OverlapKernel {
    pub(crate) fn new(a: &[GaussianAtom], b: &[GaussianAtom]) -> Self {
        Self::with_filter(a, b, |_, _| true)
    }

    /// Only pairs `(i, j)` with `keep(i, j)` contribute.
    pub(crate) fn with_filter(a: &[GaussianAtom], b: &[GaussianAtom], keep: impl Fn(usize, usize) -> bool) -> Self {
        let mut c = Vec::with_capacity(a.len() * b.len());
        let mut k = Vec::with_capacity(a.len() * b.len());
        for (i, ga) in a.iter().enumerate() {
            for (j, gb) in b.iter().enumerate() {
                let s = ga.alpha + gb.alpha;
                if keep(i, j) {
                    c.push(ga.weight * gb.weight * (PI / s).powf(1.5));
                    k.push(ga.alpha * gb.alpha / s);
                } else {
                    c.push(0.0);
                    k.push(0.0);
                }
            }
        }
        OverlapKernel {
            a: a.iter().map(|g| g.center).collect(),
            b: b.iter().map(|g| g.center).collect(),
            c,
            k,
        }
    }

    pub(crate) fn value(&self, rot: &Matrix3<f64>, t: &Vector3<f64>) -> f64 {
        let nb = self.b.len();
        let mut v = 0.0;
        for (j, pb) in self.b.iter().enumerate() {
            let y = rot * pb + t;
            for (i, pa) in self.a.iter().enumerate() {
                let c = self.c[i * nb + j];
                if c != 0.0 {
                    v += c * (-self.k[i * nb + j] * (pa - y).norm_squared()).exp();
                }
            }
        }
        v
    }

    /// Value, gradient w.r.t. the moved B centers' rotation matrix (`Σ_j g_j b_jᵀ`)
    /// and w.r.t. translation.
    pub(crate) fn value_grad(&self, rot: &Matrix3<f64>, t: &Vector3<f64>) -> (f64, Matrix3<f64>, Vector3<f64>) {
        let nb = self.b.len();
        let mut v = 0.0;
        let mut g_rot = Matrix3::zeros();
        let mut g_t = Vector3::zeros();
        for (j, pb) in self.b.iter().enumerate() {
            let y = rot * pb + t;
            let mut gj = Vector3::zeros();
            for (i, pa) in self.a.iter().enumerate() {
                let c = self.c[i * nb + j];
                if c == 0.0 {
                    continue;
                }
                let k = self.k[i * nb + j];
                let d = y - pa;
                let e = c * (-k * d.norm_squared()).exp();
                v += e;
                gj -= d * (2.0 * k * e);
            }
            g_rot += gj * pb.transpose();
            g_t += gj;
        }
        (v, g_rot, g_t)
    }

    /// Value and gradient with respect to `[q_w, q_x, q_y, q_z, t_x, t_y, t_z]`
    /// with `R = rotation_from_raw(q)`.
    pub(crate) fn value_grad_raw(&self, q: &[f64; 4], t: &Vector3<f64>) -> (f64, [f64; 7]) {
        let (v, g_rot, g_t) = self.value_grad(&rotation_from_raw(q), t);
        let partials = rotation_partials(q);
        let mut g = [0.0; 7];
        for (k, p) in partials.iter().enumerate() {
            g[k] = g_rot.component_mul(p).sum();
        }
        g[4..].copy_from_slice(g_t.as_slice());
        (v, g)
    }
}

/// First-order overlap `Σ_ij c_ij exp(−k_ij d_ij²)` with B moved by `t`.
pub fn overlap_volume(a: &[GaussianAtom], b: &[GaussianAtom], t: &RigidTransform) -> f64 {
    OverlapKernel::new(a, b).value(&t.matrix(), &t.translation)
}

/// Overlap with B rotated by the raw quaternion polynomial `R(q)` and translated by `t`.
pub fn overlap_volume_raw(a: &[GaussianAtom], b: &[GaussianAtom], q: &[f64; 4], t: &Vector3<f64>) -> f64 {
    OverlapKernel::new(a, b).value(&rotation_from_raw(q), t)
}

/// Overlap and its analytic gradient with respect to `(q, t)`; see [`overlap_volume_raw`].
pub fn overlap_value_and_gradient(
    a: &[GaussianAtom],
    b: &[GaussianAtom],
    q: &[f64; 4],
    t: &Vector3<f64>,
) -> (f64, [f64; 7]) {
    OverlapKernel::new(a, b).value_grad_raw(q, t)
}

pub(crate) fn color_kernel(a: &[PharmacophorePoint], b: &[PharmacophorePoint]) -> OverlapKernel {
    let ga: Vec<GaussianAtom> = a.iter().map(|p| p.as_gaussian()).collect();
    let gb: Vec<GaussianAtom> = b.iter().map(|p| p.as_gaussian()).collect();
    OverlapKernel::with_filter(&ga, &gb, |i, j| a[i].kind == b[j].kind)
}

/// Overlap summed over same-kind point pairs only.
pub fn color_overlap(a: &[PharmacophorePoint], b: &[PharmacophorePoint], t: &RigidTransform) -> f64 {
    color_kernel(a, b).value(&t.matrix(), &t.translation)
}

pub(crate) fn tanimoto(vab: f64, vaa: f64, vbb: f64) -> f64 {
    let denom = vaa + vbb - vab;
    if denom <= 0.0 {
        return if vab > 0.0 { 1.0 } else { 0.0 };
    }
    (vab / denom).clamp(0.0, 1.0)
}

/// `V_AB / (V_AA + V_BB − V_AB)` with B moved by `t`.
pub fn shape_tanimoto(a: &[GaussianAtom], b: &[GaussianAtom], t: &RigidTransform) -> f64 {
    let id = RigidTransform::identity();
    tanimoto(overlap_volume(a, b, t), overlap_volume(a, a, &id), overlap_volume(b, b, &id))
}

/// Color Tanimoto; 1 when neither side has color points, 0 when only one does.
pub fn color_tanimoto(a: &[PharmacophorePoint], b: &[PharmacophorePoint], t: &RigidTransform) -> f64 {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let id = RigidTransform::identity();
            tanimoto(color_overlap(a, b, t), color_overlap(a, a, &id), color_overlap(b, b, &id))
        }
    }
}
