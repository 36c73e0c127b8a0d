use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::datagen::PairMatrix;
use crate::model::{tanimoto_kernel, Embedding};
use crate::molio::{tanimoto_2d, BitFingerprint};

/// Running co-moments of (prediction, target) pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairStats {
    n: u64,
    mean_p: f64,
    mean_t: f64,
    m2_p: f64,
    m2_t: f64,
    c_pt: f64,
    abs_err: f64,
    sq_err: f64,
}

impl PairStats {
    pub fn push(&mut self, pred: f64, target: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dp = pred - self.mean_p;
        let dt = target - self.mean_t;
        self.mean_p += dp / n;
        self.mean_t += dt / n;
        self.m2_p += dp * (pred - self.mean_p);
        self.m2_t += dt * (target - self.mean_t);
        self.c_pt += dp * (target - self.mean_t);
        self.abs_err += (pred - target).abs();
        self.sq_err += (pred - target) * (pred - target);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, o: &PairStats) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.n as f64, o.n as f64);
        let n = na + nb;
        let dp = o.mean_p - self.mean_p;
        let dt = o.mean_t - self.mean_t;
        self.m2_p += o.m2_p + dp * dp * na * nb / n;
        self.m2_t += o.m2_t + dt * dt * na * nb / n;
        self.c_pt += o.c_pt + dp * dt * na * nb / n;
        self.mean_p += dp * nb / n;
        self.mean_t += dt * nb / n;
        self.abs_err += o.abs_err;
        self.sq_err += o.sq_err;
        self.n += o.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn metrics(&self) -> Metrics {
        let mae = if self.n == 0 { f64::NAN } else { self.abs_err / self.n as f64 };
        let degenerate = self.n < 2 || self.m2_p == 0.0 || self.m2_t == 0.0;
        let pearson_r = if degenerate {
            f64::NAN
        } else {
            (self.c_pt / (self.m2_p * self.m2_t).sqrt()).clamp(-1.0, 1.0)
        };
        let r_squared = if self.n < 2 || self.m2_t == 0.0 {
            f64::NAN
        } else {
            1.0 - self.sq_err / self.m2_t
        };
        Metrics {
            pearson_r,
            r_squared,
            mae,
            pairs: self.n,
            zero_variance: degenerate,
        }
    }
}

/// Pearson r, coefficient of determination and MAE of predictions vs targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(rename = "r")]
    pub pearson_r: f64,
    #[serde(rename = "r2")]
    pub r_squared: f64,
    pub mae: f64,
    pub pairs: u64,
    /// Set when r is undefined (constant predictions or targets, or < 2 pairs).
    pub zero_variance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub shape: Metrics,
    pub color: Metrics,
}

/// Streams every unordered pair `i < j` of `indices` with a finite target
/// through `predict`. Rows are sharded across `workers` threads; per-row
/// accumulators are merged in row order, so the result does not depend on
/// the worker count.
pub fn score_pairs<F>(matrix: &PairMatrix, indices: &[usize], workers: usize, predict: F) -> Result<EvalReport, TrainError>
where
    F: Fn(usize, usize) -> (f64, f64) + Sync,
{
    if indices.len() < 2 {
        return Err(TrainError::TooFewIndices(indices.len()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= matrix.n()) {
        return Err(TrainError::ShapeMismatch(format!("index {bad} outside a {}-molecule matrix", matrix.n())));
    }
    let m = indices.len();
    let row = |a: usize| {
        let mut s = PairStats::default();
        let mut c = PairStats::default();
        let i = indices[a];
        for &j in &indices[a + 1..] {
            let (ts, tc) = (matrix.shape_at(i, j), matrix.color_at(i, j));
            if ts.is_nan() || tc.is_nan() {
                continue;
            }
            let (ps, pc) = predict(i, j);
            s.push(ps, ts as f64);
            c.push(pc, tc as f64);
        }
        (s, c)
    };
    let workers = workers.clamp(1, m);
    let rows: Vec<(PairStats, PairStats)> = if workers == 1 {
        (0..m).map(row).collect()
    } else {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<(PairStats, PairStats)>>> = (0..m).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let a = next.fetch_add(1, Ordering::Relaxed);
                    if a >= m {
                        break;
                    }
                    *slots[a].lock().unwrap() = Some(row(a));
                });
            }
        });
        slots
            .into_iter()
            .map(|s| s.into_inner().unwrap().expect("every row scored"))
            .collect()
    };
    let (mut s, mut c) = (PairStats::default(), PairStats::default());
    for (rs, rc) in &rows {
        s.merge(rs);
        c.merge(rc);
    }
    Ok(EvalReport {
        shape: s.metrics(),
        color: c.metrics(),
    })
}

/// Metrics of the kernel head over the within-split pairs. `embeddings` is
/// aligned with the matrix rows (only the rows in `indices` are read).
pub fn evaluate_embeddings(
    matrix: &PairMatrix,
    embeddings: &[Embedding],
    indices: &[usize],
    workers: usize,
) -> Result<EvalReport, TrainError> {
    if embeddings.len() != matrix.n() {
        return Err(TrainError::ShapeMismatch(format!(
            "{} embeddings for {} molecules",
            embeddings.len(),
            matrix.n()
        )));
    }
    let zs: Vec<Vec<f64>> = embeddings.iter().map(|e| e.z_shape.iter().map(|&x| x as f64).collect()).collect();
    let zc: Vec<Vec<f64>> = embeddings.iter().map(|e| e.z_color.iter().map(|&x| x as f64).collect()).collect();
    score_pairs(matrix, indices, workers, |i, j| {
        (tanimoto_kernel(&zs[i], &zs[j]), tanimoto_kernel(&zc[i], &zc[j]))
    })
}

/// 2D fingerprint Tanimoto used as the prediction for both channels.
pub fn null_baseline(
    matrix: &PairMatrix,
    fingerprints: &[BitFingerprint],
    indices: &[usize],
) -> Result<EvalReport, TrainError> {
    if fingerprints.len() != matrix.n() {
        return Err(TrainError::ShapeMismatch(format!(
            "{} fingerprints for {} molecules",
            fingerprints.len(),
            matrix.n()
        )));
    }
    let nbits = fingerprints.first().map(|f| f.nbits()).unwrap_or(0);
    if fingerprints.iter().any(|f| f.nbits() != nbits) {
        return Err(TrainError::ShapeMismatch("fingerprint lengths differ".into()));
    }
    score_pairs(matrix, indices, 1, |i, j| {
        let t = tanimoto_2d(&fingerprints[i], &fingerprints[j]).expect("lengths checked");
        (t, t)
    })
}

/// Ranks starting at 1; ties share their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut k = 0;
    while k < order.len() {
        let mut e = k;
        while e + 1 < order.len() && x[order[e + 1]] == x[order[k]] {
            e += 1;
        }
        let r = (k + e) as f64 / 2.0 + 1.0;
        for &o in &order[k..=e] {
            out[o] = r;
        }
        k = e + 1;
    }
    out
}

/// Spearman rank correlation; NaN when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman inputs differ in length");
    let (rx, ry) = (ranks(x), ranks(y));
    let mut s = PairStats::default();
    for (a, b) in rx.iter().zip(&ry) {
        s.push(*a, *b);
    }
    s.metrics().pearson_r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_constant() {
        let mut s = PairStats::default();
        for t in [0.1, 0.4, 0.35, 0.9] {
            s.push(t, t);
        }
        let m = s.metrics();
        assert_eq!((m.pearson_r, m.r_squared, m.mae), (1.0, 1.0, 0.0));
        let targets = [0.1, 0.4, 0.35, 0.9];
        let mean = targets.iter().sum::<f64>() / 4.0;
        let mut c = PairStats::default();
        targets.iter().for_each(|&t| c.push(mean, t));
        let m = c.metrics();
        assert!(m.r_squared.abs() < 1e-15);
        assert!(m.pearson_r.is_nan() && m.zero_variance);
    }

    #[test]
    fn offset_mae() {
        let mut s = PairStats::default();
        for t in [0.2, 0.5, 0.7] {
            s.push(t + 0.1, t);
        }
        let m = s.metrics();
        assert!((m.mae - 0.1).abs() < 1e-12);
        assert!((m.pearson_r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_pair_is_degenerate() {
        let mut s = PairStats::default();
        s.push(0.3, 0.4);
        let m = s.metrics();
        assert!(m.pearson_r.is_nan() && m.zero_variance);
    }

    #[test]
    fn spearman_ties_and_sign() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 25.0, 100.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }
}
