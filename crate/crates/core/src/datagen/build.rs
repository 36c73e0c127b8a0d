use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::time::Instant;

use super::{pair_count, pair_from_index, DataError, MatrixMeta, PairMatrix};
use crate::conform::ConformerSet;
use crate::overlay::{best_pair_score, OverlayMolecule, OverlayOptions};

/// Pairs claimed by a worker at a time.
const CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub pairs: usize,
    /// Total `optimize_overlay` runs, `Σ_pairs k_i·k_j`.
    pub overlay_calls: usize,
    pub failed_pairs: usize,
    pub seconds: f64,
}

impl BuildReport {
    pub fn pairs_per_second(&self) -> f64 {
        if self.seconds > 0.0 {
            self.pairs as f64 / self.seconds
        } else {
            f64::INFINITY
        }
    }
}

/// Scores every unordered molecule pair with [`best_pair_score`].
///
/// Workers pull chunks of pair indices from a shared counter and write into
/// disjoint slots, so the result does not depend on `workers`. Non-finite
/// scores become NaN sentinels and are counted in the report.
pub fn build_matrix(
    mols: &[ConformerSet],
    workers: usize,
    opts: &OverlayOptions,
) -> Result<(PairMatrix, BuildReport), DataError> {
    let n = mols.len();
    if n < 2 {
        return Err(DataError::TooFewMolecules(n));
    }
    let started = Instant::now();
    let prepared: Vec<Vec<OverlayMolecule>> = mols.iter().map(OverlayMolecule::from_set).collect();
    let total = pair_count(n as u64) as usize;
    let shape: Vec<AtomicU32> = (0..total).map(|_| AtomicU32::new(0)).collect();
    let color: Vec<AtomicU32> = (0..total).map(|_| AtomicU32::new(0)).collect();
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let calls = AtomicUsize::new(0);
    let failed = AtomicUsize::new(0);
    let workers = workers.max(1);

    let work = || loop {
        let begin = next.fetch_add(CHUNK, Ordering::Relaxed);
        if begin >= total {
            break;
        }
        let end = (begin + CHUNK).min(total);
        for idx in begin..end {
            let (i, j) = pair_from_index(idx, n);
            let r = best_pair_score(&prepared[i], &prepared[j], opts);
            calls.fetch_add(r.evaluations, Ordering::Relaxed);
            let (s, c) = if r.shape_tanimoto.is_finite() && r.color_tanimoto.is_finite() {
                (r.shape_tanimoto as f32, r.color_tanimoto as f32)
            } else {
                log::warn!("overlay of {} / {} failed; storing NaN", mols[i].name(), mols[j].name());
                failed.fetch_add(1, Ordering::Relaxed);
                (f32::NAN, f32::NAN)
            };
            shape[idx].store(s.to_bits(), Ordering::Relaxed);
            color[idx].store(c.to_bits(), Ordering::Relaxed);
        }
        let before = done.fetch_add(end - begin, Ordering::Relaxed);
        let after = before + end - begin;
        if after * 100 / total > before * 100 / total {
            let secs = started.elapsed().as_secs_f64();
            log::info!(
                "{}% of {total} pairs ({:.1} pairs/s)",
                after * 100 / total,
                after as f64 / secs.max(1e-9)
            );
        }
    };

    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }

    let unpack = |v: Vec<AtomicU32>| v.into_iter().map(|a| f32::from_bits(a.into_inner())).collect();
    let meta = MatrixMeta {
        seed: opts.seed,
        random_starts: opts.random_starts,
        max_iterations: opts.max_iterations,
        tolerance: opts.tolerance,
        conformer_counts: mols.iter().map(|m| m.len()).collect(),
        failed_pairs: failed.load(Ordering::Relaxed),
        ..MatrixMeta::default()
    };
    let matrix = PairMatrix::new(
        mols.iter().map(|m| m.name().to_string()).collect(),
        unpack(shape),
        unpack(color),
        meta,
    )?;
    let report = BuildReport {
        pairs: total,
        overlay_calls: calls.into_inner(),
        failed_pairs: failed.into_inner(),
        seconds: started.elapsed().as_secs_f64(),
    };
    log::info!(
        "scored {} pairs with {} overlays in {:.2}s ({:.1} pairs/s)",
        report.pairs,
        report.overlay_calls,
        report.seconds,
        report.pairs_per_second()
    );
    Ok((matrix, report))
}
