//! All-by-all pair matrix of shape/color Tanimoto scores: indexing, parallel
//! generation, the MCLS binary format, CSV export and dataset splits.

mod build;
mod format;
mod split;
mod toy;

pub use build::{build_matrix, BuildReport};
pub use format::{load_matrix, matrix_from_bytes, matrix_to_bytes, save_matrix, write_csv, FORMAT_VERSION};
pub use split::{split_dataset, SplitSpec};
pub use toy::toy_molecules;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checksum mismatch (file truncated or corrupted)")]
    ChecksumMismatch,
    #[error("not an MCLS file")]
    BadMagic,
    #[error("unsupported format version {0}")]
    VersionUnsupported(u32),
    #[error("malformed matrix file: {0}")]
    Format(String),
    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),
    #[error("need at least 2 molecules, got {0}")]
    TooFewMolecules(usize),
}

/// `n(n−1)/2`, exact.
pub fn pair_count(n: u64) -> u64 {
    let n = n as u128;
    (n * n.saturating_sub(1) / 2) as u64
}

/// Linear slot of the unordered pair `{i, j}`, `i ≠ j`, in row-major upper-triangular order.
pub fn pair_index(i: usize, j: usize, n: usize) -> usize {
    assert!(i != j && i < n && j < n, "pair ({i}, {j}) out of range for n = {n}");
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Inverse of [`pair_index`]: returns `(i, j)` with `i < j`.
pub fn pair_from_index(idx: usize, n: usize) -> (usize, usize) {
    assert!(idx < pair_count(n as u64) as usize, "pair index {idx} out of range for n = {n}");
    // row i starts at i·n − i(i+1)/2; solve approximately then fix up
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0).powi(2) - 8.0 * idx as f64;
    let mut i = ((2.0 * nf - 1.0 - disc.max(0.0).sqrt()) / 2.0).floor().max(0.0) as usize;
    let row_start = |i: usize| i * n - i * (i + 1) / 2;
    while i > 0 && row_start(i) > idx {
        i -= 1;
    }
    while i + 1 < n && row_start(i + 1) <= idx {
        i += 1;
    }
    (i, idx - row_start(i) + i + 1)
}

/// Settings and provenance stored with a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub generator_version: String,
    pub seed: u64,
    pub random_starts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub conformer_counts: Vec<usize>,
    pub failed_pairs: usize,
}

impl Default for MatrixMeta {
    fn default() -> Self {
        MatrixMeta {
            generator_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: 0,
            random_starts: 0,
            max_iterations: 200,
            tolerance: 1e-6,
            conformer_counts: Vec::new(),
            failed_pairs: 0,
        }
    }
}

/// Symmetric score matrix stored as its strict upper triangle; the diagonal is 1.
/// Failed pairs hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    pub names: Vec<String>,
    pub shape: Vec<f32>,
    pub color: Vec<f32>,
    pub meta: MatrixMeta,
}

impl PairMatrix {
    pub fn new(names: Vec<String>, shape: Vec<f32>, color: Vec<f32>, meta: MatrixMeta) -> Result<Self, DataError> {
        let p = pair_count(names.len() as u64) as usize;
        if shape.len() != p || color.len() != p {
            return Err(DataError::Format(format!(
                "expected {p} scores per channel, got {} and {}",
                shape.len(),
                color.len()
            )));
        }
        Ok(PairMatrix {
            names,
            shape,
            color,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn shape_at(&self, i: usize, j: usize) -> f32 {
        if i == j {
            1.0
        } else {
            self.shape[pair_index(i, j, self.n())]
        }
    }

    pub fn color_at(&self, i: usize, j: usize) -> f32 {
        if i == j {
            1.0
        } else {
            self.color[pair_index(i, j, self.n())]
        }
    }

    /// Pairs holding the NaN sentinel in either channel.
    pub fn nan_pairs(&self) -> usize {
        self.shape
            .iter()
            .zip(&self.color)
            .filter(|(s, c)| s.is_nan() || c.is_nan())
            .count()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}
