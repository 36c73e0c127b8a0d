use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DataError;

/// Molecule-level partition; each index list is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn role(&self, name: &str) -> Option<&[usize]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// Seeded shuffle of `0..n`, then partition.
///
/// Sizes are `floor(f·n)`; the leftover indices go one each to the parts with
/// the largest fractional remainders (earlier part first on ties).
pub fn split_dataset(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<SplitSpec, DataError> {
    let f = [fractions.0, fractions.1, fractions.2];
    if f.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(DataError::InvalidFractions(format!("{f:?} must be finite and non-negative")));
    }
    if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(DataError::InvalidFractions(format!("{f:?} must sum to 1")));
    }
    let exact = f.map(|x| x * n as f64);
    // the small epsilon keeps e.g. 0.7·10 = 6.9999… from flooring to 6
    let mut sizes = exact.map(|x| (x + 1e-9).floor() as usize);
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - sizes[a] as f64;
        let rb = exact[b] - sizes[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if f[k] > 0.0 {
            sizes[k] += 1;
            left -= 1;
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts = [Vec::new(), Vec::new(), Vec::new()];
    let mut at = 0;
    for (k, part) in parts.iter_mut().enumerate() {
        *part = idx[at..at + sizes[k]].to_vec();
        part.sort_unstable();
        at += sizes[k];
    }
    let [train, val, test] = parts;
    Ok(SplitSpec { train, val, test, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        let s = split_dataset(10, (1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(s.train, (0..10).collect::<Vec<_>>());
        assert!(s.val.is_empty() && s.test.is_empty());
        let s = split_dataset(10, (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
        let s = split_dataset(500, (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (400, 50, 50));
        let s = split_dataset(7, (0.5, 0.25, 0.25), 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (3, 2, 2));
    }

    #[test]
    fn disjoint_cover_and_deterministic() {
        let a = split_dataset(101, (0.6, 0.2, 0.2), 9).unwrap();
        let b = split_dataset(101, (0.6, 0.2, 0.2), 9).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<_> = a.train.iter().chain(&a.val).chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
        assert_ne!(a, split_dataset(101, (0.6, 0.2, 0.2), 10).unwrap());
    }

    #[test]
    fn bad_fractions() {
        assert!(split_dataset(10, (0.5, 0.5, 0.5), 0).is_err());
        assert!(split_dataset(10, (1.2, -0.1, -0.1), 0).is_err());
        assert!(split_dataset(10, (f64::NAN, 0.5, 0.5), 0).is_err());
    }
}
