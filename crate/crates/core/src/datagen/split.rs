use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.64,
            valid: 0.16,
            test: 0.20,
        }
    }
}

/// Seeded permutation partitioned into train/valid/test index sets.
pub fn split_indices(
    n: usize,
    fractions: SplitFractions,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let f = [fractions.train, fractions.valid, fractions.test];
    if f.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::config("split.fractions", "must be non-negative and sum to 1"));
    }
    let n_train = (n as f64 * fractions.train).round() as usize;
    let n_valid = (n as f64 * fractions.valid).round() as usize;
    if n_train + n_valid > n {
        return Err(Error::config("split.fractions", format!("rounding overflows N = {n}")));
    }
    let n_test = n - n_train - n_valid;
    for (name, size) in [("train", n_train), ("valid", n_valid), ("test", n_test)] {
        if size == 0 {
            return Err(Error::Data(format!("{name} split is empty at N = {n}")));
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut RngStream::new(seed));
    let test = idx.split_off(n_train + n_valid);
    let valid = idx.split_off(n_train);
    Ok((idx, valid, test))
}

pub fn split(
    data: &Dataset,
    fractions: SplitFractions,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (a, b, c) = split_indices(data.len(), fractions, seed)?;
    Ok((data.subset(&a), data.subset(&b), data.subset(&c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_rows_default_sizes() {
        let (a, b, c) = split_indices(100, SplitFractions::default(), 1).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (64, 16, 20));
        let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_same_partition() {
        let s = SplitFractions::default();
        assert_eq!(split_indices(57, s, 8).unwrap(), split_indices(57, s, 8).unwrap());
        assert_ne!(split_indices(57, s, 8).unwrap(), split_indices(57, s, 9).unwrap());
    }

    #[test]
    fn empty_split_rejected() {
        assert!(split_indices(2, SplitFractions::default(), 0).is_err());
        let bad = SplitFractions { train: 0.5, valid: 0.5, test: 0.5 };
        assert!(split_indices(10, bad, 0).is_err());
    }
}
