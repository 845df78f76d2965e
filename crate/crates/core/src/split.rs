//! Seeded, reproducible dataset partitions.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Shuffle `0..n` and cut it into a train/test index pair with
/// `floor(n * train_fraction)` training items. Deterministic in `seed`.
pub fn train_test_split(
    n: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter("train_fraction must be in (0, 1)"));
    }
    if n < 2 {
        return Err(Error::DatasetTooSmall { needed: 2, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::substream(seed, 0x5911).shuffle(&mut order);
    let mut n_train = (n as f64 * train_fraction) as usize;
    n_train = n_train.clamp(1, n - 1);
    let test = order.split_off(n_train);
    Ok((order, test))
}

/// Shuffle `0..n` and cut it into `k` folds of near-equal size, returning
/// `(train, validation)` index pairs. Folds are disjoint and exhaustive.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::InvalidParameter("fold count must be at least 2"));
    }
    if n < k {
        return Err(Error::DatasetTooSmall { needed: k, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::substream(seed, 0xf01d).shuffle(&mut order);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold in 0..k {
        let len = base + usize::from(fold < extra);
        let validation: Vec<usize> = order[start..start + len].to_vec();
        let train: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + len..])
            .copied()
            .collect();
        folds.push((train, validation));
        start += len;
    }
    Ok(folds)
}
