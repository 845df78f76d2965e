//! Lloyd-Max scalar quantization of continuous predictors.
//!
//! The fit alternates two exact steps on the empirical sample: decision
//! boundaries move to the midpoints of adjacent reconstruction levels, and
//! each level moves to the mean of the values currently assigned to its cell.
//! Both steps are optimal for the other's current state, so the mean squared
//! quantization error never increases across iterations.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// A fitted scalar quantizer: strictly increasing reconstruction `levels`
/// and the `levels.len() - 1` decision `boundaries` between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    levels: Vec<f64>,
    boundaries: Vec<f64>,
}

/// Result of a Lloyd-Max fit, with the per-iteration distortion trace kept
/// for diagnostics and the monotonicity checks in the test suite.
#[derive(Debug, Clone)]
pub struct LloydMaxFit {
    pub quantizer: Quantizer,
    /// Final mean squared quantization error on the training values.
    pub distortion: f64,
    /// Distortion after each completed iteration (non-increasing).
    pub trace: Vec<f64>,
}

impl Quantizer {
    /// Quantizer with the given strictly increasing levels and midpoint
    /// boundaries. This is also how ordinal-discrete predictors are encoded:
    /// their levels are simply the sorted distinct training values.
    pub fn from_levels(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::EmptyInput("quantizer levels"));
        }
        if levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quantizer levels"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "levels must be strictly increasing",
            ));
        }
        let boundaries = midpoints(&levels);
        Ok(Quantizer { levels, boundaries })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Cell index of `x`: the cell whose boundaries bracket it, with a value
    /// exactly on a boundary going to the lower cell. Values beyond the
    /// outermost boundaries clamp to the first or last cell.
    pub fn encode(&self, x: f64) -> usize {
        self.boundaries.partition_point(|&b| b < x)
    }

    /// Reconstruction value of a cell.
    pub fn decode(&self, cell: usize) -> f64 {
        self.levels[cell]
    }

    /// Mean squared quantization error of this codebook on `values`.
    pub fn distortion(&self, values: &[f64]) -> f64 {
        if values.is_empty() {
            return 0.0;
        }
        let sum: f64 = values
            .iter()
            .map(|&v| {
                let d = v - self.levels[self.encode(v)];
                d * d
            })
            .sum();
        sum / values.len() as f64
    }

    /// Fit a `levels_count`-level quantizer to `values` by Lloyd-Max
    /// alternation, stopping when the distortion improves by less than `tol`
    /// or after `max_iters` iterations.
    ///
    /// Fails with [`Error::DegenerateCodebook`] when the sample has fewer
    /// distinct values than requested levels; callers typically retry with
    /// the distinct-value count.
    pub fn lloyd_max(
        values: &[f64],
        levels_count: usize,
        max_iters: usize,
        tol: f64,
    ) -> Result<LloydMaxFit> {
        if values.is_empty() {
            return Err(Error::EmptyInput("quantizer training values"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quantizer training values"));
        }
        if levels_count < 2 {
            return Err(Error::InvalidParameter("levels_count must be at least 2"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(math::cmp_f64);
        let mut unique = sorted.clone();
        unique.dedup();
        if unique.len() < levels_count {
            return Err(Error::DegenerateCodebook {
                distinct: unique.len(),
                requested: levels_count,
            });
        }

        // The alternation converges to a fixed point that depends on the
        // seed. The quantile seed handles the general case; for two levels
        // the globally optimal codebook is the centroid pair of the best
        // contiguous split of the sorted sample, which is itself a fixed
        // point, so seeding there guarantees the optimum. Keep whichever
        // converged run ends lower.
        let mut runs = vec![run_lloyd(
            &sorted,
            seed_levels(&sorted, &unique, levels_count),
            max_iters,
            tol,
        )];
        if levels_count == 2 {
            if let Some(seed) = best_split_seed(&sorted) {
                runs.push(run_lloyd(&sorted, seed, max_iters, tol));
            }
        }
        let best = runs
            .into_iter()
            .min_by(|a, b| crate::math::cmp_f64(&a.distortion, &b.distortion))
            .expect("at least one run");
        Ok(best)
    }
}

fn run_lloyd(sorted: &[f64], mut levels: Vec<f64>, max_iters: usize, tol: f64) -> LloydMaxFit {
    let levels_count = levels.len();
    let mut boundaries = midpoints(&levels);
    let mut trace = Vec::new();
    let mut prev = f64::INFINITY;
    for _ in 0..max_iters {
        // Assignment under the current boundaries, then centroid update.
        let (counts, sums) = assign(sorted, &boundaries);
        for i in 0..levels_count {
            if counts[i] > 0 {
                levels[i] = sums[i] / counts[i] as f64;
            } else {
                // Only interior cells can empty out; reseed at the middle
                // of the cell's boundary interval to keep levels ordered.
                levels[i] = 0.5 * (boundaries[i - 1] + boundaries[i]);
            }
        }
        debug_assert!(levels.windows(2).all(|w| w[0] < w[1]));
        boundaries = midpoints(&levels);
        let q = Quantizer {
            levels: levels.clone(),
            boundaries: boundaries.clone(),
        };
        let d = q.distortion(sorted);
        debug_assert!(d <= prev * (1.0 + 1e-12) + 1e-300);
        trace.push(d);
        // An exact fixed point can never change again, whatever tol is.
        if prev - d < tol || d >= prev {
            prev = d;
            break;
        }
        prev = d;
    }
    LloydMaxFit {
        distortion: prev,
        quantizer: Quantizer { levels, boundaries },
        trace,
    }
}

/// Centroid pair of the minimum-MSE contiguous split of the sorted sample,
/// or `None` when every split has equal cluster means.
fn best_split_seed(sorted: &[f64]) -> Option<Vec<f64>> {
    let n = sorted.len();
    let mut prefix = alloc::vec![0.0; n + 1];
    let mut prefix_sq = alloc::vec![0.0; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for split in 1..n {
        let (ls, rs) = (prefix[split], prefix[n] - prefix[split]);
        let (lq, rq) = (prefix_sq[split], prefix_sq[n] - prefix_sq[split]);
        let (lc, rc) = (split as f64, (n - split) as f64);
        let (lm, rm) = (ls / lc, rs / rc);
        if lm >= rm {
            continue;
        }
        let sse = (lq - ls * lm) + (rq - rs * rm);
        if best.as_ref().is_none_or(|(b, _)| sse < *b) {
            best = Some((sse, alloc::vec![lm, rm]));
        }
    }
    best.map(|(_, seed)| seed)
}

fn midpoints(levels: &[f64]) -> Vec<f64> {
    levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Per-cell counts and sums of `sorted` under `boundaries`.
fn assign(sorted: &[f64], boundaries: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let cells = boundaries.len() + 1;
    let mut counts = alloc::vec![0usize; cells];
    let mut sums = alloc::vec![0.0; cells];
    let mut cell = 0;
    for &v in sorted {
        while cell < boundaries.len() && v > boundaries[cell] {
            cell += 1;
        }
        counts[cell] += 1;
        sums[cell] += v;
    }
    (counts, sums)
}

/// Initial levels at the interpolated empirical quantiles of the sample;
/// when ties collapse those onto each other, fall back to quantiles of the
/// distinct values, which are strictly increasing by construction.
fn seed_levels(sorted: &[f64], unique: &[f64], levels_count: usize) -> Vec<f64> {
    let n = sorted.len();
    let mut seeds: Vec<f64> = (0..levels_count)
        .map(|j| {
            let p = (j as f64 + 0.5) / levels_count as f64;
            let h = p * (n - 1) as f64;
            let lo = h as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = h - lo as f64;
            sorted[lo] * (1.0 - frac) + sorted[hi] * frac
        })
        .collect();
    if seeds.windows(2).any(|w| w[0] >= w[1]) {
        let d = unique.len();
        seeds = (0..levels_count)
            .map(|j| unique[(j * d + d / 2) / levels_count])
            .collect();
    }
    seeds
}
