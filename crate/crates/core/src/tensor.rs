//! Aggregation of training pairs into the sparse weight / mean-response
//! tensors, and the per-mode empirical marginals.
//!
//! Repeated observations of the same grid cell collapse into one entry holding
//! the multiplicity and the running mean response. Fitting against the
//! aggregated tensor is equivalent to fitting the raw pairs: the two
//! objectives differ exactly by the within-cell response variance, which does
//! not depend on the model.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::CellIndex;
use crate::schema::FeatureSchema;

/// Raw training pairs: one `(cell, response)` entry per retained sample.
pub type SampleSet = Vec<(CellIndex, Vec<f64>)>;

/// Weight and mean response of one observed grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    /// Number of training samples that landed in this cell.
    pub weight: u64,
    /// Component-wise mean response of those samples (length K).
    pub mean: Vec<f64>,
}

/// COO-style sparse pairing of the weight tensor and mean-response tensor
/// over the discretized input grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseObservationTensor {
    shape: Vec<usize>,
    outputs: usize,
    entries: BTreeMap<CellIndex, CellStats>,
    total_weight: u64,
}

impl SparseObservationTensor {
    /// Aggregate `(cell, response)` samples over the grid described by
    /// `shape`. All responses must share one length and all indices must be
    /// in bounds.
    pub fn aggregate(
        shape: Vec<usize>,
        samples: &[(CellIndex, Vec<f64>)],
    ) -> Result<SparseObservationTensor> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("training samples"));
        }
        let outputs = samples[0].1.len();
        if outputs == 0 {
            return Err(Error::EmptyInput("response vector"));
        }
        let mut sums: BTreeMap<CellIndex, (u64, Vec<f64>)> = BTreeMap::new();
        for (idx, response) in samples {
            if idx.len() != shape.len() {
                return Err(Error::DimensionMismatch {
                    what: "cell index arity",
                    expected: shape.len(),
                    got: idx.len(),
                });
            }
            for (mode, (&i, &bound)) in idx.as_slice().iter().zip(&shape).enumerate() {
                if i >= bound {
                    return Err(Error::IndexOutOfBounds {
                        mode,
                        index: i,
                        bound,
                    });
                }
            }
            if response.len() != outputs {
                return Err(Error::ResponseLengthMismatch {
                    expected: outputs,
                    got: response.len(),
                });
            }
            if response.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("response"));
            }
            let slot = sums
                .entry(idx.clone())
                .or_insert_with(|| (0, alloc::vec![0.0; outputs]));
            slot.0 += 1;
            for (acc, &v) in slot.1.iter_mut().zip(response) {
                *acc += v;
            }
        }
        let mut total_weight = 0;
        let entries = sums
            .into_iter()
            .map(|(idx, (weight, sum))| {
                total_weight += weight;
                let mean = sum.iter().map(|s| s / weight as f64).collect();
                (idx, CellStats { weight, mean })
            })
            .collect();
        Ok(SparseObservationTensor {
            shape,
            outputs,
            entries,
            total_weight,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_modes(&self) -> usize {
        self.shape.len()
    }

    /// Response vector length K.
    pub fn n_outputs(&self) -> usize {
        self.outputs
    }

    /// Number of distinct observed cells.
    pub fn n_cells(&self) -> usize {
        self.entries.len()
    }

    /// Total sample count M (sum of all weights).
    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    pub fn get(&self, idx: &CellIndex) -> Option<&CellStats> {
        self.entries.get(idx)
    }

    /// Deterministic iteration over observed cells in index order.
    pub fn iter(&self) -> impl Iterator<Item = (&CellIndex, &CellStats)> {
        self.entries.iter()
    }

    /// Retain only the observed cells selected by `keep`; used to mask a
    /// share of the training tensor in robustness experiments.
    pub fn filter_cells<F>(&self, mut keep: F) -> Result<SparseObservationTensor>
    where
        F: FnMut(&CellIndex) -> bool,
    {
        let entries: BTreeMap<CellIndex, CellStats> = self
            .entries
            .iter()
            .filter(|(idx, _)| keep(idx))
            .map(|(idx, st)| (idx.clone(), st.clone()))
            .collect();
        if entries.is_empty() {
            return Err(Error::EmptyInput("observed cells after filtering"));
        }
        let total_weight = entries.values().map(|s| s.weight).sum();
        Ok(SparseObservationTensor {
            shape: self.shape.clone(),
            outputs: self.outputs,
            entries,
            total_weight,
        })
    }

    /// Weighted mean and population standard deviation of the stored mean
    /// responses, pooled over output components. Used to scale solver
    /// initialization to the data.
    pub fn response_scale(&self) -> (f64, f64) {
        let mut n = 0.0;
        let mut sum = 0.0;
        for stats in self.entries.values() {
            for &v in &stats.mean {
                n += stats.weight as f64;
                sum += stats.weight as f64 * v;
            }
        }
        let mean = sum / n;
        let mut var = 0.0;
        for stats in self.entries.values() {
            for &v in &stats.mean {
                var += stats.weight as f64 * (v - mean) * (v - mean);
            }
        }
        (mean, crate::math::sqrt(var / n))
    }
}

/// Per-mode empirical probability vectors used by the missing-input
/// predictor; `p[n][i]` estimates the probability of level `i` on mode `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSet {
    marginals: Vec<Vec<f64>>,
}

impl MarginalSet {
    /// Wrap explicit probability vectors; each must be non-negative and sum
    /// to one within 1e-12.
    pub fn new(marginals: Vec<Vec<f64>>) -> Result<Self> {
        for p in &marginals {
            if p.is_empty() {
                return Err(Error::EmptyInput("marginal vector"));
            }
            let mut sum = 0.0;
            for &v in p {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NonFinite("marginal probability"));
                }
                sum += v;
            }
            if crate::math::abs(sum - 1.0) > 1e-12 {
                return Err(Error::InvalidParameter("marginal must sum to 1"));
            }
        }
        Ok(MarginalSet { marginals })
    }

    /// Empirical first-order marginals of the training indices, optionally
    /// with additive smoothing `alpha` (0 disables smoothing, so levels never
    /// seen in training get probability zero).
    pub fn fit(samples: &[CellIndex], schema: &FeatureSchema, alpha: f64) -> Result<MarginalSet> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("marginal training indices"));
        }
        if alpha < 0.0 || !alpha.is_finite() {
            return Err(Error::InvalidParameter("smoothing alpha must be >= 0"));
        }
        let shape = schema.shape();
        let mut counts: Vec<Vec<f64>> = shape.iter().map(|&i| alloc::vec![0.0; i]).collect();
        for idx in samples {
            if idx.len() != shape.len() {
                return Err(Error::DimensionMismatch {
                    what: "cell index arity",
                    expected: shape.len(),
                    got: idx.len(),
                });
            }
            for (mode, (&i, &bound)) in idx.as_slice().iter().zip(&shape).enumerate() {
                if i >= bound {
                    return Err(Error::IndexOutOfBounds {
                        mode,
                        index: i,
                        bound,
                    });
                }
                counts[mode][i] += 1.0;
            }
        }
        let m = samples.len() as f64;
        let marginals = counts
            .into_iter()
            .map(|mode_counts| {
                let denom = m + alpha * mode_counts.len() as f64;
                mode_counts
                    .into_iter()
                    .map(|c| (c + alpha) / denom)
                    .collect()
            })
            .collect();
        Ok(MarginalSet { marginals })
    }

    pub fn n_modes(&self) -> usize {
        self.marginals.len()
    }

    pub fn mode(&self, mode: usize) -> &[f64] {
        &self.marginals[mode]
    }

    pub fn as_slices(&self) -> &[Vec<f64>] {
        &self.marginals
    }
}
