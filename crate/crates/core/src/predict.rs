//! Queries against a fitted model: fully observed inputs, partially observed
//! inputs via the independence-model conditional expectation, and RMSE.
//!
//! When some predictors are missing, the prediction is the expectation of the
//! model over the missing modes under an independence (rank-one) distribution
//! built from per-mode marginals. Because the joint model factors into the
//! marginals, the observed values never reweight the expectation, and the
//! whole computation is a per-component product over modes:
//!
//! ```text
//!   f(x_observed) = sum_f  prod_{n observed} A_n(i_n, f)
//!                        * prod_{n missing}  p_n^T A_n(:, f)
//! ```
//!
//! Missing-value combinations are never enumerated.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{CellIndex, FactorModel};
use crate::tensor::MarginalSet;

/// Per-mode query component: a concrete level or a missing marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexEntry {
    Known(usize),
    Missing,
}

/// A query index whose modes may individually be missing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialIndex(Vec<IndexEntry>);

impl PartialIndex {
    pub fn new(entries: Vec<IndexEntry>) -> Self {
        PartialIndex(entries)
    }

    /// Fully observed index.
    pub fn from_full(idx: &CellIndex) -> Self {
        PartialIndex(
            idx.as_slice()
                .iter()
                .map(|&i| IndexEntry::Known(i))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.0
    }

    /// Modes with missing components.
    pub fn missing_modes(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e, IndexEntry::Missing))
            .map(|(m, _)| m)
    }

    pub fn any_missing(&self) -> bool {
        self.0.iter().any(|e| matches!(e, IndexEntry::Missing))
    }
}

/// Scalar prediction at a fully observed index (single-output models).
pub fn predict(model: &FactorModel, idx: &CellIndex) -> Result<f64> {
    model.eval_cell(idx)
}

/// Vector prediction at a fully observed index; length-1 for single-output
/// models, length-K when an output factor is present.
pub fn predict_vector(model: &FactorModel, idx: &CellIndex) -> Result<Vec<f64>> {
    let weights = component_products(model, &PartialIndex::from_full(idx), None)?;
    Ok(collapse_outputs(model, &weights))
}

/// Conditional-expectation prediction with missing modes integrated out
/// against `marginals`. With nothing missing this equals [`predict_vector`]
/// exactly. Cost is `O(F * (N + sum of missing alphabet sizes))`.
pub fn predict_partial(
    model: &FactorModel,
    pidx: &PartialIndex,
    marginals: &MarginalSet,
) -> Result<Vec<f64>> {
    let weights = component_products(model, pidx, Some(marginals))?;
    Ok(collapse_outputs(model, &weights))
}

/// Per-component products over the input modes: observed modes contribute
/// their factor row, missing modes the marginal-weighted column sums.
fn component_products(
    model: &FactorModel,
    pidx: &PartialIndex,
    marginals: Option<&MarginalSet>,
) -> Result<Vec<f64>> {
    if pidx.len() != model.n_modes() {
        return Err(Error::DimensionMismatch {
            what: "query index arity",
            expected: model.n_modes(),
            got: pidx.len(),
        });
    }
    let mut weights = alloc::vec![1.0; model.rank()];
    for (mode, entry) in pidx.entries().iter().enumerate() {
        let factor = model.factor(mode);
        match *entry {
            IndexEntry::Known(i) => {
                if i >= factor.rows() {
                    return Err(Error::IndexOutOfBounds {
                        mode,
                        index: i,
                        bound: factor.rows(),
                    });
                }
                for (w, v) in weights.iter_mut().zip(factor.row(i)) {
                    *w *= v;
                }
            }
            IndexEntry::Missing => {
                let marginals = marginals.ok_or(Error::MissingMarginal { mode })?;
                if mode >= marginals.n_modes() {
                    return Err(Error::MissingMarginal { mode });
                }
                let p = marginals.mode(mode);
                if p.len() != factor.rows() {
                    return Err(Error::DimensionMismatch {
                        what: "marginal length",
                        expected: factor.rows(),
                        got: p.len(),
                    });
                }
                for (f, w) in weights.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for (i, &pi) in p.iter().enumerate() {
                        s += pi * factor.get(i, f);
                    }
                    *w *= s;
                }
            }
        }
    }
    Ok(weights)
}

fn collapse_outputs(model: &FactorModel, weights: &[f64]) -> Vec<f64> {
    match model.output_factor() {
        None => alloc::vec![weights.iter().sum()],
        Some(v) => (0..v.rows())
            .map(|j| weights.iter().zip(v.row(j)).map(|(a, b)| a * b).sum())
            .collect(),
    }
}

/// Root mean squared error between predictions and targets, pooled over all
/// vector components.
pub fn rmse(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("predictions"));
    }
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            what: "prediction count",
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, t) in predictions.iter().zip(targets) {
        if p.len() != t.len() {
            return Err(Error::ResponseLengthMismatch {
                expected: t.len(),
                got: p.len(),
            });
        }
        for (&a, &b) in p.iter().zip(t) {
            let d = a - b;
            sum += d * d;
            count += 1;
        }
    }
    Ok(crate::math::sqrt(sum / count as f64))
}

/// Scalar convenience wrapper over [`rmse`].
pub fn rmse_scalar(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            what: "prediction count",
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("predictions"));
    }
    let mut sum = 0.0;
    for (&a, &b) in predictions.iter().zip(targets) {
        let d = a - b;
        sum += d * d;
    }
    Ok(crate::math::sqrt(sum / predictions.len() as f64))
}
