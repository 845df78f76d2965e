//! The CP factor model and its pure evaluations.
//!
//! A rank-`F` model stores one `I_n x F` factor matrix per input mode; a cell
//! value is the sum over components of the product of one factor row per mode.
//! Multi-output models carry an extra `K x F` output factor whose rows select
//! the output coordinate. Indices are zero-based throughout the in-memory API;
//! the ingestion layer converts from whatever the external data uses.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Zero-based grid coordinates, one component per input mode.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex(Vec<usize>);

impl CellIndex {
    pub fn new(components: Vec<usize>) -> Self {
        CellIndex(components)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, mode: usize) -> usize {
        self.0[mode]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for CellIndex {
    fn from(v: Vec<usize>) -> Self {
        CellIndex(v)
    }
}

impl From<&[usize]> for CellIndex {
    fn from(v: &[usize]) -> Self {
        CellIndex(v.to_vec())
    }
}

/// Rank-`F` CP model: `factors[n]` is `I_n x F`; `output_factor`, when present,
/// is `K x F` and turns the model into a `K`-output predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    factors: Vec<Matrix>,
    output_factor: Option<Matrix>,
    rank: usize,
}

impl FactorModel {
    /// Assemble a model from factor matrices. All matrices must share a
    /// positive column count and contain only finite values.
    pub fn new(factors: Vec<Matrix>, output_factor: Option<Matrix>) -> Result<Self> {
        let rank = factors
            .first()
            .map(Matrix::cols)
            .or_else(|| output_factor.as_ref().map(Matrix::cols))
            .ok_or(Error::EmptyInput("factor list"))?;
        if rank == 0 {
            return Err(Error::EmptyInput("factor columns"));
        }
        for f in factors.iter().chain(output_factor.iter()) {
            if f.cols() != rank {
                return Err(Error::DimensionMismatch {
                    what: "factor column count",
                    expected: rank,
                    got: f.cols(),
                });
            }
            if !f.is_finite() {
                return Err(Error::NonFinite("factor matrix"));
            }
        }
        Ok(FactorModel {
            factors,
            output_factor,
            rank,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of input modes.
    pub fn n_modes(&self) -> usize {
        self.factors.len()
    }

    /// Number of outputs: the output factor's row count, or 1.
    pub fn n_outputs(&self) -> usize {
        self.output_factor.as_ref().map_or(1, Matrix::rows)
    }

    /// Alphabet sizes `(I_1, ..., I_N)`.
    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    pub fn factor(&self, mode: usize) -> &Matrix {
        &self.factors[mode]
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn factor_mut(&mut self, mode: usize) -> &mut Matrix {
        &mut self.factors[mode]
    }

    pub fn output_factor(&self) -> Option<&Matrix> {
        self.output_factor.as_ref()
    }

    pub fn output_factor_mut(&mut self) -> Option<&mut Matrix> {
        self.output_factor.as_mut()
    }

    fn check_component(&self, mode: usize, index: usize) -> Result<()> {
        let bound = self.factors[mode].rows();
        if index >= bound {
            return Err(Error::IndexOutOfBounds { mode, index, bound });
        }
        Ok(())
    }

    fn check_index(&self, idx: &CellIndex) -> Result<()> {
        if idx.len() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                what: "cell index arity",
                expected: self.n_modes(),
                got: idx.len(),
            });
        }
        for (mode, &i) in idx.as_slice().iter().enumerate() {
            self.check_component(mode, i)?;
        }
        Ok(())
    }

    /// Value of the model tensor at one cell: the sum over components of the
    /// product of the selected factor rows.
    pub fn eval_cell(&self, idx: &CellIndex) -> Result<f64> {
        self.check_index(idx)?;
        let mut total = 0.0;
        for f in 0..self.rank {
            let mut prod = 1.0;
            for (mode, &i) in idx.as_slice().iter().enumerate() {
                prod *= self.factors[mode].get(i, f);
            }
            total += prod;
        }
        Ok(total)
    }

    /// One row of the Khatri-Rao product of all factors except `skip_mode`:
    /// the component-wise product of the rows `factors[n][idx_n]` over
    /// `n != skip_mode`. The skipped mode's index component is ignored, so
    /// callers may pass any placeholder there. Never materializes the full
    /// Khatri-Rao matrix.
    pub fn khatri_rao_row(&self, idx: &CellIndex, skip_mode: usize) -> Result<Vec<f64>> {
        if skip_mode >= self.n_modes() {
            return Err(Error::IndexOutOfBounds {
                mode: skip_mode,
                index: skip_mode,
                bound: self.n_modes(),
            });
        }
        if idx.len() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                what: "cell index arity",
                expected: self.n_modes(),
                got: idx.len(),
            });
        }
        let mut row = alloc::vec![1.0; self.rank];
        for (mode, &i) in idx.as_slice().iter().enumerate() {
            if mode == skip_mode {
                continue;
            }
            self.check_component(mode, i)?;
            for (r, v) in row.iter_mut().zip(self.factors[mode].row(i)) {
                *r *= v;
            }
        }
        Ok(row)
    }

    /// Contract mode `mode` with the vector `u`: the returned model's mode-n
    /// factor is the single row `u^T A_n`, so its mode-n dimension is 1 and
    /// evaluating it equals the weighted sum of this model's values over that
    /// mode. With a basis vector this is a slice; with a probability vector it
    /// is the marginalized model used for prediction under missing inputs.
    pub fn mode_vector_product(&self, mode: usize, u: &[f64]) -> Result<FactorModel> {
        if mode >= self.n_modes() {
            return Err(Error::IndexOutOfBounds {
                mode,
                index: mode,
                bound: self.n_modes(),
            });
        }
        let a = &self.factors[mode];
        if u.len() != a.rows() {
            return Err(Error::DimensionMismatch {
                what: "mode vector length",
                expected: a.rows(),
                got: u.len(),
            });
        }
        let mut contracted = Matrix::zeros(1, self.rank);
        for (i, &w) in u.iter().enumerate() {
            for f in 0..self.rank {
                contracted.set(0, f, contracted.get(0, f) + w * a.get(i, f));
            }
        }
        let mut factors = self.factors.clone();
        factors[mode] = contracted;
        Ok(FactorModel {
            factors,
            output_factor: self.output_factor.clone(),
            rank: self.rank,
        })
    }
}
