//! Brute-force reference implementations used by the test and acceptance
//! suites. Every closed form elsewhere in the crate is validated against the
//! straight-line transcriptions here.
//!
//! Nothing in this module is optimized, and the enumerative paths refuse
//! instances above a hard size guard rather than approximate.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::model::{CellIndex, FactorModel};
use crate::predict::{IndexEntry, PartialIndex};
use crate::rng::Rng;
use crate::solver::SolverConfig;
use crate::tensor::MarginalSet;
use crate::tensor::SampleSet;

/// Largest cell count the enumerative oracles will touch.
pub const SIZE_GUARD: usize = 1_000_000;

/// A fully materialized tensor over a small grid, row-major in index order
/// with the last mode fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, idx: &CellIndex) -> f64 {
        self.values[self.offset(idx)]
    }

    fn offset(&self, idx: &CellIndex) -> usize {
        let mut off = 0;
        for (&i, &len) in idx.as_slice().iter().zip(&self.shape) {
            off = off * len + i;
        }
        off
    }
}

/// Every index tuple of `shape`, in row-major order (last mode fastest).
pub fn enumerate_cells(shape: &[usize]) -> Result<Vec<CellIndex>> {
    let total: usize = shape.iter().product();
    if total > SIZE_GUARD {
        return Err(Error::SizeGuard {
            cells: total,
            limit: SIZE_GUARD,
        });
    }
    let mut cells = Vec::with_capacity(total);
    let mut current = alloc::vec![0usize; shape.len()];
    loop {
        cells.push(CellIndex::new(current.clone()));
        let mut mode = shape.len();
        loop {
            if mode == 0 {
                return Ok(cells);
            }
            mode -= 1;
            current[mode] += 1;
            if current[mode] < shape[mode] {
                break;
            }
            current[mode] = 0;
        }
    }
}

/// Cell-by-cell evaluation of the whole model tensor (single-output models).
pub fn materialize(model: &FactorModel) -> Result<DenseTensor> {
    let shape = model.shape();
    let cells = enumerate_cells(&shape)?;
    let mut values = Vec::with_capacity(cells.len());
    for c in &cells {
        values.push(model.eval_cell(c)?);
    }
    Ok(DenseTensor { shape, values })
}

/// The per-sample objective: a direct loop over the raw training pairs plus
/// the same penalty terms the solver uses. Differs from the aggregated
/// objective exactly by the scaled within-cell response variance.
pub fn brute_objective(
    model: &FactorModel,
    samples: &[(CellIndex, Vec<f64>)],
    cfg: &SolverConfig,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    let mut misfit = 0.0;
    for (idx, response) in samples {
        for (j, &y) in response.iter().enumerate() {
            let pred = match model.output_factor() {
                None => model.eval_cell(idx)?,
                Some(_) => crate::predict::predict_vector(model, idx)?[j],
            };
            let d = y - pred;
            misfit += d * d;
        }
    }
    let scale = if cfg.normalize {
        1.0 / samples.len() as f64
    } else {
        1.0
    };
    let mut obj = scale * misfit;
    for (mode, a) in model.factors().iter().enumerate() {
        obj += cfg.ridge * a.frob_sq();
        let mu = cfg.smoothness.get(mode).copied().unwrap_or(0.0);
        if mu > 0.0 {
            obj += mu * cfg.difference.apply(a).frob_sq();
        }
    }
    if let Some(v) = model.output_factor() {
        obj += cfg.ridge * v.frob_sq();
        if cfg.output_smoothness > 0.0 {
            obj += cfg.output_smoothness * cfg.difference.apply(v).frob_sq();
        }
    }
    Ok(obj)
}

/// Conditional expectation by exhaustive enumeration: every completion of the
/// missing modes, weighted by the product of its marginal probabilities.
/// Exponential cost, size-guarded.
pub fn brute_conditional_expectation(
    model: &FactorModel,
    pidx: &PartialIndex,
    marginals: &MarginalSet,
) -> Result<Vec<f64>> {
    if pidx.len() != model.n_modes() {
        return Err(Error::DimensionMismatch {
            what: "query index arity",
            expected: model.n_modes(),
            got: pidx.len(),
        });
    }
    let missing: Vec<usize> = pidx.missing_modes().collect();
    let shape = model.shape();
    let combos: usize = missing.iter().map(|&m| shape[m]).product();
    if combos > SIZE_GUARD {
        return Err(Error::SizeGuard {
            cells: combos,
            limit: SIZE_GUARD,
        });
    }
    for &m in &missing {
        if m >= marginals.n_modes() || marginals.mode(m).len() != shape[m] {
            return Err(Error::MissingMarginal { mode: m });
        }
    }
    let mut base: Vec<usize> = pidx
        .entries()
        .iter()
        .map(|e| match e {
            IndexEntry::Known(i) => *i,
            IndexEntry::Missing => 0,
        })
        .collect();
    let mut totals = alloc::vec![0.0; model.n_outputs()];
    let mut counters = alloc::vec![0usize; missing.len()];
    loop {
        let mut prob = 1.0;
        for (slot, &mode) in counters.iter().zip(&missing) {
            base[mode] = *slot;
            prob *= marginals.mode(mode)[*slot];
        }
        let preds = crate::predict::predict_vector(model, &CellIndex::new(base.clone()))?;
        for (t, p) in totals.iter_mut().zip(&preds) {
            *t += prob * p;
        }
        let mut axis = missing.len();
        loop {
            if axis == 0 {
                return Ok(totals);
            }
            axis -= 1;
            counters[axis] += 1;
            if counters[axis] < shape[missing[axis]] {
                break;
            }
            counters[axis] = 0;
        }
    }
}

/// Central-difference gradient with per-coordinate step `h * (1 + |x_i|)`.
pub fn fd_gradient<F>(f: F, point: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut grad = Vec::with_capacity(point.len());
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        let step = h * (1.0 + math::abs(point[i]));
        probe[i] = point[i] + step;
        let hi = f(&probe);
        probe[i] = point[i] - step;
        let lo = f(&probe);
        probe[i] = point[i];
        grad.push((hi - lo) / (2.0 * step));
    }
    grad
}

/// Plant a random rank-`rank` model on `shape` and emit one sample per grid
/// cell with optional Gaussian response noise.
pub fn synth(
    shape: &[usize],
    rank: usize,
    seed: u64,
    noise_sd: f64,
) -> Result<(FactorModel, SampleSet)> {
    let mut rng = Rng::new(seed);
    let mut factors = Vec::with_capacity(shape.len());
    for &len in shape {
        let mut m = Matrix::zeros(len, rank);
        for i in 0..len {
            for f in 0..rank {
                m.set(i, f, rng.uniform_in(-1.0, 1.0));
            }
        }
        factors.push(m);
    }
    let model = FactorModel::new(factors, None)?;
    let cells = enumerate_cells(shape)?;
    let samples = cells
        .into_iter()
        .map(|c| {
            let mut y = model.eval_cell(&c).expect("in-range cell");
            if noise_sd > 0.0 {
                y += noise_sd * rng.gaussian();
            }
            (c, alloc::vec![y])
        })
        .collect();
    Ok((model, samples))
}

/// Vector-output variant of [`synth`]: plants an output factor of `outputs`
/// rows alongside the input factors.
pub fn synth_multi(
    shape: &[usize],
    outputs: usize,
    rank: usize,
    seed: u64,
    noise_sd: f64,
) -> Result<(FactorModel, SampleSet)> {
    let mut rng = Rng::new(seed);
    let mut factors = Vec::with_capacity(shape.len());
    for &len in shape {
        let mut m = Matrix::zeros(len, rank);
        for i in 0..len {
            for f in 0..rank {
                m.set(i, f, rng.uniform_in(-1.0, 1.0));
            }
        }
        factors.push(m);
    }
    let mut v = Matrix::zeros(outputs, rank);
    for j in 0..outputs {
        for f in 0..rank {
            v.set(j, f, rng.uniform_in(-1.0, 1.0));
        }
    }
    let model = FactorModel::new(factors, Some(v))?;
    let cells = enumerate_cells(shape)?;
    let samples = cells
        .into_iter()
        .map(|c| {
            let mut y = crate::predict::predict_vector(&model, &c).expect("in-range cell");
            if noise_sd > 0.0 {
                for v in &mut y {
                    *v += noise_sd * rng.gaussian();
                }
            }
            (c, y)
        })
        .collect();
    Ok((model, samples))
}

/// The rank-1 benchmark: `f(x) = prod_n sign(x_n)` over a two-level grid,
/// realized by one `[-1, 1]` column per mode.
pub fn sign_product_model(n_modes: usize) -> FactorModel {
    let factors = (0..n_modes)
        .map(|_| Matrix::from_rows(2, 1, alloc::vec![-1.0, 1.0]))
        .collect();
    FactorModel::new(factors, None).expect("valid sign-product factors")
}

/// The rank-N benchmark: `f(x) = sum_n sign(x_n)` over a two-level grid;
/// component `f` carries mode `f`'s sign and ones elsewhere.
pub fn sign_sum_model(n_modes: usize) -> FactorModel {
    let factors = (0..n_modes)
        .map(|mode| {
            let mut m = Matrix::zeros(2, n_modes);
            for f in 0..n_modes {
                let (lo, hi) = if f == mode { (-1.0, 1.0) } else { (1.0, 1.0) };
                m.set(0, f, lo);
                m.set(1, f, hi);
            }
            m
        })
        .collect();
    FactorModel::new(factors, None).expect("valid sign-sum factors")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn materialize_all_ones_rank1() {
        let ones = Matrix::from_rows(2, 1, vec![1.0, 1.0]);
        let model = FactorModel::new(vec![ones.clone(), ones], None).unwrap();
        let dense = materialize(&model).unwrap();
        assert_eq!(dense.values(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn sign_product_materializes_to_parity() {
        let model = sign_product_model(3);
        let dense = materialize(&model).unwrap();
        for c in enumerate_cells(&[2, 2, 2]).unwrap() {
            let parity: f64 = c
                .as_slice()
                .iter()
                .map(|&i| if i == 0 { -1.0 } else { 1.0 })
                .product();
            assert_eq!(dense.get(&c), parity);
        }
    }

    #[test]
    fn sign_sum_materializes_to_sum_of_signs() {
        let model = sign_sum_model(4);
        for c in enumerate_cells(&[2, 2, 2, 2]).unwrap() {
            let total: f64 = c
                .as_slice()
                .iter()
                .map(|&i| if i == 0 { -1.0 } else { 1.0 })
                .sum();
            assert_eq!(model.eval_cell(&c).unwrap(), total);
        }
    }

    #[test]
    fn materialize_commutes_with_basis_contraction() {
        let (model, _) = synth(&[3, 4, 2], 2, 42, 0.0).unwrap();
        let dense = materialize(&model).unwrap();
        let j = 1;
        let mut basis = vec![0.0; 4];
        basis[j] = 1.0;
        let sliced = model.mode_vector_product(1, &basis).unwrap();
        let dense_sliced = materialize(&sliced).unwrap();
        for a in 0..3 {
            for b in 0..2 {
                let full = dense.get(&CellIndex::new(vec![a, j, b]));
                let red = dense_sliced.get(&CellIndex::new(vec![a, 0, b]));
                assert_eq!(full, red);
            }
        }
    }

    #[test]
    fn fd_gradient_of_square() {
        let g = fd_gradient(|x| x[0] * x[0], &[1.0], 1e-5);
        assert!((g[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn fd_gradient_of_constant_is_zero() {
        let g = fd_gradient(|_| 3.5, &[0.2, -0.7, 11.0], 1e-5);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn size_guard_trips() {
        assert!(matches!(
            enumerate_cells(&[101, 101, 101]),
            Err(Error::SizeGuard { .. })
        ));
    }
}
