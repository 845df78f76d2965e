//! Block coordinate descent fit of the factor model to the aggregated tensor.
//!
//! The objective is
//!
//! ```text
//!   (1/M) * sum_cells W * ||Y - X||^2
//!     + ridge * sum_n ||A_n||^2
//!     + sum_n mu_n * ||T_n A_n||^2
//! ```
//!
//! with `X` the rank-F model tensor and `T_n` a first- or second-difference
//! operator on ordinal modes. One factor row at a time has a closed-form
//! minimizer: an F x F symmetric positive-definite solve whose data side only
//! touches the observed cells sharing that row's index, so the Khatri-Rao
//! product is never materialized. Rows are updated in ascending order within
//! each mode (Gauss-Seidel on the smoothness chain) and modes cyclically, so
//! every update is an exact block minimization and the objective never
//! increases.
//!
//! Multi-output data is handled by stacking: an extra output mode of size K
//! whose factor rows are updated by the same machinery. With K = 1 the
//! stacking degenerates and the fit is exactly the single-output fit.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::{cholesky_solve, min_norm_solve, Matrix};
use crate::model::FactorModel;
use crate::rng::Rng;
use crate::schema::FeatureSchema;
use crate::tensor::SparseObservationTensor;

/// Which difference operator penalizes variation between adjacent factor rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceKind {
    /// Rows `(1, -1)`: penalizes first differences of adjacent rows.
    First,
    /// Rows `(-1, 2, -1)`: penalizes discrete curvature.
    Second,
}

impl DifferenceKind {
    pub fn stencil(self) -> &'static [f64] {
        match self {
            DifferenceKind::First => &[1.0, -1.0],
            DifferenceKind::Second => &[-1.0, 2.0, -1.0],
        }
    }

    /// Number of penalty rows for a factor with `len` rows.
    pub fn penalty_rows(self, len: usize) -> usize {
        len.saturating_sub(self.stencil().len() - 1)
    }

    /// Materialize `T * A`. Applying this to a constant column gives zeros,
    /// since every stencil sums to zero.
    pub fn apply(self, a: &Matrix) -> Matrix {
        let stencil = self.stencil();
        let rows = self.penalty_rows(a.rows());
        let mut out = Matrix::zeros(rows, a.cols());
        for j in 0..rows {
            for (offset, &c) in stencil.iter().enumerate() {
                for f in 0..a.cols() {
                    out.set(j, f, out.get(j, f) + c * a.get(j + offset, f));
                }
            }
        }
        out
    }
}

/// Solver settings. `smoothness` is per input mode; leave it empty for
/// all-zero. During [`fit`] the schema forces it to zero on categorical modes.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rank: usize,
    pub ridge: f64,
    pub smoothness: Vec<f64>,
    /// Smoothness weight on the output factor of multi-output models.
    pub output_smoothness: f64,
    pub difference: DifferenceKind,
    pub max_sweeps: usize,
    /// Stop when the relative objective decrease per sweep falls below this.
    pub rel_tol: f64,
    pub restarts: usize,
    pub init_scale: f64,
    pub seed: u64,
    /// Keep the 1/M factor on the data term so `ridge` and `smoothness` have
    /// sample-size-independent meaning; disable for the unnormalized variant.
    pub normalize: bool,
}

impl SolverConfig {
    pub fn new(rank: usize) -> Self {
        SolverConfig {
            rank,
            ridge: 1e-3,
            smoothness: Vec::new(),
            output_smoothness: 0.0,
            difference: DifferenceKind::First,
            max_sweeps: 500,
            rel_tol: 1e-6,
            restarts: 1,
            init_scale: 1.0,
            seed: 0,
            normalize: true,
        }
    }

    pub fn validate(&self, n_modes: usize) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidParameter("rank must be positive"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidParameter("ridge must be finite and >= 0"));
        }
        if !self.smoothness.is_empty() && self.smoothness.len() != n_modes {
            return Err(Error::DimensionMismatch {
                what: "per-mode smoothness",
                expected: n_modes,
                got: self.smoothness.len(),
            });
        }
        if self
            .smoothness
            .iter()
            .chain(core::iter::once(&self.output_smoothness))
            .any(|m| !(*m >= 0.0 && m.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "smoothness must be finite and >= 0",
            ));
        }
        if self.max_sweeps == 0 || self.restarts == 0 {
            return Err(Error::InvalidParameter(
                "max_sweeps and restarts must be positive",
            ));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidParameter("init_scale must be positive"));
        }
        Ok(())
    }

    fn mu(&self, mode: usize) -> f64 {
        self.smoothness.get(mode).copied().unwrap_or(0.0)
    }
}

/// Outcome of one [`fit`]: the objective after initialization and after each
/// sweep of the winning restart, plus bookkeeping.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub objective_trace: Vec<f64>,
    pub final_objective: f64,
    pub sweeps: usize,
    /// Index of the restart that won.
    pub restart: usize,
    /// Row updates that needed the minimum-norm fallback (rank-deficient,
    /// unregularized systems).
    pub min_norm_fallbacks: u64,
    pub converged: bool,
}

struct Cell {
    idx: Vec<usize>,
    weight: f64,
    mean: Vec<f64>,
}

/// Flattened view of the observations plus per-(mode, row) cell buckets.
struct Engine {
    cells: Vec<Cell>,
    buckets: Vec<Vec<Vec<u32>>>,
    scale: f64,
}

impl Engine {
    fn new(data: &SparseObservationTensor, normalize: bool) -> Engine {
        let shape = data.shape();
        let mut cells = Vec::with_capacity(data.n_cells());
        let mut buckets: Vec<Vec<Vec<u32>>> =
            shape.iter().map(|&len| vec![Vec::new(); len]).collect();
        for (idx, stats) in data.iter() {
            let id = cells.len() as u32;
            for (mode, &i) in idx.as_slice().iter().enumerate() {
                buckets[mode][i].push(id);
            }
            cells.push(Cell {
                idx: idx.as_slice().to_vec(),
                weight: stats.weight as f64,
                mean: stats.mean.clone(),
            });
        }
        let scale = if normalize {
            1.0 / data.total_weight() as f64
        } else {
            1.0
        };
        Engine {
            cells,
            buckets,
            scale,
        }
    }

    /// Khatri-Rao row over the input modes except `skip` (use `skip = N` to
    /// keep all of them).
    fn kr_row(&self, model: &FactorModel, cell: &Cell, skip: usize, out: &mut [f64]) {
        out.fill(1.0);
        for (mode, &i) in cell.idx.iter().enumerate() {
            if mode == skip {
                continue;
            }
            for (o, v) in out.iter_mut().zip(model.factor(mode).row(i)) {
                *o *= v;
            }
        }
    }

    /// Accumulate the data-term normal equations for one row of one mode.
    /// `mode == N` addresses the output factor of a multi-output model.
    fn row_system(
        &self,
        model: &FactorModel,
        mode: usize,
        row: usize,
        gram: &mut [f64],
        rhs: &mut [f64],
        kr: &mut [f64],
    ) {
        let f = model.rank();
        gram.fill(0.0);
        rhs.fill(0.0);
        let n_inputs = model.n_modes();
        if mode < n_inputs {
            for &id in &self.buckets[mode][row] {
                let cell = &self.cells[id as usize];
                self.kr_row(model, cell, mode, kr);
                match model.output_factor() {
                    None => accumulate(gram, rhs, kr, cell.weight, cell.mean[0], f),
                    Some(v) => {
                        for (j, &y) in cell.mean.iter().enumerate() {
                            let vr = v.row(j);
                            let mut q = vec![0.0; f];
                            for ((q, &a), &b) in q.iter_mut().zip(kr.iter()).zip(vr) {
                                *q = a * b;
                            }
                            accumulate(gram, rhs, &q, cell.weight, y, f);
                        }
                    }
                }
            }
        } else {
            for cell in &self.cells {
                self.kr_row(model, cell, n_inputs, kr);
                accumulate(gram, rhs, kr, cell.weight, cell.mean[row], f);
            }
        }
        for v in gram.iter_mut() {
            *v *= self.scale;
        }
        for v in rhs.iter_mut() {
            *v *= self.scale;
        }
    }
}

fn accumulate(gram: &mut [f64], rhs: &mut [f64], q: &[f64], w: f64, y: f64, f: usize) {
    for a in 0..f {
        let wq = w * q[a];
        rhs[a] += wq * y;
        for b in a..f {
            gram[a * f + b] += wq * q[b];
        }
    }
}

fn mirror_lower(gram: &mut [f64], f: usize) {
    for a in 0..f {
        for b in (a + 1)..f {
            gram[b * f + a] = gram[a * f + b];
        }
    }
}

/// Closed-form minimizer of the row subproblem, writing over `factor[row]`.
/// Returns true when the minimum-norm fallback was needed.
fn solve_row(
    gram: &mut [f64],
    rhs: &mut [f64],
    factor: &Matrix,
    row: usize,
    ridge: f64,
    mu: f64,
    kind: DifferenceKind,
) -> (Vec<f64>, bool) {
    let f = factor.cols();
    let mut diag = ridge;
    if mu > 0.0 {
        let stencil = kind.stencil();
        let span = stencil.len() - 1;
        let n_rows = kind.penalty_rows(factor.rows());
        let lo = row.saturating_sub(span);
        let hi = row.min(n_rows.saturating_sub(1));
        if n_rows > 0 {
            for j in lo..=hi.min(n_rows - 1) {
                if row < j || row > j + span {
                    continue;
                }
                let ci = stencil[row - j];
                diag += mu * ci * ci;
                for (offset, &cl) in stencil.iter().enumerate() {
                    let l = j + offset;
                    if l == row {
                        continue;
                    }
                    let neighbor = factor.row(l);
                    for (r, &nv) in rhs.iter_mut().zip(neighbor) {
                        *r -= mu * ci * cl * nv;
                    }
                }
            }
        }
    }
    for a in 0..f {
        gram[a * f + a] += diag;
    }
    mirror_lower(gram, f);
    match cholesky_solve(gram, rhs, f) {
        Some(x) => (x, false),
        None => {
            let candidate = min_norm_solve(gram, rhs, f);
            // Keep the fallback only if it does not worsen the block
            // objective a^T H a - 2 b^T a relative to the current row.
            let current = factor.row(row);
            if block_quadratic(gram, rhs, &candidate, f)
                <= block_quadratic(gram, rhs, current, f) + 1e-12
            {
                (candidate, true)
            } else {
                (current.to_vec(), true)
            }
        }
    }
}

fn block_quadratic(h: &[f64], b: &[f64], x: &[f64], f: usize) -> f64 {
    let mut quad = 0.0;
    let mut lin = 0.0;
    for a in 0..f {
        let mut hx = 0.0;
        for c in 0..f {
            hx += h[a * f + c] * x[c];
        }
        quad += x[a] * hx;
        lin += b[a] * x[a];
    }
    quad - 2.0 * lin
}

/// Full objective: scaled weighted data misfit over the observed cells plus
/// ridge and smoothness penalties (the latter evaluated through the
/// materialized difference operator).
pub fn objective(
    model: &FactorModel,
    data: &SparseObservationTensor,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_compatible(model, data)?;
    for f in model.factors().iter().chain(model.output_factor()) {
        if !f.is_finite() {
            return Err(Error::NonFinite("factor matrix"));
        }
    }
    let engine = Engine::new(data, cfg.normalize);
    Ok(objective_with(&engine, model, cfg))
}

fn objective_with(engine: &Engine, model: &FactorModel, cfg: &SolverConfig) -> f64 {
    let f = model.rank();
    let n_inputs = model.n_modes();
    let mut kr = vec![0.0; f];
    let mut misfit = 0.0;
    for cell in &engine.cells {
        engine.kr_row(model, cell, n_inputs, &mut kr);
        match model.output_factor() {
            None => {
                let pred: f64 = kr.iter().sum();
                let d = cell.mean[0] - pred;
                misfit += cell.weight * d * d;
            }
            Some(v) => {
                for (j, &y) in cell.mean.iter().enumerate() {
                    let pred: f64 = kr.iter().zip(v.row(j)).map(|(a, b)| a * b).sum();
                    let d = y - pred;
                    misfit += cell.weight * d * d;
                }
            }
        }
    }
    let mut obj = engine.scale * misfit;
    for (mode, a) in model.factors().iter().enumerate() {
        obj += cfg.ridge * a.frob_sq();
        let mu = cfg.mu(mode);
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
    obj
}

fn check_compatible(model: &FactorModel, data: &SparseObservationTensor) -> Result<()> {
    if model.n_modes() != data.n_modes() {
        return Err(Error::DimensionMismatch {
            what: "model modes",
            expected: data.n_modes(),
            got: model.n_modes(),
        });
    }
    for (mode, (&i, &j)) in model.shape().iter().zip(data.shape()).enumerate() {
        if i != j {
            return Err(Error::IndexOutOfBounds {
                mode,
                index: i,
                bound: j,
            });
        }
    }
    if model.n_outputs() != data.n_outputs() {
        return Err(Error::ResponseLengthMismatch {
            expected: model.n_outputs(),
            got: data.n_outputs(),
        });
    }
    Ok(())
}

/// Minimizer of the subproblem in row `row` of factor `mode`, holding every
/// other parameter fixed. `mode == N` addresses the output factor. The model
/// is not modified.
pub fn row_update(
    model: &FactorModel,
    data: &SparseObservationTensor,
    mode: usize,
    row: usize,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    check_compatible(model, data)?;
    let n_inputs = model.n_modes();
    let (factor, mu) = if mode < n_inputs {
        (model.factor(mode), cfg.mu(mode))
    } else if mode == n_inputs && model.output_factor().is_some() {
        (model.output_factor().unwrap(), cfg.output_smoothness)
    } else {
        return Err(Error::IndexOutOfBounds {
            mode,
            index: mode,
            bound: n_inputs,
        });
    };
    if row >= factor.rows() {
        return Err(Error::IndexOutOfBounds {
            mode,
            index: row,
            bound: factor.rows(),
        });
    }
    let engine = Engine::new(data, cfg.normalize);
    let f = model.rank();
    let mut gram = vec![0.0; f * f];
    let mut rhs = vec![0.0; f];
    let mut kr = vec![0.0; f];
    engine.row_system(model, mode, row, &mut gram, &mut rhs, &mut kr);
    let (x, _) = solve_row(
        &mut gram,
        &mut rhs,
        factor,
        row,
        cfg.ridge,
        mu,
        cfg.difference,
    );
    Ok(x)
}

/// One cyclic pass over all modes (input modes in order, then the output
/// factor), each mode's rows in ascending order. Exact block minimization at
/// every step, so the objective cannot increase.
pub fn sweep(
    model: &mut FactorModel,
    data: &SparseObservationTensor,
    cfg: &SolverConfig,
) -> Result<u64> {
    check_compatible(model, data)?;
    let engine = Engine::new(data, cfg.normalize);
    Ok(sweep_with(&engine, model, cfg))
}

fn sweep_with(engine: &Engine, model: &mut FactorModel, cfg: &SolverConfig) -> u64 {
    let f = model.rank();
    let n_inputs = model.n_modes();
    let mut gram = vec![0.0; f * f];
    let mut rhs = vec![0.0; f];
    let mut kr = vec![0.0; f];
    let mut fallbacks = 0;
    for mode in 0..n_inputs {
        for row in 0..model.factor(mode).rows() {
            engine.row_system(model, mode, row, &mut gram, &mut rhs, &mut kr);
            let (x, fb) = solve_row(
                &mut gram,
                &mut rhs,
                model.factor(mode),
                row,
                cfg.ridge,
                cfg.mu(mode),
                cfg.difference,
            );
            fallbacks += u64::from(fb);
            model.factor_mut(mode).row_mut(row).copy_from_slice(&x);
        }
    }
    if model.output_factor().is_some() {
        let rows = model.output_factor().unwrap().rows();
        for row in 0..rows {
            engine.row_system(model, n_inputs, row, &mut gram, &mut rhs, &mut kr);
            let (x, fb) = solve_row(
                &mut gram,
                &mut rhs,
                model.output_factor().unwrap(),
                row,
                cfg.ridge,
                cfg.output_smoothness,
                cfg.difference,
            );
            fallbacks += u64::from(fb);
            model
                .output_factor_mut()
                .unwrap()
                .row_mut(row)
                .copy_from_slice(&x);
        }
    }
    fallbacks
}

fn init_model(
    shape: &[usize],
    outputs: usize,
    data: &SparseObservationTensor,
    cfg: &SolverConfig,
    rng: &mut Rng,
) -> FactorModel {
    let (mean, std) = data.response_scale();
    let basis = if std > 0.0 {
        std
    } else {
        math::abs(mean).max(1.0)
    };
    let n_factors = shape.len() + usize::from(outputs > 1);
    let s = cfg.init_scale * math::powf(basis / cfg.rank as f64, 1.0 / n_factors as f64);
    let mut draw = |rows: usize| {
        let mut m = Matrix::zeros(rows, cfg.rank);
        for i in 0..rows {
            for f in 0..cfg.rank {
                m.set(i, f, rng.uniform_in(-s, s));
            }
        }
        m
    };
    let factors: Vec<Matrix> = shape.iter().map(|&len| draw(len)).collect();
    let output_factor = (outputs > 1).then(|| draw(outputs));
    FactorModel::new(factors, output_factor).expect("fresh factors are valid")
}

/// Fit a single-output model: `restarts` independent initializations, each
/// swept until the relative objective decrease drops below `rel_tol` or
/// `max_sweeps` is reached; the restart with the lowest final objective wins.
pub fn fit(
    data: &SparseObservationTensor,
    schema: &FeatureSchema,
    cfg: &SolverConfig,
) -> Result<(FactorModel, FitReport)> {
    if data.n_outputs() != 1 {
        return Err(Error::ResponseLengthMismatch {
            expected: 1,
            got: data.n_outputs(),
        });
    }
    fit_impl(data, schema, cfg)
}

/// Fit a model with vector responses by stacking an output mode of size K
/// and updating its factor rows like any other mode. With K = 1 this is
/// exactly [`fit`], objective trace included.
pub fn fit_multi_output(
    data: &SparseObservationTensor,
    schema: &FeatureSchema,
    cfg: &SolverConfig,
) -> Result<(FactorModel, FitReport)> {
    fit_impl(data, schema, cfg)
}

fn fit_impl(
    data: &SparseObservationTensor,
    schema: &FeatureSchema,
    cfg: &SolverConfig,
) -> Result<(FactorModel, FitReport)> {
    if schema.shape() != data.shape() {
        return Err(Error::DimensionMismatch {
            what: "schema modes",
            expected: data.n_modes(),
            got: schema.n_modes(),
        });
    }
    cfg.validate(data.n_modes())?;
    let mut cfg = cfg.clone();
    if cfg.smoothness.is_empty() {
        cfg.smoothness = vec![0.0; data.n_modes()];
    }
    for (mode, mu) in cfg.smoothness.iter_mut().enumerate() {
        if !schema.feature(mode).smoothness_eligible() {
            *mu = 0.0;
        }
    }

    let engine = Engine::new(data, cfg.normalize);
    let shape = data.shape().to_vec();
    let mut best: Option<(FactorModel, FitReport)> = None;
    for restart in 0..cfg.restarts {
        let mut rng = Rng::substream(cfg.seed, restart as u64);
        let mut model = init_model(&shape, data.n_outputs(), data, &cfg, &mut rng);
        let mut trace = vec![objective_with(&engine, &model, &cfg)];
        let mut fallbacks = 0;
        let mut converged = false;
        for _ in 0..cfg.max_sweeps {
            fallbacks += sweep_with(&engine, &mut model, &cfg);
            let prev = *trace.last().unwrap();
            let obj = objective_with(&engine, &model, &cfg);
            trace.push(obj);
            if !obj.is_finite() {
                break;
            }
            debug_assert!(obj <= prev + 1e-9 * math::abs(prev).max(1e-12));
            if prev - obj < cfg.rel_tol * math::abs(prev).max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        let final_objective = *trace.last().unwrap();
        if !final_objective.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, b)) => final_objective < b.final_objective,
        };
        if better {
            let sweeps = trace.len() - 1;
            best = Some((
                model,
                FitReport {
                    objective_trace: trace,
                    final_objective,
                    sweeps,
                    restart,
                    min_norm_fallbacks: fallbacks,
                    converged,
                },
            ));
        }
    }
    best.ok_or(Error::AllRestartsDiverged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CellIndex;
    use crate::schema::{Feature, FeatureKind};
    use alloc::format;

    fn ordinal_schema(shape: &[usize]) -> FeatureSchema {
        FeatureSchema::new(
            shape
                .iter()
                .enumerate()
                .map(|(i, &s)| Feature {
                    name: format!("x{i}"),
                    kind: FeatureKind::OrdinalDiscrete,
                    alphabet_size: s,
                    labels: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn idx(components: &[usize]) -> CellIndex {
        CellIndex::new(components.to_vec())
    }

    fn cfg0(rank: usize) -> SolverConfig {
        let mut cfg = SolverConfig::new(rank);
        cfg.ridge = 0.0;
        cfg
    }

    #[test]
    fn objective_zero_on_exact_model() {
        let a1 = Matrix::from_rows(2, 2, vec![0.3, -1.0, 0.7, 2.0]);
        let a2 = Matrix::from_rows(3, 2, vec![1.0, 0.5, -2.0, 1.0, 0.0, 3.0]);
        let model = FactorModel::new(vec![a1, a2], None).unwrap();
        let samples: Vec<_> = (0..2)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| {
                let c = idx(&[i, j]);
                let y = model.eval_cell(&c).unwrap();
                (c, vec![y])
            })
            .collect();
        let data = SparseObservationTensor::aggregate(vec![2, 3], &samples).unwrap();
        let obj = objective(&model, &data, &cfg0(2)).unwrap();
        assert_eq!(obj, 0.0);
    }

    #[test]
    fn objective_of_zero_model_is_scaled_weighted_energy() {
        let samples = vec![
            (idx(&[0, 0]), vec![2.0]),
            (idx(&[0, 0]), vec![2.0]),
            (idx(&[1, 1]), vec![-1.0]),
        ];
        let data = SparseObservationTensor::aggregate(vec![2, 2], &samples).unwrap();
        let model = FactorModel::new(vec![Matrix::zeros(2, 1), Matrix::zeros(2, 1)], None).unwrap();
        let obj = objective(&model, &data, &cfg0(1)).unwrap();
        // (1/3) * (2*2^2 + 1*1^2)
        assert!((obj - 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_columns_pay_no_smoothness() {
        let a = Matrix::from_rows(4, 2, vec![3.0, -1.0, 3.0, -1.0, 3.0, -1.0, 3.0, -1.0]);
        let model = FactorModel::new(vec![a.clone(), a], None).unwrap();
        let samples = vec![(idx(&[0, 0]), vec![1.0])];
        let data = SparseObservationTensor::aggregate(vec![4, 4], &samples).unwrap();
        for kind in [DifferenceKind::First, DifferenceKind::Second] {
            let mut with_mu = cfg0(2);
            with_mu.smoothness = vec![5.0, 7.0];
            with_mu.difference = kind;
            let mut without = cfg0(2);
            without.difference = kind;
            let a = objective(&model, &data, &with_mu).unwrap();
            let b = objective(&model, &data, &without).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn row_update_scalar_least_squares() {
        // F=1, one observed cell with weight 1, Khatri-Rao value q=3, y=6.
        let a1 = Matrix::from_rows(1, 1, vec![0.0]);
        let a2 = Matrix::from_rows(1, 1, vec![3.0]);
        let model = FactorModel::new(vec![a1, a2], None).unwrap();
        let data =
            SparseObservationTensor::aggregate(vec![1, 1], &[(idx(&[0, 0]), vec![6.0])]).unwrap();
        let x = row_update(&model, &data, 0, 0, &cfg0(1)).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn row_update_with_ridge() {
        // q=1, w=1, y=2, ridge=1, M=1 -> a = 2/(1+1) = 1.
        let a1 = Matrix::from_rows(1, 1, vec![0.0]);
        let a2 = Matrix::from_rows(1, 1, vec![1.0]);
        let model = FactorModel::new(vec![a1, a2], None).unwrap();
        let data =
            SparseObservationTensor::aggregate(vec![1, 1], &[(idx(&[0, 0]), vec![2.0])]).unwrap();
        let mut cfg = cfg0(1);
        cfg.ridge = 1.0;
        let x = row_update(&model, &data, 0, 0, &cfg).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unobserved_interior_row_interpolates_neighbors() {
        // Mode 0 has 3 rows; only rows 0 and 2 are observed. With ridge 0 and
        // first-difference smoothness, row 1's minimizer is the neighbor mean.
        let a1 = Matrix::from_rows(3, 2, vec![1.0, 2.0, 9.0, 9.0, 5.0, -4.0]);
        let a2 = Matrix::from_rows(1, 2, vec![1.0, 1.0]);
        let model = FactorModel::new(vec![a1, a2], None).unwrap();
        let samples = vec![(idx(&[0, 0]), vec![1.0]), (idx(&[2, 0]), vec![2.0])];
        let data = SparseObservationTensor::aggregate(vec![3, 1], &samples).unwrap();
        let mut cfg = cfg0(2);
        cfg.smoothness = vec![0.5, 0.0];
        let x = row_update(&model, &data, 0, 1, &cfg).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-14);
        assert!((x[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn sweep_is_a_fixed_point_at_a_block_minimum() {
        // Fully observed rank-1 data generated by the model itself with no
        // regularization: every row already minimizes its subproblem.
        let a1 = Matrix::from_rows(2, 1, vec![1.0, 2.0]);
        let a2 = Matrix::from_rows(2, 1, vec![-1.0, 0.5]);
        let model = FactorModel::new(vec![a1, a2], None).unwrap();
        let samples: Vec<_> = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| {
                let c = idx(&[i, j]);
                (c.clone(), vec![model.eval_cell(&c).unwrap()])
            })
            .collect();
        let data = SparseObservationTensor::aggregate(vec![2, 2], &samples).unwrap();
        let mut swept = model.clone();
        sweep(&mut swept, &data, &cfg0(1)).unwrap();
        for mode in 0..2 {
            for r in 0..2 {
                let before = model.factor(mode).get(r, 0);
                let after = swept.factor(mode).get(r, 0);
                assert!((before - after).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sweeps_monotonically_decrease_objective() {
        let shape = [3usize, 4, 2];
        let schema = ordinal_schema(&shape);
        let mut rng = Rng::new(99);
        let samples: Vec<_> = (0..30)
            .map(|_| {
                let c = idx(&[rng.below(3), rng.below(4), rng.below(2)]);
                (c, vec![rng.gaussian()])
            })
            .collect();
        let data = SparseObservationTensor::aggregate(shape.to_vec(), &samples).unwrap();
        let mut cfg = SolverConfig::new(2);
        cfg.ridge = 1e-3;
        cfg.smoothness = vec![1e-2; 3];
        cfg.max_sweeps = 50;
        cfg.rel_tol = 0.0;
        cfg.seed = 5;
        let (_, report) = fit(&data, &schema, &cfg).unwrap();
        for w in report.objective_trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9 * w[0].abs().max(1e-12),
                "objective increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn fit_recovers_planted_rank_two_model() {
        let shape = [5usize, 4, 3];
        let schema = ordinal_schema(&shape);
        let mut rng = Rng::new(7);
        let mut planted_factors = Vec::new();
        for &len in &shape {
            let mut m = Matrix::zeros(len, 2);
            for i in 0..len {
                for f in 0..2 {
                    m.set(i, f, rng.uniform_in(-1.0, 1.0));
                }
            }
            planted_factors.push(m);
        }
        let planted = FactorModel::new(planted_factors, None).unwrap();
        let mut samples = Vec::new();
        for i in 0..5 {
            for j in 0..4 {
                for k in 0..3 {
                    let c = idx(&[i, j, k]);
                    samples.push((c.clone(), vec![planted.eval_cell(&c).unwrap()]));
                }
            }
        }
        let data = SparseObservationTensor::aggregate(shape.to_vec(), &samples).unwrap();
        let mut cfg = SolverConfig::new(2);
        cfg.ridge = 1e-8;
        cfg.restarts = 5;
        cfg.max_sweeps = 300;
        cfg.rel_tol = 1e-12;
        cfg.seed = 11;
        let (fitted, report) = fit(&data, &schema, &cfg).unwrap();
        assert!(report.final_objective < 1e-6, "{}", report.final_objective);
        for (c, _) in &samples {
            let err = (fitted.eval_cell(c).unwrap() - planted.eval_cell(c).unwrap()).abs();
            assert!(err < 1e-3, "cell {c:?} err {err}");
        }
    }

    #[test]
    fn extra_rank_never_fits_worse() {
        let shape = [4usize, 4];
        let schema = ordinal_schema(&shape);
        let mut rng = Rng::new(13);
        let samples: Vec<_> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| (idx(&[i, j]), vec![rng.uniform_in(-2.0, 2.0)]))
            .collect();
        let data = SparseObservationTensor::aggregate(shape.to_vec(), &samples).unwrap();
        let run = |rank: usize| {
            let mut cfg = SolverConfig::new(rank);
            cfg.ridge = 1e-6;
            cfg.max_sweeps = 400;
            cfg.rel_tol = 1e-10;
            cfg.seed = 21;
            cfg.restarts = 3;
            fit(&data, &schema, &cfg).unwrap().1.final_objective
        };
        let lo = run(2);
        let hi = run(4);
        assert!(
            hi <= lo + 1e-6 * lo.max(1e-9),
            "rank 4 objective {hi} worse than rank 2 {lo}"
        );
    }

    #[test]
    fn multi_output_k1_matches_single_output_trace() {
        let shape = [3usize, 3];
        let schema = ordinal_schema(&shape);
        let mut rng = Rng::new(4);
        let samples: Vec<_> = (0..20)
            .map(|_| (idx(&[rng.below(3), rng.below(3)]), vec![rng.gaussian()]))
            .collect();
        let data = SparseObservationTensor::aggregate(shape.to_vec(), &samples).unwrap();
        let mut cfg = SolverConfig::new(2);
        cfg.seed = 31;
        cfg.max_sweeps = 40;
        let (m1, r1) = fit(&data, &schema, &cfg).unwrap();
        let (m2, r2) = fit_multi_output(&data, &schema, &cfg).unwrap();
        assert_eq!(r1.objective_trace, r2.objective_trace);
        assert_eq!(m1, m2);
        assert!(m2.output_factor().is_none());
    }

    #[test]
    fn multi_output_prediction_identity() {
        // X(i1..iN, :) = (A_1(i1,:) * ... * A_N(iN,:)) V^T, elementwise over j.
        let shape = [3usize, 2];
        let schema = ordinal_schema(&shape);
        let mut rng = Rng::new(17);
        let samples: Vec<_> = (0..3)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| {
                (
                    idx(&[i, j]),
                    vec![rng.gaussian(), rng.gaussian(), rng.gaussian()],
                )
            })
            .collect();
        let data = SparseObservationTensor::aggregate(shape.to_vec(), &samples).unwrap();
        let mut cfg = SolverConfig::new(2);
        cfg.seed = 9;
        cfg.max_sweeps = 60;
        let (model, _) = fit_multi_output(&data, &schema, &cfg).unwrap();
        let v = model.output_factor().unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let c = idx(&[i, j]);
                let mut row = vec![1.0; model.rank()];
                for (mode, &ii) in c.as_slice().iter().enumerate() {
                    for (r, value) in row.iter_mut().zip(model.factor(mode).row(ii)) {
                        *r *= value;
                    }
                }
                let preds = crate::predict::predict_vector(&model, &c).unwrap();
                for (out, pred) in preds.iter().enumerate() {
                    let direct: f64 = row.iter().zip(v.row(out)).map(|(a, b)| a * b).sum();
                    assert!((direct - pred).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn categorical_modes_get_zero_smoothness() {
        let schema = FeatureSchema::new(vec![
            Feature {
                name: "cat".into(),
                kind: FeatureKind::Categorical,
                alphabet_size: 3,
                labels: Some(vec!["a".into(), "b".into(), "c".into()]),
            },
            Feature {
                name: "ord".into(),
                kind: FeatureKind::OrdinalDiscrete,
                alphabet_size: 3,
                labels: None,
            },
        ])
        .unwrap();
        let mut rng = Rng::new(2);
        let samples: Vec<_> = (0..15)
            .map(|_| (idx(&[rng.below(3), rng.below(3)]), vec![rng.gaussian()]))
            .collect();
        let data = SparseObservationTensor::aggregate(vec![3, 3], &samples).unwrap();
        let mut cfg = SolverConfig::new(1);
        cfg.smoothness = vec![10.0, 10.0];
        cfg.max_sweeps = 30;
        let (model_a, _) = fit(&data, &schema, &cfg).unwrap();
        // Forcing mu=0 on the categorical mode by hand must give the same fit.
        cfg.smoothness = vec![0.0, 10.0];
        let (model_b, _) = fit(&data, &schema, &cfg).unwrap();
        assert_eq!(model_a, model_b);
    }
}
