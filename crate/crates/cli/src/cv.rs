//! Hyperparameter grid search by k-fold cross-validation, and the repeated
//! holdout protocol built on top of it.
//!
//! Column encoders are refitted inside every fold on that fold's training
//! rows only, so quantizer codebooks never leak validation data. Validation
//! rows with missing predictors are scored through the
//! conditional-expectation path; rows with missing responses are skipped.

use std::path::Path;

use cpreg_core::predict;
use cpreg_core::solver::{self, DifferenceKind, SolverConfig};
use cpreg_core::split;
use cpreg_core::tensor::SparseObservationTensor;

use crate::dataset::Dataset;
use crate::error::{CliError, Result};
use crate::ingest::{fit_encoders, Encoders};
use crate::schema_file::SchemaSpec;

/// Hyperparameter grid; the default mirrors the documented search space.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub ranks: Vec<usize>,
    pub ridges: Vec<f64>,
    pub smoothness: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            ranks: vec![2, 5, 10, 20, 40],
            ridges: vec![1e-4, 1e-3, 1e-2, 1e-1],
            smoothness: vec![0.0, 1e-3, 1e-2, 1e-1, 1.0],
        }
    }
}

/// Shared solver/ingestion settings for every grid cell.
#[derive(Debug, Clone)]
pub struct CvOptions {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub alphabet: usize,
    pub difference: DifferenceKind,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub restarts: usize,
    pub init_scale: f64,
    pub normalize: bool,
    pub smoothing_alpha: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            folds: 5,
            repeats: 1,
            seed: 0,
            alphabet: crate::ingest::DEFAULT_ALPHABET,
            difference: DifferenceKind::First,
            max_sweeps: 200,
            rel_tol: 1e-5,
            restarts: 1,
            init_scale: 1.0,
            normalize: true,
            smoothing_alpha: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub rank: usize,
    pub ridge: f64,
    pub smoothness: f64,
}

#[derive(Debug, Clone)]
pub struct CellScore {
    pub cell: GridCell,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct CvTable {
    pub cells: Vec<CellScore>,
    pub best: GridCell,
}

fn solver_config(cell: &GridCell, n_modes: usize, opts: &CvOptions) -> SolverConfig {
    SolverConfig {
        rank: cell.rank,
        ridge: cell.ridge,
        smoothness: vec![cell.smoothness; n_modes],
        output_smoothness: 0.0,
        difference: opts.difference,
        max_sweeps: opts.max_sweeps,
        rel_tol: opts.rel_tol,
        restarts: opts.restarts,
        init_scale: opts.init_scale,
        seed: opts.seed,
        normalize: opts.normalize,
    }
}

/// Fit on `train_rows`, score on `eval_rows`; returns the pooled RMSE, or
/// `None` when no evaluation row has complete responses.
pub fn fit_and_score(
    dataset: &Dataset,
    spec: &SchemaSpec,
    schema_path: &Path,
    train_rows: &[usize],
    eval_rows: &[usize],
    cfg_for: impl Fn(&Encoders) -> SolverConfig,
    opts: &CvOptions,
) -> Result<Option<f64>> {
    let (encoders, _) = fit_encoders(dataset, spec, schema_path, opts.alphabet, train_rows)?;
    let (samples, _, _) = encoders.encode_training(dataset, train_rows)?;
    if samples.is_empty() {
        return Err(CliError::DataFile {
            path: dataset.path.clone(),
            message: "no usable training rows (every row has missing cells)".into(),
        });
    }
    let data = SparseObservationTensor::aggregate(encoders.schema.shape(), &samples)?;
    let cfg = cfg_for(&encoders);
    let (model, _) = solver::fit_multi_output(&data, &encoders.schema, &cfg)?;
    let marginals = encoders.fit_marginals(&samples, opts.smoothing_alpha)?;

    let mut predictions = Vec::new();
    let mut targets = Vec::new();
    for &row in eval_rows {
        let encoded = encoders.encode_row(dataset, row)?;
        if encoded.responses.iter().any(Option::is_none) || encoded.responses.is_empty() {
            continue;
        }
        let pred = predict::predict_partial(&model, &encoded.index, &marginals)?;
        predictions.push(pred);
        targets.push(encoded.responses.into_iter().flatten().collect());
    }
    if predictions.is_empty() {
        return Ok(None);
    }
    Ok(Some(predict::rmse(&predictions, &targets)?))
}

/// Cross-validate every grid cell over `repeats` reshuffled k-fold splits of
/// `rows`. Encoders are refitted once per fold and shared across cells.
pub fn grid_search(
    dataset: &Dataset,
    spec: &SchemaSpec,
    schema_path: &Path,
    rows: &[usize],
    grid: &GridSpec,
    opts: &CvOptions,
) -> Result<CvTable> {
    if grid.ranks.is_empty() || grid.ridges.is_empty() || grid.smoothness.is_empty() {
        return Err(CliError::Usage("empty hyperparameter grid".into()));
    }
    let cells: Vec<GridCell> = grid
        .ranks
        .iter()
        .flat_map(|&rank| {
            grid.ridges.iter().flat_map(move |&ridge| {
                grid.smoothness.iter().map(move |&smoothness| GridCell {
                    rank,
                    ridge,
                    smoothness,
                })
            })
        })
        .collect();
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); cells.len()];

    for repeat in 0..opts.repeats {
        let folds = split::kfold(
            rows.len(),
            opts.folds,
            opts.seed.wrapping_add(repeat as u64),
        )?;
        for (train_local, val_local) in folds {
            let train_rows: Vec<usize> = train_local.iter().map(|&i| rows[i]).collect();
            let val_rows: Vec<usize> = val_local.iter().map(|&i| rows[i]).collect();
            // One encoder fit per fold, shared by every grid cell.
            let (encoders, _) =
                fit_encoders(dataset, spec, schema_path, opts.alphabet, &train_rows)?;
            let (samples, _, _) = encoders.encode_training(dataset, &train_rows)?;
            if samples.is_empty() {
                return Err(CliError::DataFile {
                    path: dataset.path.clone(),
                    message: "a cross-validation fold has no usable training rows".into(),
                });
            }
            let data = SparseObservationTensor::aggregate(encoders.schema.shape(), &samples)?;
            let marginals = encoders.fit_marginals(&samples, opts.smoothing_alpha)?;
            let mut encoded_val = Vec::new();
            for &row in &val_rows {
                let e = encoders.encode_row(dataset, row)?;
                if e.responses.iter().all(Option::is_some) && !e.responses.is_empty() {
                    encoded_val.push(e);
                }
            }
            if encoded_val.is_empty() {
                continue;
            }
            for (cell, sink) in cells.iter().zip(&mut scores) {
                let cfg = solver_config(cell, encoders.schema.n_modes(), opts);
                let (model, _) = solver::fit_multi_output(&data, &encoders.schema, &cfg)?;
                let mut predictions = Vec::with_capacity(encoded_val.len());
                let mut targets = Vec::with_capacity(encoded_val.len());
                for e in &encoded_val {
                    predictions.push(predict::predict_partial(&model, &e.index, &marginals)?);
                    targets.push(e.responses.iter().map(|r| r.unwrap()).collect());
                }
                sink.push(predict::rmse(&predictions, &targets)?);
            }
        }
    }

    let mut table = Vec::with_capacity(cells.len());
    for (cell, rmses) in cells.iter().zip(&scores) {
        if rmses.is_empty() {
            return Err(CliError::DataFile {
                path: dataset.path.clone(),
                message: "cross-validation produced no scored folds".into(),
            });
        }
        let mean = rmses.iter().sum::<f64>() / rmses.len() as f64;
        let var = rmses.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / rmses.len() as f64;
        table.push(CellScore {
            cell: *cell,
            mean_rmse: mean,
            std_rmse: var.sqrt(),
            evaluations: rmses.len(),
        });
    }
    let best = table
        .iter()
        .min_by(|a, b| a.mean_rmse.partial_cmp(&b.mean_rmse).unwrap())
        .expect("non-empty grid")
        .cell;
    Ok(CvTable { cells: table, best })
}

#[derive(Debug, Clone)]
pub struct HoldoutOutcome {
    pub rmses: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Repeated train/test evaluation of one hyperparameter cell: each repeat
/// reshuffles the split, refits encoders and model on the training side, and
/// scores the held-out side.
pub fn repeated_holdout(
    dataset: &Dataset,
    spec: &SchemaSpec,
    schema_path: &Path,
    rows: &[usize],
    cell: &GridCell,
    train_fraction: f64,
    opts: &CvOptions,
) -> Result<HoldoutOutcome> {
    let mut rmses = Vec::with_capacity(opts.repeats);
    for repeat in 0..opts.repeats {
        let (train_local, test_local) = split::train_test_split(
            rows.len(),
            train_fraction,
            opts.seed.wrapping_add(repeat as u64),
        )?;
        let train_rows: Vec<usize> = train_local.iter().map(|&i| rows[i]).collect();
        let test_rows: Vec<usize> = test_local.iter().map(|&i| rows[i]).collect();
        let score = fit_and_score(
            dataset,
            spec,
            schema_path,
            &train_rows,
            &test_rows,
            |encoders| solver_config(cell, encoders.schema.n_modes(), opts),
            opts,
        )?;
        match score {
            Some(r) => rmses.push(r),
            None => {
                return Err(CliError::DataFile {
                    path: dataset.path.clone(),
                    message: "a holdout repeat had no scorable test rows".into(),
                })
            }
        }
    }
    let mean = rmses.iter().sum::<f64>() / rmses.len() as f64;
    let var = rmses.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / rmses.len() as f64;
    Ok(HoldoutOutcome {
        rmses,
        mean,
        std: var.sqrt(),
    })
}
