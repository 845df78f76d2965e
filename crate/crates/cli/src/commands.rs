//! Implementations behind the CLI subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use cpreg_core::predict;
use cpreg_core::solver::{self, DifferenceKind, SolverConfig};
use cpreg_core::tensor::SparseObservationTensor;

use crate::artifact::ModelArtifact;
use crate::cv::{self, CvOptions, GridCell, GridSpec};
use crate::dataset::Dataset;
use crate::error::{CliError, Result};
use crate::ingest::{fit_encoders, Encoders};
use crate::schema_file::SchemaSpec;

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub output: PathBuf,
    pub rank: usize,
    pub ridge: f64,
    pub smoothness: f64,
    pub difference: DifferenceKind,
    pub alphabet: usize,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub init_scale: f64,
    pub normalize: bool,
    pub smoothing_alpha: f64,
}

fn solver_config(opts: &FitOptions, n_modes: usize) -> SolverConfig {
    SolverConfig {
        rank: opts.rank,
        ridge: opts.ridge,
        smoothness: vec![opts.smoothness; n_modes],
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

pub fn cmd_fit(opts: &FitOptions, out: &mut impl Write) -> Result<()> {
    let dataset = Dataset::load(&opts.data)?;
    let spec = SchemaSpec::load(&opts.schema)?;
    let rows: Vec<usize> = (0..dataset.n_rows()).collect();
    let (encoders, ingest_report) =
        fit_encoders(&dataset, &spec, &opts.schema, opts.alphabet, &rows)?;
    let (samples, dropped_features, dropped_responses) =
        encoders.encode_training(&dataset, &rows)?;
    if samples.is_empty() {
        return Err(CliError::DataFile {
            path: opts.data.clone(),
            message: "no usable training rows".into(),
        });
    }
    for (name, requested, used) in &ingest_report.reduced_alphabets {
        writeln!(
            out,
            "note: column '{name}' has {used} distinct values; alphabet {requested} -> {used}"
        )
        .ok();
    }
    let data = SparseObservationTensor::aggregate(encoders.schema.shape(), &samples)?;
    let cfg = solver_config(opts, encoders.schema.n_modes());
    let (model, report) = solver::fit_multi_output(&data, &encoders.schema, &cfg)?;
    let marginals = encoders.fit_marginals(&samples, opts.smoothing_alpha)?;

    let mut predictions = Vec::with_capacity(samples.len());
    let mut targets = Vec::with_capacity(samples.len());
    for (idx, y) in &samples {
        predictions.push(predict::predict_vector(&model, idx)?);
        targets.push(y.clone());
    }
    let train_rmse = predict::rmse(&predictions, &targets)?;

    let artifact = ModelArtifact::assemble(&encoders, &model, &marginals, &cfg, &report);
    artifact.save(&opts.output)?;

    writeln!(
        out,
        "rows: {} read, {} used, {} dropped (missing predictors), {} dropped (missing response)",
        dataset.n_rows(),
        samples.iter().map(|_| 1usize).sum::<usize>(),
        dropped_features,
        dropped_responses
    )
    .ok();
    writeln!(
        out,
        "grid: {} modes, shape {:?}, {} observed cells, {} samples",
        encoders.schema.n_modes(),
        encoders.schema.shape(),
        data.n_cells(),
        data.total_weight()
    )
    .ok();
    writeln!(
        out,
        "objective: {:.6e} -> {:.6e} in {} sweeps (restart {}, {})",
        report.objective_trace.first().unwrap(),
        report.final_objective,
        report.sweeps,
        report.restart,
        if report.converged {
            "converged"
        } else {
            "sweep limit"
        }
    )
    .ok();
    if report.min_norm_fallbacks > 0 {
        writeln!(
            out,
            "note: {} row updates used the minimum-norm fallback",
            report.min_norm_fallbacks
        )
        .ok();
    }
    writeln!(out, "train rmse: {train_rmse:.6}").ok();
    writeln!(out, "model written to {}", opts.output.display()).ok();
    Ok(())
}

fn load_model(path: &Path) -> Result<(Encoders, cpreg_core::FactorModel, cpreg_core::MarginalSet)> {
    let artifact = ModelArtifact::load(path)?;
    artifact.instantiate(path)
}

pub fn cmd_predict(model_path: &Path, input_path: &Path, output_path: &Path) -> Result<()> {
    let (mut encoders, model, marginals) = load_model(model_path)?;
    let dataset = Dataset::load(input_path)?;
    encoders.bind(&dataset, false)?;

    let mut writer = csv::Writer::from_path(output_path).map_err(|e| CliError::Io {
        path: output_path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let header: Vec<String> = encoders
        .response_names
        .iter()
        .map(|n| format!("predicted {n}"))
        .collect();
    writer
        .write_record(&header)
        .map_err(write_err(output_path))?;
    for row in 0..dataset.n_rows() {
        let encoded = encoders.encode_row(&dataset, row)?;
        let pred = predict::predict_partial(&model, &encoded.index, &marginals)?;
        let record: Vec<String> = pred.iter().map(|v| format!("{v}")).collect();
        writer
            .write_record(&record)
            .map_err(write_err(output_path))?;
    }
    writer.flush().map_err(|source| CliError::Io {
        path: output_path.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn write_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

pub fn cmd_evaluate(model_path: &Path, test_path: &Path, out: &mut impl Write) -> Result<()> {
    let (mut encoders, model, marginals) = load_model(model_path)?;
    let dataset = Dataset::load(test_path)?;
    encoders.bind(&dataset, true)?;

    let mut predictions = Vec::new();
    let mut targets = Vec::new();
    let mut dropped = 0usize;
    for row in 0..dataset.n_rows() {
        let encoded = encoders.encode_row(&dataset, row)?;
        if encoded.responses.iter().any(Option::is_none) {
            dropped += 1;
            continue;
        }
        predictions.push(predict::predict_partial(
            &model,
            &encoded.index,
            &marginals,
        )?);
        targets.push(
            encoded
                .responses
                .into_iter()
                .flatten()
                .collect::<Vec<f64>>(),
        );
    }
    if predictions.is_empty() {
        return Err(CliError::DataFile {
            path: test_path.to_path_buf(),
            message: "no rows with complete responses to evaluate".into(),
        });
    }
    let pooled = predict::rmse(&predictions, &targets)?;
    writeln!(
        out,
        "rows: {} evaluated, {} dropped (missing response)",
        predictions.len(),
        dropped
    )
    .ok();
    writeln!(out, "rmse: {pooled:.6}").ok();
    if encoders.response_names.len() > 1 {
        for (j, name) in encoders.response_names.iter().enumerate() {
            let p: Vec<f64> = predictions.iter().map(|v| v[j]).collect();
            let t: Vec<f64> = targets.iter().map(|v| v[j]).collect();
            writeln!(out, "rmse[{name}]: {:.6}", predict::rmse_scalar(&p, &t)?).ok();
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CvCommandOptions {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub grid: GridSpec,
    pub cv: CvOptions,
    pub train_fraction: Option<f64>,
    pub holdout_restarts: usize,
    pub table_out: Option<PathBuf>,
}

pub fn cmd_cv(opts: &CvCommandOptions, out: &mut impl Write) -> Result<()> {
    let dataset = Dataset::load(&opts.data)?;
    let spec = SchemaSpec::load(&opts.schema)?;
    let all_rows: Vec<usize> = (0..dataset.n_rows()).collect();

    // With a holdout fraction, hyperparameters are selected on the first
    // repeat's training share and the held-out share stays untouched.
    let (cv_rows, holdout) = match opts.train_fraction {
        None => (all_rows.clone(), None),
        Some(frac) => {
            let (train_local, _) =
                cpreg_core::split::train_test_split(all_rows.len(), frac, opts.cv.seed)?;
            let train_rows: Vec<usize> = train_local.iter().map(|&i| all_rows[i]).collect();
            (train_rows, Some(frac))
        }
    };

    let table = cv::grid_search(
        &dataset,
        &spec,
        &opts.schema,
        &cv_rows,
        &opts.grid,
        &opts.cv,
    )?;

    writeln!(out, "rank\tridge\tsmoothness\tmean_rmse\tstd_rmse\tevals").ok();
    for score in &table.cells {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.6}\t{:.6}\t{}",
            score.cell.rank,
            score.cell.ridge,
            score.cell.smoothness,
            score.mean_rmse,
            score.std_rmse,
            score.evaluations
        )
        .ok();
    }
    writeln!(
        out,
        "best: rank={} ridge={} smoothness={}",
        table.best.rank, table.best.ridge, table.best.smoothness
    )
    .ok();

    if let Some(path) = &opts.table_out {
        write_table_csv(path, &table)?;
        writeln!(out, "table written to {}", path.display()).ok();
    }

    if let Some(frac) = holdout {
        let mut ho_opts = opts.cv.clone();
        ho_opts.restarts = opts.holdout_restarts;
        let outcome = cv::repeated_holdout(
            &dataset,
            &spec,
            &opts.schema,
            &all_rows,
            &table.best,
            frac,
            &ho_opts,
        )?;
        writeln!(
            out,
            "holdout rmse over {} repeats (train fraction {}): {:.6} +/- {:.6}",
            outcome.rmses.len(),
            frac,
            outcome.mean,
            outcome.std
        )
        .ok();
    }
    Ok(())
}

fn write_table_csv(path: &Path, table: &cv::CvTable) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    writer
        .write_record([
            "rank",
            "ridge",
            "smoothness",
            "mean_rmse",
            "std_rmse",
            "evals",
        ])
        .map_err(write_err(path))?;
    for s in &table.cells {
        writer
            .write_record([
                s.cell.rank.to_string(),
                s.cell.ridge.to_string(),
                s.cell.smoothness.to_string(),
                format!("{:.6}", s.mean_rmse),
                format!("{:.6}", s.std_rmse),
                s.evaluations.to_string(),
            ])
            .map_err(write_err(path))?;
    }
    writer.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Convenience used by tests: fit a model in memory from CSV + schema paths.
pub fn fit_in_memory(
    data_path: &Path,
    schema_path: &Path,
    cell: &GridCell,
    opts: &CvOptions,
    rows: Option<&[usize]>,
) -> Result<(Encoders, cpreg_core::FactorModel, cpreg_core::MarginalSet)> {
    let dataset = Dataset::load(data_path)?;
    let spec = SchemaSpec::load(schema_path)?;
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..dataset.n_rows()).collect();
            &all
        }
    };
    let (encoders, _) = fit_encoders(&dataset, &spec, schema_path, opts.alphabet, rows)?;
    let (samples, _, _) = encoders.encode_training(&dataset, rows)?;
    let data = SparseObservationTensor::aggregate(encoders.schema.shape(), &samples)?;
    let cfg = SolverConfig {
        rank: cell.rank,
        ridge: cell.ridge,
        smoothness: vec![cell.smoothness; encoders.schema.n_modes()],
        output_smoothness: 0.0,
        difference: opts.difference,
        max_sweeps: opts.max_sweeps,
        rel_tol: opts.rel_tol,
        restarts: opts.restarts,
        init_scale: opts.init_scale,
        seed: opts.seed,
        normalize: opts.normalize,
    };
    let (model, _) = solver::fit_multi_output(&data, &encoders.schema, &cfg)?;
    let marginals = encoders.fit_marginals(&samples, opts.smoothing_alpha)?;
    Ok((encoders, model, marginals))
}
