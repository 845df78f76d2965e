//! The self-contained model file: schema, codebooks, factors, marginals,
//! solver settings, and fit report, as versioned JSON with full-precision
//! floats. Prediction needs nothing but this file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use cpreg_core::matrix::Matrix;
use cpreg_core::model::FactorModel;
use cpreg_core::quantizer::Quantizer;
use cpreg_core::schema::{Feature, FeatureKind, FeatureSchema};
use cpreg_core::solver::{DifferenceKind, FitReport, SolverConfig};
use cpreg_core::tensor::MarginalSet;

use crate::error::{CliError, Result};
use crate::ingest::Encoders;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub features: Vec<FeatureRecord>,
    pub responses: Vec<String>,
    /// One `I_n x F` factor per mode, rows outer.
    pub factors: Vec<Vec<Vec<f64>>>,
    /// `K x F` output factor for multi-output models.
    pub output_factor: Option<Vec<Vec<f64>>>,
    pub marginals: Vec<Vec<f64>>,
    pub config: ConfigRecord,
    pub report: ReportRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub name: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub rank: usize,
    pub ridge: f64,
    pub smoothness: Vec<f64>,
    pub output_smoothness: f64,
    pub difference: String,
    pub max_sweeps: usize,
    pub rel_tol: f64,
    pub restarts: usize,
    pub init_scale: f64,
    pub seed: u64,
    pub normalize: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRecord {
    pub final_objective: f64,
    pub sweeps: usize,
    pub restart: usize,
    pub min_norm_fallbacks: u64,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], path: &Path) -> Result<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Artifact {
            path: path.to_path_buf(),
            message: "malformed factor matrix".into(),
        });
    }
    Ok(Matrix::from_rows(r, c, rows.concat()))
}

impl ModelArtifact {
    pub fn assemble(
        encoders: &Encoders,
        model: &FactorModel,
        marginals: &MarginalSet,
        cfg: &SolverConfig,
        report: &FitReport,
    ) -> ModelArtifact {
        let features = encoders
            .schema
            .features()
            .iter()
            .enumerate()
            .map(|(mode, f)| FeatureRecord {
                name: f.name.clone(),
                kind: match f.kind {
                    FeatureKind::Categorical => "categorical".into(),
                    FeatureKind::OrdinalDiscrete => "ordinal".into(),
                    FeatureKind::Continuous => "continuous".into(),
                },
                levels: encoders.quantizers[mode]
                    .as_ref()
                    .map(|q| q.levels().to_vec()),
                labels: f.labels.clone(),
            })
            .collect();
        ModelArtifact {
            format_version: FORMAT_VERSION,
            features,
            responses: encoders.response_names.clone(),
            factors: model.factors().iter().map(matrix_to_rows).collect(),
            output_factor: model.output_factor().map(matrix_to_rows),
            marginals: marginals.as_slices().to_vec(),
            config: ConfigRecord {
                rank: cfg.rank,
                ridge: cfg.ridge,
                smoothness: cfg.smoothness.clone(),
                output_smoothness: cfg.output_smoothness,
                difference: match cfg.difference {
                    DifferenceKind::First => "first".into(),
                    DifferenceKind::Second => "second".into(),
                },
                max_sweeps: cfg.max_sweeps,
                rel_tol: cfg.rel_tol,
                restarts: cfg.restarts,
                init_scale: cfg.init_scale,
                seed: cfg.seed,
                normalize: cfg.normalize,
            },
            report: ReportRecord {
                final_objective: report.final_objective,
                sweeps: report.sweeps,
                restart: report.restart,
                min_norm_fallbacks: report.min_norm_fallbacks,
                converged: report.converged,
                objective_trace: report.objective_trace.clone(),
            },
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Artifact {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        text.push('\n');
        std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<ModelArtifact> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let artifact: ModelArtifact =
            serde_json::from_str(&text).map_err(|e| CliError::Artifact {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        if artifact.format_version != FORMAT_VERSION {
            return Err(CliError::Artifact {
                path: path.to_path_buf(),
                message: format!(
                    "format version {} is not supported (this build reads {})",
                    artifact.format_version, FORMAT_VERSION
                ),
            });
        }
        Ok(artifact)
    }

    /// Rebuild the in-memory pieces needed to answer queries.
    pub fn instantiate(&self, path: &Path) -> Result<(Encoders, FactorModel, MarginalSet)> {
        let bad = |message: String| CliError::Artifact {
            path: path.to_path_buf(),
            message,
        };
        let mut features = Vec::with_capacity(self.features.len());
        let mut quantizers = Vec::with_capacity(self.features.len());
        for rec in &self.features {
            let kind = match rec.kind.as_str() {
                "categorical" => FeatureKind::Categorical,
                "ordinal" => FeatureKind::OrdinalDiscrete,
                "continuous" => FeatureKind::Continuous,
                other => return Err(bad(format!("unknown feature kind '{other}'"))),
            };
            let (alphabet_size, quantizer) = match kind {
                FeatureKind::Categorical => {
                    let labels = rec
                        .labels
                        .as_ref()
                        .ok_or_else(|| bad(format!("feature '{}' lacks labels", rec.name)))?;
                    (labels.len(), None)
                }
                _ => {
                    let levels = rec
                        .levels
                        .as_ref()
                        .ok_or_else(|| bad(format!("feature '{}' lacks levels", rec.name)))?;
                    let q = Quantizer::from_levels(levels.clone())
                        .map_err(|e| bad(format!("feature '{}': {e}", rec.name)))?;
                    (q.n_levels(), Some(q))
                }
            };
            features.push(Feature {
                name: rec.name.clone(),
                kind,
                alphabet_size,
                labels: rec.labels.clone(),
            });
            quantizers.push(quantizer);
        }
        let schema = FeatureSchema::new(features).map_err(|e| bad(e.to_string()))?;

        let mut factor_matrices = Vec::with_capacity(self.factors.len());
        for rows in &self.factors {
            factor_matrices.push(rows_to_matrix(rows, path)?);
        }
        let output_factor = match &self.output_factor {
            None => None,
            Some(rows) => Some(rows_to_matrix(rows, path)?),
        };
        let model =
            FactorModel::new(factor_matrices, output_factor).map_err(|e| bad(e.to_string()))?;
        if model.n_modes() != schema.n_modes() || model.shape() != schema.shape() {
            return Err(bad("factor shapes disagree with the feature schema".into()));
        }
        let marginals = MarginalSet::new(self.marginals.clone()).map_err(|e| bad(e.to_string()))?;
        if marginals.n_modes() != schema.n_modes() {
            return Err(bad(
                "marginal count disagrees with the feature schema".into()
            ));
        }

        // Feature/response column positions are not meaningful when loading
        // from an artifact; queries re-match by header name.
        let encoders = Encoders {
            feature_columns: (0..schema.n_modes()).collect(),
            response_columns: Vec::new(),
            response_names: self.responses.clone(),
            schema,
            quantizers,
        };
        Ok((encoders, model, marginals))
    }

    pub fn solver_config(&self, path: &Path) -> Result<SolverConfig> {
        let difference = match self.config.difference.as_str() {
            "first" => DifferenceKind::First,
            "second" => DifferenceKind::Second,
            other => {
                return Err(CliError::Artifact {
                    path: path.to_path_buf(),
                    message: format!("unknown difference kind '{other}'"),
                })
            }
        };
        Ok(SolverConfig {
            rank: self.config.rank,
            ridge: self.config.ridge,
            smoothness: self.config.smoothness.clone(),
            output_smoothness: self.config.output_smoothness,
            difference,
            max_sweeps: self.config.max_sweeps,
            rel_tol: self.config.rel_tol,
            restarts: self.config.restarts,
            init_scale: self.config.init_scale,
            seed: self.config.seed,
            normalize: self.config.normalize,
        })
    }
}
