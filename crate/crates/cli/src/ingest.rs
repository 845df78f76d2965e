//! Fitting column encoders on training data and mapping raw rows onto the
//! discretized grid.
//!
//! Encoders are fitted on the training split only; test-time values go
//! through the frozen codebooks. Continuous columns get a Lloyd-Max
//! quantizer (alphabet reduced to the distinct-value count when the data
//! cannot support the requested size), ordinal columns use their sorted
//! distinct values as levels, and categorical columns get a sorted label
//! table. At encode time a missing cell, or a categorical label never seen
//! in training, becomes a missing mode routed through the
//! conditional-expectation predictor.

use std::path::Path;

use cpreg_core::model::CellIndex;
use cpreg_core::predict::{IndexEntry, PartialIndex};
use cpreg_core::quantizer::Quantizer;
use cpreg_core::schema::{Feature, FeatureKind, FeatureSchema};
use cpreg_core::tensor::{MarginalSet, SampleSet};

use crate::dataset::Dataset;
use crate::error::{CliError, Result};
use crate::schema_file::{ColumnRole, SchemaSpec};

/// Default alphabet size for continuous predictors.
pub const DEFAULT_ALPHABET: usize = 25;

/// Fitted per-column encoders plus the core schema they imply.
#[derive(Debug, Clone)]
pub struct Encoders {
    /// CSV column index of each mode, in CSV order.
    pub feature_columns: Vec<usize>,
    /// CSV column indices of the responses, in CSV order.
    pub response_columns: Vec<usize>,
    pub response_names: Vec<String>,
    pub schema: FeatureSchema,
    /// One quantizer per mode for numeric columns; `None` for categorical.
    pub quantizers: Vec<Option<Quantizer>>,
}

/// Notes produced while fitting encoders.
#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    /// (column, requested, used) for continuous columns whose alphabet had
    /// to shrink to the distinct-value count.
    pub reduced_alphabets: Vec<(String, usize, usize)>,
}

/// One encoded row: per-mode index entries (possibly missing) and the
/// response cells that were present.
#[derive(Debug, Clone)]
pub struct EncodedRow {
    pub index: PartialIndex,
    pub responses: Vec<Option<f64>>,
}

fn parse_number(dataset: &Dataset, row: usize, column: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| CliError::Data {
        path: dataset.path.clone(),
        row: row + 2,
        column: column.to_string(),
        message: format!("'{raw}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(CliError::Data {
            path: dataset.path.clone(),
            row: row + 2,
            column: column.to_string(),
            message: "non-finite value".into(),
        });
    }
    Ok(v)
}

/// Match the schema spec against the CSV header, requiring them to agree
/// exactly, and return `(feature_columns, response_columns)` in CSV order.
pub fn match_columns(
    dataset: &Dataset,
    spec: &SchemaSpec,
    schema_path: &Path,
) -> Result<(Vec<usize>, Vec<usize>)> {
    for (name, _) in &spec.entries {
        if dataset.column_index(name).is_none() {
            return Err(CliError::DataFile {
                path: dataset.path.clone(),
                message: format!(
                    "column '{name}' declared in {} is not in the CSV header",
                    schema_path.display()
                ),
            });
        }
    }
    let mut features = Vec::new();
    let mut responses = Vec::new();
    for (col, header) in dataset.headers.iter().enumerate() {
        match spec.role(header) {
            None => {
                return Err(CliError::DataFile {
                    path: dataset.path.clone(),
                    message: format!(
                        "CSV column '{header}' is not declared in {}",
                        schema_path.display()
                    ),
                })
            }
            Some(ColumnRole::Feature { .. }) => features.push(col),
            Some(ColumnRole::Response) => responses.push(col),
            Some(ColumnRole::Ignore) => {}
        }
    }
    if features.is_empty() {
        return Err(CliError::DataFile {
            path: dataset.path.clone(),
            message: "schema declares no feature columns".into(),
        });
    }
    if responses.is_empty() {
        return Err(CliError::DataFile {
            path: dataset.path.clone(),
            message: "schema declares no response column".into(),
        });
    }
    Ok((features, responses))
}

/// Fit all column encoders on the rows selected by `row_ids`.
pub fn fit_encoders(
    dataset: &Dataset,
    spec: &SchemaSpec,
    schema_path: &Path,
    default_alphabet: usize,
    row_ids: &[usize],
) -> Result<(Encoders, IngestReport)> {
    let (feature_columns, response_columns) = match_columns(dataset, spec, schema_path)?;
    let mut features = Vec::with_capacity(feature_columns.len());
    let mut quantizers = Vec::with_capacity(feature_columns.len());
    let mut report = IngestReport::default();

    for &col in &feature_columns {
        let name = dataset.headers[col].clone();
        let role = spec.role(&name).expect("matched above");
        let ColumnRole::Feature { kind, alphabet } = role else {
            unreachable!()
        };
        let mut raw: Vec<(usize, &str)> = Vec::new();
        for &r in row_ids {
            if let Some(cell) = &dataset.rows[r][col] {
                raw.push((r, cell.as_str()));
            }
        }
        if raw.is_empty() {
            return Err(CliError::DataFile {
                path: dataset.path.clone(),
                message: format!("column '{name}' has no observed training values"),
            });
        }
        match kind {
            FeatureKind::Categorical => {
                let mut labels: Vec<String> = raw.iter().map(|(_, s)| s.to_string()).collect();
                labels.sort_unstable();
                labels.dedup();
                features.push(Feature {
                    name,
                    kind: FeatureKind::Categorical,
                    alphabet_size: labels.len(),
                    labels: Some(labels),
                });
                quantizers.push(None);
            }
            FeatureKind::OrdinalDiscrete => {
                let mut values = Vec::with_capacity(raw.len());
                for (r, s) in &raw {
                    values.push(parse_number(dataset, *r, &name, s)?);
                }
                values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                values.dedup();
                let q = Quantizer::from_levels(values)?;
                features.push(Feature {
                    name,
                    kind: FeatureKind::OrdinalDiscrete,
                    alphabet_size: q.n_levels(),
                    labels: None,
                });
                quantizers.push(Some(q));
            }
            FeatureKind::Continuous => {
                let mut values = Vec::with_capacity(raw.len());
                for (r, s) in &raw {
                    values.push(parse_number(dataset, *r, &name, s)?);
                }
                let requested = alphabet.unwrap_or(default_alphabet);
                let mut distinct = values.clone();
                distinct.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                distinct.dedup();
                let q = if distinct.len() <= requested {
                    // Degenerate for Lloyd-Max: one level per distinct value
                    // is already lossless.
                    if distinct.len() < requested {
                        report
                            .reduced_alphabets
                            .push((name.clone(), requested, distinct.len()));
                    }
                    Quantizer::from_levels(distinct)?
                } else {
                    Quantizer::lloyd_max(&values, requested, 200, 1e-12)?.quantizer
                };
                features.push(Feature {
                    name,
                    kind: FeatureKind::Continuous,
                    alphabet_size: q.n_levels(),
                    labels: None,
                });
                quantizers.push(Some(q));
            }
        }
    }

    let response_names = response_columns
        .iter()
        .map(|&c| dataset.headers[c].clone())
        .collect();
    let schema = FeatureSchema::new(features)?;
    Ok((
        Encoders {
            feature_columns,
            response_columns,
            response_names,
            schema,
            quantizers,
        },
        report,
    ))
}

impl Encoders {
    pub fn n_modes(&self) -> usize {
        self.feature_columns.len()
    }

    /// Re-match feature (and optionally response) columns against a new CSV
    /// header by name; used when a loaded model meets a prediction or
    /// evaluation file whose column order differs from the training file.
    pub fn bind(&mut self, dataset: &Dataset, need_responses: bool) -> Result<()> {
        let mut feature_columns = Vec::with_capacity(self.schema.n_modes());
        for f in self.schema.features() {
            match dataset.column_index(&f.name) {
                Some(col) => feature_columns.push(col),
                None => {
                    return Err(CliError::DataFile {
                        path: dataset.path.clone(),
                        message: format!("missing predictor column '{}'", f.name),
                    })
                }
            }
        }
        let mut response_columns = Vec::with_capacity(self.response_names.len());
        for name in &self.response_names {
            match dataset.column_index(name) {
                Some(col) => response_columns.push(col),
                None if need_responses => {
                    return Err(CliError::DataFile {
                        path: dataset.path.clone(),
                        message: format!("missing response column '{name}'"),
                    })
                }
                None => {}
            }
        }
        if !need_responses && response_columns.len() != self.response_names.len() {
            // A prediction file may omit response columns entirely, but a
            // partial subset would silently misalign them.
            if !response_columns.is_empty() {
                return Err(CliError::DataFile {
                    path: dataset.path.clone(),
                    message: "input declares some but not all response columns".into(),
                });
            }
        }
        self.feature_columns = feature_columns;
        self.response_columns = response_columns;
        Ok(())
    }

    pub fn n_outputs(&self) -> usize {
        self.response_columns.len()
    }

    /// Encode one raw row against the frozen codebooks.
    pub fn encode_row(&self, dataset: &Dataset, row: usize) -> Result<EncodedRow> {
        let cells = &dataset.rows[row];
        let mut entries = Vec::with_capacity(self.n_modes());
        for (mode, &col) in self.feature_columns.iter().enumerate() {
            let feature = self.schema.feature(mode);
            let entry = match &cells[col] {
                None => IndexEntry::Missing,
                Some(raw) => match feature.kind {
                    FeatureKind::Categorical => match feature.label_level(raw) {
                        Some(level) => IndexEntry::Known(level),
                        // Unseen label: the model has no row for it, so it is
                        // treated as a missing predictor.
                        None => IndexEntry::Missing,
                    },
                    _ => {
                        let v = parse_number(dataset, row, &feature.name, raw)?;
                        let q = self.quantizers[mode].as_ref().expect("numeric mode");
                        IndexEntry::Known(q.encode(v))
                    }
                },
            };
            entries.push(entry);
        }
        let mut responses = Vec::with_capacity(self.n_outputs());
        for &col in &self.response_columns {
            match &cells[col] {
                None => responses.push(None),
                Some(raw) => {
                    let name = &dataset.headers[col];
                    responses.push(Some(parse_number(dataset, row, name, raw)?));
                }
            }
        }
        Ok(EncodedRow {
            index: PartialIndex::new(entries),
            responses,
        })
    }

    /// Encode training rows, dropping rows with missing predictors or
    /// missing responses. Returns `(samples, dropped_features, dropped_responses)`.
    pub fn encode_training(
        &self,
        dataset: &Dataset,
        row_ids: &[usize],
    ) -> Result<(SampleSet, usize, usize)> {
        let mut samples = Vec::with_capacity(row_ids.len());
        let mut dropped_features = 0;
        let mut dropped_responses = 0;
        for &r in row_ids {
            let encoded = self.encode_row(dataset, r)?;
            if encoded.index.any_missing() {
                dropped_features += 1;
                continue;
            }
            if encoded.responses.iter().any(Option::is_none) {
                dropped_responses += 1;
                continue;
            }
            let idx = CellIndex::new(
                encoded
                    .index
                    .entries()
                    .iter()
                    .map(|e| match e {
                        IndexEntry::Known(i) => *i,
                        IndexEntry::Missing => unreachable!(),
                    })
                    .collect(),
            );
            samples.push((idx, encoded.responses.into_iter().flatten().collect()));
        }
        Ok((samples, dropped_features, dropped_responses))
    }

    /// Empirical marginals of encoded training indices.
    pub fn fit_marginals(&self, samples: &SampleSet, alpha: f64) -> Result<MarginalSet> {
        let indices: Vec<CellIndex> = samples.iter().map(|(c, _)| c.clone()).collect();
        Ok(MarginalSet::fit(&indices, &self.schema, alpha)?)
    }
}
