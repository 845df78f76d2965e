//! CSV input with missing-value markers.

use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// A raw CSV table: header plus rows of optional cells. `None` marks a
/// missing value (empty cell or the literal `NA`).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub path: PathBuf,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Option<String>>>,
}

fn parse_cell(raw: &str) -> Option<String> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed == "NA" {
        None
    } else {
        Some(trimmed.to_string())
    }
}

impl Dataset {
    pub fn load(path: &Path) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => CliError::Io {
                    path: path.to_path_buf(),
                    source: std::io::Error::other(e.to_string()),
                },
                _ => CliError::DataFile {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                },
            })?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::DataFile {
                path: path.to_path_buf(),
                message: format!("bad header row: {e}"),
            })?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if headers.is_empty() {
            return Err(CliError::DataFile {
                path: path.to_path_buf(),
                message: "no columns".into(),
            });
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| CliError::DataFile {
                path: path.to_path_buf(),
                message: format!("row {}: {e}", i + 2),
            })?;
            if record.len() != headers.len() {
                return Err(CliError::DataFile {
                    path: path.to_path_buf(),
                    message: format!(
                        "row {}: {} cells but {} header columns",
                        i + 2,
                        record.len(),
                        headers.len()
                    ),
                });
            }
            rows.push(record.iter().map(parse_cell).collect());
        }
        Ok(Dataset {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}
