//! The sidecar schema file: one `column = role` line per CSV column.
//!
//! ```text
//! # comments and blank lines are ignored
//! Surface Area = continuous
//! Wall Area    = continuous(12)   # per-column alphabet override
//! Orientation  = categorical
//! Grade        = ordinal
//! Heating Load = response
//! Remarks      = ignore
//! ```
//!
//! Every CSV column must be declared. `response` may appear on several
//! columns, which makes the model multi-output in CSV column order.

use std::path::Path;

use cpreg_core::FeatureKind;

use crate::error::{CliError, Result};

/// Declared role of one CSV column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRole {
    Feature {
        kind: FeatureKind,
        /// Per-column alphabet override for continuous columns.
        alphabet: Option<usize>,
    },
    Response,
    Ignore,
}

/// Parsed schema file: declaration order is preserved but never load-bearing;
/// columns are matched to the CSV header by name.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaSpec {
    pub entries: Vec<(String, ColumnRole)>,
}

impl SchemaSpec {
    pub fn role(&self, column: &str) -> Option<&ColumnRole> {
        self.entries
            .iter()
            .find(|(name, _)| name == column)
            .map(|(_, role)| role)
    }

    pub fn load(path: &Path) -> Result<SchemaSpec> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        parse(&text, path)
    }
}

fn parse(text: &str, path: &Path) -> Result<SchemaSpec> {
    let mut entries: Vec<(String, ColumnRole)> = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| CliError::SchemaFile {
            path: path.to_path_buf(),
            line: line_no + 1,
            message,
        };
        let (name, role_text) = line
            .split_once('=')
            .ok_or_else(|| err("expected 'column = role'".into()))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(err("empty column name".into()));
        }
        if entries.iter().any(|(n, _)| n == name) {
            return Err(err(format!("column '{name}' declared twice")));
        }
        let role = parse_role(role_text.trim()).map_err(err)?;
        entries.push((name.to_string(), role));
    }
    if entries.is_empty() {
        return Err(CliError::SchemaFile {
            path: path.to_path_buf(),
            line: 0,
            message: "schema file declares no columns".into(),
        });
    }
    Ok(SchemaSpec { entries })
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(at) => &line[..at],
        None => line,
    }
}

fn parse_role(text: &str) -> std::result::Result<ColumnRole, String> {
    let (base, arg) = match text.find('(') {
        Some(at) => {
            let inner = text[at..]
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| format!("malformed role '{text}'"))?;
            (&text[..at], Some(inner.trim()))
        }
        None => (text, None),
    };
    let kind = match base.trim() {
        "continuous" => FeatureKind::Continuous,
        "ordinal" => FeatureKind::OrdinalDiscrete,
        "categorical" => FeatureKind::Categorical,
        "response" => {
            if arg.is_some() {
                return Err("'response' takes no argument".into());
            }
            return Ok(ColumnRole::Response);
        }
        "ignore" => {
            if arg.is_some() {
                return Err("'ignore' takes no argument".into());
            }
            return Ok(ColumnRole::Ignore);
        }
        other => {
            return Err(format!(
                "unknown role '{other}' (expected continuous, ordinal, categorical, response, or ignore)"
            ))
        }
    };
    let alphabet = match arg {
        None => None,
        Some(a) => {
            let n: usize = a
                .parse()
                .map_err(|_| format!("alphabet override '{a}' is not a positive integer"))?;
            if n < 2 {
                return Err("alphabet override must be at least 2".into());
            }
            if kind != FeatureKind::Continuous {
                return Err("alphabet override only applies to continuous columns".into());
            }
            Some(n)
        }
    };
    Ok(ColumnRole::Feature { kind, alphabet })
}
