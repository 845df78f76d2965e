//! Per-predictor typing: kind, alphabet size, and categorical label maps.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// How a predictor column is discretized and regularized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Unordered labels; mapped through a label table, never smoothed.
    Categorical,
    /// Discrete values with a natural order; each distinct value is a level.
    OrdinalDiscrete,
    /// Real-valued; discretized by a fitted Lloyd-Max quantizer.
    Continuous,
}

impl FeatureKind {
    /// Smoothness regularization applies only where adjacent levels are
    /// meaningfully ordered.
    pub fn smoothness_eligible(self) -> bool {
        !matches!(self, FeatureKind::Categorical)
    }
}

/// One predictor's schema entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
    /// Alphabet size `I_n` (number of grid levels along this mode).
    pub alphabet_size: usize,
    /// Sorted distinct labels for categorical predictors; position = level.
    pub labels: Option<Vec<String>>,
}

impl Feature {
    pub fn smoothness_eligible(&self) -> bool {
        self.kind.smoothness_eligible()
    }

    /// Level of a raw categorical label, if it was seen in training.
    pub fn label_level(&self, label: &str) -> Option<usize> {
        self.labels
            .as_ref()
            .and_then(|ls| ls.binary_search_by(|l| l.as_str().cmp(label)).ok())
    }
}

/// Ordered predictor schema for an `N`-mode model.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    features: Vec<Feature>,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyInput("feature list"));
        }
        for f in &features {
            if f.alphabet_size < 1 {
                return Err(Error::EmptyInput("feature alphabet"));
            }
            if let Some(labels) = &f.labels {
                if labels.len() != f.alphabet_size {
                    return Err(Error::DimensionMismatch {
                        what: "label map size",
                        expected: f.alphabet_size,
                        got: labels.len(),
                    });
                }
            } else if f.kind == FeatureKind::Categorical {
                return Err(Error::EmptyInput("categorical label map"));
            }
        }
        Ok(FeatureSchema { features })
    }

    pub fn n_modes(&self) -> usize {
        self.features.len()
    }

    pub fn feature(&self, mode: usize) -> &Feature {
        &self.features[mode]
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    /// Alphabet sizes `(I_1, ..., I_N)`.
    pub fn shape(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.alphabet_size).collect()
    }
}
