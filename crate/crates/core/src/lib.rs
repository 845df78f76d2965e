//! Regression on a discretized input grid via smooth low-rank tensor completion.
//!
//! A response `y = f(x_1, ..., x_N)` over `N` discretized predictors is modeled
//! as an `N`-way tensor holding one predicted response per grid cell, and the
//! tensor is constrained to a rank-`F` canonical polyadic (CP) form: one
//! `I_n x F` factor matrix per predictor. Training pairs are aggregated into a
//! sparse weight/mean-response tensor, and the factors are fitted by block
//! coordinate descent with closed-form row updates under ridge and
//! (for ordinal predictors) smoothness regularization.
//!
//! The crate is `no_std`-compatible (`alloc` required) so the numeric core can
//! be embedded anywhere; file formats and the command-line front-end live in
//! the companion `cpreg-cli` crate.
//!
//! Module map:
//!
//! * [`model`]: CP factor model and pure evaluations (cell queries,
//!   Khatri-Rao rows, mode-vector contraction).
//! * [`schema`]: per-predictor kind, alphabet size, label maps.
//! * [`quantizer`]: Lloyd-Max scalar quantizer for continuous predictors.
//! * [`tensor`]: sparse weight/mean aggregation and empirical marginals.
//! * [`split`]: seeded train/test and k-fold partitions.
//! * [`solver`]: the block coordinate descent fit.
//! * [`predict`]: full and partially observed prediction, RMSE.
//! * [`oracle`]: brute-force reference implementations for tests.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub(crate) mod math;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod predict;
pub mod quantizer;
pub mod rng;
pub mod schema;
pub mod solver;
pub mod split;
pub mod tensor;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{CellIndex, FactorModel};
pub use predict::{IndexEntry, PartialIndex};
pub use quantizer::Quantizer;
pub use schema::{Feature, FeatureKind, FeatureSchema};
pub use solver::{DifferenceKind, FitReport, SolverConfig};
pub use tensor::{MarginalSet, SparseObservationTensor};
