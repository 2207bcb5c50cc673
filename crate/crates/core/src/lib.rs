//! Benchmarking harness for causal-effect estimators.
//!
//! - [`dgp`] simulates factual and counter-factual outcomes from random
//!   causal graphs over a covariate table.
//! - [`io`] reads and writes the interchange files.
//! - [`estimators`] holds simple baseline estimators.
//! - [`scoring`] computes the evaluation metrics and aggregates them across
//!   dataset sizes.

pub mod data_model;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod io;
pub mod scoring;

pub use data_model::*;
pub use error::{Error, Result};
