//! Tabular data generation and multiple imputation with gradient-boosted
//! tree classifiers trained to unmask features one at a time.

pub mod bench;
pub mod cli;
pub mod coding;
pub mod dataset;
pub mod discretizer;
pub mod engine;
pub mod error;
pub mod gbdt;
pub mod masker;
pub mod metrics;
pub mod rng;

pub use error::{Error, Result};
