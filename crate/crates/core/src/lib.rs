//! Explainable Boosting Machines with seeded TPE tuning, a fairness-aware
//! tuning objective and autoencoder warm starts.

pub mod cli;
pub mod dataio;
pub mod ebm;
pub mod error;
pub mod explain;
pub mod hpo;
pub mod metrics;
pub mod pretrain;
pub mod rng;
pub mod validate;

pub use error::{Error, Result};
