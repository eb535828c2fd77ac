//! Probabilistic benchmarks for noisy KPI data.
//!
//! The pipeline has two steps. A swarm search tunes a double-hyperbola filter
//! that discards the points which weaken the Clayton-copula dependence between
//! two KPIs; a relevance vector machine then turns the denoised KPIs and unit
//! covariates into benchmark probabilities, isolines and covariate rankings.

pub mod benchmark;
pub mod config;
pub mod contour;
pub mod copula;
pub mod dataset;
pub mod error;
pub mod hyperbola;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod rvm;
pub mod svg;
pub mod swarm;

pub use error::{Error, Result};
