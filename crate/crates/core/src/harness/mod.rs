//! Experiment orchestration: configuration ingestion, replicated Monte Carlo
//! runs with deterministic parallel aggregation, statistics against the
//! asymptotic targets, and persistence (JSON report, CSV of replications).

pub mod config;
pub mod experiment;
pub mod stats;

pub use config::{ExperimentConfig, IntensityConfig, Method, NetworkConfig, PreliminaryDetectors};
pub use experiment::{run_experiment, ExperimentOutcome, ExperimentReport, MethodReport};
pub use stats::{normality_diagnostics, rate_regression, NormalityDiagnostics, RateFit};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("config file {path}: {msg}")]
    ConfigFile { path: String, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("rate regression needs at least 3 scales, got {0}")]
    InsufficientScales(usize),
    #[error("normality diagnostics need at least 100 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("target covariance is singular")]
    SingularTarget,
    #[error("replication failures exceeded the 5% budget: {failures} of {total}")]
    FailureBudget { failures: usize, total: usize },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
    #[error(transparent)]
    Estimate(#[from] crate::estimators::EstimateError),
}
