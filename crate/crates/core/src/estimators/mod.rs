//! Estimators of the source position: per-detector arrival-time MLEs, the
//! joint MLE, the Bayes posterior mean, least-squares multilateration from
//! squared arrival times, and the One-step Newton correction built on a
//! thinned sample.

mod arrival;
mod bayes;
mod lse;
mod mle;
mod onestep;
mod sqrt_delay;

pub use arrival::{arrival_mle, arrival_mle_all, ArrivalEstimate, ArrivalEstimates};
pub use bayes::{bayes_estimate, uniform_prior};
pub use lse::{lse_estimate, lse_estimate_unknown_start, ExtendedLseResult, LseResult};
pub use mle::joint_mle;
pub use onestep::{
    one_step, one_step_pipeline, one_step_process, OneStepPoint, OneStepStatus,
    PreliminaryDetectors,
};
pub use sqrt_delay::{estimate_delay_sqrt_case, SqrtDelayEstimate};

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{GeometryError, Point2};
use crate::intensity::ModelError;
use crate::likelihood::LikelihoodError;
use crate::mat::Mat2;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("sensors are collinear; the source position is not identifiable")]
    CollinearSensors,
    #[error("need at least {required} detectors, got {got}")]
    TooFewDetectors { required: usize, got: usize },
    #[error("detector {j} carries no information on its search window")]
    ZeroInformation { j: usize },
    #[error("optimizer failed: {0}")]
    OptimizerFailure(String),
    #[error("least-squares design is singular or ill-conditioned (cond = {cond:.3e})")]
    SingularDesign { cond: f64 },
    #[error("truncated information matrix is degenerate (det {det:.3e}, trace {trace:.3e})")]
    DegenerateInformation { det: f64, trace: f64 },
    #[error("estimator requires exponent kappa = {expected}, model has {got}")]
    WrongExponent { expected: f64, got: f64 },
    #[error("estimator requires a power-law shape")]
    NotPowerLaw,
    #[error("posterior mass vanished everywhere (corrupt observation input)")]
    PosteriorUnderflow,
    #[error("time grid must be sorted ascending within (0, T]")]
    InvalidTimeGrid,
    #[error("scale n must be >= 2")]
    InvalidScale,
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl From<ModelError> for EstimateError {
    fn from(e: ModelError) -> Self {
        EstimateError::Likelihood(LikelihoodError::Model(e))
    }
}

impl From<GeometryError> for EstimateError {
    fn from(e: GeometryError) -> Self {
        EstimateError::Likelihood(LikelihoodError::Model(ModelError::Geometry(e)))
    }
}

/// Which estimator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "t")]
pub enum EstimatorLabel {
    Mle,
    Bayes,
    Lse,
    OneStep,
    OneStepProcess(f64),
}

impl fmt::Display for EstimatorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorLabel::Mle => write!(f, "mle"),
            EstimatorLabel::Bayes => write!(f, "be"),
            EstimatorLabel::Lse => write!(f, "lse"),
            EstimatorLabel::OneStep => write!(f, "onestep"),
            EstimatorLabel::OneStepProcess(t) => write!(f, "onestep_process@{t}"),
        }
    }
}

/// A point estimate with its estimated normalized covariance (an estimate of
/// the inverse information at the point estimate) and free-form scalar
/// diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct EstimationResult {
    pub label: EstimatorLabel,
    pub theta: Point2,
    pub normalized_cov: Mat2,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimationResult {
    pub(crate) fn new(label: EstimatorLabel, theta: Point2, normalized_cov: Mat2) -> Self {
        Self {
            label,
            theta,
            normalized_cov,
            diagnostics: BTreeMap::new(),
        }
    }

    pub(crate) fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}
