//! Localization of a Poisson-emitting source on the plane.
//!
//! A source at an unknown position emits a signal at time zero. `k` detectors
//! each observe an inhomogeneous Poisson process whose intensity jumps from a
//! baseline noise level once the signal arrives, after a travel time
//! proportional to the source-detector distance. This crate provides
//!
//! * exact simulation of the detector processes and independent thinning,
//! * the joint log-likelihood, score vector and local quadratic (LAN)
//!   decomposition,
//! * Fisher information matrices (full, time-truncated, per-detector),
//! * estimators of the source position: per-detector arrival-time MLEs, the
//!   joint MLE, a Bayes posterior-mean estimator, a least-squares
//!   multilateration estimator built from squared arrival times, and a
//!   One-step Newton correction of a cheap preliminary estimator,
//! * a Monte Carlo harness that runs replicated experiments, aggregates
//!   estimator statistics against their asymptotic covariance targets, and
//!   persists reports (JSON) and per-replication records (CSV).
//!
//! ```
//! use poisson_locate::geometry::{Point2, Region, SensorNetwork};
//! use poisson_locate::intensity::IntensityModel;
//! use poisson_locate::sim::sample_paths;
//! use poisson_locate::estimators::joint_mle;
//!
//! let region = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
//! let sensors = vec![
//!     Point2::new(-1.0, -1.0),
//!     Point2::new(2.0, -1.0),
//!     Point2::new(2.0, 2.0),
//!     Point2::new(-1.0, 2.0),
//! ];
//! let net = SensorNetwork::new(sensors, 1.0, 6.0, 1.0, region).unwrap();
//! let model = IntensityModel::power_law(3.0, 2.0);
//! let truth = Point2::new(0.3, 0.4);
//! let obs = sample_paths(&net, &model, truth, 200, 7).unwrap();
//! let fit = joint_mle(&net, &model, &obs, None).unwrap();
//! assert!(fit.theta.dist(truth) < 0.2);
//! ```

pub mod estimators;
pub mod fisher;
pub mod geometry;
pub mod harness;
pub mod intensity;
pub mod likelihood;
pub mod rng;
pub mod sim;

mod kernels;
mod mat;
mod optim;
mod quad;
