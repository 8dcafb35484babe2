//! Joint log-likelihood of the source position, the normalized score vector,
//! and the local quadratic decomposition of the log likelihood ratio.

use thiserror::Error;

use crate::fisher::fisher_matrix;
use crate::geometry::{travel_time, GeometryError, Point2, SensorNetwork};
use crate::intensity::{IntensityModel, ModelError};
use crate::kernels::{sum_ell_generic, sum_log_ratio_generic, PowerLawKernel};
use crate::sim::ObservationSet;

/// Optimizers may probe slightly past the region boundary; beyond this
/// fraction of the region diameter the evaluation is refused.
pub const REGION_MARGIN_FRACTION: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LikelihoodError {
    #[error("theta ({x}, {y}) lies outside the search region beyond the 1% margin")]
    OutOfRegion { x: f64, y: f64 },
    #[error("observation has {got} detectors, network has {want}")]
    MismatchedObservation { got: usize, want: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<GeometryError> for LikelihoodError {
    fn from(e: GeometryError) -> Self {
        LikelihoodError::Model(ModelError::Geometry(e))
    }
}

/// Score vector normalized by `1/sqrt(n)`: the gradient of the
/// log-likelihood in the source coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub dx0: f64,
    pub dy0: f64,
}

impl Score {
    pub fn as_array(self) -> [f64; 2] {
        [self.dx0, self.dy0]
    }
}

/// The decomposition `ln Z_n(u) = <u, Delta_n> - u' I u / 2 + r_n`.
#[derive(Debug, Clone, Copy)]
pub struct LanDecomposition {
    pub u: [f64; 2],
    pub linear_term: f64,
    pub quadratic_term: f64,
    pub log_zn: f64,
    pub remainder: f64,
}

fn check_inputs(
    net: &SensorNetwork,
    obs: &ObservationSet,
    theta: Point2,
) -> Result<(), LikelihoodError> {
    if obs.k() != net.k() {
        return Err(LikelihoodError::MismatchedObservation {
            got: obs.k(),
            want: net.k(),
        });
    }
    let margin = REGION_MARGIN_FRACTION * net.theta_region().diameter();
    if !net.theta_region().contains_with_margin(theta, margin) {
        return Err(LikelihoodError::OutOfRegion {
            x: theta.x,
            y: theta.y,
        });
    }
    Ok(())
}

/// `ln L(theta, X^n)`: for each detector the sum of
/// `ln(1 + lambda_j(t_i - tau_j)/lambda0)` over events after the arrival,
/// minus the compensator `n * int_0^{T - tau_j} lambda_j`.
pub fn log_likelihood(
    net: &SensorNetwork,
    model: &IntensityModel,
    theta: Point2,
    obs: &ObservationSet,
) -> Result<f64, LikelihoodError> {
    check_inputs(net, obs, theta)?;
    let nf = obs.n as f64;
    let mut total = 0.0;
    for j in 0..net.k() {
        let tau = travel_time(net, j, theta);
        let shape = model.shape(j);
        let events = &obs.events[j];
        let event_term = match PowerLawKernel::from_shape(shape, net.lambda0()) {
            Some(kernel) => kernel.sum_log_ratio(events, tau),
            None => sum_log_ratio_generic(events, tau, shape, net.lambda0()),
        };
        total += event_term - nf * shape.cumulative(net.t_horizon() - tau);
    }
    Ok(total)
}

/// Batched [`log_likelihood`] over many candidate positions. Bitwise equal
/// to calling the single-point version per theta; the batch form only
/// improves cache behavior when hundreds of positions scan the same events.
pub(crate) fn log_likelihood_batch(
    net: &SensorNetwork,
    model: &IntensityModel,
    obs: &ObservationSet,
    thetas: &[Point2],
) -> Result<Vec<f64>, LikelihoodError> {
    for &theta in thetas {
        check_inputs(net, obs, theta)?;
    }
    let nf = obs.n as f64;
    let mut total = vec![0.0f64; thetas.len()];
    let mut taus = vec![0.0f64; thetas.len()];
    let mut part = vec![0.0f64; thetas.len()];
    for j in 0..net.k() {
        let shape = model.shape(j);
        let events = &obs.events[j];
        for (tau, &theta) in taus.iter_mut().zip(thetas.iter()) {
            *tau = travel_time(net, j, theta);
        }
        match PowerLawKernel::from_shape(shape, net.lambda0()) {
            Some(kernel) => kernel.sum_log_ratio_multi(events, &taus, &mut part),
            None => {
                for (p, &tau) in part.iter_mut().zip(taus.iter()) {
                    *p = sum_log_ratio_generic(events, tau, shape, net.lambda0());
                }
            }
        }
        for ((t, &tau), &p) in total.iter_mut().zip(taus.iter()).zip(part.iter()) {
            *t += p - nf * shape.cumulative(net.t_horizon() - tau);
        }
    }
    Ok(total)
}

/// Per-detector centered score integral
/// `S_j = sum_{t_i > tau_j} l_j(t_i - tau_j) - n * int lambda_j'`
/// with `l_j = lambda_j' / (lambda_j + lambda0)`.
fn score_integral(
    net: &SensorNetwork,
    model: &IntensityModel,
    j: usize,
    tau: f64,
    obs: &ObservationSet,
) -> f64 {
    let shape = model.shape(j);
    let events = &obs.events[j];
    let t_horizon = net.t_horizon();
    let stochastic = match PowerLawKernel::from_shape(shape, net.lambda0()) {
        Some(kernel) => kernel.sum_ell(events, tau, t_horizon),
        None => sum_ell_generic(events, tau, t_horizon, shape, net.lambda0()),
    };
    stochastic - obs.n as f64 * shape.derivative_cumulative(t_horizon - tau)
}

/// The normalized score `Delta_n = n^{-1/2} (d ln L / dx0, d ln L / dy0)`.
///
/// Requires the smooth regime; no region restriction is applied because the
/// One-step correction evaluates the score at preliminary estimates that may
/// fall slightly outside the region.
pub fn score(
    net: &SensorNetwork,
    model: &IntensityModel,
    theta: Point2,
    obs: &ObservationSet,
) -> Result<Score, LikelihoodError> {
    if obs.k() != net.k() {
        return Err(LikelihoodError::MismatchedObservation {
            got: obs.k(),
            want: net.k(),
        });
    }
    let mut gx = 0.0;
    let mut gy = 0.0;
    for j in 0..net.k() {
        let shape = model.shape(j);
        if !shape.is_smooth() {
            return Err(LikelihoodError::Model(ModelError::NonSmoothModel {
                kappa: shape.kappa().unwrap_or(f64::NAN),
            }));
        }
        let d = net.sensor(j).dist(theta);
        if d == 0.0 {
            return Err(GeometryError::DegenerateGeometry { j }.into());
        }
        let tau = travel_time(net, j, theta);
        let s_j = score_integral(net, model, j, tau, obs);
        let scale = net.nu() * d;
        gx += (net.sensor(j).x - theta.x) / scale * s_j;
        gy += (net.sensor(j).y - theta.y) / scale * s_j;
    }
    let root_n = (obs.n as f64).sqrt();
    Ok(Score {
        dx0: gx / root_n,
        dy0: gy / root_n,
    })
}

/// Exact log likelihood ratio at `theta0 + u/sqrt(n)` against `theta0`,
/// split into the LAN linear and quadratic terms plus the remainder.
pub fn lan_decompose(
    net: &SensorNetwork,
    model: &IntensityModel,
    theta0: Point2,
    u: [f64; 2],
    obs: &ObservationSet,
) -> Result<LanDecomposition, LikelihoodError> {
    let root_n = (obs.n as f64).sqrt();
    let theta_u = theta0.add(u[0] / root_n, u[1] / root_n);
    let region = net.theta_region();
    if !region.contains(theta0) || !region.contains(theta_u) {
        return Err(LikelihoodError::OutOfRegion {
            x: theta_u.x,
            y: theta_u.y,
        });
    }
    let log_zn = log_likelihood(net, model, theta_u, obs)? - log_likelihood(net, model, theta0, obs)?;
    let delta = score(net, model, theta0, obs)?;
    let linear_term = u[0] * delta.dx0 + u[1] * delta.dy0;
    let info = fisher_matrix(net, model, theta0, net.t_horizon())?;
    let m = &info.matrix;
    let quadratic_term =
        0.5 * (u[0] * (m[0][0] * u[0] + m[0][1] * u[1]) + u[1] * (m[1][0] * u[0] + m[1][1] * u[1]));
    Ok(LanDecomposition {
        u,
        linear_term,
        quadratic_term,
        log_zn,
        remainder: log_zn - linear_term + quadratic_term,
    })
}
