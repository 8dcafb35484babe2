//! Exact simulation of the detector counting processes and independent
//! thinning.
//!
//! Paths are drawn by rejection from a constant dominating rate
//! `n * (sup lambda_j + lambda0)` (Lewis-Shedler thinning), which is exact:
//! the acceptance checks below compare empirical moments against analytic
//! values, so no discretization bias is tolerable.

use rand::RngExt;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{travel_time, Point2, SensorNetwork};
use crate::intensity::IntensityModel;
use crate::rng::{detector_stream, StreamPurpose};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("intensity scale n must be >= 1")]
    InvalidScale,
    #[error("theta0 must lie inside the search region")]
    ThetaOutsideRegion,
    #[error("intensity shape is unbounded on the observation window; exact rejection sampling is impossible")]
    UnboundedIntensity,
    #[error("thinning probability must lie strictly inside (0, 1), got {0}")]
    ThinningProbability(f64),
    #[error("thinning exponent b must lie in the open interval (0, 1/2), got {0}")]
    ThinningExponent(f64),
    #[error("thinning probability n^-b needs n >= 2")]
    ThinningScale,
    #[error("event list {j} is not sorted ascending within [0, T]")]
    InvalidEvents { j: usize },
}

/// One realization of the `k` counting processes: sorted event times per
/// detector, together with the intensity scale they were drawn at.
///
/// Serializes to the observation-file schema
/// `{"n": int, "T": float, "events": [[t, ...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub n: u64,
    #[serde(rename = "T")]
    pub t_horizon: f64,
    pub events: Vec<Vec<f64>>,
}

impl ObservationSet {
    pub fn k(&self) -> usize {
        self.events.len()
    }

    pub fn total_count(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    /// Checks the sortedness and range invariants, e.g. after deserializing.
    pub fn validate(&self) -> Result<(), SimError> {
        for (j, ev) in self.events.iter().enumerate() {
            let sorted = ev.windows(2).all(|w| w[0] <= w[1]);
            let in_range = ev.iter().all(|&t| t >= 0.0 && t <= self.t_horizon);
            if !sorted || !in_range {
                return Err(SimError::InvalidEvents { j });
            }
        }
        Ok(())
    }
}

/// A thinning split of an observation set: `y` keeps each event with
/// probability `p`, `x_tilde` receives the rest. The two parts are
/// independent Poisson processes with intensities `p * lambda` and
/// `(1 - p) * lambda`.
#[derive(Debug, Clone)]
pub struct ThinnedPair {
    pub y: ObservationSet,
    pub x_tilde: ObservationSet,
    pub p: f64,
}

/// Draws one exact realization of all detector processes at scale `n` for a
/// source at `theta0`. Deterministic given `seed`.
pub fn sample_paths(
    net: &SensorNetwork,
    model: &IntensityModel,
    theta0: Point2,
    n: u64,
    seed: u64,
) -> Result<ObservationSet, SimError> {
    if n < 1 {
        return Err(SimError::InvalidScale);
    }
    if !net.theta_region().contains(theta0) {
        return Err(SimError::ThetaOutsideRegion);
    }
    let t_horizon = net.t_horizon();
    let lambda0 = net.lambda0();
    let nf = n as f64;
    let mut events = Vec::with_capacity(net.k());
    for j in 0..net.k() {
        let tau = travel_time(net, j, theta0);
        let shape = model.shape(j);
        let window = t_horizon - tau;
        let sup = shape.sup_on(window).ok_or(SimError::UnboundedIntensity)?;
        let dominating = nf * (sup + lambda0);
        let accept_scale = sup + lambda0;
        let mut rng = detector_stream(seed, j, StreamPurpose::Simulate);
        let expected = nf * (shape.cumulative(window) + lambda0 * t_horizon);
        let mut list: Vec<f64> = Vec::with_capacity(expected as usize + 64);
        let mut t = 0.0f64;
        loop {
            let step: f64 = Exp1.sample(&mut rng);
            t += step / dominating;
            if t > t_horizon {
                break;
            }
            let u: f64 = rng.random();
            if u * accept_scale <= shape.value(t - tau) + lambda0 {
                list.push(t);
            }
        }
        events.push(list);
    }
    Ok(ObservationSet {
        n,
        t_horizon,
        events,
    })
}

/// Splits each event independently into `y` (probability `p`) or `x_tilde`.
/// Deterministic given `seed`; event order is preserved, so both parts stay
/// sorted and together they partition the input exactly.
pub fn thin(obs: &ObservationSet, p: f64, seed: u64) -> Result<ThinnedPair, SimError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(SimError::ThinningProbability(p));
    }
    let mut y_events = Vec::with_capacity(obs.k());
    let mut x_events = Vec::with_capacity(obs.k());
    for (j, ev) in obs.events.iter().enumerate() {
        let mut rng = detector_stream(seed, j, StreamPurpose::Thin);
        let mut y = Vec::with_capacity((ev.len() as f64 * p) as usize + 16);
        let mut x = Vec::with_capacity(ev.len());
        for &t in ev {
            if rng.random::<f64>() < p {
                y.push(t);
            } else {
                x.push(t);
            }
        }
        y_events.push(y);
        x_events.push(x);
    }
    Ok(ThinnedPair {
        y: ObservationSet {
            n: obs.n,
            t_horizon: obs.t_horizon,
            events: y_events,
        },
        x_tilde: ObservationSet {
            n: obs.n,
            t_horizon: obs.t_horizon,
            events: x_events,
        },
        p,
    })
}

/// The thinning probability `p_n = n^-b` for `b` in the open interval
/// `(0, 1/2)`.
pub fn thinning_probability(n: u64, b: f64) -> Result<f64, SimError> {
    if n < 2 {
        return Err(SimError::ThinningScale);
    }
    if !(b > 0.0 && b < 0.5) {
        return Err(SimError::ThinningExponent(b));
    }
    Ok((n as f64).powf(-b))
}
