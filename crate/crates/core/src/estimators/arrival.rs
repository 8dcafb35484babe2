//! Per-detector arrival-time maximum likelihood.
//!
//! Each detector poses a one-dimensional problem: maximize its own
//! log-likelihood in the arrival time over the window `[alpha_j, beta_j]`.
//! A dense grid locates the global maximum (the objective can be multimodal
//! at small scales), golden-section search refines it.

use super::EstimateError;
use crate::fisher::info_integral;
use crate::geometry::{domain_bounds, SensorNetwork};
use crate::intensity::{IntensityModel, Shape};
use crate::kernels::{sum_log_ratio_generic, PowerLawKernel};
use crate::optim::golden_section_max;
use crate::sim::ObservationSet;

/// Grid intervals for the dense stage: step is `(beta - alpha) / 2000`.
pub(crate) const DELAY_GRID_INTERVALS: usize = 2000;
/// Golden-section refinement target as a fraction of the window width.
pub(crate) const DELAY_REFINE_FRACTION: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct ArrivalEstimate {
    pub tau_hat: f64,
    /// Asymptotic variance `1 / I_tau_jj` of `sqrt(n) (tau_hat - tau_0)`,
    /// evaluated at the plug-in `tau_hat`. Infinite for a flat likelihood.
    pub sigma2: f64,
    pub window: (f64, f64),
    /// Set when the objective was constant over the window; `tau_hat` is the
    /// window midpoint in that case.
    pub flat_likelihood: bool,
}

/// Arrival estimates for all detectors.
#[derive(Debug, Clone)]
pub struct ArrivalEstimates {
    pub tau_hat: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub window: Vec<(f64, f64)>,
    pub flat: Vec<bool>,
}

impl ArrivalEstimates {
    pub fn k(&self) -> usize {
        self.tau_hat.len()
    }
}

pub(crate) struct DelayMax {
    pub tau: f64,
    pub value: f64,
    pub flat: bool,
}

/// Evaluates the one-detector log-likelihood `psi(tau)` on `taus`.
pub(crate) fn delay_loglik_batch(
    events: &[f64],
    shape: &Shape,
    lambda0: f64,
    n: u64,
    t_horizon: f64,
    taus: &[f64],
    out: &mut [f64],
) {
    let nf = n as f64;
    match PowerLawKernel::from_shape(shape, lambda0) {
        Some(kernel) => kernel.sum_log_ratio_multi(events, taus, out),
        None => {
            for (o, &tau) in out.iter_mut().zip(taus.iter()) {
                *o = sum_log_ratio_generic(events, tau, shape, lambda0);
            }
        }
    }
    for (o, &tau) in out.iter_mut().zip(taus.iter()) {
        *o -= nf * shape.cumulative(t_horizon - tau);
    }
}

/// Dense-grid search plus golden-section refinement of `psi` on `[lo, hi]`.
/// Ties on the grid break to the first (smallest tau) maximizer.
pub(crate) fn maximize_delay_loglik(
    events: &[f64],
    shape: &Shape,
    lambda0: f64,
    n: u64,
    t_horizon: f64,
    lo: f64,
    hi: f64,
) -> DelayMax {
    let width = hi - lo;
    let m = DELAY_GRID_INTERVALS;
    let taus: Vec<f64> = (0..=m).map(|i| lo + width * i as f64 / m as f64).collect();
    let mut values = vec![0.0f64; taus.len()];
    delay_loglik_batch(events, shape, lambda0, n, t_horizon, &taus, &mut values);

    let mut best = 0usize;
    let mut v_min = values[0];
    let mut v_max = values[0];
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
        v_min = v_min.min(v);
        v_max = v_max.max(v);
    }
    if v_max - v_min <= 1e-10 * (1.0 + v_max.abs()) {
        return DelayMax {
            tau: 0.5 * (lo + hi),
            value: v_max,
            flat: true,
        };
    }

    let h = width / m as f64;
    let bracket_lo = (taus[best] - h).max(lo);
    let bracket_hi = (taus[best] + h).min(hi);
    let psi = |tau: f64| {
        let mut out = [0.0];
        delay_loglik_batch(events, shape, lambda0, n, t_horizon, &[tau], &mut out);
        out[0]
    };
    let (tau_ref, v_ref) = golden_section_max(psi, bracket_lo, bracket_hi, DELAY_REFINE_FRACTION * width);
    if v_ref >= values[best] {
        DelayMax {
            tau: tau_ref,
            value: v_ref,
            flat: false,
        }
    } else {
        DelayMax {
            tau: taus[best],
            value: values[best],
            flat: false,
        }
    }
}

/// Arrival-time MLE of detector `j` with its plug-in asymptotic variance.
pub fn arrival_mle(
    net: &SensorNetwork,
    model: &IntensityModel,
    j: usize,
    obs: &ObservationSet,
) -> Result<ArrivalEstimate, EstimateError> {
    let (alpha, beta) = domain_bounds(net, j)?;
    let shape = model.shape(j);
    let found = maximize_delay_loglik(
        &obs.events[j],
        shape,
        net.lambda0(),
        obs.n,
        net.t_horizon(),
        alpha,
        beta,
    );
    if found.flat {
        return Ok(ArrivalEstimate {
            tau_hat: found.tau,
            sigma2: f64::INFINITY,
            window: (alpha, beta),
            flat_likelihood: true,
        });
    }
    let info = info_integral(shape, net.lambda0(), net.t_horizon() - found.tau);
    if info == 0.0 {
        return Err(EstimateError::ZeroInformation { j });
    }
    Ok(ArrivalEstimate {
        tau_hat: found.tau,
        sigma2: 1.0 / info,
        window: (alpha, beta),
        flat_likelihood: false,
    })
}

/// [`arrival_mle`] across all detectors.
pub fn arrival_mle_all(
    net: &SensorNetwork,
    model: &IntensityModel,
    obs: &ObservationSet,
) -> Result<ArrivalEstimates, EstimateError> {
    let k = net.k();
    let mut out = ArrivalEstimates {
        tau_hat: Vec::with_capacity(k),
        sigma2: Vec::with_capacity(k),
        window: Vec::with_capacity(k),
        flat: Vec::with_capacity(k),
    };
    for j in 0..k {
        let e = arrival_mle(net, model, j, obs)?;
        out.tau_hat.push(e.tau_hat);
        out.sigma2.push(e.sigma2);
        out.window.push(e.window);
        out.flat.push(e.flat_likelihood);
    }
    Ok(out)
}
