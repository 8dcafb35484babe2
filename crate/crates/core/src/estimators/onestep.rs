//! One-step Newton scoring correction of a preliminary estimator.
//!
//! A cheap `sqrt(n)`-rate estimator (the least-squares fit on a thinned
//! subsample) is corrected by a single scoring step computed on the
//! complementary subsample. Thinning makes the preliminary estimate
//! independent of the data entering the stochastic integral; that
//! independence is a caller contract and is not checked here.
//!
//! The correction direction is the score direction: the step is
//! `I_t(pre)^{-1}` applied to the gradient of the partial log-likelihood at
//! the preliminary estimate (components `(x_j - x0)/(nu d_j) * S_j`), which
//! makes the expected update `I_t^{-1} I_t (theta0 - pre) = theta0 - pre`.
//! The stochastic integral is normalized by `n (1 - p)`, matching the
//! compensator of the thinned sample exactly at finite `n`; the
//! normalizations coincide asymptotically as `p -> 0`.

use super::{
    arrival_mle_all, lse_estimate, EstimateError, EstimationResult, EstimatorLabel,
};
use crate::fisher::fisher_matrix;
use crate::geometry::{collinearity_check, travel_time, GeometryError, Point2, SensorNetwork};
use crate::intensity::{IntensityModel, ModelError};
use crate::kernels::{sum_ell_generic, PowerLawKernel};
use crate::mat::{mat2_inverse, mat2_mul_vec};
use crate::sim::{thin, thinning_probability, ObservationSet};

/// Degeneracy gate: `det I_t < 1e-10 * trace^2` counts as rank deficient.
const DEGENERACY_RATIO: f64 = 1e-10;

/// How many detectors feed the preliminary least-squares estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreliminaryDetectors {
    /// Use every detector (the default).
    All,
    /// Use the first non-collinear triple; three suffice for consistency.
    Three,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OneStepStatus {
    /// `t` precedes the first arrival: the preliminary estimate is returned
    /// unchanged.
    Preliminary,
    /// Only one detector is active; the truncated information is singular.
    Degenerate,
    Corrected,
}

#[derive(Debug, Clone)]
pub struct OneStepPoint {
    pub t: f64,
    pub status: OneStepStatus,
    pub result: Option<EstimationResult>,
}

fn check_smooth(net: &SensorNetwork, model: &IntensityModel) -> Result<(), EstimateError> {
    for j in 0..net.k() {
        let shape = model.shape(j);
        if !shape.is_smooth() {
            return Err(ModelError::NonSmoothModel {
                kappa: shape.kappa().unwrap_or(f64::NAN),
            }
            .into());
        }
    }
    Ok(())
}

struct Correction {
    theta: Point2,
    det: f64,
    trace: f64,
    correction_norm: f64,
}

/// Shared correction step; `stochastic[j]` must hold the event sum
/// `sum_{tau_j < t_i <= t} l_j(t_i - tau_j)` over the thinned sample.
fn correct(
    net: &SensorNetwork,
    model: &IntensityModel,
    theta_pre: Point2,
    taus: &[f64],
    stochastic: &[f64],
    scale: f64,
    t: f64,
) -> Result<Result<Correction, (f64, f64)>, EstimateError> {
    let info = fisher_matrix(net, model, theta_pre, t)?;
    let det = info.det();
    let trace = info.trace();
    if !(det > DEGENERACY_RATIO * trace * trace) {
        return Ok(Err((det, trace)));
    }
    let inv = match mat2_inverse(&info.matrix) {
        Some(m) => m,
        None => return Ok(Err((det, trace))),
    };
    let mut gx = 0.0;
    let mut gy = 0.0;
    for j in 0..net.k() {
        let d = net.sensor(j).dist(theta_pre);
        if d == 0.0 {
            return Err(GeometryError::DegenerateGeometry { j }.into());
        }
        let window = t.min(net.t_horizon()) - taus[j];
        let s_j = stochastic[j] / scale - model.shape(j).derivative_cumulative(window);
        let denom = net.nu() * d;
        gx += (net.sensor(j).x - theta_pre.x) / denom * s_j;
        gy += (net.sensor(j).y - theta_pre.y) / denom * s_j;
    }
    let step = mat2_mul_vec(&inv, [gx, gy]);
    Ok(Ok(Correction {
        theta: theta_pre.add(step[0], step[1]),
        det,
        trace,
        correction_norm: step[0].hypot(step[1]),
    }))
}

fn finish(
    net: &SensorNetwork,
    model: &IntensityModel,
    label: EstimatorLabel,
    c: Correction,
    p: f64,
    t: f64,
) -> Result<EstimationResult, EstimateError> {
    let info = fisher_matrix(net, model, c.theta, t)?;
    let cov = info.inverse().unwrap_or([[f64::NAN; 2]; 2]);
    Ok(EstimationResult::new(label, c.theta, cov)
        .with("det_info", c.det)
        .with("trace_info", c.trace)
        .with("correction_norm", c.correction_norm)
        .with("thinning_p", p))
}

/// One scoring step from `theta_pre` using the complementary thinned sample
/// `x_tilde` up to time `t`.
///
/// Returns `theta_pre` unchanged when `t` precedes every arrival, and a
/// degenerate-information error while only one detector is active.
pub fn one_step(
    net: &SensorNetwork,
    model: &IntensityModel,
    theta_pre: Point2,
    x_tilde: &ObservationSet,
    p: f64,
    t: f64,
) -> Result<EstimationResult, EstimateError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(crate::sim::SimError::ThinningProbability(p).into());
    }
    if !(t > 0.0 && t <= net.t_horizon()) {
        return Err(EstimateError::InvalidTimeGrid);
    }
    check_smooth(net, model)?;
    let taus: Vec<f64> = (0..net.k())
        .map(|j| travel_time(net, j, theta_pre))
        .collect();
    let tau_min = taus.iter().copied().fold(f64::INFINITY, f64::min);
    if t <= tau_min {
        return Ok(
            EstimationResult::new(EstimatorLabel::OneStep, theta_pre, [[0.0; 2]; 2])
                .with("pre_first_arrival", 1.0)
                .with("thinning_p", p),
        );
    }
    let scale = x_tilde.n as f64 * (1.0 - p);
    let stochastic: Vec<f64> = (0..net.k())
        .map(|j| {
            let shape = model.shape(j);
            match PowerLawKernel::from_shape(shape, net.lambda0()) {
                Some(k) => k.sum_ell(&x_tilde.events[j], taus[j], t),
                None => sum_ell_generic(&x_tilde.events[j], taus[j], t, shape, net.lambda0()),
            }
        })
        .collect();
    match correct(net, model, theta_pre, &taus, &stochastic, scale, t)? {
        Ok(c) => finish(net, model, EstimatorLabel::OneStep, c, p, t),
        Err((det, trace)) => Err(EstimateError::DegenerateInformation { det, trace }),
    }
}

/// The One-step estimator along a sorted time grid, sharing a single pass
/// over the events. Points before the second arrival carry their
/// no-estimate status instead of failing the whole call; the value at a grid
/// time equals `one_step` at that time exactly.
pub fn one_step_process(
    net: &SensorNetwork,
    model: &IntensityModel,
    theta_pre: Point2,
    x_tilde: &ObservationSet,
    p: f64,
    t_grid: &[f64],
) -> Result<Vec<OneStepPoint>, EstimateError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(crate::sim::SimError::ThinningProbability(p).into());
    }
    let sorted = t_grid.windows(2).all(|w| w[0] <= w[1]);
    let in_range = t_grid
        .iter()
        .all(|&t| t > 0.0 && t <= net.t_horizon());
    if !sorted || !in_range {
        return Err(EstimateError::InvalidTimeGrid);
    }
    check_smooth(net, model)?;
    let k = net.k();
    let taus: Vec<f64> = (0..k).map(|j| travel_time(net, j, theta_pre)).collect();
    let tau_min = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = x_tilde.n as f64 * (1.0 - p);

    let kernels: Vec<Option<PowerLawKernel>> = (0..k)
        .map(|j| PowerLawKernel::from_shape(model.shape(j), net.lambda0()))
        .collect();
    // per-detector fold state: next event index and the running ell sum
    let mut idx: Vec<usize> = (0..k)
        .map(|j| x_tilde.events[j].partition_point(|&e| e <= taus[j]))
        .collect();
    let mut acc = vec![0.0f64; k];

    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        for j in 0..k {
            let events = &x_tilde.events[j];
            while idx[j] < events.len() && events[idx[j]] <= t {
                let s = events[idx[j]] - taus[j];
                acc[j] += match &kernels[j] {
                    Some(kern) => kern.ell_term(s),
                    None => {
                        let shape = model.shape(j);
                        shape.derivative(s) / (shape.value(s) + net.lambda0())
                    }
                };
                idx[j] += 1;
            }
        }
        if t <= tau_min {
            out.push(OneStepPoint {
                t,
                status: OneStepStatus::Preliminary,
                result: Some(
                    EstimationResult::new(
                        EstimatorLabel::OneStepProcess(t),
                        theta_pre,
                        [[0.0; 2]; 2],
                    )
                    .with("pre_first_arrival", 1.0),
                ),
            });
            continue;
        }
        match correct(net, model, theta_pre, &taus, &acc, scale, t)? {
            Ok(c) => {
                let r = finish(net, model, EstimatorLabel::OneStepProcess(t), c, p, t)?;
                out.push(OneStepPoint {
                    t,
                    status: OneStepStatus::Corrected,
                    result: Some(r),
                });
            }
            Err(_) => out.push(OneStepPoint {
                t,
                status: OneStepStatus::Degenerate,
                result: None,
            }),
        }
    }
    Ok(out)
}

/// Full One-step pipeline: thin the observation with `p = n^-b`, fit the
/// preliminary least-squares estimator on the kept part `Y`, then apply one
/// scoring step on the complement up to time `t`.
pub fn one_step_pipeline(
    net: &SensorNetwork,
    model: &IntensityModel,
    obs: &ObservationSet,
    b: f64,
    seed: u64,
    t: f64,
    preliminary: PreliminaryDetectors,
) -> Result<EstimationResult, EstimateError> {
    let p = thinning_probability(obs.n, b)?;
    let pair = thin(obs, p, seed)?;
    let lse = match preliminary {
        PreliminaryDetectors::All => {
            let arrivals = arrival_mle_all(net, model, &pair.y)?;
            lse_estimate(net, &arrivals)?
        }
        PreliminaryDetectors::Three => {
            let (net3, model3, obs3) = select_triple(net, model, &pair.y)?;
            let arrivals = arrival_mle_all(&net3, &model3, &obs3)?;
            lse_estimate(&net3, &arrivals)?
        }
    };
    let mut result = one_step(net, model, lse.theta_star, &pair.x_tilde, p, t)?;
    result
        .diagnostics
        .insert("preliminary_s_n".into(), lse.s_n);
    Ok(result)
}

/// Restricts the network, model and observation to the first non-collinear
/// sensor triple (deterministic lexicographic scan).
fn select_triple(
    net: &SensorNetwork,
    model: &IntensityModel,
    obs: &ObservationSet,
) -> Result<(SensorNetwork, IntensityModel, ObservationSet), EstimateError> {
    let k = net.k();
    for i in 0..k {
        for l in (i + 1)..k {
            for m in (l + 1)..k {
                let triple = [net.sensor(i), net.sensor(l), net.sensor(m)];
                if collinearity_check(&triple) {
                    let net3 = SensorNetwork::new(
                        triple.to_vec(),
                        net.nu(),
                        net.t_horizon(),
                        net.lambda0(),
                        net.theta_region(),
                    )?;
                    let model3 = IntensityModel::per_detector(vec![
                        model.shape(i).clone(),
                        model.shape(l).clone(),
                        model.shape(m).clone(),
                    ]);
                    let obs3 = ObservationSet {
                        n: obs.n,
                        t_horizon: obs.t_horizon,
                        events: vec![
                            obs.events[i].clone(),
                            obs.events[l].clone(),
                            obs.events[m].clone(),
                        ],
                    };
                    return Ok((net3, model3, obs3));
                }
            }
        }
    }
    Err(EstimateError::CollinearSensors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use crate::sim::sample_paths;

    fn net() -> SensorNetwork {
        let region = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
        SensorNetwork::new(
            vec![
                Point2::new(-1.0, -1.0),
                Point2::new(2.0, -1.0),
                Point2::new(2.0, 2.0),
                Point2::new(-1.0, 2.0),
            ],
            1.0,
            6.0,
            1.0,
            region,
        )
        .unwrap()
    }

    fn setup(n: u64, seed: u64) -> (SensorNetwork, IntensityModel, crate::sim::ThinnedPair) {
        let net = net();
        let model = IntensityModel::power_law(3.0, 2.0);
        let obs = sample_paths(&net, &model, Point2::new(0.3, 0.4), n, seed).unwrap();
        let pair = thin(&obs, 0.1, seed ^ 0x7777).unwrap();
        (net, model, pair)
    }

    #[test]
    fn before_first_arrival_returns_preliminary_exactly() {
        let (net, model, pair) = setup(200, 1);
        let pre = Point2::new(0.35, 0.45);
        let r = one_step(&net, &model, pre, &pair.x_tilde, 0.1, 0.5).unwrap();
        assert_eq!(r.theta, pre);
        assert_eq!(r.diagnostics["pre_first_arrival"], 1.0);
    }

    #[test]
    fn single_active_detector_is_degenerate() {
        let (net, model, pair) = setup(200, 2);
        let pre = Point2::new(0.35, 0.45);
        let mut taus: Vec<f64> = (0..4).map(|j| travel_time(&net, j, pre)).collect();
        taus.sort_by(f64::total_cmp);
        let t = 0.5 * (taus[0] + taus[1]);
        assert!(matches!(
            one_step(&net, &model, pre, &pair.x_tilde, 0.1, t),
            Err(EstimateError::DegenerateInformation { .. })
        ));
        // exactly at the second arrival the window of the second detector is
        // still empty
        assert!(matches!(
            one_step(&net, &model, pre, &pair.x_tilde, 0.1, taus[1]),
            Err(EstimateError::DegenerateInformation { .. })
        ));
    }

    #[test]
    fn correction_improves_a_biased_preliminary() {
        let (net, model, pair) = setup(20_000, 3);
        let truth = Point2::new(0.3, 0.4);
        let pre = Point2::new(0.34, 0.36);
        let r = one_step(&net, &model, pre, &pair.x_tilde, 0.1, 6.0).unwrap();
        assert!(
            r.theta.dist(truth) < 0.25 * pre.dist(truth),
            "one step left {:?} (dist {})",
            r.theta,
            r.theta.dist(truth)
        );
    }

    #[test]
    fn process_trace_matches_single_calls() {
        let (net, model, pair) = setup(500, 4);
        let pre = Point2::new(0.32, 0.41);
        let grid: Vec<f64> = (1..=12).map(|i| 0.5 * i as f64).collect();
        let trace = one_step_process(&net, &model, pre, &pair.x_tilde, 0.1, &grid).unwrap();
        assert_eq!(trace.len(), grid.len());
        for point in &trace {
            match point.status {
                OneStepStatus::Corrected => {
                    let single =
                        one_step(&net, &model, pre, &pair.x_tilde, 0.1, point.t).unwrap();
                    let got = point.result.as_ref().unwrap();
                    assert_eq!(got.theta.x.to_bits(), single.theta.x.to_bits());
                    assert_eq!(got.theta.y.to_bits(), single.theta.y.to_bits());
                }
                OneStepStatus::Preliminary => {
                    assert_eq!(point.result.as_ref().unwrap().theta, pre);
                }
                OneStepStatus::Degenerate => {
                    assert!(one_step(&net, &model, pre, &pair.x_tilde, 0.1, point.t).is_err());
                }
            }
        }
        // information grows along the grid
        let dets: Vec<f64> = trace
            .iter()
            .filter_map(|p| p.result.as_ref())
            .filter_map(|r| r.diagnostics.get("det_info").copied())
            .collect();
        for w in dets.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "det sequence not monotone: {w:?}");
        }
    }

    #[test]
    fn grid_before_first_arrival_returns_preliminary_everywhere() {
        let (net, model, pair) = setup(200, 5);
        let pre = Point2::new(0.35, 0.45);
        let grid = [0.2, 0.5, 1.0];
        let trace = one_step_process(&net, &model, pre, &pair.x_tilde, 0.1, &grid).unwrap();
        for p in &trace {
            assert_eq!(p.status, OneStepStatus::Preliminary);
            assert_eq!(p.result.as_ref().unwrap().theta, pre);
        }
    }

    #[test]
    fn pipeline_runs_with_both_preliminary_choices() {
        let net = net();
        let model = IntensityModel::power_law(3.0, 2.0);
        let obs = sample_paths(&net, &model, Point2::new(0.3, 0.4), 5000, 9).unwrap();
        let all = one_step_pipeline(&net, &model, &obs, 0.4, 17, 6.0, PreliminaryDetectors::All)
            .unwrap();
        let three =
            one_step_pipeline(&net, &model, &obs, 0.4, 17, 6.0, PreliminaryDetectors::Three)
                .unwrap();
        let truth = Point2::new(0.3, 0.4);
        assert!(all.theta.dist(truth) < 0.1, "all: {:?}", all.theta);
        assert!(three.theta.dist(truth) < 0.15, "three: {:?}", three.theta);
    }

    #[test]
    fn rejects_bad_grid_and_probability() {
        let (net, model, pair) = setup(100, 6);
        let pre = Point2::new(0.3, 0.4);
        assert!(one_step(&net, &model, pre, &pair.x_tilde, 0.0, 1.0).is_err());
        assert!(one_step(&net, &model, pre, &pair.x_tilde, 0.1, 7.0).is_err());
        assert!(
            one_step_process(&net, &model, pre, &pair.x_tilde, 0.1, &[2.0, 1.0]).is_err()
        );
    }
}
