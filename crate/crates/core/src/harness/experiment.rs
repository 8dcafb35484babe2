//! Replicated Monte Carlo experiments with deterministic parallel
//! aggregation.
//!
//! Replications fan out over a thread pool; every random stream is keyed by
//! the per-replication seed, and results are merged in replication order, so
//! the report is bitwise identical for any thread count. Wall-clock fields
//! are the one exception and can be stripped for comparisons.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Method};
use super::stats::{mean_covariance2, CHI2_2_Q95};
use super::HarnessError;
use crate::estimators::{
    arrival_mle_all, bayes_estimate, joint_mle, lse_estimate, one_step_pipeline, uniform_prior,
    ArrivalEstimates, EstimateError,
};
use crate::fisher::{arrival_fisher, fisher_matrix};
use crate::geometry::{travel_time, Point2, SensorNetwork};
use crate::intensity::IntensityModel;
use crate::mat::{mat2_frobenius, mat2_inverse, mat2_sub, Mat2};
use crate::rng::replication_seed;
use crate::sim::sample_paths;

#[derive(Debug, Clone, Copy, Serialize, Default)]
pub struct WallClock {
    pub mean_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub total_ms: f64,
}

/// Aggregated statistics of one `(method, n)` experiment leg.
#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub n: u64,
    pub mean: [f64; 2],
    pub bias: [f64; 2],
    /// Empirical covariance of `sqrt(n) (theta_hat - theta0)`.
    pub scaled_cov: Mat2,
    /// The asymptotic covariance this method should attain.
    pub target_cov: Mat2,
    /// Frobenius distance between the two, relative to the target.
    pub rel_deviation: f64,
    /// Mean squared position error (unscaled), for rate regressions.
    pub mse: f64,
    /// Fraction of replications inside the 95% asymptotic ellipse.
    pub coverage95: f64,
    pub replications_ok: usize,
    pub failures: usize,
    pub wall_clock: WallClock,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub config: ExperimentConfig,
    pub results: Vec<MethodReport>,
}

impl ExperimentReport {
    /// Zeroes the wall-clock block, leaving only the deterministic content.
    pub fn strip_timing(&mut self) {
        for r in &mut self.results {
            r.wall_clock = WallClock::default();
        }
    }
}

/// One CSV row of the per-replication record.
#[derive(Debug, Clone, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    pub method: Method,
    pub n: u64,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub status: String,
    pub seed: u64,
}

/// Everything an experiment produces: the serializable report, the raw
/// per-replication records, and the normalized estimate samples for further
/// diagnostics.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub records: Vec<RepRecord>,
    /// `sqrt(n) (theta_hat - theta0)` per successful replication.
    pub samples: BTreeMap<(Method, u64), Vec<[f64; 2]>>,
}

impl ExperimentOutcome {
    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["rep", "method", "n", "x", "y", "status", "seed"])
            .map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                r.rep.to_string(),
                r.method.to_string(),
                r.n.to_string(),
                r.x.map(|v| format!("{v:.17e}")).unwrap_or_default(),
                r.y.map(|v| format!("{v:.17e}")).unwrap_or_default(),
                r.status.clone(),
                r.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Config(format!("csv: {e}"))
}

fn status_of(err: &EstimateError) -> String {
    match err {
        EstimateError::SingularDesign { .. } => "singular_design".into(),
        EstimateError::DegenerateInformation { .. } => "degenerate_information".into(),
        EstimateError::ZeroInformation { .. } => "zero_information".into(),
        EstimateError::OptimizerFailure(_) => "optimizer_failure".into(),
        EstimateError::PosteriorUnderflow => "posterior_underflow".into(),
        other => format!("error:{other}"),
    }
}

/// The asymptotic covariance target of `sqrt(n)(theta_hat - theta0)` for a
/// method at the true position.
pub fn target_covariance(
    net: &SensorNetwork,
    model: &IntensityModel,
    theta0: Point2,
    method: Method,
) -> Result<Mat2, HarnessError> {
    match method {
        Method::Mle | Method::Be | Method::Onestep => {
            let info = fisher_matrix(net, model, theta0, net.t_horizon())
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            info.inverse().ok_or(HarnessError::SingularTarget)
        }
        Method::Lse => {
            let af = arrival_fisher(net, model, theta0)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let arrivals = ArrivalEstimates {
                tau_hat: (0..net.k()).map(|j| travel_time(net, j, theta0)).collect(),
                sigma2: (0..net.k()).map(|j| af.sigma2(j)).collect(),
                window: vec![(0.0, net.t_horizon()); net.k()],
                flat: vec![false; net.k()],
            };
            let fit = lse_estimate(net, &arrivals)?;
            Ok(fit.m_matrix)
        }
    }
}

struct RepOutcome {
    method: Method,
    theta: Result<Point2, String>,
    millis: f64,
}

fn run_replication(
    net: &SensorNetwork,
    model: &IntensityModel,
    cfg: &ExperimentConfig,
    n: u64,
    seed: u64,
) -> Result<Vec<RepOutcome>, HarnessError> {
    let obs = sample_paths(net, model, cfg.truth_point(), n, seed)?;
    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let start = Instant::now();
        let theta = match method {
            Method::Mle => joint_mle(net, model, &obs, None).map(|r| r.theta),
            Method::Be => bayes_estimate(net, model, &obs, uniform_prior()).map(|r| r.theta),
            Method::Lse => arrival_mle_all(net, model, &obs)
                .and_then(|a| lse_estimate(net, &a))
                .map(|r| r.theta_star),
            Method::Onestep => one_step_pipeline(
                net,
                model,
                &obs,
                cfg.thinning_b,
                seed,
                net.t_horizon(),
                cfg.onestep_preliminary,
            )
            .map(|r| r.theta),
        };
        out.push(RepOutcome {
            method,
            theta: theta.map_err(|e| status_of(&e)),
            millis: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(out)
}

/// Runs the configured experiment on the global thread pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    run_experiment_impl(cfg)
}

/// Same as [`run_experiment`] but on a dedicated pool of `threads` workers.
/// The outcome is bitwise identical for every thread count (timing aside).
pub fn run_experiment_with_threads(
    cfg: &ExperimentConfig,
    threads: usize,
) -> Result<ExperimentOutcome, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment_impl(cfg))
}

fn run_experiment_impl(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate()?;
    if cfg.methods.is_empty() {
        return Err(HarnessError::Config(
            "experiment needs at least one method".into(),
        ));
    }
    let net = cfg.build_network()?;
    let model = cfg.build_model();
    let theta0 = cfg.truth_point();
    let m = cfg.replications;

    let mut results = Vec::new();
    let mut records = Vec::new();
    let mut samples: BTreeMap<(Method, u64), Vec<[f64; 2]>> = BTreeMap::new();

    for &n in &cfg.scales {
        let scale_master = cfg
            .seed
            .wrapping_add(n.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let per_rep: Vec<(u64, Result<Vec<RepOutcome>, String>)> = (0..m)
            .into_par_iter()
            .map(|rep| {
                let seed = replication_seed(scale_master, rep as u64);
                let outcome =
                    run_replication(&net, &model, cfg, n, seed).map_err(|e| e.to_string());
                (seed, outcome)
            })
            .collect();

        for &method in &cfg.methods {
            let mut oks: Vec<[f64; 2]> = Vec::with_capacity(m);
            let mut normalized: Vec<[f64; 2]> = Vec::with_capacity(m);
            let mut failures = 0usize;
            let mut times = Vec::with_capacity(m);
            let root_n = (n as f64).sqrt();
            for (rep, (seed, outcome)) in per_rep.iter().enumerate() {
                match outcome {
                    Ok(list) => {
                        let r = list
                            .iter()
                            .find(|o| o.method == method)
                            .expect("method present");
                        times.push(r.millis);
                        match &r.theta {
                            Ok(p) => {
                                oks.push([p.x, p.y]);
                                normalized
                                    .push([root_n * (p.x - theta0.x), root_n * (p.y - theta0.y)]);
                                records.push(RepRecord {
                                    rep,
                                    method,
                                    n,
                                    x: Some(p.x),
                                    y: Some(p.y),
                                    status: "ok".into(),
                                    seed: *seed,
                                });
                            }
                            Err(status) => {
                                failures += 1;
                                records.push(RepRecord {
                                    rep,
                                    method,
                                    n,
                                    x: None,
                                    y: None,
                                    status: status.clone(),
                                    seed: *seed,
                                });
                            }
                        }
                    }
                    Err(msg) => {
                        failures += 1;
                        records.push(RepRecord {
                            rep,
                            method,
                            n,
                            x: None,
                            y: None,
                            status: format!("simulation:{msg}"),
                            seed: *seed,
                        });
                    }
                }
            }
            if failures * 20 > m {
                return Err(HarnessError::FailureBudget {
                    failures,
                    total: m,
                });
            }
            let target_cov = target_covariance(&net, &model, theta0, method)?;
            let (norm_mean, scaled_cov) = mean_covariance2(&normalized);
            let (mean, _) = mean_covariance2(&oks);
            let mse = oks
                .iter()
                .map(|p| {
                    let dx = p[0] - theta0.x;
                    let dy = p[1] - theta0.y;
                    dx * dx + dy * dy
                })
                .sum::<f64>()
                / oks.len().max(1) as f64;
            let coverage = match mat2_inverse(&target_cov) {
                Some(inv) => {
                    let inside = normalized
                        .iter()
                        .filter(|v| {
                            let d2 = v[0] * (inv[0][0] * v[0] + inv[0][1] * v[1])
                                + v[1] * (inv[1][0] * v[0] + inv[1][1] * v[1]);
                            d2 <= CHI2_2_Q95
                        })
                        .count();
                    inside as f64 / normalized.len().max(1) as f64
                }
                None => f64::NAN,
            };
            let rel_deviation = mat2_frobenius(&mat2_sub(&scaled_cov, &target_cov))
                / mat2_frobenius(&target_cov);
            let wall_clock = if times.is_empty() {
                WallClock::default()
            } else {
                let total: f64 = times.iter().sum();
                WallClock {
                    mean_ms: total / times.len() as f64,
                    min_ms: times.iter().copied().fold(f64::INFINITY, f64::min),
                    max_ms: times.iter().copied().fold(0.0, f64::max),
                    total_ms: total,
                }
            };
            let _ = norm_mean;
            results.push(MethodReport {
                method,
                n,
                mean,
                bias: [mean[0] - theta0.x, mean[1] - theta0.y],
                scaled_cov,
                target_cov,
                rel_deviation,
                mse,
                coverage95: coverage,
                replications_ok: oks.len(),
                failures,
                wall_clock,
            });
            samples.insert((method, n), normalized);
        }
    }
    Ok(ExperimentOutcome {
        report: ExperimentReport {
            schema: 1,
            config: cfg.clone(),
            results,
        },
        records,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        let toml_text = r#"
truth = [0.3, 0.4]
scales = [60]
replications = 5
seed = 99
methods = ["mle", "lse"]

[network]
sensors = [[-1.0, -1.0], [2.0, -1.0], [2.0, 2.0], [-1.0, 2.0]]
nu = 1.0
T = 6.0
lambda0 = 1.0
theta_region = { x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0 }

[intensity]
kind = "power_law"
a = 3.0
kappa = 2.0
"#;
        toml::from_str(toml_text).unwrap()
    }

    #[test]
    fn single_replication_report_echoes_the_estimate() {
        let mut cfg = small_cfg();
        cfg.replications = 1;
        cfg.methods = vec![Method::Lse];
        let out = run_experiment(&cfg).unwrap();
        let rec = &out.records[0];
        assert_eq!(rec.status, "ok");
        let rep = &out.report.results[0];
        assert_eq!(rep.replications_ok, 1);
        assert_eq!(rep.mean[0], rec.x.unwrap());
        assert_eq!(rep.mean[1], rec.y.unwrap());
        // covariance of a single sample degenerates to zero
        assert_eq!(rep.scaled_cov, [[0.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn reports_are_bitwise_identical_across_thread_counts() {
        let cfg = small_cfg();
        let mut a = run_experiment_with_threads(&cfg, 1).unwrap();
        let mut b = run_experiment_with_threads(&cfg, 4).unwrap();
        a.report.strip_timing();
        b.report.strip_timing();
        let ja = serde_json::to_string(&a.report).unwrap();
        let jb = serde_json::to_string(&b.report).unwrap();
        assert_eq!(ja, jb);
        // per-replication records agree as well
        assert_eq!(a.records.len(), b.records.len());
        for (ra, rb) in a.records.iter().zip(b.records.iter()) {
            assert_eq!(ra.x, rb.x);
            assert_eq!(ra.status, rb.status);
        }
    }

    #[test]
    fn csv_has_expected_shape() {
        let cfg = small_cfg();
        let out = run_experiment(&cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("plcsv-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("runs.csv");
        out.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "rep,method,n,x,y,status,seed");
        assert_eq!(text.lines().count(), 1 + 5 * 2);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn aggregation_matches_two_pass_formula_on_records() {
        let cfg = small_cfg();
        let out = run_experiment(&cfg).unwrap();
        let rep = out
            .report
            .results
            .iter()
            .find(|r| r.method == Method::Mle)
            .unwrap();
        let samples = &out.samples[&(Method::Mle, 60)];
        let (_, cov) = mean_covariance2(samples);
        for r in 0..2 {
            for c in 0..2 {
                let denom = rep.scaled_cov[r][c].abs().max(1e-12);
                assert!((rep.scaled_cov[r][c] - cov[r][c]).abs() <= 1e-12 * denom);
            }
        }
        assert_eq!(
            rep.replications_ok + rep.failures,
            cfg.replications,
            "failure accounting"
        );
    }
}
