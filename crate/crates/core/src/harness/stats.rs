//! Statistics for the Monte Carlo reports: two-pass moments, the log-log
//! rate regression, and normality diagnostics of normalized estimates
//! against a target covariance.

use serde::Serialize;

use super::HarnessError;
use crate::mat::{mat2_inverse, Mat2};

/// 95% quantile of the chi-square distribution with 2 degrees of freedom.
pub const CHI2_2_Q95: f64 = 5.991464547107979;

/// Sample mean and covariance of 2-vectors, two-pass.
pub fn mean_covariance2(samples: &[[f64; 2]]) -> ([f64; 2], Mat2) {
    let m = samples.len().max(1) as f64;
    let mut mean = [0.0f64; 2];
    for s in samples {
        mean[0] += s[0];
        mean[1] += s[1];
    }
    mean[0] /= m;
    mean[1] /= m;
    let mut cov = [[0.0f64; 2]; 2];
    for s in samples {
        let dx = s[0] - mean[0];
        let dy = s[1] - mean[1];
        cov[0][0] += dx * dx;
        cov[0][1] += dx * dy;
        cov[1][1] += dy * dy;
    }
    let denom = (samples.len().saturating_sub(1)).max(1) as f64;
    cov[0][0] /= denom;
    cov[0][1] /= denom;
    cov[1][1] /= denom;
    cov[1][0] = cov[0][1];
    (mean, cov)
}

/// Ordinary least squares fit of `log mse` against `log n`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Slope of `log MSE` versus `log n` over at least three scales; the slope
/// estimates the convergence rate exponent (with its OLS standard error).
pub fn rate_regression(points: &[(f64, f64)]) -> Result<RateFit, HarnessError> {
    if points.len() < 3 {
        return Err(HarnessError::InsufficientScales(points.len()));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ssr: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let dof = (points.len() as f64 - 2.0).max(1.0);
    let stderr = (ssr / dof / sxx).sqrt();
    Ok(RateFit {
        slope,
        stderr,
        intercept,
    })
}

/// Kolmogorov-Smirnov comparison of the squared Mahalanobis distances
/// against their chi-square(2) law, plus the empirical 95%-ellipse coverage.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormalityDiagnostics {
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub coverage95: f64,
    pub samples: usize,
}

pub fn normality_diagnostics(
    samples: &[[f64; 2]],
    target: &Mat2,
) -> Result<NormalityDiagnostics, HarnessError> {
    if samples.len() < 100 {
        return Err(HarnessError::InsufficientSamples(samples.len()));
    }
    let inv = mat2_inverse(target).ok_or(HarnessError::SingularTarget)?;
    let mut d2: Vec<f64> = samples
        .iter()
        .map(|v| {
            v[0] * (inv[0][0] * v[0] + inv[0][1] * v[1])
                + v[1] * (inv[1][0] * v[0] + inv[1][1] * v[1])
        })
        .collect();
    d2.sort_by(f64::total_cmp);
    let m = d2.len();
    // chi-square(2) CDF is 1 - exp(-x/2)
    let mut ks = 0.0f64;
    let mut covered = 0usize;
    for (i, &x) in d2.iter().enumerate() {
        let cdf = 1.0 - (-0.5 * x).exp();
        let lo = i as f64 / m as f64;
        let hi = (i + 1) as f64 / m as f64;
        ks = ks.max((cdf - lo).abs()).max((cdf - hi).abs());
        if x <= CHI2_2_Q95 {
            covered += 1;
        }
    }
    Ok(NormalityDiagnostics {
        ks_statistic: ks,
        ks_p_value: ks_p_value(ks, m),
        coverage95: covered as f64 / m as f64,
        samples: m,
    })
}

/// Asymptotic Kolmogorov distribution with the Stephens small-sample
/// correction.
pub fn ks_p_value(d: f64, m: usize) -> f64 {
    let sm = (m as f64).sqrt();
    let lambda = (sm + 0.12 + 0.11 / sm) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-18 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

/// Survival function of the chi-square distribution with `df` degrees of
/// freedom: the regularized upper incomplete gamma `Q(df/2, x/2)`.
pub fn chi2_survival(df: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * df, 0.5 * x)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9
    const COEF: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = 0.99999999999980993;
    for (i, c) in COEF.iter().enumerate() {
        a += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn gamma_q(a: f64, x: f64) -> f64 {
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..500 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-15 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    // modified Lentz continued fraction
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h * (-x + a * x.ln() - ln_gamma(a)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_inverse_law_has_slope_minus_one() {
        let points: Vec<(f64, f64)> = [1e3, 1e4, 1e5]
            .iter()
            .map(|&n| (n, 2.5 / n))
            .collect();
        let fit = rate_regression(&points).unwrap();
        assert!((fit.slope - (-1.0)).abs() < 1e-12);
        assert!(fit.stderr < 1e-10);
    }

    #[test]
    fn too_few_scales_rejected() {
        assert!(matches!(
            rate_regression(&[(1e3, 1.0), (1e4, 0.1)]),
            Err(HarnessError::InsufficientScales(2))
        ));
    }

    #[test]
    fn chi2_survival_known_values() {
        // chi2(2) survival is exp(-x/2)
        for x in [0.5, 2.0, 6.0] {
            assert!((chi2_survival(2.0, x) - (-0.5 * x).exp()).abs() < 1e-10);
        }
        // chi2(1): P(X > 3.841) ~ 0.05
        assert!((chi2_survival(1.0, 3.841458820694124) - 0.05).abs() < 1e-6);
        // chi2(10): median around 9.342
        assert!((chi2_survival(10.0, 9.341818) - 0.5).abs() < 1e-4);
    }

    #[test]
    fn diagnostics_accept_samples_from_the_target() {
        // draw from the target normal via Box-Muller with a Cholesky factor
        let target = [[2.0, 0.6], [0.6, 1.0]];
        let l11 = target[0][0].sqrt();
        let l21 = target[1][0] / l11;
        let l22 = (target[1][1] - l21 * l21).sqrt();
        let m = 2000;
        let mut samples = Vec::with_capacity(m);
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = move || {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            (z ^ (z >> 31)) as f64 / u64::MAX as f64
        };
        for _ in 0..m {
            let (u1, u2) = (next().max(1e-12), next());
            let r = (-2.0 * u1.ln()).sqrt();
            let z1 = r * (2.0 * std::f64::consts::PI * u2).cos();
            let z2 = r * (2.0 * std::f64::consts::PI * u2).sin();
            samples.push([l11 * z1, l21 * z1 + l22 * z2]);
        }
        let diag = normality_diagnostics(&samples, &target).unwrap();
        let se = (0.95f64 * 0.05 / m as f64).sqrt();
        assert!(
            (diag.coverage95 - 0.95).abs() <= 3.0 * se,
            "coverage {}",
            diag.coverage95
        );
        assert!(diag.ks_p_value > 0.001, "p {}", diag.ks_p_value);
    }

    #[test]
    fn degenerate_samples_fail_diagnostics() {
        let samples = vec![[1.0, 1.0]; 500];
        let diag = normality_diagnostics(&samples, &[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(diag.ks_statistic > 0.6);
        assert!(diag.ks_p_value < 1e-6);
        // all mass at Mahalanobis^2 = 2: inside the 95% ellipse
        assert_eq!(diag.coverage95, 1.0);
    }

    #[test]
    fn singular_target_rejected() {
        let samples = vec![[0.0, 0.0]; 200];
        assert!(matches!(
            normality_diagnostics(&samples, &[[1.0, 1.0], [1.0, 1.0]]),
            Err(HarnessError::SingularTarget)
        ));
    }

    #[test]
    fn two_pass_covariance_matches_definition() {
        let samples = vec![[1.0, 2.0], [3.0, 1.0], [-1.0, 0.5], [0.0, -2.0]];
        let (mean, cov) = mean_covariance2(&samples);
        assert!((mean[0] - 0.75).abs() < 1e-15);
        let mut want = 0.0;
        for s in &samples {
            want += (s[0] - 0.75) * (s[0] - 0.75);
        }
        want /= 3.0;
        assert!((cov[0][0] - want).abs() < 1e-15);
        assert_eq!(cov[0][1], cov[1][0]);
    }
}
