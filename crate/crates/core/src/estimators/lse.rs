//! Least-squares multilateration from squared arrival times.
//!
//! With `z_j = nu^2 tau_hat_j^2` and `r_j^2 = x_j^2 + y_j^2` the regression
//! `z_j = r_j^2 - 2 x_j g1 - 2 y_j g2 + g3 + noise` is linear in
//! `g = (x0, y0, |theta0|^2)`; its normal equations `A g = Z` give the
//! estimator in closed form. A second variant adds an unknown emission time
//! as a fourth parameter.

use serde::Serialize;

use super::{ArrivalEstimates, EstimateError, EstimationResult, EstimatorLabel};
use crate::geometry::{Point2, SensorNetwork};
use crate::mat::{
    mat3_cond_frobenius, mat3_inverse, mat3_mul, mat3_mul_vec, mat3_transpose, solve_dense, Mat2,
    Mat3,
};

/// Condition-number gate on the linear system.
const COND_LIMIT: f64 = 1e10;

/// Result of the three-parameter least-squares fit.
#[derive(Debug, Clone, Serialize)]
pub struct LseResult {
    /// `(x0, y0, |theta0|^2)` estimates.
    pub gamma: [f64; 3],
    /// Position part of `gamma`.
    pub theta_star: Point2,
    /// The linear-system matrix (geometry only).
    pub a_matrix: Mat3,
    /// Asymptotic covariance of `sqrt(n) (gamma - gamma_0)`.
    pub d_matrix: Mat3,
    /// Position block of `d_matrix`.
    pub m_matrix: Mat2,
    /// Internal-consistency statistic `|g3 - g1^2 - g2^2|`; should fall
    /// below `n^{-1/4}` at large scales.
    pub s_n: f64,
    pub cond_a: f64,
}

/// Threshold against which [`LseResult::s_n`] is judged.
pub fn sanity_threshold(n: u64) -> f64 {
    (n as f64).powf(-0.25)
}

/// Builds the system matrix from the sensor coordinates alone.
fn system_matrix(net: &SensorNetwork) -> Mat3 {
    let k = net.k() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in net.sensors() {
        sx += s.x;
        sy += s.y;
        sxx += s.x * s.x;
        sxy += s.x * s.y;
        syy += s.y * s.y;
    }
    [
        [-2.0 * sx, -2.0 * sy, k],
        [-2.0 * sxx, -2.0 * sxy, sx],
        [-2.0 * sxy, -2.0 * syy, sy],
    ]
}

/// The mean-square position estimator `gamma* = A^{-1} Z` with its plug-in
/// asymptotic covariance `D = A^{-1} C'C A^{-T}` (the system matrix is not
/// symmetric, so the right factor carries the transpose).
pub fn lse_estimate(
    net: &SensorNetwork,
    arrivals: &ArrivalEstimates,
) -> Result<LseResult, EstimateError> {
    let k = net.k();
    if arrivals.k() != k {
        return Err(EstimateError::TooFewDetectors {
            required: k,
            got: arrivals.k(),
        });
    }
    let a = system_matrix(net);
    let cond_a = mat3_cond_frobenius(&a);
    if !cond_a.is_finite() || cond_a > COND_LIMIT {
        return Err(EstimateError::SingularDesign { cond: cond_a });
    }
    let a_inv = mat3_inverse(&a).ok_or(EstimateError::SingularDesign { cond: cond_a })?;

    let nu2 = net.nu() * net.nu();
    let mut z = [0.0f64; 3];
    for j in 0..k {
        let s = net.sensor(j);
        let r2 = s.x * s.x + s.y * s.y;
        let zj = nu2 * arrivals.tau_hat[j] * arrivals.tau_hat[j] - r2;
        z[0] += zj;
        z[1] += s.x * zj;
        z[2] += s.y * zj;
    }
    let gamma = mat3_mul_vec(&a_inv, z);

    // plug-in noise loadings c_j = 2 nu^2 tau_hat_j sigma_hat_j (1, x_j, y_j)
    let mut ctc = [[0.0f64; 3]; 3];
    for j in 0..k {
        let s = net.sensor(j);
        let sigma = arrivals.sigma2[j].sqrt();
        let base = 2.0 * nu2 * arrivals.tau_hat[j] * sigma;
        let c = [base, base * s.x, base * s.y];
        for r in 0..3 {
            for cidx in 0..3 {
                ctc[r][cidx] += c[r] * c[cidx];
            }
        }
    }
    let d_matrix = mat3_mul(&mat3_mul(&a_inv, &ctc), &mat3_transpose(&a_inv));
    let m_matrix = [
        [d_matrix[0][0], d_matrix[0][1]],
        [d_matrix[1][0], d_matrix[1][1]],
    ];
    let s_n = (gamma[2] - gamma[0] * gamma[0] - gamma[1] * gamma[1]).abs();
    Ok(LseResult {
        gamma,
        theta_star: Point2::new(gamma[0], gamma[1]),
        a_matrix: a,
        d_matrix,
        m_matrix,
        s_n,
        cond_a,
    })
}

impl LseResult {
    /// Repackages the fit as a generic estimation result.
    pub fn to_estimation_result(&self, n: u64) -> EstimationResult {
        EstimationResult::new(EstimatorLabel::Lse, self.theta_star, self.m_matrix)
            .with("s_n", self.s_n)
            .with("s_n_threshold", sanity_threshold(n))
            .with("cond_a", self.cond_a)
            .with("gamma3", self.gamma[2])
    }
}

/// Four-parameter fit for an unknown emission time: solves the overdetermined
/// system `-2 x_j g1 - 2 y_j g2 + 2 nu^2 tau_hat_j g3 + g4 = nu^2 tau_hat_j^2 - r_j^2`
/// by normal equations. Needs at least four detectors.
#[derive(Debug, Clone, Serialize)]
pub struct ExtendedLseResult {
    /// `(x0, y0, emission time, |theta0|^2 - nu^2 t*^2)`.
    pub gamma: [f64; 4],
    pub theta: Point2,
    pub emission_time: f64,
    /// `|g4 - g1^2 - g2^2 + nu^2 g3^2|`, zero for exact inputs.
    pub consistency_residual: f64,
}

pub fn lse_estimate_unknown_start(
    net: &SensorNetwork,
    arrivals: &ArrivalEstimates,
) -> Result<ExtendedLseResult, EstimateError> {
    let k = net.k();
    if k < 4 {
        return Err(EstimateError::TooFewDetectors {
            required: 4,
            got: k,
        });
    }
    if arrivals.k() != k {
        return Err(EstimateError::TooFewDetectors {
            required: k,
            got: arrivals.k(),
        });
    }
    let nu2 = net.nu() * net.nu();
    // normal equations G'G gamma = G'rhs for the k x 4 design
    let mut gtg = vec![vec![0.0f64; 4]; 4];
    let mut gtr = vec![0.0f64; 4];
    for j in 0..k {
        let s = net.sensor(j);
        let tau = arrivals.tau_hat[j];
        let row = [-2.0 * s.x, -2.0 * s.y, 2.0 * nu2 * tau, 1.0];
        let rhs = nu2 * tau * tau - (s.x * s.x + s.y * s.y);
        for r in 0..4 {
            for c in 0..4 {
                gtg[r][c] += row[r] * row[c];
            }
            gtr[r] += row[r] * rhs;
        }
    }
    let det_scale: f64 = (0..4).map(|i| gtg[i][i]).product();
    let gamma = solve_dense(&gtg, &gtr).ok_or(EstimateError::SingularDesign {
        cond: f64::INFINITY,
    })?;
    if gamma.iter().any(|v| !v.is_finite()) || det_scale == 0.0 {
        return Err(EstimateError::SingularDesign {
            cond: f64::INFINITY,
        });
    }
    let consistency_residual =
        (gamma[3] - gamma[0] * gamma[0] - gamma[1] * gamma[1] + nu2 * gamma[2] * gamma[2]).abs();
    Ok(ExtendedLseResult {
        gamma: [gamma[0], gamma[1], gamma[2], gamma[3]],
        theta: Point2::new(gamma[0], gamma[1]),
        emission_time: gamma[2],
        consistency_residual,
    })
}
