//! Fisher information: per-detector weights, the 2x2 position-information
//! matrix (full and time-truncated) and the diagonal arrival-time matrix.

use serde::Serialize;

use crate::geometry::{travel_time, GeometryError, Point2, SensorNetwork};
use crate::intensity::{IntensityModel, ModelError, Shape};
use crate::mat::{self, Mat2};
use crate::quad::adaptive_simpson;

/// Which time window a [`FisherInfo`] was integrated over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FisherKind {
    Full,
    Truncated { t: f64 },
}

/// Symmetric 2x2 position-information matrix `I(theta)` (or `I_t(theta)`).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FisherInfo {
    pub matrix: Mat2,
    pub kind: FisherKind,
}

impl FisherInfo {
    pub fn det(&self) -> f64 {
        mat::mat2_det(&self.matrix)
    }

    pub fn trace(&self) -> f64 {
        mat::mat2_trace(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        mat::mat2_sym_eigenvalues(&self.matrix)[0]
    }

    pub fn inverse(&self) -> Option<Mat2> {
        mat::mat2_inverse(&self.matrix)
    }
}

/// Diagonal of the k x k arrival-time information matrix; entry `j` is
/// `int_{tau_j}^{T} lambda_j'^2 / (lambda_j + lambda0) dt` and
/// `sigma_j^2 = 1 / diag_j` is the asymptotic variance of the per-detector
/// arrival MLE.
#[derive(Debug, Clone, Serialize)]
pub struct ArrivalFisher {
    pub diag: Vec<f64>,
}

impl ArrivalFisher {
    pub fn sigma2(&self, j: usize) -> f64 {
        1.0 / self.diag[j]
    }
}

/// `int_0^w lambda'(s)^2 / (lambda(s) + lambda0) ds`.
///
/// Power laws with `0 < kappa <= 1/2` (and negative exponents) make the
/// integral diverge at the arrival instant; the mathematically correct
/// `+inf` is returned. Exponents in `(1/2, 1)` have an integrable endpoint
/// singularity which is removed by the substitution `s = u^p`.
pub(crate) fn info_integral(shape: &Shape, lambda0: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    match shape {
        Shape::PowerLaw { a, kappa } => {
            let (a, kappa) = (*a, *kappa);
            if a == 0.0 || kappa == 0.0 {
                return 0.0;
            }
            if kappa <= 0.5 {
                return f64::INFINITY;
            }
            let integrand = |s: f64| {
                let d = shape.derivative(s);
                d * d / (shape.value(s) + lambda0)
            };
            if kappa >= 1.0 {
                adaptive_simpson(integrand, 0.0, w)
            } else {
                // s = u^p with p chosen so the transformed integrand ~ u near 0
                let p = 2.0 / (2.0 * kappa - 1.0);
                let u_max = w.powf(1.0 / p);
                adaptive_simpson(
                    |u| {
                        if u <= 0.0 {
                            return 0.0;
                        }
                        let s = u.powf(p);
                        integrand(s) * p * u.powf(p - 1.0)
                    },
                    0.0,
                    u_max,
                )
            }
        }
        Shape::Tabulated(_) => adaptive_simpson(
            |s| {
                let d = shape.derivative(s);
                d * d / (shape.value(s) + lambda0)
            },
            0.0,
            w,
        ),
    }
}

/// Fisher weight `J_{j,t}(theta)`: the information integral over
/// `[tau_j(theta), t_end]`, scaled by `1 / (nu^2 * dist^2)`.
/// Zero when `t_end` precedes the arrival.
pub fn fisher_weight(
    net: &SensorNetwork,
    model: &IntensityModel,
    j: usize,
    theta: Point2,
    t_end: f64,
) -> Result<f64, ModelError> {
    let d = net.sensor(j).dist(theta);
    if d == 0.0 {
        return Err(ModelError::Geometry(GeometryError::DegenerateGeometry {
            j,
        }));
    }
    let tau = travel_time(net, j, theta);
    let w = t_end.min(net.t_horizon()) - tau;
    if w <= 0.0 {
        return Ok(0.0);
    }
    let nu = net.nu();
    Ok(info_integral(model.shape(j), net.lambda0(), w) / (nu * nu * d * d))
}

/// The 2x2 information matrix with entries
/// `I_11 = sum_j (x_j - x0)^2 J_j`, `I_12 = sum_j (x_j - x0)(y_j - y0) J_j`,
/// `I_22 = sum_j (y_j - y0)^2 J_j`; `t_end = T` gives the full matrix.
pub fn fisher_matrix(
    net: &SensorNetwork,
    model: &IntensityModel,
    theta: Point2,
    t_end: f64,
) -> Result<FisherInfo, ModelError> {
    let mut m = [[0.0f64; 2]; 2];
    for j in 0..net.k() {
        let w = fisher_weight(net, model, j, theta, t_end)?;
        let dx = net.sensor(j).x - theta.x;
        let dy = net.sensor(j).y - theta.y;
        m[0][0] += dx * dx * w;
        m[0][1] += dx * dy * w;
        m[1][1] += dy * dy * w;
    }
    m[1][0] = m[0][1];
    let kind = if t_end >= net.t_horizon() {
        FisherKind::Full
    } else {
        FisherKind::Truncated { t: t_end }
    };
    Ok(FisherInfo { matrix: m, kind })
}

/// Diagonal arrival-time information at `theta`; errors when a detector
/// carries no information (for example a signal-free shape).
pub fn arrival_fisher(
    net: &SensorNetwork,
    model: &IntensityModel,
    theta: Point2,
) -> Result<ArrivalFisher, ModelError> {
    let mut diag = Vec::with_capacity(net.k());
    for j in 0..net.k() {
        let tau = travel_time(net, j, theta);
        let w = net.t_horizon() - tau;
        let v = info_integral(model.shape(j), net.lambda0(), w);
        if v == 0.0 {
            return Err(ModelError::ZeroInformation { j });
        }
        diag.push(v);
    }
    Ok(ArrivalFisher { diag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;

    /// Reference desk-scale configuration used across the test suites.
    pub(crate) fn reference_net() -> SensorNetwork {
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

    pub(crate) fn reference_model() -> IntensityModel {
        IntensityModel::power_law(3.0, 2.0)
    }

    /// Independent quadrature oracle: iterative composite Simpson doubled
    /// until two refinements agree. Deliberately a different code path from
    /// the adaptive recursion in `quad`.
    fn simpson_oracle<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
        let mut n = 16usize;
        let mut prev = f64::NAN;
        loop {
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for i in 1..n {
                let x = a + h * i as f64;
                s += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let val = s * h / 3.0;
            if (val - prev).abs() < 1e-11 || n > 1 << 22 {
                return val;
            }
            prev = val;
            n *= 2;
        }
    }

    #[test]
    fn weight_is_zero_before_arrival() {
        let net = reference_net();
        let model = reference_model();
        let theta = Point2::new(0.3, 0.4);
        let tau = travel_time(&net, 0, theta);
        let w = fisher_weight(&net, &model, 0, theta, tau * 0.5).unwrap();
        assert_eq!(w, 0.0);
    }

    #[test]
    fn weight_matches_quadrature_oracle() {
        // a=1, kappa=2, lambda0=0.5, window 0.8, unit distance and speed:
        // J = int_0^0.8 (2s)^2 / (s^2 + 0.5) ds = 0.86067227261195...
        let region = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let net = SensorNetwork::new(
            vec![
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
                Point2::new(-1.0, 0.0),
            ],
            1.0,
            1.2,
            0.5,
            region,
        );
        // horizon must exceed beta; use allow-collinear-free direct integral check
        drop(net);
        let shape = Shape::PowerLaw { a: 1.0, kappa: 2.0 };
        let got = info_integral(&shape, 0.5, 0.8);
        let oracle = simpson_oracle(|s| 4.0 * s * s / (s * s + 0.5), 0.0, 0.8);
        assert!(
            (got - oracle).abs() <= 1e-6 * oracle,
            "got {got}, oracle {oracle}"
        );
        // closed form 4*(w - sqrt(1/2) * atan(w / sqrt(1/2)))
        let half = 0.5f64.sqrt();
        let closed = 4.0 * (0.8 - half * (0.8 / half).atan());
        assert!((got - closed).abs() <= 1e-8);
    }

    #[test]
    fn weight_scales_with_inverse_speed_squared() {
        let region = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let make = |nu: f64, horizon: f64| {
            SensorNetwork::new(
                vec![
                    Point2::new(-1.0, -1.0),
                    Point2::new(2.0, -1.0),
                    Point2::new(2.0, 2.0),
                ],
                nu,
                horizon,
                1.0,
                region,
            )
            .unwrap()
        };
        let model = reference_model();
        let theta = Point2::new(0.3, 0.4);
        // fix the integration window by comparing at matched tau + w
        let net1 = make(1.0, 6.0);
        let tau1 = travel_time(&net1, 0, theta);
        let j1 = fisher_weight(&net1, &model, 0, theta, tau1 + 1.0).unwrap();
        let net2 = make(2.0, 6.0);
        let tau2 = travel_time(&net2, 0, theta);
        let j2 = fisher_weight(&net2, &model, 0, theta, tau2 + 1.0).unwrap();
        assert!((j2 / j1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn matrix_zero_before_first_arrival() {
        let net = reference_net();
        let model = reference_model();
        let theta = Point2::new(0.3, 0.4);
        let t_min = (0..4)
            .map(|j| travel_time(&net, j, theta))
            .fold(f64::INFINITY, f64::min);
        let info = fisher_matrix(&net, &model, theta, t_min * 0.9).unwrap();
        assert_eq!(info.matrix, [[0.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn matrix_rank_one_with_single_active_detector() {
        let net = reference_net();
        let model = reference_model();
        let theta = Point2::new(0.3, 0.4);
        let mut taus: Vec<f64> = (0..4).map(|j| travel_time(&net, j, theta)).collect();
        taus.sort_by(f64::total_cmp);
        let t = 0.5 * (taus[0] + taus[1]);
        let info = fisher_matrix(&net, &model, theta, t).unwrap();
        let scale = crate::mat::mat2_frobenius(&info.matrix);
        assert!(scale > 0.0);
        assert!(info.det().abs() <= 1e-12 * scale * scale);
    }

    #[test]
    fn matrix_is_permutation_invariant() {
        let region = Region::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let sensors = vec![
            Point2::new(-1.0, -1.0),
            Point2::new(2.0, -1.0),
            Point2::new(2.0, 2.0),
            Point2::new(-1.0, 2.0),
        ];
        let mut permuted = sensors.clone();
        permuted.rotate_left(2);
        permuted.swap(0, 1);
        let model = reference_model();
        let theta = Point2::new(0.3, 0.4);
        let a = fisher_matrix(
            &SensorNetwork::new(sensors, 1.0, 6.0, 1.0, region).unwrap(),
            &model,
            theta,
            6.0,
        )
        .unwrap();
        let b = fisher_matrix(
            &SensorNetwork::new(permuted, 1.0, 6.0, 1.0, region).unwrap(),
            &model,
            theta,
            6.0,
        )
        .unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((a.matrix[r][c] - b.matrix[r][c]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn matrix_monotone_in_truncation_time() {
        let net = reference_net();
        let model = reference_model();
        let theta = Point2::new(0.62, 0.17);
        let times: Vec<f64> = (1..=12).map(|i| 6.0 * i as f64 / 12.0).collect();
        let mut prev = fisher_matrix(&net, &model, theta, 0.0).unwrap().matrix;
        for &t in &times {
            let cur = fisher_matrix(&net, &model, theta, t).unwrap().matrix;
            let diff = crate::mat::mat2_sub(&cur, &prev);
            let ev = crate::mat::mat2_sym_eigenvalues(&diff);
            assert!(ev[0] >= -1e-10, "Loewner monotonicity violated at t={t}");
            prev = cur;
        }
    }

    #[test]
    fn matrix_nondegenerate_on_region_grid() {
        let net = reference_net();
        let model = reference_model();
        let region = net.theta_region();
        let mut min_eig = f64::INFINITY;
        for ix in 0..20 {
            for iy in 0..20 {
                let theta = Point2::new(
                    region.x_min + region.width() * ix as f64 / 19.0,
                    region.y_min + region.height() * iy as f64 / 19.0,
                );
                let info = fisher_matrix(&net, &model, theta, 6.0).unwrap();
                min_eig = min_eig.min(info.min_eigenvalue());
            }
        }
        assert!(min_eig > 0.0, "kappa_1 = {min_eig}");
    }

    #[test]
    fn arrival_diag_relates_to_weight() {
        let net = reference_net();
        let model = reference_model();
        let theta = Point2::new(0.3, 0.4);
        let af = arrival_fisher(&net, &model, theta).unwrap();
        for j in 0..net.k() {
            let d = net.sensor(j).dist(theta);
            let jw = fisher_weight(&net, &model, j, theta, 6.0).unwrap();
            let nu = net.nu();
            assert!((af.diag[j] - nu * nu * d * d * jw).abs() <= 1e-9 * af.diag[j]);
        }
    }

    #[test]
    fn equidistant_detectors_have_equal_information() {
        let region = Region::new(-0.5, 0.5, -0.5, 0.5).unwrap();
        let net = SensorNetwork::new(
            vec![
                Point2::new(2.0, 0.0),
                Point2::new(-2.0, 0.0),
                Point2::new(0.0, 2.0),
            ],
            1.0,
            8.0,
            1.0,
            region,
        )
        .unwrap();
        let model = reference_model();
        let af = arrival_fisher(&net, &model, Point2::new(0.0, 0.0)).unwrap();
        assert!((af.diag[0] - af.diag[1]).abs() < 1e-10);
        assert!((af.diag[0] - af.diag[2]).abs() < 1e-10);
    }

    #[test]
    fn zero_information_detected() {
        let net = reference_net();
        let silent = IntensityModel::power_law(0.0, 2.0);
        assert!(matches!(
            arrival_fisher(&net, &silent, Point2::new(0.3, 0.4)),
            Err(ModelError::ZeroInformation { .. })
        ));
    }

    #[test]
    fn boundary_exponent_diverges() {
        let shape = Shape::PowerLaw { a: 1.0, kappa: 0.5 };
        assert_eq!(info_integral(&shape, 0.5, 1.0), f64::INFINITY);
    }

    #[test]
    fn singular_exponent_between_half_and_one_converges() {
        // kappa = 0.75: integrand ~ s^{-1/2} near zero, integrable.
        let shape = Shape::PowerLaw {
            a: 2.0,
            kappa: 0.75,
        };
        let got = info_integral(&shape, 1.0, 1.0);
        let oracle = simpson_oracle(
            |u| {
                // same substitution check via u = s^{1/4} (p = 4)
                let s = u.powi(4);
                let d = 2.0 * 0.75 * s.powf(-0.25);
                d * d / (2.0 * s.powf(0.75) + 1.0) * 4.0 * u.powi(3)
            },
            1e-9,
            1.0,
        );
        assert!(
            (got - oracle).abs() <= 1e-5 * oracle,
            "got {got} oracle {oracle}"
        );
    }
}
