//! Per-detector signal intensity shapes and their time derivatives.
//!
//! A detector observes an inhomogeneous Poisson process with intensity
//! `n * (lambda(t - tau_j) + lambda0)` where the shape `lambda` vanishes on
//! `(-inf, 0]` and is positive afterwards. The built-in family is the power
//! law `lambda(s) = a * s^kappa` for `s > 0` (with a jump of size `a` at
//! zero when `kappa = 0`); arbitrary smooth shapes can be supplied as
//! tabulated closures together with their derivative.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::quad::adaptive_simpson;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("shape is not smooth (kappa = {kappa}); derivative undefined for t > tau")]
    NonSmoothModel { kappa: f64 },
    #[error("intensity shape is unbounded on the observation window")]
    UnboundedIntensity,
    #[error("detector {j} carries no information (zero Fisher integral)")]
    ZeroInformation { j: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Exponent dispatch for the power-law family; the common exponents get
/// branch-free inner loops in the likelihood kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PowKind {
    Zero,
    Half,
    One,
    Two,
    Int(i32),
    General,
}

impl PowKind {
    pub(crate) fn of(kappa: f64) -> PowKind {
        if kappa == 0.0 {
            PowKind::Zero
        } else if kappa == 0.5 {
            PowKind::Half
        } else if kappa == 1.0 {
            PowKind::One
        } else if kappa == 2.0 {
            PowKind::Two
        } else if kappa > 0.0 && kappa.fract() == 0.0 && kappa <= 64.0 {
            PowKind::Int(kappa as i32)
        } else {
            PowKind::General
        }
    }
}

/// `s^kappa` for `s >= 0` with the convention `0^0 = 1`.
pub(crate) fn pow_kappa(s: f64, kappa: f64, kind: PowKind) -> f64 {
    match kind {
        PowKind::Zero => 1.0,
        PowKind::Half => s.sqrt(),
        PowKind::One => s,
        PowKind::Two => s * s,
        PowKind::Int(k) => s.powi(k),
        PowKind::General => s.powf(kappa),
    }
}

/// A tabulated intensity shape: the function and its derivative, both owned
/// by the caller. No numerical differentiation happens inside the library.
pub struct TabulatedShape {
    pub value: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub derivative: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for TabulatedShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TabulatedShape")
    }
}

/// Signal shape of one detector.
#[derive(Debug, Clone)]
pub enum Shape {
    PowerLaw { a: f64, kappa: f64 },
    Tabulated(Arc<TabulatedShape>),
}

impl Shape {
    /// `lambda(s)`: zero for `s < 0`, the shape value afterwards. For the
    /// power law the arrival instant itself (`s = 0`) follows the indicator
    /// `1{t >= tau}`, so `kappa = 0` jumps to `a` at `s = 0` while positive
    /// exponents still start at zero.
    pub fn value(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        match self {
            Shape::PowerLaw { a, kappa } => {
                if s == 0.0 && *kappa > 0.0 {
                    0.0
                } else {
                    a * pow_kappa(s, *kappa, PowKind::of(*kappa))
                }
            }
            Shape::Tabulated(t) => {
                if s == 0.0 {
                    0.0
                } else {
                    (t.value)(s)
                }
            }
        }
    }

    /// `lambda'(s)` for `s > 0`; zero for `s <= 0`.
    pub fn derivative(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            Shape::PowerLaw { a, kappa } => {
                if *kappa == 0.0 {
                    0.0
                } else {
                    a * kappa * pow_kappa(s, kappa - 1.0, PowKind::of(kappa - 1.0))
                }
            }
            Shape::Tabulated(t) => (t.derivative)(s),
        }
    }

    /// Whether the smooth-regime operations (score, Fisher weights, One-step)
    /// apply: power laws need `kappa > 1/2`; tabulated shapes are assumed
    /// twice continuously differentiable by contract.
    pub fn is_smooth(&self) -> bool {
        match self {
            Shape::PowerLaw { kappa, .. } => *kappa > 0.5,
            Shape::Tabulated(_) => true,
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match self {
            Shape::PowerLaw { kappa, .. } => Some(*kappa),
            Shape::Tabulated(_) => None,
        }
    }

    /// `int_0^w lambda(s) ds`; closed form for the power law.
    pub fn cumulative(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        match self {
            Shape::PowerLaw { a, kappa } => {
                let e = kappa + 1.0;
                a * pow_kappa(w, e, PowKind::of(e)) / e
            }
            Shape::Tabulated(_) => adaptive_simpson(|s| self.value(s), 0.0, w),
        }
    }

    /// `int_0^w lambda'(s) ds = lambda(w) - lambda(0+)`, which is `lambda(w)`
    /// in the smooth regime where the shape starts at zero.
    pub fn derivative_cumulative(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        match self {
            Shape::PowerLaw { a, kappa } => {
                if *kappa == 0.0 {
                    0.0
                } else {
                    a * pow_kappa(w, *kappa, PowKind::of(*kappa))
                }
            }
            Shape::Tabulated(t) => (t.value)(w),
        }
    }

    /// Supremum of the shape on `[0, w]`, used as the dominating rate of the
    /// exact rejection sampler. `None` when the supremum is not finite
    /// (power laws with negative exponent explode at the arrival instant).
    pub fn sup_on(&self, w: f64) -> Option<f64> {
        if w <= 0.0 {
            return Some(0.0);
        }
        match self {
            Shape::PowerLaw { a, kappa } => {
                if *kappa < 0.0 {
                    None
                } else {
                    // nonnegative exponents are nondecreasing on [0, w]
                    Some(a * pow_kappa(w, *kappa, PowKind::of(*kappa)))
                }
            }
            Shape::Tabulated(_) => {
                // grid scan plus local golden-section refinement
                let grid = 4096;
                let mut best = 0.0f64;
                let mut best_s = 0.0f64;
                for i in 0..=grid {
                    let s = w * i as f64 / grid as f64;
                    let v = self.value(s);
                    if !v.is_finite() {
                        return None;
                    }
                    if v > best {
                        best = v;
                        best_s = s;
                    }
                }
                let h = w / grid as f64;
                let (mut lo, mut hi) = ((best_s - h).max(0.0), (best_s + h).min(w));
                let phi = 0.5 * (3.0 - 5.0f64.sqrt());
                for _ in 0..60 {
                    let m1 = lo + phi * (hi - lo);
                    let m2 = hi - phi * (hi - lo);
                    if self.value(m1) > self.value(m2) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                let refined = self.value(0.5 * (lo + hi)).max(best);
                Some(refined * (1.0 + 1e-9))
            }
        }
    }
}

enum ShapeAssignment {
    Shared(Shape),
    PerDetector(Vec<Shape>),
}

/// The intensity model of the whole network: one shape shared by every
/// detector, or one shape per detector.
pub struct IntensityModel {
    shapes: ShapeAssignment,
}

impl IntensityModel {
    pub fn power_law(a: f64, kappa: f64) -> Self {
        Self::shared(Shape::PowerLaw { a, kappa })
    }

    pub fn shared(shape: Shape) -> Self {
        Self {
            shapes: ShapeAssignment::Shared(shape),
        }
    }

    pub fn per_detector(shapes: Vec<Shape>) -> Self {
        Self {
            shapes: ShapeAssignment::PerDetector(shapes),
        }
    }

    pub fn shape(&self, j: usize) -> &Shape {
        match &self.shapes {
            ShapeAssignment::Shared(s) => s,
            ShapeAssignment::PerDetector(v) => &v[j],
        }
    }

    pub(crate) fn power_law_params(&self, j: usize) -> Option<(f64, f64)> {
        match self.shape(j) {
            Shape::PowerLaw { a, kappa } => Some((*a, *kappa)),
            Shape::Tabulated(_) => None,
        }
    }
}

impl fmt::Debug for IntensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shapes {
            ShapeAssignment::Shared(s) => write!(f, "IntensityModel::Shared({s:?})"),
            ShapeAssignment::PerDetector(v) => write!(f, "IntensityModel::PerDetector({v:?})"),
        }
    }
}

/// Full intensity of detector `j` at unit scale: `lambda_j(t - tau_j) + lambda0`.
pub fn intensity_at(model: &IntensityModel, j: usize, tau_j: f64, t: f64, lambda0: f64) -> f64 {
    model.shape(j).value(t - tau_j) + lambda0
}

/// Time derivative of the signal part at `s = t - tau_j`; zero for `t <= tau_j`.
/// Errors for power laws with `kappa <= 1/2`, where the derivative either does
/// not exist or is not square-integrable near the arrival.
pub fn intensity_derivative_at(
    model: &IntensityModel,
    j: usize,
    tau_j: f64,
    t: f64,
) -> Result<f64, ModelError> {
    if t <= tau_j {
        return Ok(0.0);
    }
    let shape = model.shape(j);
    if !shape.is_smooth() {
        return Err(ModelError::NonSmoothModel {
            kappa: shape.kappa().unwrap_or(f64::NAN),
        });
    }
    Ok(shape.derivative(t - tau_j))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_before_arrival_is_noise_only() {
        let m = IntensityModel::power_law(1.0, 1.0);
        assert_eq!(intensity_at(&m, 0, 1.0, 0.7, 0.5), 0.5);
    }

    #[test]
    fn power_law_linear_after_arrival() {
        let m = IntensityModel::power_law(1.0, 1.0);
        assert_eq!(intensity_at(&m, 0, 1.0, 2.0, 0.5), 1.5);
    }

    #[test]
    fn step_shape_jumps_at_arrival() {
        let m = IntensityModel::power_law(2.0, 0.0);
        assert_eq!(intensity_at(&m, 0, 1.0, 1.0, 0.5), 2.5);
        assert_eq!(intensity_at(&m, 0, 1.0, 3.0, 0.5), 2.5);
        assert_eq!(intensity_at(&m, 0, 1.0, 0.999, 0.5), 0.5);
    }

    #[test]
    fn derivative_is_causal() {
        let m = IntensityModel::power_law(1.0, 2.0);
        assert_eq!(intensity_derivative_at(&m, 0, 1.0, 0.5).unwrap(), 0.0);
        assert_eq!(intensity_derivative_at(&m, 0, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_derivative_value() {
        let m = IntensityModel::power_law(1.0, 2.0);
        assert_eq!(intensity_derivative_at(&m, 0, 1.0, 3.0).unwrap(), 4.0);
    }

    #[test]
    fn non_smooth_exponent_rejected() {
        let m = IntensityModel::power_law(1.0, 0.5);
        assert!(matches!(
            intensity_derivative_at(&m, 0, 1.0, 2.0),
            Err(ModelError::NonSmoothModel { .. })
        ));
        // but causality still answers zero before the arrival
        assert_eq!(intensity_derivative_at(&m, 0, 1.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn tabulated_derivative_matches_finite_difference() {
        let shape = Shape::Tabulated(Arc::new(TabulatedShape {
            value: Box::new(|s| s * s / (1.0 + s)),
            derivative: Box::new(|s| (s * s + 2.0 * s) / ((1.0 + s) * (1.0 + s))),
        }));
        let m = IntensityModel::shared(shape);
        let (tau, t) = (0.4, 1.7);
        let d = intensity_derivative_at(&m, 0, tau, t).unwrap();
        let h = 1e-6;
        let fd = (intensity_at(&m, 0, tau, t + h, 0.0) - intensity_at(&m, 0, tau, t - h, 0.0))
            / (2.0 * h);
        assert!((d - fd).abs() <= 1e-5 * d.abs());
    }

    #[test]
    fn cumulative_closed_form_matches_quadrature() {
        let shape = Shape::PowerLaw { a: 3.0, kappa: 2.0 };
        let w = 1.7;
        let closed = shape.cumulative(w);
        let quad = adaptive_simpson(|s| shape.value(s), 0.0, w);
        assert!((closed - quad).abs() < 1e-8);
        assert!((closed - 3.0 * w.powi(3) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn negative_exponent_has_no_finite_sup() {
        let shape = Shape::PowerLaw {
            a: 1.0,
            kappa: -0.25,
        };
        assert!(shape.sup_on(1.0).is_none());
    }
}
