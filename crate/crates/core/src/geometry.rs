//! Planar geometry of the source and detectors: travel times, their
//! gradients, extremal travel times over the search region, and configuration
//! validity checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("region bounds must satisfy x_min < x_max and y_min < y_max")]
    InvalidRegion,
    #[error("need at least {required} sensors, got {got}")]
    TooFewSensors { required: usize, got: usize },
    #[error("propagation speed must be positive, got {0}")]
    InvalidSpeed(f64),
    #[error("observation horizon must be positive, got {0}")]
    InvalidHorizon(f64),
    #[error("noise level must be positive, got {0}")]
    InvalidNoiseLevel(f64),
    #[error("sensor {j}: latest possible arrival {beta} is not before the horizon {horizon}")]
    ArrivalAfterHorizon { j: usize, beta: f64, horizon: f64 },
    #[error("all sensors lie on one line; the source is not identifiable")]
    CollinearSensors,
    #[error("point coincides with sensor {j}; travel-time gradient undefined")]
    DegenerateGeometry { j: usize },
    #[error("sensor index {j} out of range (k = {k})")]
    SensorIndex { j: usize, k: usize },
    #[error("coordinates must be finite")]
    NonFinite,
}

/// A point of the plane, in the common length unit of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn add(self, dx: f64, dy: f64) -> Point2 {
        Point2::new(self.x + dx, self.y + dy)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned rectangle used as the concrete convex bounded search region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, GeometryError> {
        if !(x_min.is_finite() && x_max.is_finite() && y_min.is_finite() && y_max.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if !(x_min < x_max && y_min < y_max) {
            return Err(GeometryError::InvalidRegion);
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Length of the rectangle diagonal, the diameter of the region.
    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn centroid(&self) -> Point2 {
        Point2::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            Point2::new(self.x_min, self.y_min),
            Point2::new(self.x_max, self.y_min),
            Point2::new(self.x_max, self.y_max),
            Point2::new(self.x_min, self.y_max),
        ]
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn contains_with_margin(&self, p: Point2, margin: f64) -> bool {
        p.x >= self.x_min - margin
            && p.x <= self.x_max + margin
            && p.y >= self.y_min - margin
            && p.y <= self.y_max + margin
    }

    /// Closest point of the rectangle to `p` (orthogonal projection, clamped).
    pub fn clamp(&self, p: Point2) -> Point2 {
        Point2::new(
            p.x.clamp(self.x_min, self.x_max),
            p.y.clamp(self.y_min, self.y_max),
        )
    }
}

/// Detector configuration: positions, propagation speed, observation horizon,
/// noise level and the search region for the source.
#[derive(Debug, Clone)]
pub struct SensorNetwork {
    sensors: Vec<Point2>,
    nu: f64,
    t_horizon: f64,
    lambda0: f64,
    theta_region: Region,
}

impl SensorNetwork {
    /// Builds a network and validates every configuration invariant:
    /// at least three sensors not on one line, positive speed/horizon/noise,
    /// and every latest possible arrival strictly before the horizon.
    pub fn new(
        sensors: Vec<Point2>,
        nu: f64,
        t_horizon: f64,
        lambda0: f64,
        theta_region: Region,
    ) -> Result<Self, GeometryError> {
        let net = Self::new_allow_collinear(sensors, nu, t_horizon, lambda0, theta_region)?;
        if !collinearity_check(net.sensors()) {
            return Err(GeometryError::CollinearSensors);
        }
        Ok(net)
    }

    /// Same as [`SensorNetwork::new`] but skips the non-collinearity check,
    /// so degenerate geometries can be constructed and studied. Estimators
    /// that require identifiability re-check collinearity themselves.
    pub fn new_allow_collinear(
        sensors: Vec<Point2>,
        nu: f64,
        t_horizon: f64,
        lambda0: f64,
        theta_region: Region,
    ) -> Result<Self, GeometryError> {
        if sensors.len() < 3 {
            return Err(GeometryError::TooFewSensors {
                required: 3,
                got: sensors.len(),
            });
        }
        if sensors.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(GeometryError::InvalidSpeed(nu));
        }
        if !(t_horizon > 0.0) || !t_horizon.is_finite() {
            return Err(GeometryError::InvalidHorizon(t_horizon));
        }
        if !(lambda0 > 0.0) || !lambda0.is_finite() {
            return Err(GeometryError::InvalidNoiseLevel(lambda0));
        }
        let net = Self {
            sensors,
            nu,
            t_horizon,
            lambda0,
            theta_region,
        };
        for j in 0..net.k() {
            let (_, beta) = net.domain_bounds_unchecked(j);
            if beta >= t_horizon {
                return Err(GeometryError::ArrivalAfterHorizon {
                    j,
                    beta,
                    horizon: t_horizon,
                });
            }
        }
        Ok(net)
    }

    pub fn k(&self) -> usize {
        self.sensors.len()
    }

    pub fn sensors(&self) -> &[Point2] {
        &self.sensors
    }

    pub fn sensor(&self, j: usize) -> Point2 {
        self.sensors[j]
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn theta_region(&self) -> Region {
        self.theta_region
    }

    fn check_index(&self, j: usize) -> Result<(), GeometryError> {
        if j >= self.k() {
            Err(GeometryError::SensorIndex { j, k: self.k() })
        } else {
            Ok(())
        }
    }

    fn domain_bounds_unchecked(&self, j: usize) -> (f64, f64) {
        let s = self.sensors[j];
        let alpha = s.dist(self.theta_region.clamp(s)) / self.nu;
        let beta = self
            .theta_region
            .corners()
            .iter()
            .map(|c| s.dist(*c) / self.nu)
            .fold(0.0f64, f64::max);
        (alpha, beta)
    }
}

/// Signal travel time from `theta` to sensor `j`: distance over speed.
pub fn travel_time(net: &SensorNetwork, j: usize, theta: Point2) -> f64 {
    net.sensor(j).dist(theta) / net.nu()
}

/// Gradient of [`travel_time`] with respect to the source position:
/// `-m_j / nu` where `m_j` is the unit vector from `theta` toward sensor `j`.
/// Undefined (error) exactly at the sensor position.
pub fn travel_time_gradient(
    net: &SensorNetwork,
    j: usize,
    theta: Point2,
) -> Result<[f64; 2], GeometryError> {
    net.check_index(j)?;
    let s = net.sensor(j);
    let d = s.dist(theta);
    if d == 0.0 {
        return Err(GeometryError::DegenerateGeometry { j });
    }
    let scale = net.nu() * d;
    Ok([-(s.x - theta.x) / scale, -(s.y - theta.y) / scale])
}

/// Extremal travel times to sensor `j` over the search region:
/// the infimum is attained at the clamped orthogonal projection of the sensor
/// onto the rectangle, the supremum at one of the four corners.
pub fn domain_bounds(net: &SensorNetwork, j: usize) -> Result<(f64, f64), GeometryError> {
    net.check_index(j)?;
    Ok(net.domain_bounds_unchecked(j))
}

/// True iff some sensor triple spans a triangle of area above a scale-free
/// tolerance `1e-9 * diameter^2`, i.e. the sensors are not all on one line.
pub fn collinearity_check(sensors: &[Point2]) -> bool {
    let k = sensors.len();
    if k < 3 {
        return false;
    }
    let mut diam2 = 0.0f64;
    for i in 0..k {
        for l in (i + 1)..k {
            let d = sensors[i].dist(sensors[l]);
            diam2 = diam2.max(d * d);
        }
    }
    let eps_area = 1e-9 * diam2;
    for i in 0..k {
        for l in (i + 1)..k {
            for m in (l + 1)..k {
                let (a, b, c) = (sensors[i], sensors[l], sensors[m]);
                let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
                if 0.5 * cross.abs() > eps_area {
                    return true;
                }
            }
        }
    }
    false
}
