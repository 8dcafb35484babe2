//! Joint maximum likelihood over the search region.

use super::{EstimateError, EstimationResult, EstimatorLabel};
use crate::fisher::fisher_matrix;
use crate::geometry::{collinearity_check, Point2, SensorNetwork};
use crate::intensity::IntensityModel;
use crate::likelihood::{log_likelihood_batch, LikelihoodError};
use crate::optim::nelder_mead_max;
use crate::sim::ObservationSet;

/// Grid resolution per axis for the multi-start stage.
pub(crate) const MLE_GRID: usize = 25;
/// Simplex convergence target as a fraction of the region diameter.
const MLE_TOL_FRACTION: f64 = 1e-8;

/// Maximizes the joint log-likelihood over the region: the likelihood is
/// evaluated on a 25x25 grid, then simplex descent refines from the best
/// grid point (and from `init` when given, e.g. a least-squares warm start).
/// Grid ties break to the first point found.
pub fn joint_mle(
    net: &SensorNetwork,
    model: &IntensityModel,
    obs: &ObservationSet,
    init: Option<Point2>,
) -> Result<EstimationResult, EstimateError> {
    if !collinearity_check(net.sensors()) {
        return Err(EstimateError::CollinearSensors);
    }
    let region = net.theta_region();
    let g = MLE_GRID;
    let mut grid = Vec::with_capacity(g * g);
    for iy in 0..g {
        for ix in 0..g {
            grid.push(Point2::new(
                region.x_min + region.width() * ix as f64 / (g - 1) as f64,
                region.y_min + region.height() * iy as f64 / (g - 1) as f64,
            ));
        }
    }
    let values = log_likelihood_batch(net, model, obs, &grid)?;
    let mut best = 0usize;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let grid_best = grid[best];
    let grid_best_value = values[best];
    if !grid_best_value.is_finite() {
        return Err(EstimateError::OptimizerFailure(
            "log-likelihood not finite on the search grid".into(),
        ));
    }

    let objective = |p: Point2| -> f64 {
        match log_likelihood_batch(net, model, obs, &[p]) {
            Ok(v) => v[0],
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let tol = MLE_TOL_FRACTION * region.diameter();
    let step = 0.5 * region.width().min(region.height()) / (g - 1) as f64;

    let mut starts = vec![grid_best];
    if let Some(p) = init {
        starts.push(region.clamp(p));
    }
    let mut winner: Option<(Point2, f64, usize, bool)> = None;
    for start in starts {
        let out = nelder_mead_max(objective, start, step, region, tol, 600);
        let better = match &winner {
            Some((_, v, _, _)) => out.value > *v,
            None => true,
        };
        if better {
            winner = Some((out.point, out.value, out.evals, out.converged));
        }
    }
    let (theta, value, evals, converged) = winner.unwrap();
    if !value.is_finite() || value < grid_best_value {
        return Err(EstimateError::OptimizerFailure(format!(
            "simplex descent did not reach the grid optimum ({value} < {grid_best_value})"
        )));
    }

    let info = fisher_matrix(net, model, theta, net.t_horizon())?;
    let cov = info.inverse().ok_or(LikelihoodError::Model(
        crate::intensity::ModelError::ZeroInformation { j: usize::MAX },
    ));
    let normalized_cov = match cov {
        Ok(c) => c,
        Err(_) => [[f64::NAN; 2]; 2],
    };
    Ok(
        EstimationResult::new(EstimatorLabel::Mle, theta, normalized_cov)
            .with("log_lik", value)
            .with("grid_log_lik", grid_best_value)
            .with("nm_evals", evals as f64)
            .with("nm_converged", if converged { 1.0 } else { 0.0 }),
    )
}
