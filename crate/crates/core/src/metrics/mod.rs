//! Point-cloud discrepancy metrics.
//!
//! All distances are taken in the full (x, y, doppler) feature space with
//! [`euclidean`]. Empty clouds are rejected: callers that run over frame
//! sequences record a gap instead of inventing a value.

mod transport;

use thiserror::Error;

use crate::geometry::{euclidean, Detection, PointCloud};

pub use transport::TransportPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudSide {
    /// The first argument (`X`).
    First,
    /// The second argument (`Y`).
    Second,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("{side:?} point cloud is empty")]
    EmptyCloud { side: CloudSide },
    #[error("transportation simplex hit its pivot cap after {pivots} pivots")]
    SolverFailure { pivots: usize },
}

fn check_non_empty(x: &[Detection], y: &[Detection]) -> Result<(), MetricError> {
    if x.is_empty() {
        return Err(MetricError::EmptyCloud {
            side: CloudSide::First,
        });
    }
    if y.is_empty() {
        return Err(MetricError::EmptyCloud {
            side: CloudSide::Second,
        });
    }
    Ok(())
}

/// Mean over `x` of the distance to the nearest point of `y`.
pub fn d_pp_directed(x: &PointCloud, y: &PointCloud) -> Result<f64, MetricError> {
    d_pp_directed_points(&x.points, &y.points)
}

pub fn d_pp_directed_points(x: &[Detection], y: &[Detection]) -> Result<f64, MetricError> {
    check_non_empty(x, y)?;
    let sum: f64 = x
        .iter()
        .map(|a| {
            y.iter()
                .map(|b| euclidean(a, b))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(sum / x.len() as f64)
}

/// Worst case of the two directed nearest-neighbour distances.
pub fn d_pp(x: &PointCloud, y: &PointCloud) -> Result<f64, MetricError> {
    d_pp_points(&x.points, &y.points)
}

pub fn d_pp_points(x: &[Detection], y: &[Detection]) -> Result<f64, MetricError> {
    let forward = d_pp_directed_points(x, y)?;
    let backward = d_pp_directed_points(y, x)?;
    Ok(forward.max(backward))
}

/// Earth Mover's Distance with weight 1/M on every point of `x` and 1/N on
/// every point of `y`, solved exactly.
///
/// Returns the normalised cost `sum(f d) / sum(f)` together with the optimal
/// plan. Total flow is one, so the value equals `plan.cost`.
pub fn emd(x: &PointCloud, y: &PointCloud) -> Result<(f64, TransportPlan), MetricError> {
    emd_points(&x.points, &y.points)
}

pub fn emd_points(x: &[Detection], y: &[Detection]) -> Result<(f64, TransportPlan), MetricError> {
    check_non_empty(x, y)?;
    let (m, n) = (x.len(), y.len());
    let ground: Vec<f64> = x
        .iter()
        .flat_map(|a| y.iter().map(move |b| euclidean(a, b)))
        .collect();

    let flow: Vec<i64> = if m == 1 || n == 1 {
        // the only feasible plan spreads the single point evenly; in scaled
        // units every cell carries one
        vec![1; m * n]
    } else {
        let supply = vec![n as i64; m];
        let demand = vec![m as i64; n];
        transport::solve(&ground, &supply, &demand, 10 * m * n)
            .map_err(|e| MetricError::SolverFailure { pivots: e.pivots })?
    };
    let plan = transport::plan_from_flow(m, n, &flow, ground);
    Ok((plan.cost, plan))
}
