//! Synthetic automotive radar point clouds and the metrics used to judge how
//! close they are to recorded data.
//!
//! The crate is split along the processing chain:
//!
//! * [`geometry`] holds the shared value types (detections, clouds, poses,
//!   scenarios) and the figure-eight test scenario.
//! * [`radar`] turns a scenario frame into a simulated cloud (ray casting,
//!   SNR, stochastic detection) and also provides a parameterised
//!   surrogate for recorded clouds.
//! * [`metrics`] implements the symmetric nearest-neighbour distance and the
//!   Earth Mover's Distance backed by an exact transportation simplex.
//! * [`postproc`] averages, normalises and smooths per-frame metric series.
//! * [`dem`] trains a small point-set classifier on simulated vs. recorded
//!   clouds and exposes its "real" confidence as a fidelity score.

pub mod dem;
pub mod geometry;
pub mod metrics;
pub mod postproc;
pub mod radar;

pub use geometry::{
    euclidean, figure_eight_scenario, Detection, Extent, PointCloud, Pose2D, Scenario,
    ScenarioError, Source,
};
