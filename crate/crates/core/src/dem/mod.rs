//! Learned discriminator between simulated and real point clouds. Its
//! confidence that a simulated cloud is real serves as a per-frame fidelity
//! score.

use thiserror::Error;

use crate::geometry::PointCloud;
use crate::radar::RadarError;

mod dataset;
mod model;
mod persist;
mod sampling;
mod train;

pub use dataset::{augment, build_dataset, resample, Dataset, DatasetSpec, Resampled, Sample};
pub use model::{
    class_index, ClassifierModel, ModelConfig, NormStats, Prediction, CLASS_REAL, CLASS_SIMULATED,
};
pub use persist::{from_bytes, load, to_bytes, FORMAT_VERSION, MAGIC};
pub use sampling::{ball_query, farthest_point_sampling};
pub use train::{train, Adam, EpochLog, TrainConfig};

#[derive(Debug, Error)]
pub enum DemError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("cannot sample {requested} points from {available}")]
    SampleCount { requested: usize, available: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidSpec(String),
    #[error("training data contains only one class")]
    SingleClass,
    #[error("no training cloud could be resampled to the fixed size")]
    NoTrainableClouds,
    #[error("invalid model file: {0}")]
    Format(String),
    #[error(transparent)]
    Radar(#[from] RadarError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fidelity score of one cloud: the classifier's confidence that it is
/// real. `None` for an empty cloud.
pub fn dem_score(model: &ClassifierModel, cloud: &PointCloud) -> Result<Option<f64>, DemError> {
    if cloud.is_empty() {
        return Ok(None);
    }
    model
        .forward(&cloud.points)
        .map(|p| Some(p.confidence_real))
}

/// Share of non-empty clouds whose predicted class matches their source.
/// Clouds are scored as given, without resampling or noise. Returns 0 when
/// there is nothing to score.
pub fn accuracy(model: &ClassifierModel, samples: &[Sample]) -> Result<f64, DemError> {
    use rayon::prelude::*;
    let hits: Vec<Option<bool>> = samples
        .par_iter()
        .map(|s| {
            if s.cloud.is_empty() {
                return Ok(None);
            }
            model
                .forward(&s.cloud.points)
                .map(|p| Some(p.predicted() == s.cloud.source))
        })
        .collect::<Result<_, DemError>>()?;
    let scored = hits.iter().flatten().count();
    if scored == 0 {
        return Ok(0.0);
    }
    Ok(hits.iter().flatten().filter(|&&h| h).count() as f64 / scored as f64)
}
