//! Labelled training data: paired simulated / surrogate-real clouds, the
//! train/test split, and the per-epoch augmentation and resampling.

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{Detection, PointCloud, Scenario};
use crate::radar::{simulate_frame, surrogate_real_frame, RadarConfig, SurrogateParams};

use super::DemError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    /// Number of points every training cloud is resampled to.
    pub n_points_fixed: usize,
    /// Augmentation noise added to every feature during training.
    pub noise_std: f64,
    /// Largest number of points resampling may add or drop.
    pub resample_limit: usize,
    /// Share of frames assigned to the training set.
    pub split_ratio: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_points_fixed: 20,
            noise_std: 0.1,
            resample_limit: 10,
            split_ratio: 0.7,
            seed: 7,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), DemError> {
        if self.n_points_fixed == 0 {
            return Err(DemError::InvalidSpec(
                "n_points_fixed must be at least 1".into(),
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(DemError::InvalidSpec(format!(
                "noise_std must be >= 0, got {}",
                self.noise_std
            )));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(DemError::InvalidSpec(format!(
                "split_ratio must lie in (0, 1), got {}",
                self.split_ratio
            )));
        }
        Ok(())
    }
}

/// One labelled cloud. The label is `cloud.source`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Index of the scenario the cloud came from.
    pub scenario: usize,
    pub cloud: PointCloud,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    /// Clouds left out because they had no detections.
    pub dropped_empty: usize,
}

/// Simulates every frame of every scenario once with each sensor mode.
///
/// Frames are drawn in scenario order, simulated cloud before surrogate
/// cloud, all from `rng`. Empty clouds are dropped. The split then shuffles
/// the (scenario, frame) keys and sends the first `split_ratio` share to
/// training, so both clouds of a frame always land on the same side.
pub fn build_dataset<R: Rng + ?Sized>(
    scenarios: &[Scenario],
    radar: &RadarConfig,
    surrogate: &SurrogateParams,
    spec: &DatasetSpec,
    rng: &mut R,
) -> Result<Dataset, DemError> {
    spec.validate()?;
    if scenarios.is_empty() {
        return Err(DemError::InvalidSpec("no scenarios given".into()));
    }
    let mut pairs: Vec<(usize, Vec<PointCloud>)> = Vec::new();
    let mut dropped_empty = 0;
    for (s, scenario) in scenarios.iter().enumerate() {
        for frame in 0..scenario.n_frames() {
            let sim = simulate_frame(scenario, frame, radar, rng)?;
            let real = surrogate_real_frame(scenario, frame, radar, surrogate, rng)?;
            let mut kept = Vec::with_capacity(2);
            for cloud in [sim, real] {
                if cloud.is_empty() {
                    dropped_empty += 1;
                } else {
                    kept.push(cloud);
                }
            }
            pairs.push((s, kept));
        }
    }
    pairs.shuffle(rng);
    let n_train = (spec.split_ratio * pairs.len() as f64).round() as usize;
    let mut dataset = Dataset {
        dropped_empty,
        ..Dataset::default()
    };
    for (k, (scenario, clouds)) in pairs.into_iter().enumerate() {
        let target = if k < n_train {
            &mut dataset.train
        } else {
            &mut dataset.test
        };
        target.extend(clouds.into_iter().map(|cloud| Sample { scenario, cloud }));
    }
    Ok(dataset)
}

/// Adds independent zero-mean Gaussian noise with `spec.noise_std` to x, y
/// and doppler of every point. The label is untouched.
pub fn augment<R: Rng + ?Sized>(cloud: &PointCloud, spec: &DatasetSpec, rng: &mut R) -> PointCloud {
    if spec.noise_std == 0.0 {
        return cloud.clone();
    }
    let noise = Normal::new(0.0, spec.noise_std).expect("validated noise_std");
    let points = cloud
        .points
        .iter()
        .map(|p| {
            Detection::new(
                p.x + noise.sample(rng),
                p.y + noise.sample(rng),
                p.doppler + noise.sample(rng),
            )
        })
        .collect();
    PointCloud::new(cloud.frame, cloud.source, points)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resampled {
    Ready(PointCloud),
    /// The cloud is too far from the fixed size (or empty) to be resampled.
    Skip,
}

/// Brings a cloud to exactly `n_points_fixed` points by duplicating random
/// points or dropping random points, provided at most `limit` points have to
/// change.
pub fn resample<R: Rng + ?Sized>(
    cloud: &PointCloud,
    n_points_fixed: usize,
    limit: usize,
    rng: &mut R,
) -> Resampled {
    let n = cloud.len();
    if n == 0 || n.abs_diff(n_points_fixed) > limit {
        return Resampled::Skip;
    }
    let points = if n >= n_points_fixed {
        let mut keep = index::sample(rng, n, n_points_fixed).into_vec();
        keep.sort_unstable();
        keep.into_iter().map(|i| cloud.points[i]).collect()
    } else {
        let mut pts = cloud.points.clone();
        for _ in n..n_points_fixed {
            pts.push(cloud.points[rng.random_range(0..n)]);
        }
        pts
    };
    Resampled::Ready(PointCloud::new(cloud.frame, cloud.source, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{figure_eight_scenario, Source};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn cloud(n: usize) -> PointCloud {
        PointCloud::new(
            3,
            Source::Real,
            (0..n)
                .map(|i| Detection::new(i as f64, 0.5 * i as f64, -(i as f64)))
                .collect(),
        )
    }

    #[test]
    fn dataset_pairs_and_split() {
        let s = figure_eight_scenario(100, 30.0, 20.0).unwrap();
        let spec = DatasetSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = build_dataset(
            &[s],
            &RadarConfig::default(),
            &SurrogateParams::default(),
            &spec,
            &mut rng,
        )
        .unwrap();
        let total = ds.train.len() + ds.test.len();
        assert_eq!(total + ds.dropped_empty, 200);
        if ds.dropped_empty == 0 {
            assert_eq!(ds.train.len(), 140);
            assert_eq!(ds.test.len(), 60);
        }
        let count = |src| {
            ds.train
                .iter()
                .chain(&ds.test)
                .filter(|x| x.cloud.source == src)
                .count()
        };
        assert!(count(Source::Real).abs_diff(count(Source::Simulated)) <= ds.dropped_empty);
        let train_frames: HashSet<_> = ds
            .train
            .iter()
            .map(|x| (x.scenario, x.cloud.frame))
            .collect();
        assert!(ds
            .test
            .iter()
            .all(|x| !train_frames.contains(&(x.scenario, x.cloud.frame))));
    }

    #[test]
    fn dataset_is_deterministic() {
        let s = figure_eight_scenario(40, 30.0, 20.0).unwrap();
        let build = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            build_dataset(
                std::slice::from_ref(&s),
                &RadarConfig::default(),
                &SurrogateParams::default(),
                &DatasetSpec::default(),
                &mut rng,
            )
            .unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn zero_noise_augmentation_is_identity() {
        let c = cloud(12);
        let spec = DatasetSpec {
            noise_std: 0.0,
            ..DatasetSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(augment(&c, &spec, &mut rng), c);
    }

    #[test]
    fn augmentation_noise_has_requested_spread() {
        let n = 100_000;
        let base = PointCloud::new(
            0,
            Source::Simulated,
            vec![Detection::new(1.0, -2.0, 3.0); n],
        );
        let spec = DatasetSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = augment(&base, &spec, &mut rng);
        assert_eq!(out.source, Source::Simulated);
        for k in 0..3 {
            let diffs: Vec<f64> = out
                .points
                .iter()
                .zip(&base.points)
                .map(|(a, b)| a.features()[k] - b.features()[k])
                .collect();
            let mean = diffs.iter().sum::<f64>() / n as f64;
            let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            assert!((sd - 0.1).abs() < 0.005, "feature {k}: sd {sd}");
        }
    }

    #[test]
    fn resample_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = cloud(20);
        assert_eq!(resample(&c, 20, 10, &mut rng), Resampled::Ready(c.clone()));

        let small = cloud(17);
        let Resampled::Ready(up) = resample(&small, 20, 10, &mut rng) else {
            panic!("expected resampled cloud");
        };
        assert_eq!(up.len(), 20);
        assert_eq!(&up.points[..17], &small.points[..]);
        for p in &up.points[17..] {
            assert!(small.points.contains(p));
        }

        let big = cloud(27);
        let Resampled::Ready(down) = resample(&big, 20, 10, &mut rng) else {
            panic!("expected resampled cloud");
        };
        assert_eq!(down.len(), 20);
        assert!(down.points.iter().all(|p| big.points.contains(p)));

        assert_eq!(resample(&cloud(40), 20, 10, &mut rng), Resampled::Skip);
        assert_eq!(resample(&cloud(0), 5, 10, &mut rng), Resampled::Skip);
    }

    #[test]
    fn spec_validation() {
        let bad = DatasetSpec {
            split_ratio: 1.0,
            ..DatasetSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = DatasetSpec {
            n_points_fixed: 0,
            ..DatasetSpec::default()
        };
        assert!(bad.validate().is_err());
    }
}
