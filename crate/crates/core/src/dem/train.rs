//! Mini-batch Adam training of the classifier.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{PointCloud, Source};

use super::dataset::{augment, resample, DatasetSpec, Resampled, Sample};
use super::model::{ClassifierModel, NormStats};
use super::{accuracy, DemError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 30,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 11,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DemError> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.batch_size > 0
            && self.epochs > 0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(DemError::InvalidSpec(format!(
                "invalid training config {self:?}"
            )))
        }
    }
}

/// Adam optimiser state for a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean cross-entropy over the clouds trained on this epoch.
    pub loss: f64,
    /// Accuracy on the augmented clouds as they were seen during the epoch.
    pub train_accuracy: f64,
    /// Accuracy on the clean evaluation set, if one was given.
    pub test_accuracy: Option<f64>,
    /// Clouds used this epoch (after dropping unresamplable ones).
    pub clouds: usize,
}

/// Trains `model` in place.
///
/// Normalisation statistics are captured from the clean training points
/// first and frozen. Every epoch shuffles the training set, then for each
/// cloud resamples it to the fixed size and adds augmentation noise; clouds
/// that cannot be resampled are skipped for that epoch. Gradients inside a
/// batch are computed in parallel but summed in batch order, so the result
/// does not depend on the number of threads.
pub fn train<R: Rng + ?Sized>(
    model: &mut ClassifierModel,
    train_set: &[Sample],
    eval_set: Option<&[Sample]>,
    cfg: &TrainConfig,
    spec: &DatasetSpec,
    rng: &mut R,
) -> Result<Vec<EpochLog>, DemError> {
    cfg.validate()?;
    spec.validate()?;
    let has = |s: Source| {
        train_set
            .iter()
            .any(|x| x.cloud.source == s && !x.cloud.is_empty())
    };
    if !has(Source::Real) || !has(Source::Simulated) {
        return Err(DemError::SingleClass);
    }
    model.set_norm_stats(NormStats::from_points(
        train_set.iter().flat_map(|s| s.cloud.points.iter()),
    ));

    let mut adam = Adam::new(model.params().len(), cfg);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let mut prepared: Vec<PointCloud> = Vec::with_capacity(order.len());
        for &i in &order {
            let cloud = &train_set[i].cloud;
            if let Resampled::Ready(c) =
                resample(cloud, spec.n_points_fixed, spec.resample_limit, rng)
            {
                prepared.push(augment(&c, spec, rng));
            }
        }
        if prepared.is_empty() {
            return Err(DemError::NoTrainableClouds);
        }

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in prepared.chunks(cfg.batch_size) {
            let results: Vec<_> = {
                let m = &*model;
                batch
                    .par_iter()
                    .map(|c| m.loss_and_gradient(&c.points, c.source))
                    .collect::<Result<_, _>>()?
            };
            let mut grad = vec![0.0; model.params().len()];
            for ((loss, g, pred), cloud) in results.iter().zip(batch) {
                loss_sum += loss;
                if pred.predicted() == cloud.source {
                    correct += 1;
                }
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(model.params_mut(), &grad);
        }

        let n = prepared.len() as f64;
        let test_accuracy = match eval_set {
            Some(set) => Some(accuracy(model, set)?),
            None => None,
        };
        logs.push(EpochLog {
            epoch,
            loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            test_accuracy,
            clouds: prepared.len(),
        });
    }
    Ok(logs)
}
