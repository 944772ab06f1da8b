//! Point-set classifier with one set-abstraction stage and hand-written
//! backpropagation.
//!
//! Pipeline for one cloud:
//!
//! 1. points are put into a canonical order (lexicographic on x, y, doppler)
//!    so every later tie rule is independent of the input order;
//! 2. farthest point sampling picks up to `sa_centroids` centroids in (x, y);
//! 3. each centroid groups its ball-query neighbours; every member is encoded
//!    by a shared ReLU MLP on its offset from the centroid (in units of the
//!    ball radius) and its Doppler standardised with the frozen
//!    [`NormStats`], and the group is max-pooled;
//! 4. group features are max-pooled into one global vector, passed through
//!    the global ReLU MLP and the classification head (ReLU hidden layers,
//!    linear output of width 2: index 0 simulated, index 1 real).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Detection, Source};

use super::sampling::{ball_query, farthest_point_sampling};
use super::DemError;

pub const CLASS_SIMULATED: usize = 0;
pub const CLASS_REAL: usize = 1;

pub fn class_index(source: Source) -> usize {
    match source {
        Source::Simulated => CLASS_SIMULATED,
        Source::Real => CLASS_REAL,
    }
}

/// Network dimensions. Width lists include the input width of their first
/// layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub sa_centroids: usize,
    /// Ball-query radius in metres, measured in raw (x, y).
    pub sa_radius: f64,
    pub sa_max_neighbors: usize,
    pub sa_mlp_widths: Vec<usize>,
    pub global_mlp_widths: Vec<usize>,
    pub head_widths: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            sa_centroids: 16,
            sa_radius: 2.0,
            sa_max_neighbors: 16,
            sa_mlp_widths: vec![3, 32, 64],
            global_mlp_widths: vec![64, 64],
            head_widths: vec![64, 32, 2],
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), DemError> {
        let bad = |m: String| Err(DemError::InvalidArchitecture(m));
        if self.sa_centroids == 0 || self.sa_max_neighbors == 0 {
            return bad("sa_centroids and sa_max_neighbors must be positive".into());
        }
        if !(self.sa_radius > 0.0 && self.sa_radius.is_finite()) {
            return bad(format!(
                "sa_radius must be positive, got {}",
                self.sa_radius
            ));
        }
        for (name, w) in [
            ("sa_mlp_widths", &self.sa_mlp_widths),
            ("global_mlp_widths", &self.global_mlp_widths),
            ("head_widths", &self.head_widths),
        ] {
            if w.len() < 2 || w.contains(&0) {
                return bad(format!(
                    "{name} needs at least two positive widths, got {w:?}"
                ));
            }
        }
        if self.sa_mlp_widths[0] != 3 {
            return bad("group MLP input width must be 3 (dx, dy, doppler)".into());
        }
        if self.sa_mlp_widths.last() != self.global_mlp_widths.first() {
            return bad("global MLP input must match the group feature width".into());
        }
        if self.global_mlp_widths.last() != self.head_widths.first() {
            return bad("head input must match the global MLP output".into());
        }
        if self.head_widths.last() != Some(&2) {
            return bad("head must end in exactly 2 classes".into());
        }
        Ok(())
    }

    /// (fan_in, fan_out) of every dense layer in storage order: group MLP,
    /// global MLP, head.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        [
            &self.sa_mlp_widths,
            &self.global_mlp_widths,
            &self.head_widths,
        ]
        .iter()
        .flat_map(|w| w.windows(2).map(|p| (p[0], p[1])))
        .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// Per-feature standardisation (x, y, doppler) captured from training data.
/// The forward pass standardises Doppler with it; positions enter only as
/// centroid offsets, so their entries are informational.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; 3],
    pub scale: [f64; 3],
}

impl Default for NormStats {
    fn default() -> Self {
        Self {
            mean: [0.0; 3],
            scale: [1.0; 3],
        }
    }
}

impl NormStats {
    /// Mean and population standard deviation over all points. A feature
    /// with no spread keeps scale 1.
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Detection>) -> Self {
        let mut n = 0usize;
        let mut mean = [0.0; 3];
        let mut m2 = [0.0; 3];
        for p in points {
            n += 1;
            for (k, v) in p.features().into_iter().enumerate() {
                let delta = v - mean[k];
                mean[k] += delta / n as f64;
                m2[k] += delta * (v - mean[k]);
            }
        }
        if n == 0 {
            return Self::default();
        }
        let scale = m2.map(|s| {
            let sd = (s / n as f64).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        });
        Self { mean, scale }
    }

    pub fn apply(&self, d: &Detection) -> [f64; 3] {
        let f = d.features();
        [
            (f[0] - self.mean[0]) / self.scale[0],
            (f[1] - self.mean[1]) / self.scale[1],
            (f[2] - self.mean[2]) / self.scale[2],
        ]
    }
}

/// Classifier output for one cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub logit_sim: f64,
    pub logit_real: f64,
    pub confidence_real: f64,
}

impl Prediction {
    pub fn confidence_sim(&self) -> f64 {
        1.0 - self.confidence_real
    }

    /// Predicted class; a tie goes to simulated.
    pub fn predicted(&self) -> Source {
        if self.logit_real > self.logit_sim {
            Source::Real
        } else {
            Source::Simulated
        }
    }

    /// Cross-entropy of the softmax against `label`.
    pub fn loss(&self, label: Source) -> f64 {
        let (own, other) = match label {
            Source::Real => (self.logit_real, self.logit_sim),
            Source::Simulated => (self.logit_sim, self.logit_real),
        };
        // log(1 + exp(other - own)) computed without overflow
        let z = other - own;
        if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        }
    }
}

fn softmax_real(logit_sim: f64, logit_real: f64) -> f64 {
    let z = logit_real - logit_sim;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    config: ModelConfig,
    norm: NormStats,
    params: Vec<f64>,
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    w: usize,
    b: usize,
}

fn layers_of(shapes: &[(usize, usize)]) -> Vec<Layer> {
    let mut offset = 0;
    shapes
        .iter()
        .map(|&(fan_in, fan_out)| {
            let l = Layer {
                fan_in,
                fan_out,
                w: offset,
                b: offset + fan_in * fan_out,
            };
            offset += fan_in * fan_out + fan_out;
            l
        })
        .collect()
}

fn dense(params: &[f64], l: &Layer, x: &[f64], relu: bool) -> Vec<f64> {
    let w = &params[l.w..l.w + l.fan_in * l.fan_out];
    let b = &params[l.b..l.b + l.fan_out];
    (0..l.fan_out)
        .map(|o| {
            let row = &w[o * l.fan_in..(o + 1) * l.fan_in];
            let z = b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            if relu {
                z.max(0.0)
            } else {
                z
            }
        })
        .collect()
}

/// Accumulates weight and bias gradients of a dense layer and returns the
/// gradient with respect to its input. `dy` must already be masked by the
/// activation derivative.
fn dense_backward(params: &[f64], grad: &mut [f64], l: &Layer, x: &[f64], dy: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; l.fan_in];
    for o in 0..l.fan_out {
        let g = dy[o];
        if g == 0.0 {
            continue;
        }
        grad[l.b + o] += g;
        let row = l.w + o * l.fan_in;
        for i in 0..l.fan_in {
            grad[row + i] += g * x[i];
            dx[i] += g * params[row + i];
        }
    }
    dx
}

/// Runs an MLP and keeps every activation (input first).
fn mlp_forward(
    params: &[f64],
    layers: &[Layer],
    input: Vec<f64>,
    relu_last: bool,
) -> Vec<Vec<f64>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(input);
    for (k, l) in layers.iter().enumerate() {
        let relu = relu_last || k + 1 < layers.len();
        let next = dense(params, l, acts.last().expect("input present"), relu);
        acts.push(next);
    }
    acts
}

fn mlp_backward(
    params: &[f64],
    grad: &mut [f64],
    layers: &[Layer],
    acts: &[Vec<f64>],
    mut d_out: Vec<f64>,
    relu_last: bool,
) -> Vec<f64> {
    for (k, l) in layers.iter().enumerate().rev() {
        let relu = relu_last || k + 1 < layers.len();
        if relu {
            for (d, a) in d_out.iter_mut().zip(&acts[k + 1]) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        d_out = dense_backward(params, grad, l, &acts[k], &d_out);
    }
    d_out
}

/// Index of the first maximum.
fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

struct GroupCache {
    /// Activations per member, input first.
    members: Vec<Vec<Vec<f64>>>,
    /// Winning member per output channel.
    winner: Vec<usize>,
    pooled: Vec<f64>,
}

struct ForwardCache {
    groups: Vec<GroupCache>,
    /// Winning group per channel of the global pool.
    group_winner: Vec<usize>,
    global_acts: Vec<Vec<f64>>,
    head_acts: Vec<Vec<f64>>,
}

impl ClassifierModel {
    /// Fresh model with Glorot-uniform weights and zero biases.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self, DemError> {
        config.validate()?;
        let mut params = vec![0.0; config.parameter_count()];
        for l in layers_of(&config.layer_shapes()) {
            let limit = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
            for w in &mut params[l.w..l.b] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(Self {
            config,
            norm: NormStats::default(),
            params,
        })
    }

    /// Assembles a model from stored parts, checking the parameter count.
    pub fn from_parts(
        config: ModelConfig,
        norm: NormStats,
        params: Vec<f64>,
    ) -> Result<Self, DemError> {
        config.validate()?;
        let expected = config.parameter_count();
        if params.len() != expected {
            return Err(DemError::DimensionMismatch(format!(
                "architecture needs {expected} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self {
            config,
            norm,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn norm_stats(&self) -> &NormStats {
        &self.norm
    }

    pub fn set_norm_stats(&mut self, norm: NormStats) {
        self.norm = norm;
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_groups(&self) -> (Vec<Layer>, Vec<Layer>, Vec<Layer>) {
        let all = layers_of(&self.config.layer_shapes());
        let a = self.config.sa_mlp_widths.len() - 1;
        let b = a + self.config.global_mlp_widths.len() - 1;
        (all[..a].to_vec(), all[a..b].to_vec(), all[b..].to_vec())
    }

    /// Class logits and the softmax confidence of the real class.
    pub fn forward(&self, points: &[Detection]) -> Result<Prediction, DemError> {
        let (_, pred) = self.forward_cached(points)?;
        Ok(pred)
    }

    /// Loss and its gradient with respect to every parameter (flat, same
    /// layout as [`params`](Self::params)).
    pub fn loss_and_gradient(
        &self,
        points: &[Detection],
        label: Source,
    ) -> Result<(f64, Vec<f64>, Prediction), DemError> {
        let (cache, pred) = self.forward_cached(points)?;
        let loss = pred.loss(label);
        let mut grad = vec![0.0; self.params.len()];
        let (sa, global, head) = self.layer_groups();

        let p_real = pred.confidence_real;
        let mut d_logits = vec![1.0 - p_real, p_real];
        d_logits[class_index(label)] -= 1.0;

        let d_head_in = mlp_backward(
            &self.params,
            &mut grad,
            &head,
            &cache.head_acts,
            d_logits,
            false,
        );
        let d_global_in = mlp_backward(
            &self.params,
            &mut grad,
            &global,
            &cache.global_acts,
            d_head_in,
            true,
        );

        for (g, group) in cache.groups.iter().enumerate() {
            let mut d_pooled = vec![0.0; group.pooled.len()];
            let mut any = false;
            for (c, &winner) in cache.group_winner.iter().enumerate() {
                if winner == g && d_global_in[c] != 0.0 {
                    d_pooled[c] = d_global_in[c];
                    any = true;
                }
            }
            if !any {
                continue;
            }
            for (m, acts) in group.members.iter().enumerate() {
                let mut d_member = vec![0.0; d_pooled.len()];
                let mut hit = false;
                for (c, &winner) in group.winner.iter().enumerate() {
                    if winner == m && d_pooled[c] != 0.0 {
                        d_member[c] = d_pooled[c];
                        hit = true;
                    }
                }
                if hit {
                    mlp_backward(&self.params, &mut grad, &sa, acts, d_member, true);
                }
            }
        }
        Ok((loss, grad, pred))
    }

    fn forward_cached(&self, points: &[Detection]) -> Result<(ForwardCache, Prediction), DemError> {
        if points.is_empty() {
            return Err(DemError::EmptyCloud);
        }
        let (sa, global, head) = self.layer_groups();

        let mut sorted = points.to_vec();
        sorted.sort_by(|a, b| {
            a.x.total_cmp(&b.x)
                .then(a.y.total_cmp(&b.y))
                .then(a.doppler.total_cmp(&b.doppler))
        });
        let xy: Vec<[f64; 2]> = sorted.iter().map(|p| [p.x, p.y]).collect();
        let feats: Vec<[f64; 3]> = sorted.iter().map(|p| self.norm.apply(p)).collect();

        let k = self.config.sa_centroids.min(sorted.len());
        let centroids = farthest_point_sampling(&xy, k, 0)?;

        let groups: Vec<GroupCache> = centroids
            .iter()
            .map(|&c| {
                let members = ball_query(
                    &xy,
                    xy[c],
                    self.config.sa_radius,
                    self.config.sa_max_neighbors,
                );
                let acts: Vec<Vec<Vec<f64>>> = members
                    .iter()
                    .map(|&j| {
                        let input = vec![
                            (xy[j][0] - xy[c][0]) / self.config.sa_radius,
                            (xy[j][1] - xy[c][1]) / self.config.sa_radius,
                            feats[j][2],
                        ];
                        mlp_forward(&self.params, &sa, input, true)
                    })
                    .collect();
                let width = acts[0].last().expect("output layer").len();
                let winner: Vec<usize> = (0..width)
                    .map(|ch| argmax_first(acts.iter().map(|a| a.last().expect("output")[ch])))
                    .collect();
                let pooled = winner
                    .iter()
                    .enumerate()
                    .map(|(ch, &m)| acts[m].last().expect("output")[ch])
                    .collect();
                GroupCache {
                    members: acts,
                    winner,
                    pooled,
                }
            })
            .collect();

        let width = groups[0].pooled.len();
        let group_winner: Vec<usize> = (0..width)
            .map(|ch| argmax_first(groups.iter().map(|g| g.pooled[ch])))
            .collect();
        let global_in: Vec<f64> = group_winner
            .iter()
            .enumerate()
            .map(|(ch, &g)| groups[g].pooled[ch])
            .collect();

        let global_acts = mlp_forward(&self.params, &global, global_in, true);
        let head_acts = mlp_forward(
            &self.params,
            &head,
            global_acts.last().expect("output").clone(),
            false,
        );
        let logits = head_acts.last().expect("output");
        let pred = Prediction {
            logit_sim: logits[CLASS_SIMULATED],
            logit_real: logits[CLASS_REAL],
            confidence_real: softmax_real(logits[CLASS_SIMULATED], logits[CLASS_REAL]),
        };
        Ok((
            ForwardCache {
                groups,
                group_winner,
                global_acts,
                head_acts,
            },
            pred,
        ))
    }
}
