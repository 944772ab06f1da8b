//! Parameterised stand-in for recorded radar clouds.
//!
//! Recorded clouds differ from the ray-cast ones in a few visible ways:
//! returns also come from inside the vehicle outline, the point count
//! depends less strongly on range, and every measurement is noisy. This
//! generator reproduces those traits from a handful of knobs. It is a
//! synthetic model, not measured data.

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::geometry::{Detection, PointCloud, Pose2D, Scenario, Source};

use super::{radial_velocity, rectangle_edges, Edge, RadarConfig, RadarError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateParams {
    /// Share of detections drawn from the vehicle interior instead of its
    /// visible outline, in [0, 1].
    pub interior_fraction: f64,
    /// Beyond `count_ref_range` the interior share falls to
    /// `interior_fraction^((range / count_ref_range)^interior_decay)`, so
    /// distant targets show mostly their outline. 0 keeps it constant.
    pub interior_decay: f64,
    /// Expected detection count with the target at `count_ref_range`.
    pub count_at_ref: f64,
    pub count_ref_range: f64,
    /// Expected count scales as `(count_ref_range / range)^count_exponent`.
    pub count_exponent: f64,
    pub min_count: usize,
    pub max_count: usize,
    /// Gaussian noise on x and y (m).
    pub position_noise_std: f64,
    /// Gaussian noise on Doppler (m/s).
    pub doppler_noise_std: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            interior_fraction: 0.9,
            interior_decay: 5.0,
            count_at_ref: 18.0,
            count_ref_range: 25.0,
            count_exponent: 1.1,
            min_count: 3,
            max_count: 40,
            position_noise_std: 0.05,
            doppler_noise_std: 0.1,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<(), RadarError> {
        let bad = |m: String| Err(RadarError::InvalidSurrogate(m));
        if !(0.0..=1.0).contains(&self.interior_fraction) {
            return bad(format!(
                "interior_fraction must lie in [0, 1], got {}",
                self.interior_fraction
            ));
        }
        if !(self.interior_decay >= 0.0 && self.interior_decay.is_finite()) {
            return bad(format!(
                "interior_decay must be >= 0, got {}",
                self.interior_decay
            ));
        }
        if !(self.count_at_ref >= 0.0 && self.count_at_ref.is_finite()) {
            return bad(format!(
                "count_at_ref must be >= 0, got {}",
                self.count_at_ref
            ));
        }
        if !(self.count_ref_range > 0.0) {
            return bad(format!(
                "count_ref_range must be positive, got {}",
                self.count_ref_range
            ));
        }
        if !self.count_exponent.is_finite() {
            return bad("count_exponent must be finite".into());
        }
        if self.min_count > self.max_count {
            return bad(format!(
                "min_count {} exceeds max_count {}",
                self.min_count, self.max_count
            ));
        }
        if !(self.position_noise_std >= 0.0 && self.doppler_noise_std >= 0.0) {
            return bad("noise scales must be non-negative".into());
        }
        Ok(())
    }

    /// Probability that a detection at `range` comes from the interior.
    pub fn interior_share(&self, range: f64) -> f64 {
        let stretch = (range / self.count_ref_range)
            .max(1.0)
            .powf(self.interior_decay);
        self.interior_fraction.powf(stretch)
    }

    /// Expected detection count at `range` before clamping.
    pub fn expected_count(&self, range: f64) -> f64 {
        self.count_at_ref * (self.count_ref_range / range).powf(self.count_exponent)
    }
}

/// One surrogate "recorded" cloud for a scenario frame.
///
/// The target is seen only if its centre lies inside the ray fan and within
/// `max_range`; otherwise the cloud is empty. The count is Poisson around
/// [`SurrogateParams::expected_count`], clamped to `[min_count, max_count]`.
/// Each point is either uniform over the open interior of the rectangle or
/// on one of its sensor-facing edges (chosen in proportion to the angle the
/// edge subtends, uniform along it), then perturbed by Gaussian noise.
pub fn surrogate_real_frame<R: Rng + ?Sized>(
    scenario: &Scenario,
    frame: usize,
    config: &RadarConfig,
    params: &SurrogateParams,
    rng: &mut R,
) -> Result<PointCloud, RadarError> {
    params.validate()?;
    let target = scenario.target_in_sensor_frame(frame)?;
    let range = target.x.hypot(target.y);
    let azimuth = target.y.atan2(target.x);
    if range > config.max_range || azimuth.abs() > config.fov || range == 0.0 {
        return Ok(PointCloud::new(frame, Source::Real, Vec::new()));
    }

    let lambda = params.expected_count(range);
    let drawn = if lambda > 0.0 {
        Poisson::new(lambda)
            .map_err(|e| RadarError::InvalidSurrogate(e.to_string()))?
            .sample(rng) as usize
    } else {
        0
    };
    let count = drawn.clamp(params.min_count, params.max_count);

    let extent = scenario.target_extent();
    let visible: Vec<_> = rectangle_edges(&target, extent)
        .into_iter()
        .filter(|e| e.faces_origin())
        .collect();
    // a face contributes in proportion to the angle it subtends
    let weights: Vec<f64> = visible.iter().map(apparent_length).collect();
    let total_weight: f64 = weights.iter().sum();

    let pos_noise = Normal::new(0.0, params.position_noise_std)
        .map_err(|e| RadarError::InvalidSurrogate(e.to_string()))?;
    let dop_noise = Normal::new(0.0, params.doppler_noise_std)
        .map_err(|e| RadarError::InvalidSurrogate(e.to_string()))?;

    let interior_share = params.interior_share(range);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let interior = rng.random::<f64>() < interior_share;
        let p = if interior || visible.is_empty() {
            interior_point(&target, extent.length, extent.width, rng)
        } else {
            let mut pick = rng.random::<f64>() * total_weight;
            let mut chosen = visible[visible.len() - 1];
            for (e, w) in visible.iter().zip(&weights) {
                if pick < *w {
                    chosen = *e;
                    break;
                }
                pick -= w;
            }
            let s: f64 = rng.random();
            [
                chosen.start[0] + s * (chosen.end[0] - chosen.start[0]),
                chosen.start[1] + s * (chosen.end[1] - chosen.start[1]),
            ]
        };
        let doppler = radial_velocity(p, target.velocity()) + dop_noise.sample(rng);
        let x = p[0] + pos_noise.sample(rng);
        let y = p[1] + pos_noise.sample(rng);
        points.push(Detection::new(x, y, doppler));
    }
    Ok(PointCloud::new(frame, Source::Real, points))
}

/// Edge length projected perpendicular to the line of sight to its midpoint.
fn apparent_length(e: &Edge) -> f64 {
    let m = e.midpoint();
    let r = m[0].hypot(m[1]);
    if r == 0.0 {
        return e.length();
    }
    (e.normal[0] * m[0] + e.normal[1] * m[1]).abs() / r * e.length()
}

fn interior_point<R: Rng + ?Sized>(
    pose: &Pose2D,
    length: f64,
    width: f64,
    rng: &mut R,
) -> [f64; 2] {
    let u = (2.0 * rng.sample::<f64, _>(Open01) - 1.0) * 0.5 * length;
    let v = (2.0 * rng.sample::<f64, _>(Open01) - 1.0) * 0.5 * width;
    let (s, c) = pose.yaw.sin_cos();
    [pose.x + c * u - s * v, pose.y + s * u + c * v]
}
