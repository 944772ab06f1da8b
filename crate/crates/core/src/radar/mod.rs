//! Radar point-cloud generation.
//!
//! The simulated sensor follows a four stage chain per frame: the scene is
//! placed in sensor coordinates, a fan of rays is cast at the target
//! rectangle ([`cast_rays`]), every hit gets an SNR from a calibrated radar
//! equation ([`snr_of`]) and finally each reflection survives with an
//! SNR-dependent detection probability ([`detect`]).
//!
//! [`surrogate_real_frame`] generates clouds with the look of recorded data
//! (interior returns, gentler range falloff, measurement noise). It is a
//! synthetic stand-in used as the reference side wherever recordings would
//! be used.

mod raycast;
mod surrogate;

use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Detection, PointCloud, Scenario, ScenarioError, Source};

pub use raycast::{cast_rays, ray_azimuths, rectangle_edges, Edge, MIN_INCIDENCE_FACTOR};
pub use surrogate::{surrogate_real_frame, SurrogateParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadarError {
    #[error("invalid radar configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid surrogate parameters: {0}")]
    InvalidSurrogate(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Unchecked radar parameters. Turn them into a [`RadarConfig`] with
/// [`RadarConfig::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarSettings {
    /// Half opening angle of the ray fan (rad).
    pub fov: f64,
    pub n_rays: usize,
    pub max_range: f64,
    /// SNR (dB) of a reflector with `rcs_ref_m2` at `ref_range_m`.
    pub snr_ref_db: f64,
    pub ref_range_m: f64,
    pub rcs_ref_m2: f64,
    pub threshold_db: f64,
    /// Steepness of the detection probability curve (1/dB). May be infinite,
    /// which turns detection into a hard threshold.
    pub pd_slope: f64,
    pub seed: u64,
}

impl Default for RadarSettings {
    fn default() -> Self {
        Self {
            fov: std::f64::consts::FRAC_PI_3,
            n_rays: 241,
            max_range: 120.0,
            snr_ref_db: 30.0,
            ref_range_m: 10.0,
            rcs_ref_m2: 10.0,
            threshold_db: 0.0,
            pd_slope: 0.5,
            seed: 0,
        }
    }
}

/// Validated radar parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RadarSettings", into = "RadarSettings")]
pub struct RadarConfig(RadarSettings);

impl RadarConfig {
    pub fn new(settings: RadarSettings) -> Result<Self, RadarError> {
        let s = &settings;
        let bad = |msg: String| Err(RadarError::InvalidConfig(msg));
        if !(s.fov > 0.0 && s.fov <= std::f64::consts::FRAC_PI_2) {
            return bad(format!("fov must lie in (0, pi/2], got {}", s.fov));
        }
        if s.n_rays == 0 {
            return bad("n_rays must be at least 1".into());
        }
        if !(s.max_range > 0.0) {
            return bad(format!("max_range must be positive, got {}", s.max_range));
        }
        if !(s.pd_slope > 0.0) {
            return bad(format!("pd_slope must be positive, got {}", s.pd_slope));
        }
        if !(s.ref_range_m > 0.0 && s.ref_range_m.is_finite()) {
            return bad(format!(
                "ref_range_m must be positive, got {}",
                s.ref_range_m
            ));
        }
        if !(s.rcs_ref_m2 > 0.0 && s.rcs_ref_m2.is_finite()) {
            return bad(format!("rcs_ref_m2 must be positive, got {}", s.rcs_ref_m2));
        }
        if !(s.snr_ref_db.is_finite() && s.threshold_db.is_finite()) {
            return bad("snr_ref_db and threshold_db must be finite".into());
        }
        Ok(Self(settings))
    }

    pub fn settings(&self) -> &RadarSettings {
        &self.0
    }
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self::new(RadarSettings::default()).expect("default radar settings are valid")
    }
}

impl Deref for RadarConfig {
    type Target = RadarSettings;

    fn deref(&self) -> &RadarSettings {
        &self.0
    }
}

impl TryFrom<RadarSettings> for RadarConfig {
    type Error = RadarError;

    fn try_from(s: RadarSettings) -> Result<Self, RadarError> {
        Self::new(s)
    }
}

impl From<RadarConfig> for RadarSettings {
    fn from(c: RadarConfig) -> Self {
        c.0
    }
}

/// A ray hit on the target, before detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    pub position: [f64; 2],
    pub incident_ray_azimuth: f64,
    pub range: f64,
    /// Radar cross section contributed by this hit (m^2).
    pub rcs: f64,
    pub snr_db: f64,
}

/// SNR of a reflection from the radar equation anchored at the reference
/// point: `snr_ref + 10 log10(rcs / rcs_ref) - 40 log10(range / ref_range)`.
pub fn snr_of(reflection: &Reflection, config: &RadarConfig) -> f64 {
    config.snr_ref_db + 10.0 * (reflection.rcs / config.rcs_ref_m2).log10()
        - 40.0 * (reflection.range / config.ref_range_m).log10()
}

/// Logistic detection probability in SNR (dB), 0.5 at the threshold.
pub fn detection_probability(snr_db: f64, config: &RadarConfig) -> f64 {
    let margin = snr_db - config.threshold_db;
    if config.pd_slope.is_infinite() {
        return if margin >= 0.0 { 1.0 } else { 0.0 };
    }
    1.0 / (1.0 + (-config.pd_slope * margin).exp())
}

/// Radial velocity of a point moving with `velocity`, seen from the origin.
/// Positive when receding.
pub fn radial_velocity(position: [f64; 2], velocity: [f64; 2]) -> f64 {
    let r = position[0].hypot(position[1]);
    if r == 0.0 {
        return 0.0;
    }
    (velocity[0] * position[0] + velocity[1] * position[1]) / r
}

/// Draws one uniform number per reflection, in order, and keeps the
/// reflection when the draw falls below its detection probability.
/// `velocity` is the target velocity relative to the sensor.
pub fn detect<R: Rng + ?Sized>(
    frame: usize,
    reflections: &[Reflection],
    velocity: [f64; 2],
    config: &RadarConfig,
    rng: &mut R,
) -> PointCloud {
    let points = reflections
        .iter()
        .filter_map(|r| {
            let draw: f64 = rng.random();
            (draw < detection_probability(r.snr_db, config)).then(|| {
                Detection::new(
                    r.position[0],
                    r.position[1],
                    radial_velocity(r.position, velocity),
                )
            })
        })
        .collect();
    PointCloud::new(frame, Source::Simulated, points)
}

/// Full simulation chain for one frame of a scenario.
pub fn simulate_frame<R: Rng + ?Sized>(
    scenario: &Scenario,
    frame: usize,
    config: &RadarConfig,
    rng: &mut R,
) -> Result<PointCloud, RadarError> {
    let target = scenario.target_in_sensor_frame(frame)?;
    let mut reflections = cast_rays(&target, scenario.target_extent(), config);
    for r in &mut reflections {
        r.snr_db = snr_of(r, config);
    }
    Ok(detect(frame, &reflections, target.velocity(), config, rng))
}
