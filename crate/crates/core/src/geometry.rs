//! Shared value types: detections, point clouds, poses and scenarios.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One radar return: planar position plus radial (Doppler) velocity.
///
/// Doppler is positive when the reflector recedes from the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub x: f64,
    pub y: f64,
    pub doppler: f64,
}

impl Detection {
    pub const fn new(x: f64, y: f64, doppler: f64) -> Self {
        Self { x, y, doppler }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.doppler.is_finite()
    }

    pub fn features(&self) -> [f64; 3] {
        [self.x, self.y, self.doppler]
    }

    pub fn from_features(f: [f64; 3]) -> Self {
        Self::new(f[0], f[1], f[2])
    }
}

/// Euclidean distance over all three feature dimensions (x, y, doppler).
pub fn euclidean(a: &Detection, b: &Detection) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dd = a.doppler - b.doppler;
    (dx * dx + dy * dy + dd * dd).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Simulated,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Real => "real",
            Source::Simulated => "simulated",
        }
    }
}

/// The detections of one sensor frame. Point order carries no meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub frame: usize,
    pub source: Source,
    pub points: Vec<Detection>,
}

impl PointCloud {
    pub fn new(frame: usize, source: Source, points: Vec<Detection>) -> Self {
        Self {
            frame,
            source,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Planar pose with velocity. `yaw` is kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub vx: f64,
    pub vy: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, yaw: f64, vx: f64, vy: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
            vx,
            vy,
        }
    }

    pub fn origin() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.vx, self.vy]
    }

    /// Expresses `other` in the frame of `self`: relative position and
    /// relative velocity, both rotated into this pose's heading.
    pub fn relative(&self, other: &Pose2D) -> Pose2D {
        let (s, c) = self.yaw.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        let dvx = other.vx - self.vx;
        let dvy = other.vy - self.vy;
        Pose2D::new(
            c * dx + s * dy,
            -s * dx + c * dy,
            other.yaw - self.yaw,
            c * dvx + s * dvy,
            -s * dvx + c * dvy,
        )
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    if !a.is_finite() {
        return a;
    }
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Length (along heading) and width of the target's bounding rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub length: f64,
    pub width: f64,
}

impl Extent {
    pub fn new(length: f64, width: f64) -> Self {
        Self { length, width }
    }

    /// Mid-size passenger car.
    pub fn car() -> Self {
        Self::new(4.5, 1.8)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("frame rate must be positive and finite, got {0}")]
    FrameRate(f64),
    #[error("scale must be positive and finite, got {0}")]
    Scale(f64),
    #[error("target extent must be positive in both dimensions, got {length} x {width}")]
    Extent { length: f64, width: f64 },
    #[error("target track is empty")]
    EmptyTrack,
    #[error("need at least {min} frames, got {got}")]
    TooFewFrames { min: usize, got: usize },
    #[error("frame {frame} out of range for a track of {len} frames")]
    FrameOutOfRange { frame: usize, len: usize },
}

/// A static sensor observing one target vehicle over a sequence of frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    frame_rate: f64,
    sensor_pose: Pose2D,
    target_track: Vec<Pose2D>,
    target_extent: Extent,
}

impl Scenario {
    pub fn new(
        frame_rate: f64,
        sensor_pose: Pose2D,
        target_track: Vec<Pose2D>,
        target_extent: Extent,
    ) -> Result<Self, ScenarioError> {
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(ScenarioError::FrameRate(frame_rate));
        }
        if target_track.is_empty() {
            return Err(ScenarioError::EmptyTrack);
        }
        let Extent { length, width } = target_extent;
        if !(length > 0.0 && width > 0.0 && length.is_finite() && width.is_finite()) {
            return Err(ScenarioError::Extent { length, width });
        }
        Ok(Self {
            frame_rate,
            sensor_pose,
            target_track,
            target_extent,
        })
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn sensor_pose(&self) -> &Pose2D {
        &self.sensor_pose
    }

    pub fn target_track(&self) -> &[Pose2D] {
        &self.target_track
    }

    pub fn target_extent(&self) -> Extent {
        self.target_extent
    }

    pub fn n_frames(&self) -> usize {
        self.target_track.len()
    }

    /// Target pose at `frame` in sensor coordinates (sensor at origin facing +x).
    pub fn target_in_sensor_frame(&self, frame: usize) -> Result<Pose2D, ScenarioError> {
        let target = self
            .target_track
            .get(frame)
            .ok_or(ScenarioError::FrameOutOfRange {
                frame,
                len: self.target_track.len(),
            })?;
        Ok(self.sensor_pose.relative(target))
    }

    /// Distance from the sensor to the target's reference point, per frame.
    pub fn target_ranges(&self) -> Vec<f64> {
        self.target_track
            .iter()
            .map(|p| (p.x - self.sensor_pose.x).hypot(p.y - self.sensor_pose.y))
            .collect()
    }
}

/// A figure-eight drive in front of a static sensor at the origin.
///
/// The path is a lemniscate of Gerono with its two lobes spread laterally:
/// `y = scale * sin t`, `x = scale + (scale / 2) * sin 2t`, so it satisfies
/// `y^4 = scale^2 (y^2 - (x - scale)^2)`. Each lobe passes once close to the
/// sensor, giving two near-range passes half a lap apart. The lap is closed:
/// the first and last poses coincide.
///
/// Velocities are forward differences of consecutive positions times the
/// frame rate (the last pose wraps around to the second one), and yaw points
/// along that velocity.
pub fn figure_eight_scenario(
    n_frames: usize,
    scale: f64,
    frame_rate: f64,
) -> Result<Scenario, ScenarioError> {
    if n_frames < 2 {
        return Err(ScenarioError::TooFewFrames {
            min: 2,
            got: n_frames,
        });
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(ScenarioError::Scale(scale));
    }
    if !(frame_rate.is_finite() && frame_rate > 0.0) {
        return Err(ScenarioError::FrameRate(frame_rate));
    }

    let step = 2.0 * PI / (n_frames - 1) as f64;
    let positions: Vec<[f64; 2]> = (0..n_frames)
        .map(|k| {
            let t = step * k as f64;
            [scale + 0.5 * scale * (2.0 * t).sin(), scale * t.sin()]
        })
        .collect();

    let track = (0..n_frames)
        .map(|k| {
            let next = if k + 1 < n_frames {
                positions[k + 1]
            } else {
                positions[1]
            };
            let vx = (next[0] - positions[k][0]) * frame_rate;
            let vy = (next[1] - positions[k][1]) * frame_rate;
            Pose2D::new(positions[k][0], positions[k][1], vy.atan2(vx), vx, vy)
        })
        .collect();

    Scenario::new(frame_rate, Pose2D::origin(), track, Extent::car())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn euclidean_examples() {
        let o = Detection::new(0.0, 0.0, 0.0);
        assert_eq!(euclidean(&o, &o), 0.0);
        assert_eq!(euclidean(&o, &Detection::new(3.0, 4.0, 0.0)), 5.0);
        assert_eq!(euclidean(&Detection::new(1.0, 2.0, 2.0), &o), 3.0);
    }

    #[test]
    fn doppler_participates_in_distance() {
        let a = Detection::new(0.0, 0.0, 0.0);
        let b = Detection::new(0.0, 0.0, -2.5);
        assert_eq!(euclidean(&a, &b), 2.5);
    }

    #[test]
    fn angle_normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((normalize_angle(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn figure_eight_velocity_is_forward_difference() {
        let fr = 20.0;
        let s = figure_eight_scenario(4, 12.0, fr).unwrap();
        let track = s.target_track();
        assert_eq!(track.len(), 4);
        for k in 0..3 {
            let vx = (track[k + 1].x - track[k].x) * fr;
            let vy = (track[k + 1].y - track[k].y) * fr;
            assert!((track[k].vx - vx).abs() < 1e-6);
            assert!((track[k].vy - vy).abs() < 1e-6);
        }
    }

    #[test]
    fn figure_eight_lies_on_lemniscate_and_closes() {
        let a = 30.0;
        let s = figure_eight_scenario(600, a, 20.0).unwrap();
        for p in s.target_track() {
            // normalised form of y^4 = a^2 (y^2 - (x - a)^2)
            let u = p.y / a;
            let v = (p.x - a) / a;
            let residual = u.powi(4) - (u * u - v * v);
            assert!(residual.abs() < 1e-9, "residual {residual}");
        }
        let first = s.target_track()[0];
        let last = *s.target_track().last().unwrap();
        assert!((first.x - last.x).abs() < 1e-6 && (first.y - last.y).abs() < 1e-6);
        assert!((first.vx - last.vx).abs() < 1e-6 && (first.vy - last.vy).abs() < 1e-6);
        assert_eq!(*s.sensor_pose(), Pose2D::origin());
    }

    #[test]
    fn figure_eight_yaw_follows_velocity() {
        let s = figure_eight_scenario(120, 20.0, 10.0).unwrap();
        for p in s.target_track() {
            let heading = p.vy.atan2(p.vx);
            assert!((normalize_angle(heading - p.yaw)).abs() < 1e-12);
        }
    }

    #[test]
    fn figure_eight_rejects_bad_parameters() {
        assert!(matches!(
            figure_eight_scenario(10, 0.0, 10.0),
            Err(ScenarioError::Scale(_))
        ));
        assert!(matches!(
            figure_eight_scenario(10, -3.0, 10.0),
            Err(ScenarioError::Scale(_))
        ));
        assert!(matches!(
            figure_eight_scenario(10, 3.0, 0.0),
            Err(ScenarioError::FrameRate(_))
        ));
        assert!(matches!(
            figure_eight_scenario(1, 3.0, 10.0),
            Err(ScenarioError::TooFewFrames { .. })
        ));
    }

    #[test]
    fn scenario_rejects_degenerate_inputs() {
        let p = Pose2D::origin();
        assert_eq!(
            Scenario::new(10.0, p, vec![], Extent::car()),
            Err(ScenarioError::EmptyTrack)
        );
        assert!(matches!(
            Scenario::new(10.0, p, vec![p], Extent::new(0.0, 1.0)),
            Err(ScenarioError::Extent { .. })
        ));
        let s = Scenario::new(10.0, p, vec![p], Extent::car()).unwrap();
        assert!(matches!(
            s.target_in_sensor_frame(1),
            Err(ScenarioError::FrameOutOfRange { frame: 1, len: 1 })
        ));
    }

    #[test]
    fn relative_pose_rotates_into_sensor_heading() {
        let sensor = Pose2D::new(1.0, 1.0, PI / 2.0, 0.0, 0.0);
        let target = Pose2D::new(1.0, 3.0, PI / 2.0, 0.0, -4.0);
        let rel = sensor.relative(&target);
        assert!((rel.x - 2.0).abs() < 1e-12 && rel.y.abs() < 1e-12);
        assert!((rel.vx + 4.0).abs() < 1e-12 && rel.vy.abs() < 1e-12);
        assert!(rel.yaw.abs() < 1e-12);
    }

    fn det() -> impl Strategy<Value = Detection> {
        (-50.0..50.0f64, -50.0..50.0f64, -20.0..20.0f64)
            .prop_map(|(x, y, d)| Detection::new(x, y, d))
    }

    proptest! {
        #[test]
        fn euclidean_is_a_metric(a in det(), b in det(), c in det()) {
            let ab = euclidean(&a, &b);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, euclidean(&b, &a));
            prop_assert_eq!(euclidean(&a, &a), 0.0);
            prop_assert!(ab > 0.0 || a == b);
            prop_assert!(euclidean(&a, &c) <= ab + euclidean(&b, &c) + 1e-12);
        }
    }
}
