//! Ray casting against the target's bounding rectangle.

use crate::geometry::{Extent, Pose2D};

use super::{RadarConfig, Reflection};

/// Lower bound on the incidence factor so grazing hits still carry some power.
pub const MIN_INCIDENCE_FACTOR: f64 = 0.01;

/// One side of the target rectangle, in sensor coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub start: [f64; 2],
    pub end: [f64; 2],
    /// Outward unit normal.
    pub normal: [f64; 2],
}

impl Edge {
    pub fn midpoint(&self) -> [f64; 2] {
        [
            0.5 * (self.start[0] + self.end[0]),
            0.5 * (self.start[1] + self.end[1]),
        ]
    }

    pub fn length(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }

    /// True when the outward normal points towards the sensor at the origin.
    pub fn faces_origin(&self) -> bool {
        let m = self.midpoint();
        self.normal[0] * m[0] + self.normal[1] * m[1] < 0.0
    }

    /// Distance from `p` to the closed segment.
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let ex = self.end[0] - self.start[0];
        let ey = self.end[1] - self.start[1];
        let len2 = ex * ex + ey * ey;
        let s = if len2 > 0.0 {
            (((p[0] - self.start[0]) * ex + (p[1] - self.start[1]) * ey) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let qx = self.start[0] + s * ex;
        let qy = self.start[1] + s * ey;
        (p[0] - qx).hypot(p[1] - qy)
    }

    /// Parameter `t > 0` along the ray `t * dir` from the origin where it
    /// crosses this segment, if it does.
    pub fn intersect_ray(&self, dir: [f64; 2]) -> Option<f64> {
        let e = [self.end[0] - self.start[0], self.end[1] - self.start[1]];
        let denom = cross(dir, e);
        if denom.abs() < 1e-15 {
            return None;
        }
        let t = cross(self.start, e) / denom;
        let s = cross(self.start, dir) / denom;
        (t > 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
    }
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// The four sides of the rectangle centred on `pose` and aligned with its
/// heading: front, left, back, right (counter-clockwise).
pub fn rectangle_edges(pose: &Pose2D, extent: Extent) -> [Edge; 4] {
    let (s, c) = pose.yaw.sin_cos();
    let hl = 0.5 * extent.length;
    let hw = 0.5 * extent.width;
    let to_world = |u: f64, v: f64| [pose.x + c * u - s * v, pose.y + s * u + c * v];
    let rot = |u: f64, v: f64| [c * u - s * v, s * u + c * v];

    let fr = to_world(hl, -hw);
    let fl = to_world(hl, hw);
    let bl = to_world(-hl, hw);
    let br = to_world(-hl, -hw);
    [
        Edge {
            start: fr,
            end: fl,
            normal: rot(1.0, 0.0),
        },
        Edge {
            start: fl,
            end: bl,
            normal: rot(0.0, 1.0),
        },
        Edge {
            start: bl,
            end: br,
            normal: rot(-1.0, 0.0),
        },
        Edge {
            start: br,
            end: fr,
            normal: rot(0.0, -1.0),
        },
    ]
}

/// Azimuths of the ray fan, uniform over `[-fov, fov]`.
pub fn ray_azimuths(config: &RadarConfig) -> impl Iterator<Item = f64> + '_ {
    let n = config.n_rays;
    let step = if n > 1 {
        2.0 * config.fov / (n - 1) as f64
    } else {
        0.0
    };
    let start = if n > 1 { -config.fov } else { 0.0 };
    (0..n).map(move |i| start + step * i as f64)
}

/// Casts the ray fan from the sensor origin at a target given in sensor
/// coordinates. Each ray reports only its nearest hit, so only the outer
/// shell facing the sensor is ever seen. `snr_db` is left at NaN for the SNR
/// stage to fill in.
pub fn cast_rays(target: &Pose2D, extent: Extent, config: &RadarConfig) -> Vec<Reflection> {
    let edges = rectangle_edges(target, extent);
    let mut out = Vec::new();
    for azimuth in ray_azimuths(config) {
        let dir = [azimuth.cos(), azimuth.sin()];
        let nearest = edges
            .iter()
            .filter_map(|e| e.intersect_ray(dir).map(|t| (t, e)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let Some((range, edge)) = nearest else {
            continue;
        };
        if range > config.max_range {
            continue;
        }
        let incidence = (dir[0] * edge.normal[0] + dir[1] * edge.normal[1]).abs();
        out.push(Reflection {
            position: [range * dir[0], range * dir[1]],
            incident_ray_azimuth: azimuth,
            range,
            rcs: config.rcs_ref_m2 * incidence.max(MIN_INCIDENCE_FACTOR),
            snr_db: f64::NAN,
        });
    }
    out
}
