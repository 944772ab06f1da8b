//! On-disk formats: scenario CSV + JSON sidecar, point-cloud JSON lines,
//! trace CSV, and atomic file replacement.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use radar_fidelity::postproc::FidelityTrace;
use radar_fidelity::{Detection, Extent, PointCloud, Pose2D, Scenario, Source};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Reads a file, reporting a missing file as invalid input.
pub fn read_input(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(CliError::Missing(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Scenario metadata stored next to the track CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSidecar {
    pub frame_rate: f64,
    pub target_extent: Extent,
    #[serde(default = "Pose2D::origin")]
    pub sensor_pose: Pose2D,
}

pub const SCENARIO_HEADER: &str = "frame,x,y,yaw,vx,vy";

/// The sidecar of `scenario.csv` is `scenario.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_scenario(csv: &Path, scenario: &Scenario) -> Result<()> {
    let mut out = String::from(SCENARIO_HEADER);
    out.push('\n');
    for (k, p) in scenario.target_track().iter().enumerate() {
        writeln!(out, "{k},{},{},{},{},{}", p.x, p.y, p.yaw, p.vx, p.vy).expect("string write");
    }
    let sidecar = ScenarioSidecar {
        frame_rate: scenario.frame_rate(),
        target_extent: scenario.target_extent(),
        sensor_pose: *scenario.sensor_pose(),
    };
    let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar serialises");
    json.push('\n');
    write_atomic(csv, out.as_bytes())?;
    write_atomic(&sidecar_path(csv), json.as_bytes())
}

pub fn read_scenario(csv: &Path) -> Result<Scenario> {
    let text = read_input(csv)?;
    let side_path = sidecar_path(csv);
    let sidecar: ScenarioSidecar = serde_json::from_str(&read_input(&side_path)?)
        .map_err(|e| CliError::invalid(format!("{}: {e}", side_path.display())))?;

    let bad =
        |line: usize, msg: &str| CliError::invalid(format!("{}:{line}: {msg}", csv.display()));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SCENARIO_HEADER => {}
        _ => return Err(bad(1, &format!("expected header `{SCENARIO_HEADER}`"))),
    }
    let mut track = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(bad(i + 1, "expected 6 fields"));
        }
        let frame: usize = fields[0]
            .parse()
            .map_err(|_| bad(i + 1, "bad frame index"))?;
        if frame != track.len() {
            return Err(bad(
                i + 1,
                &format!("expected frame {}, got {frame}", track.len()),
            ));
        }
        let mut v = [0.0f64; 5];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse()
                .map_err(|_| bad(i + 1, &format!("bad number `{f}`")))?;
            if !slot.is_finite() {
                return Err(bad(i + 1, "non-finite value"));
            }
        }
        track.push(Pose2D::new(v[0], v[1], v[2], v[3], v[4]));
    }
    Scenario::new(
        sidecar.frame_rate,
        sidecar.sensor_pose,
        track,
        sidecar.target_extent,
    )
    .map_err(|e| CliError::invalid(format!("{}: {e}", csv.display())))
}

#[derive(Serialize, Deserialize)]
struct CloudRecord {
    frame: usize,
    source: Source,
    points: Vec<[f64; 3]>,
}

/// One JSON object per line: `{"frame":..,"source":..,"points":[[x,y,d],..]}`.
pub fn clouds_to_jsonl(clouds: &[PointCloud]) -> String {
    let mut out = String::new();
    for c in clouds {
        let rec = CloudRecord {
            frame: c.frame,
            source: c.source,
            points: c.points.iter().map(|p| p.features()).collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("cloud serialises"));
        out.push('\n');
    }
    out
}

pub fn read_clouds(path: &Path) -> Result<Vec<PointCloud>> {
    let text = read_input(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let rec: CloudRecord = serde_json::from_str(l)
                .map_err(|e| CliError::invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
            let points: Vec<Detection> = rec
                .points
                .into_iter()
                .map(Detection::from_features)
                .collect();
            if points.iter().any(|p| !p.is_finite()) {
                return Err(CliError::invalid(format!(
                    "{}:{}: non-finite detection",
                    path.display(),
                    i + 1
                )));
            }
            Ok(PointCloud::new(rec.frame, rec.source, points))
        })
        .collect()
}

pub const TRACE_HEADER: &str = "frame,raw,normalized,smoothed";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trace_to_csv(trace: &FidelityTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for i in 0..trace.frames.len() {
        writeln!(
            out,
            "{},{},{},{}",
            trace.frames[i],
            cell(trace.raw[i]),
            cell(trace.normalized[i]),
            cell(trace.smoothed[i])
        )
        .expect("string write");
    }
    out
}

/// The columns of a trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceColumns {
    pub frames: Vec<usize>,
    pub raw: Vec<Option<f64>>,
    pub normalized: Vec<Option<f64>>,
    pub smoothed: Vec<Option<f64>>,
}

pub fn read_trace(path: &Path) -> Result<TraceColumns> {
    let text = read_input(path)?;
    let bad =
        |line: usize, msg: &str| CliError::invalid(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => return Err(bad(1, &format!("expected header `{TRACE_HEADER}`"))),
    }
    let mut t = TraceColumns {
        frames: Vec::new(),
        raw: Vec::new(),
        normalized: Vec::new(),
        smoothed: Vec::new(),
    };
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad(i + 1, "expected 4 fields"));
        }
        let parse = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| bad(i + 1, &format!("bad number `{s}`")))
            }
        };
        t.frames
            .push(f[0].parse().map_err(|_| bad(i + 1, "bad frame index"))?);
        t.raw.push(parse(f[1])?);
        t.normalized.push(parse(f[2])?);
        t.smoothed.push(parse(f[3])?);
    }
    Ok(t)
}
