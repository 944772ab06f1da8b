//! The four pipeline stages. Each reads from and writes to one output
//! directory laid out as:
//!
//! ```text
//! sim/run_000.jsonl ...   simulated clouds, one file per run
//! sim/reference.jsonl     surrogate-real reference recording
//! model.bin               trained classifier
//! train_log.csv           epoch, loss, train_acc, test_acc
//! traces/{d_pp,emd,dem}.csv, traces/summary.csv
//! report/fidelity.csv, report/fidelity.svg
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use radar_fidelity::dem::{self, ClassifierModel, DemError, EpochLog};
use radar_fidelity::metrics::{self, MetricError};
use radar_fidelity::postproc::{
    average_runs, summarize, FidelityTrace, FrameSeries, Orientation, PostprocError,
};
use radar_fidelity::radar::{simulate_frame, surrogate_real_frame};
use radar_fidelity::{PointCloud, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::files::{
    clouds_to_jsonl, read_clouds, read_scenario, read_trace, trace_to_csv, write_atomic,
    TraceColumns,
};
use crate::manifest::RunManifest;
use crate::svg::{render_chart, Series};

/// Metric names in their fixed reporting order.
pub const METRICS: [&str; 3] = ["d_pp", "emd", "dem"];

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn run_file(&self, k: usize) -> PathBuf {
        self.root.join("sim").join(format!("run_{k:03}.jsonl"))
    }

    pub fn reference_file(&self) -> PathBuf {
        self.root.join("sim").join("reference.jsonl")
    }

    pub fn model_file(&self) -> PathBuf {
        self.root.join("model.bin")
    }

    pub fn train_log(&self) -> PathBuf {
        self.root.join("train_log.csv")
    }

    pub fn trace_file(&self, metric: &str) -> PathBuf {
        self.root.join("traces").join(format!("{metric}.csv"))
    }

    pub fn summary_file(&self) -> PathBuf {
        self.root.join("traces").join("summary.csv")
    }

    pub fn report_csv(&self) -> PathBuf {
        self.root.join("report").join("fidelity.csv")
    }

    pub fn report_svg(&self) -> PathBuf {
        self.root.join("report").join("fidelity.svg")
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn dem_error(e: DemError) -> CliError {
    match e {
        DemError::Io(source) => CliError::Runtime(source.to_string()),
        DemError::SingleClass
        | DemError::NoTrainableClouds
        | DemError::InvalidArchitecture(_)
        | DemError::InvalidSpec(_)
        | DemError::DimensionMismatch(_)
        | DemError::Format(_) => CliError::invalid(e.to_string()),
        other => runtime(other),
    }
}

fn postproc_error(metric: &str, e: PostprocError) -> CliError {
    let msg = format!("{metric}: {e}");
    match e {
        PostprocError::InvalidWindow(_)
        | PostprocError::InvalidOrder { .. }
        | PostprocError::SeriesTooShort { .. }
        | PostprocError::MismatchedFrames { .. } => CliError::Invalid(msg),
        _ => CliError::Runtime(msg),
    }
}

/// Simulated clouds of one run. The run owns a generator seeded with
/// `seed`; frames are drawn in order.
pub fn simulate_run(
    manifest: &RunManifest,
    scenario: &Scenario,
    seed: u64,
) -> Result<Vec<PointCloud>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..scenario.n_frames())
        .map(|f| simulate_frame(scenario, f, &manifest.radar, &mut rng).map_err(runtime))
        .collect()
}

/// The surrogate-real reference recording. It uses stream 1 of the
/// generator seeded with the manifest seed, so it never shares draws with
/// run 0.
pub fn reference_recording(manifest: &RunManifest, scenario: &Scenario) -> Result<Vec<PointCloud>> {
    let mut rng = ChaCha8Rng::seed_from_u64(manifest.seed);
    rng.set_stream(1);
    (0..scenario.n_frames())
        .map(|f| {
            surrogate_real_frame(scenario, f, &manifest.radar, &manifest.surrogate, &mut rng)
                .map_err(runtime)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub runs: usize,
    pub frames: usize,
    pub detections: usize,
}

pub fn simulate(manifest: &RunManifest, layout: &Layout) -> Result<SimulateSummary> {
    let scenario = read_scenario(&manifest.scenario)?;
    let counts: Vec<usize> = (0..manifest.n_runs)
        .into_par_iter()
        .map(|k| {
            let clouds = simulate_run(manifest, &scenario, manifest.run_seed(k))?;
            write_atomic(&layout.run_file(k), clouds_to_jsonl(&clouds).as_bytes())?;
            Ok(clouds.iter().map(PointCloud::len).sum())
        })
        .collect::<Result<_>>()?;
    let reference = reference_recording(manifest, &scenario)?;
    write_atomic(
        &layout.reference_file(),
        clouds_to_jsonl(&reference).as_bytes(),
    )?;
    Ok(SimulateSummary {
        runs: manifest.n_runs,
        frames: scenario.n_frames(),
        detections: counts.iter().sum(),
    })
}

pub const TRAIN_LOG_HEADER: &str = "epoch,loss,train_acc,test_acc";

pub fn train_log_csv(logs: &[EpochLog]) -> String {
    let mut out = String::from(TRAIN_LOG_HEADER);
    out.push('\n');
    for l in logs {
        let test = l.test_accuracy.map(|a| a.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", l.epoch, l.loss, l.train_accuracy, test)
            .expect("string write");
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ClassifierModel,
    pub logs: Vec<EpochLog>,
    pub train_clouds: usize,
    pub test_clouds: usize,
}

/// Builds the dataset from the training scenarios, trains a fresh model and
/// writes `model.bin` and `train_log.csv`. The dataset generator is seeded
/// with `dataset.seed`, initialisation and training with `train.seed`.
pub fn train(manifest: &RunManifest, layout: &Layout) -> Result<TrainOutcome> {
    let scenarios = manifest
        .training_scenarios()
        .iter()
        .map(|p| read_scenario(p))
        .collect::<Result<Vec<_>>>()?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(manifest.dataset.seed);
    let data = dem::build_dataset(
        &scenarios,
        &manifest.radar,
        &manifest.surrogate,
        &manifest.dataset,
        &mut data_rng,
    )
    .map_err(dem_error)?;
    if data.test.is_empty() {
        return Err(CliError::invalid("dataset has no test clouds"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(manifest.train.seed);
    let mut model = ClassifierModel::new(manifest.model.clone(), &mut rng).map_err(dem_error)?;
    let logs = dem::train(
        &mut model,
        &data.train,
        Some(&data.test),
        &manifest.train,
        &manifest.dataset,
        &mut rng,
    )
    .map_err(dem_error)?;
    write_atomic(&layout.model_file(), &dem::to_bytes(&model))?;
    write_atomic(&layout.train_log(), train_log_csv(&logs).as_bytes())?;
    Ok(TrainOutcome {
        model,
        logs,
        train_clouds: data.train.len(),
        test_clouds: data.test.len(),
    })
}

pub fn load_model(path: &Path, manifest: &RunManifest) -> Result<ClassifierModel> {
    if !path.exists() {
        return Err(CliError::Missing(path.to_path_buf()));
    }
    let model = dem::load(path).map_err(|e| match e {
        DemError::Io(source) => CliError::io(path, source),
        other => CliError::invalid(format!("{}: {other}", path.display())),
    })?;
    if model.config() != &manifest.model {
        return Err(CliError::invalid(format!(
            "{}: architecture does not match the manifest model block",
            path.display()
        )));
    }
    Ok(model)
}

fn check_axis(clouds: &[PointCloud], n_frames: usize, path: &Path) -> Result<()> {
    let ok = clouds.len() == n_frames && clouds.iter().enumerate().all(|(i, c)| c.frame == i);
    if ok {
        Ok(())
    } else {
        Err(CliError::invalid(format!(
            "{}: frame axis does not match the scenario's {n_frames} frames",
            path.display()
        )))
    }
}

fn gap_on_empty<T>(r: std::result::Result<T, MetricError>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(MetricError::EmptyCloud { .. }) => Ok(None),
        Err(e) => Err(runtime(e)),
    }
}

/// Per-frame metric values of one run against the reference recording.
pub fn score_run(
    reference: &[PointCloud],
    run: &[PointCloud],
    model: &ClassifierModel,
) -> Result<[Vec<Option<f64>>; 3]> {
    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    for (real, sim) in reference.iter().zip(run) {
        out[0].push(gap_on_empty(metrics::d_pp(real, sim))?);
        out[1].push(gap_on_empty(metrics::emd(real, sim))?.map(|(d, _)| d));
        out[2].push(dem::dem_score(model, sim).map_err(runtime)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct Smoothing {
    pub window: usize,
    pub order: usize,
}

/// Scores every run, averages across runs and writes one trace per metric
/// plus the summary table.
pub fn evaluate(
    manifest: &RunManifest,
    layout: &Layout,
    model_path: &Path,
    smoothing: Smoothing,
) -> Result<Vec<FidelityTrace>> {
    let scenario = read_scenario(&manifest.scenario)?;
    let n = scenario.n_frames();
    let reference_path = layout.reference_file();
    let reference = read_clouds(&reference_path)?;
    check_axis(&reference, n, &reference_path)?;
    let model = load_model(model_path, manifest)?;

    let per_run: Vec<[Vec<Option<f64>>; 3]> = (0..manifest.n_runs)
        .into_par_iter()
        .map(|k| {
            let path = layout.run_file(k);
            let run = read_clouds(&path)?;
            check_axis(&run, n, &path)?;
            score_run(&reference, &run, &model)
        })
        .collect::<Result<_>>()?;

    let frames: Vec<usize> = (0..n).collect();
    let orientations = [
        Orientation::LowerIsBetter,
        Orientation::LowerIsBetter,
        Orientation::HigherIsBetter,
    ];
    let mut traces = Vec::with_capacity(3);
    for (m, name) in METRICS.iter().enumerate() {
        let runs: Vec<FrameSeries> = per_run
            .iter()
            .map(|r| FrameSeries::new(frames.clone(), r[m].clone()))
            .collect();
        let mean = average_runs(&runs).map_err(|e| postproc_error(name, e))?;
        let trace = FidelityTrace::build(
            *name,
            mean,
            orientations[m],
            smoothing.window,
            smoothing.order,
        )
        .map_err(|e| postproc_error(name, e))?;
        traces.push(trace);
    }
    for t in &traces {
        write_atomic(
            &layout.trace_file(&t.metric_name),
            trace_to_csv(t).as_bytes(),
        )?;
    }
    let mut summary = String::from("metric,mean,std\n");
    for t in &traces {
        writeln!(summary, "{},{},{}", t.metric_name, t.mean, t.std).expect("string write");
    }
    write_atomic(&layout.summary_file(), summary.as_bytes())?;
    Ok(traces)
}

#[derive(Debug, Clone)]
pub struct Report {
    /// (metric, mean, std) in the fixed metric order.
    pub summary: Vec<(String, f64, f64)>,
    pub csv: String,
    pub svg: String,
}

impl Report {
    /// The mean/std table as printed to standard output.
    pub fn table(&self) -> String {
        let mut out = format!("{:<8}{:>12}{:>12}\n", "metric", "mean", "std");
        for (name, mean, std) in &self.summary {
            writeln!(out, "{name:<8}{mean:>12.6}{std:>12.6}").expect("string write");
        }
        out
    }
}

/// Merges the three trace files into one wide CSV and a line chart.
pub fn report(layout: &Layout) -> Result<Report> {
    let traces: Vec<TraceColumns> = METRICS
        .iter()
        .map(|m| read_trace(&layout.trace_file(m)))
        .collect::<Result<_>>()?;
    let frames = &traces[0].frames;
    for (t, m) in traces.iter().zip(METRICS).skip(1) {
        if &t.frames != frames {
            return Err(CliError::invalid(format!(
                "trace {m} is not aligned with trace {}",
                METRICS[0]
            )));
        }
    }

    let mut csv = String::from("frame");
    for m in METRICS {
        write!(csv, ",{m}_raw,{m}_normalized,{m}_smoothed").expect("string write");
    }
    csv.push('\n');
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (i, f) in frames.iter().enumerate() {
        write!(csv, "{f}").expect("string write");
        for t in &traces {
            write!(
                csv,
                ",{},{},{}",
                cell(t.raw[i]),
                cell(t.normalized[i]),
                cell(t.smoothed[i])
            )
            .expect("string write");
        }
        csv.push('\n');
    }

    let mut summary = Vec::with_capacity(3);
    for (t, m) in traces.iter().zip(METRICS) {
        let (mean, std) = summarize(&t.normalized).map_err(|e| postproc_error(m, e))?;
        summary.push((m.to_string(), mean, std));
    }

    let series: Vec<Series> = traces
        .iter()
        .zip(METRICS)
        .map(|(t, m)| Series {
            name: m.to_string(),
            unfiltered: t.normalized.clone(),
            smoothed: t.smoothed.clone(),
        })
        .collect();
    let svg = render_chart(frames, &series);

    write_atomic(&layout.report_csv(), csv.as_bytes())?;
    write_atomic(&layout.report_svg(), svg.as_bytes())?;
    Ok(Report { summary, csv, svg })
}
