use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use radar_fidelity::figure_eight_scenario;
use radar_fidelity::postproc::{DEFAULT_SG_ORDER, DEFAULT_SG_WINDOW};
use radar_fidelity_cli::commands::{self, Layout, Smoothing};
use radar_fidelity_cli::files::write_scenario;
use radar_fidelity_cli::{CliError, RunManifest, SEED_ENV};

#[derive(Parser)]
#[command(
    name = "radar-fidelity",
    version,
    about = "Simulate radar point clouds and score their fidelity"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Output directory; overrides the manifest's `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Model file for `evaluate` (default: OUT/model.bin).
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Savitzky-Golay window length (odd).
    #[arg(long, global = true, default_value_t = DEFAULT_SG_WINDOW)]
    sg_window: usize,
    /// Savitzky-Golay polynomial order.
    #[arg(long, global = true, default_value_t = DEFAULT_SG_ORDER)]
    sg_order: usize,
    /// Number of simulation runs; overrides the manifest's `n_runs`.
    #[arg(long, global = true)]
    runs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every run and record the surrogate-real reference.
    Simulate,
    /// Build the labelled dataset and train the classifier.
    Train,
    /// Compute per-frame d_pp, EMD and DEM traces.
    Evaluate,
    /// Merge the traces into a wide CSV and an SVG chart.
    Report,
    /// Write a figure-eight scenario (track CSV plus JSON sidecar).
    FigureEight {
        /// Destination CSV; the sidecar goes next to it with a .json extension.
        path: PathBuf,
        #[arg(long, default_value_t = 300)]
        frames: usize,
        #[arg(long, default_value_t = 30.0)]
        scale: f64,
        #[arg(long, default_value_t = 20.0)]
        frame_rate: f64,
    },
}

fn load_manifest(cli: &Cli) -> Result<RunManifest, CliError> {
    let path = cli
        .manifest
        .as_ref()
        .ok_or_else(|| CliError::invalid("--manifest is required"))?;
    let mut m = RunManifest::load(path)?;
    m.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())?;
    if let Some(n) = cli.runs {
        m.n_runs = n;
    }
    if let Some(out) = &cli.out {
        m.output_dir = out.clone();
    }
    m.validate()?;
    Ok(m)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Command::FigureEight {
        path,
        frames,
        scale,
        frame_rate,
    } = &cli.command
    {
        let s = figure_eight_scenario(*frames, *scale, *frame_rate)
            .map_err(|e| CliError::invalid(e.to_string()))?;
        write_scenario(path, &s)?;
        eprintln!("wrote {} ({} frames)", path.display(), s.n_frames());
        return Ok(());
    }

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::invalid("--jobs must be at least 1"));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::Runtime(e.to_string()))?;

    if let Command::Report = cli.command {
        let root = match (&cli.out, &cli.manifest) {
            (Some(out), _) => out.clone(),
            (None, Some(_)) => load_manifest(cli)?.output_dir,
            (None, None) => return Err(CliError::invalid("report needs --out or --manifest")),
        };
        let report = pool.install(|| commands::report(&Layout::new(root)))?;
        print!("{}", report.table());
        return Ok(());
    }

    let manifest = load_manifest(cli)?;
    let layout = Layout::new(manifest.output_dir.clone());
    pool.install(|| match &cli.command {
        Command::Simulate => {
            let s = commands::simulate(&manifest, &layout)?;
            eprintln!(
                "simulated {} runs x {} frames ({} detections)",
                s.runs, s.frames, s.detections
            );
            Ok(())
        }
        Command::Train => {
            let t = commands::train(&manifest, &layout)?;
            let last = t.logs.last().expect("at least one epoch");
            eprintln!(
                "trained on {} clouds, tested on {}: final loss {:.4}, test accuracy {:.4}",
                t.train_clouds,
                t.test_clouds,
                last.loss,
                last.test_accuracy.unwrap_or(f64::NAN)
            );
            Ok(())
        }
        Command::Evaluate => {
            let model = cli.model.clone().unwrap_or_else(|| layout.model_file());
            let smoothing = Smoothing {
                window: cli.sg_window,
                order: cli.sg_order,
            };
            let traces = commands::evaluate(&manifest, &layout, &model, smoothing)?;
            for t in &traces {
                eprintln!("{}: mean {:.4}, std {:.4}", t.metric_name, t.mean, t.std);
            }
            Ok(())
        }
        Command::Report | Command::FigureEight { .. } => unreachable!("handled above"),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
