use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use leafscan::{BackgroundMode, Metric};
use leafscan_cli::{run, Emit, RunConfig, EXIT_CONFIG};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Background {
    Auto,
    White,
    Black,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HistMetric {
    Intersection,
    ChiSquare,
    Bhattacharyya,
}

/// Measure leaf area and the share of diseased tissue in leaf photographs.
#[derive(Debug, Parser)]
#[command(name = "leafscan", version)]
struct Cli {
    /// Image files (PNG/JPEG) or directories of images.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,

    /// Number of color clusters over the leaf.
    #[arg(long, default_value_t = 2)]
    k: usize,

    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Independent k-means runs; the lowest-inertia one wins.
    #[arg(long, default_value_t = 10)]
    restarts: usize,

    /// Grid cell edge in pixels for the graph-paper estimate.
    #[arg(long = "grid-cell", default_value_t = 4)]
    grid_cell: u32,

    /// Physical area of one pixel in mm².
    #[arg(long)]
    scale: Option<f64>,

    #[arg(long, value_enum, default_value_t = Background::Auto)]
    background: Background,

    #[arg(long = "out-dir", default_value = "leafscan-out")]
    out_dir: PathBuf,

    /// Comma-separated artifacts: json, masks, overlay, histograms (or all).
    #[arg(long, default_value = "json")]
    emit: String,

    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,

    /// Fixed grayscale threshold instead of Otsu.
    #[arg(long)]
    threshold: Option<u8>,

    /// Reference a* histogram CSV to compare every leaf against.
    #[arg(long = "reference-hist")]
    reference_hist: Option<PathBuf>,

    #[arg(long = "hist-metric", value_enum, default_value_t = HistMetric::Intersection)]
    hist_metric: HistMetric,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let emit: Emit = match cli.emit.parse() {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cfg = RunConfig {
        inputs: cli.inputs,
        k: cli.k,
        seed: cli.seed,
        restarts: cli.restarts,
        grid_cell_px: cli.grid_cell,
        scale_mm2_per_px: cli.scale,
        background: match cli.background {
            Background::Auto => BackgroundMode::Auto,
            Background::White => BackgroundMode::White,
            Background::Black => BackgroundMode::Black,
        },
        out_dir: cli.out_dir,
        emit,
        jobs: cli.jobs,
        threshold: cli.threshold,
        reference_hist: cli.reference_hist,
        hist_metric: match cli.hist_metric {
            HistMetric::Intersection => Metric::Intersection,
            HistMetric::ChiSquare => Metric::ChiSquare,
            HistMetric::Bhattacharyya => Metric::Bhattacharyya,
        },
    };
    match run(&cfg, &mut io::stdout(), &mut io::stderr()) {
        Ok(summary) => ExitCode::from(summary.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
