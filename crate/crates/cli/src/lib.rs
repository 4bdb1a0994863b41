//! Batch driver behind the `leafscan` binary.
//!
//! [`run`] validates a [`RunConfig`], analyzes every input on a bounded
//! worker pool and writes per-image artifacts into the output directory:
//!
//! - `<stem>.report.json` (or an error report)
//! - `<stem>.cluster<i>.png`, one binary mask per k-means cluster
//! - `<stem>.overlay.png`, affected pixels tinted red
//! - `<stem>.hist.csv`, a* histogram of the leaf
//!
//! Summary lines go to `stdout` in input order; failures are listed on
//! `stderr` and do not stop the batch.

pub mod report;

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use leafscan::histograms::{a_star_histogram, Histogram, DEFAULT_BINS};
use leafscan::planimetry::{overlay, BackgroundOptions};
use leafscan::{
    analyze, compare_histograms, decode_image, Analysis, AnalysisError, BackgroundMode, KMeansConfig,
    Metric, PipelineConfig, PlanimetryError, SegmentOptions, Stage,
};

use report::{to_json, ErrorDetail, ErrorReport, HistogramComparison, Report};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ANALYSIS_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("no input images given")]
    NoInputs,
    #[error("input {0} does not exist")]
    MissingInput(PathBuf),
    #[error("cannot read directory {path}: {source}")]
    ReadDir { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot create output directory {path}: {source}")]
    OutDir { path: PathBuf, source: io::Error },
    #[error("cannot load reference histogram {path}: {reason}")]
    ReferenceHistogram { path: PathBuf, reason: String },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// Which artifacts to write besides the summary line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub json: bool,
    pub masks: bool,
    pub overlay: bool,
    pub histograms: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Self {
            json: true,
            masks: false,
            overlay: false,
            histograms: false,
        }
    }
}

impl FromStr for Emit {
    type Err = ConfigError;

    /// Comma-separated subset of `json,masks,overlay,histograms`, or `all`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut emit = Emit {
            json: false,
            masks: false,
            overlay: false,
            histograms: false,
        };
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            match item.to_ascii_lowercase().as_str() {
                "json" => emit.json = true,
                "masks" => emit.masks = true,
                "overlay" => emit.overlay = true,
                "histograms" | "hist" => emit.histograms = true,
                "all" => {
                    emit = Emit {
                        json: true,
                        masks: true,
                        overlay: true,
                        histograms: true,
                    }
                }
                other => return Err(ConfigError::Invalid(format!("unknown --emit item {other:?}"))),
            }
        }
        Ok(emit)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Image files and/or directories (scanned non-recursively).
    pub inputs: Vec<PathBuf>,
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub grid_cell_px: u32,
    pub scale_mm2_per_px: Option<f64>,
    pub background: BackgroundMode,
    pub out_dir: PathBuf,
    pub emit: Emit,
    /// Worker threads; all available cores when `None`.
    pub jobs: Option<usize>,
    pub threshold: Option<u8>,
    pub reference_hist: Option<PathBuf>,
    pub hist_metric: Metric,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            k: 2,
            seed: 42,
            restarts: 10,
            grid_cell_px: 4,
            scale_mm2_per_px: None,
            background: BackgroundMode::Auto,
            out_dir: PathBuf::from("leafscan-out"),
            emit: Emit::default(),
            jobs: None,
            threshold: None,
            reference_hist: None,
            hist_metric: Metric::Intersection,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k < 2 {
            return Err(ConfigError::Invalid(format!("--k must be >= 2, got {}", self.k)));
        }
        if self.restarts < 1 {
            return Err(ConfigError::Invalid("--restarts must be >= 1".into()));
        }
        if self.grid_cell_px < 1 {
            return Err(ConfigError::Invalid("--grid-cell must be >= 1".into()));
        }
        if let Some(s) = self.scale_mm2_per_px {
            if !s.is_finite() || s <= 0.0 {
                return Err(ConfigError::Invalid(format!("--scale must be > 0, got {s}")));
            }
        }
        if self.jobs == Some(0) {
            return Err(ConfigError::Invalid("--jobs must be >= 1".into()));
        }
        Ok(())
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            segment: SegmentOptions {
                kmeans: KMeansConfig {
                    k: self.k,
                    seed: self.seed,
                    restarts: self.restarts,
                    ..KMeansConfig::default()
                },
                background: BackgroundOptions {
                    mode: self.background,
                    ..BackgroundOptions::default()
                },
                ..SegmentOptions::default()
            },
            grid_cell_px: self.grid_cell_px,
            scale_mm2_per_px: self.scale_mm2_per_px,
            threshold: self.threshold,
            ..PipelineConfig::default()
        }
    }
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Expands directories into their image files (sorted by name); files are
/// taken as given.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, ConfigError> {
    if inputs.is_empty() {
        return Err(ConfigError::NoInputs);
    }
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = fs::read_dir(input).map_err(|source| ConfigError::ReadDir {
                path: input.clone(),
                source,
            })?;
            let mut files: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && has_image_extension(p))
                .collect();
            files.sort();
            out.extend(files);
        } else if input.exists() {
            out.push(input.clone());
        } else {
            return Err(ConfigError::MissingInput(input.clone()));
        }
    }
    if out.is_empty() {
        return Err(ConfigError::NoInputs);
    }
    Ok(out)
}

/// Output file stems; inputs sharing a stem fall back to their full file
/// name so nothing is overwritten.
fn output_stems(inputs: &[PathBuf]) -> Vec<String> {
    let stem = |p: &PathBuf| p.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned());
    let mut seen: HashMap<String, usize> = HashMap::new();
    for p in inputs {
        *seen.entry(stem(p)).or_default() += 1;
    }
    inputs
        .iter()
        .map(|p| {
            let s = stem(p);
            if seen[&s] > 1 {
                p.file_name().map_or(s, |n| n.to_string_lossy().into_owned())
            } else {
                s
            }
        })
        .collect()
}

/// Result of one input.
#[derive(Debug)]
pub enum Outcome {
    Analyzed { input: PathBuf, analysis: Box<Analysis> },
    Failed { input: PathBuf, error: AnalysisError },
}

impl Outcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, Outcome::Analyzed { .. })
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub outcomes: Vec<Outcome>,
}

impl RunSummary {
    pub fn exit_code(&self) -> u8 {
        if self.outcomes.iter().all(Outcome::is_ok) {
            EXIT_OK
        } else {
            EXIT_ANALYSIS_FAILED
        }
    }
}

fn load_reference(path: &Path) -> Result<Histogram, ConfigError> {
    let err = |reason: String| ConfigError::ReferenceHistogram {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    Histogram::from_csv(&text).map_err(|e| err(e.to_string()))
}

fn write_artifact(path: PathBuf, bytes: &[u8]) -> Result<(), AnalysisError> {
    fs::write(&path, bytes).map_err(|e| {
        AnalysisError::new(
            Stage::Report,
            PlanimetryError::Imaging(leafscan::ImagingError::Encode(format!("{}: {e}", path.display()))),
        )
    })
}

struct Job<'a> {
    cfg: &'a RunConfig,
    pipeline: &'a PipelineConfig,
    reference: Option<&'a Histogram>,
}

impl Job<'_> {
    fn process(&self, input: &Path, stem: &str) -> Outcome {
        match self.analyze_and_write(input, stem) {
            Ok(analysis) => Outcome::Analyzed {
                input: input.to_path_buf(),
                analysis: Box::new(analysis),
            },
            Err(error) => {
                if self.cfg.emit.json {
                    let report = ErrorReport {
                        input: input.display().to_string(),
                        error: ErrorDetail {
                            stage: error.stage,
                            message: error.source.to_string(),
                        },
                    };
                    // the failure is already recorded in the outcome
                    let _ = fs::write(self.cfg.out_dir.join(format!("{stem}.report.json")), to_json(&report));
                }
                Outcome::Failed {
                    input: input.to_path_buf(),
                    error,
                }
            }
        }
    }

    fn analyze_and_write(&self, input: &Path, stem: &str) -> Result<Analysis, AnalysisError> {
        let bytes = fs::read(input).map_err(|e| {
            AnalysisError::new(
                Stage::Read,
                PlanimetryError::Imaging(leafscan::ImagingError::CorruptFile(e.to_string())),
            )
        })?;
        let img = decode_image(&bytes).map_err(|e| AnalysisError::new(Stage::Decode, e))?;
        let analysis = analyze(&img, self.pipeline)?;
        let out = &self.cfg.out_dir;
        let report_err = |e: leafscan::ImagingError| AnalysisError::new(Stage::Report, e);
        let hist_err = |e: leafscan::HistogramError| {
            AnalysisError::new(
                Stage::Report,
                PlanimetryError::Imaging(leafscan::ImagingError::Encode(e.to_string())),
            )
        };

        let needs_hist = self.cfg.emit.histograms || self.reference.is_some();
        let histogram = if needs_hist {
            Some(a_star_histogram(&img, &analysis.segmentation.foreground, DEFAULT_BINS).map_err(hist_err)?)
        } else {
            None
        };

        if self.cfg.emit.json {
            let mut report = Report::new(input.display().to_string(), &analysis, &self.pipeline.segment.kmeans);
            if let (Some(reference), Some(h)) = (self.reference, &histogram) {
                let metric = self.cfg.hist_metric;
                report.histogram_comparison = Some(HistogramComparison {
                    metric: metric.name(),
                    score: compare_histograms(h, reference, metric).map_err(hist_err)?,
                });
            }
            write_artifact(out.join(format!("{stem}.report.json")), to_json(&report).as_bytes())?;
        }
        if self.cfg.emit.masks {
            for (i, mask) in analysis.segmentation.cluster_masks.iter().enumerate() {
                let png = mask.encode_png().map_err(report_err)?;
                write_artifact(out.join(format!("{stem}.cluster{i}.png")), &png)?;
            }
        }
        if self.cfg.emit.overlay {
            let tinted = overlay(&img, &analysis.affected_mask()).map_err(report_err)?;
            write_artifact(out.join(format!("{stem}.overlay.png")), &tinted.encode_png().map_err(report_err)?)?;
        }
        if let (true, Some(h)) = (self.cfg.emit.histograms, &histogram) {
            write_artifact(out.join(format!("{stem}.hist.csv")), h.to_csv().as_bytes())?;
        }
        Ok(analysis)
    }
}

/// Runs the whole batch. Configuration problems are returned as `Err`
/// before any image is touched.
pub fn run(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<RunSummary, ConfigError> {
    cfg.validate()?;
    let inputs = collect_inputs(&cfg.inputs)?;
    let reference = cfg.reference_hist.as_deref().map(load_reference).transpose()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|source| ConfigError::OutDir {
        path: cfg.out_dir.clone(),
        source,
    })?;
    let pipeline = cfg.pipeline_config();
    let stems = output_stems(&inputs);
    let job = Job {
        cfg,
        pipeline: &pipeline,
        reference: reference.as_ref(),
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cfg.jobs {
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| ConfigError::Pool(e.to_string()))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        inputs
            .par_iter()
            .zip(stems.par_iter())
            .map(|(input, stem)| job.process(input, stem))
            .collect()
    });

    for outcome in &outcomes {
        // console output is best effort
        let _ = match outcome {
            Outcome::Analyzed { input, analysis } => {
                let r = &analysis.report;
                writeln!(
                    stdout,
                    "{}\ttp={}\twp1={}\tdamage_percent={:.4}",
                    input.display(),
                    r.tp,
                    r.wp1,
                    r.damage_percent
                )
            }
            Outcome::Failed { input, error } => {
                let _ = writeln!(stdout, "{}\terror={}", input.display(), error.stage);
                writeln!(stderr, "{}: {error}", input.display())
            }
        };
    }
    Ok(RunSummary { outcomes })
}
