//! JSON report layout.
//!
//! Keys are emitted in declaration order. `damage_percent` and
//! `paper_error_percent` are written with exactly four decimals.

use serde::Serialize;
use serde_json::Number;

use leafscan::planimetry::{AreaMm2, Binarization, Stage};
use leafscan::{Analysis, GridEstimate, KMeansConfig};

#[derive(Debug, Serialize)]
pub struct KMeansSummary {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub inertia: f64,
    pub iterations: usize,
}

#[derive(Debug, Serialize)]
pub struct HistogramComparison {
    pub metric: &'static str,
    pub score: f64,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub input: String,
    pub width: u32,
    pub height: u32,
    pub wp: u64,
    pub wp1: u64,
    pub tp: u64,
    pub damage_percent: Number,
    pub paper_error_percent: Number,
    pub grid: GridEstimate,
    pub kmeans: KMeansSummary,
    pub flags: Vec<&'static str>,
    pub scale_mm2_per_px: Option<f64>,
    pub area_mm2: Option<AreaMm2>,
    pub binarization: Binarization,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub histogram_comparison: Option<HistogramComparison>,
}

#[derive(Debug, Serialize)]
pub struct ErrorDetail {
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub input: String,
    pub error: ErrorDetail,
}

/// `value` as a JSON number token with four digits after the point.
pub fn fixed4(value: f64) -> Number {
    format!("{value:.4}")
        .parse()
        .expect("formatted finite float is a valid JSON number")
}

impl Report {
    pub fn new(input: String, analysis: &Analysis, kmeans: &KMeansConfig) -> Self {
        let r = &analysis.report;
        let damage = fixed4(r.damage_percent);
        Report {
            input,
            width: analysis.width,
            height: analysis.height,
            wp: r.wp,
            wp1: r.wp1,
            tp: r.tp,
            paper_error_percent: damage.clone(),
            damage_percent: damage,
            grid: analysis.leaf_grid,
            kmeans: KMeansSummary {
                k: kmeans.k,
                seed: kmeans.seed,
                restarts: kmeans.restarts,
                inertia: analysis.segmentation.model.inertia,
                iterations: analysis.segmentation.model.iterations_run,
            },
            flags: analysis.segmentation.flags.iter().map(|f| f.as_str()).collect(),
            scale_mm2_per_px: r.scale_mm2_per_px,
            area_mm2: r.area_mm2,
            binarization: analysis.binarization,
            histogram_comparison: None,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s
}
