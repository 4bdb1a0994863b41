//! Leaf area and lesion measurement from leaf photographs.
//!
//! The pipeline reads a photograph of a single leaf on a plain background,
//! separates the leaf from the background, clusters the leaf's CIELAB a*b*
//! colors with k-means into healthy and affected regions, and counts pixels:
//!
//! ```text
//! tp = wp + wp1            damage % = 100 * wp1 / tp
//! ```
//!
//! where `wp` are unaffected and `wp1` affected leaf pixels. A graph-paper
//! style grid estimate and a plain grayscale-threshold estimate of the leaf
//! area are produced alongside for cross-checking.
//!
//! ```no_run
//! use leafscan::{analyze, decode_image, PipelineConfig};
//!
//! let bytes = std::fs::read("leaf.jpg")?;
//! let img = decode_image(&bytes)?;
//! let analysis = analyze(&img, &PipelineConfig::default())?;
//! println!("{:.4}% affected", analysis.report.damage_percent);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod clustering;
pub mod colorspace;
pub mod histograms;
pub mod imaging;
pub mod planimetry;
pub mod synth;

pub use clustering::{kmeans_fit, ClusterError, FeatureMatrix, KMeansConfig, KMeansModel};
pub use colorspace::{image_to_ab_matrix, lab_to_srgb, srgb_to_lab, LabPixel, LabPixelMatrix};
pub use histograms::{compare_histograms, compute_histogram, Histogram, HistogramError, Metric};
pub use imaging::{
    binarize, count_white, decode_image, otsu_threshold, to_grayscale, BinaryMask, GrayImage,
    ImagingError, RgbImage,
};
pub use planimetry::{
    analyze, analyze_bytes, grid_area, planimetry_report, remove_background, segment_leaf,
    Analysis, AnalysisError, BackgroundMode, BackgroundOptions, ClusterRole, Flag, GridEstimate,
    PipelineConfig, PlanimetryError, PlanimetryReport, SegmentOptions, SegmentationResult, Stage,
};
