//! Leaf and lesion area from a photograph.
//!
//! The pipeline runs background removal, k-means over the a*b* coordinates
//! of the leaf pixels, one mask per cluster, and pixel counts. Unaffected
//! pixels (`wp`) and affected pixels (`wp1`) add up to the leaf total
//! (`tp`), and the damage percentage is `100 * wp1 / tp`. A grid-cell
//! estimate of the leaf area mimics counting squares on graph paper and
//! serves as an independent cross-check of the pixel count.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{kmeans_fit, squared_distance, ClusterError, KMeansConfig, KMeansModel};
use crate::colorspace::{image_to_ab_matrix, srgb_to_lab};
use crate::imaging::{
    binarize, count_white, decode_image, otsu_threshold, to_grayscale, BinaryMask, ImagingError,
    RgbImage,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanimetryError {
    #[error("no foreground: every pixel was classified as background")]
    EmptyForeground,
    #[error("leaf has zero pixels (wp + wp1 = 0)")]
    EmptyLeaf,
    #[error("segmentation needs k >= 2, got {0}")]
    InvalidK(usize),
    #[error("grid cell size must be >= 1 pixel")]
    InvalidCellSize,
    #[error("scale must be finite and > 0, got {0}")]
    InvalidScale(f64),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// Pipeline stage an [`AnalysisError`] originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Read,
    Decode,
    Background,
    Segment,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Read => "read",
            Stage::Decode => "decode",
            Stage::Background => "background",
            Stage::Segment => "segment",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{stage}: {source}")]
pub struct AnalysisError {
    pub stage: Stage,
    #[source]
    pub source: PlanimetryError,
}

impl AnalysisError {
    pub fn new(stage: Stage, source: impl Into<PlanimetryError>) -> Self {
        Self {
            stage,
            source: source.into(),
        }
    }
}

// ---------------------------------------------------------------------------
// Background removal
// ---------------------------------------------------------------------------

/// Where the background lightness reference comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundMode {
    /// Median L* of the one-pixel image border.
    #[default]
    Auto,
    /// L* = 100.
    White,
    /// L* = 0.
    Black,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundOptions {
    pub mode: BackgroundMode,
    /// A pixel is background only if |L* - reference| is below this...
    pub lightness_tol: f64,
    /// ...and its a*b* chroma is below this.
    pub chroma_max: f64,
}

impl Default for BackgroundOptions {
    fn default() -> Self {
        Self {
            mode: BackgroundMode::Auto,
            lightness_tol: 15.0,
            chroma_max: 12.0,
        }
    }
}

fn border_indices(width: u32, height: u32) -> Vec<usize> {
    let (w, h) = (width as usize, height as usize);
    let mut out = Vec::with_capacity(2 * (w + h));
    for y in 0..h {
        if y == 0 || y + 1 == h {
            out.extend((0..w).map(|x| y * w + x));
        } else {
            out.push(y * w);
            if w > 1 {
                out.push(y * w + w - 1);
            }
        }
    }
    out
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Lightness reference used for background classification.
pub fn background_lightness(img: &RgbImage, mode: BackgroundMode) -> f64 {
    match mode {
        BackgroundMode::White => 100.0,
        BackgroundMode::Black => 0.0,
        BackgroundMode::Auto => median(
            border_indices(img.width(), img.height())
                .into_iter()
                .map(|i| srgb_to_lab(img.pixel_at(i)).l)
                .collect(),
        ),
    }
}

/// Leaf foreground mask (`true` = leaf).
///
/// A pixel is background when it is nearly achromatic and its lightness is
/// close to the background reference, which handles both a white paper
/// sheet and a black cloth.
pub fn remove_background(img: &RgbImage, opts: &BackgroundOptions) -> Result<BinaryMask, PlanimetryError> {
    let reference = background_lightness(img, opts.mode);
    let data: Vec<bool> = img
        .pixels()
        .map(|p| {
            let lab = srgb_to_lab(p);
            let is_bg = (lab.l - reference).abs() < opts.lightness_tol && lab.chroma() < opts.chroma_max;
            !is_bg
        })
        .collect();
    let mask = BinaryMask::new(img.width(), img.height(), data)?;
    if count_white(&mask) == 0 {
        return Err(PlanimetryError::EmptyForeground);
    }
    Ok(mask)
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterRole {
    Unaffected,
    Affected,
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// Leaf clusters are barely distinguishable or the "affected" cluster is
    /// still green; the damage figure is unreliable.
    LowContrast,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::LowContrast => "low_contrast",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentOptions {
    pub kmeans: KMeansConfig,
    pub background: BackgroundOptions,
    /// Minimum a*b* distance between the affected and unaffected centroids
    /// below which the result is flagged as low contrast.
    pub low_contrast_distance: f64,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            kmeans: KMeansConfig::default(),
            background: BackgroundOptions::default(),
            low_contrast_distance: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub foreground: BinaryMask,
    pub background: BinaryMask,
    /// One mask per k-means cluster, indexed like the model's centroids.
    pub cluster_masks: Vec<BinaryMask>,
    pub roles: Vec<ClusterRole>,
    /// Mean (a*, b*) of each cluster in CIELAB units.
    pub centroids_ab: Vec<[f64; 2]>,
    pub model: KMeansModel,
    /// Row-major pixel index of every clustered feature row.
    pub row_to_pixel: Vec<usize>,
    pub flags: Vec<Flag>,
}

impl SegmentationResult {
    fn union_of(&self, role: ClusterRole) -> BinaryMask {
        let mut out = BinaryMask::filled(self.foreground.width(), self.foreground.height(), false)
            .expect("non-zero dimensions");
        for (row, &pixel) in self.row_to_pixel.iter().enumerate() {
            if self.roles[self.model.labels[row]] == role {
                out.set_index(pixel, true);
            }
        }
        out
    }

    pub fn affected_mask(&self) -> BinaryMask {
        self.union_of(ClusterRole::Affected)
    }

    pub fn unaffected_mask(&self) -> BinaryMask {
        self.union_of(ClusterRole::Unaffected)
    }

    pub fn low_contrast(&self) -> bool {
        self.flags.contains(&Flag::LowContrast)
    }
}

/// Runs background removal and then [`segment_foreground`].
pub fn segment_leaf(img: &RgbImage, opts: &SegmentOptions) -> Result<SegmentationResult, PlanimetryError> {
    let foreground = remove_background(img, &opts.background)?;
    segment_foreground(img, foreground, opts)
}

/// Clusters the a*b* colors of the `foreground` pixels.
///
/// The cluster with the largest mean a* is marked affected and the one with
/// the smallest unaffected. With k > 2 the clusters in between go by the
/// sign of their mean a*: reddish (>= 0) counts as affected, greenish as
/// unaffected.
pub fn segment_foreground(
    img: &RgbImage,
    foreground: BinaryMask,
    opts: &SegmentOptions,
) -> Result<SegmentationResult, PlanimetryError> {
    let k = opts.kmeans.k;
    if k < 2 {
        return Err(PlanimetryError::InvalidK(k));
    }
    let matrix = image_to_ab_matrix(img, Some(&foreground))?;
    if matrix.is_empty() {
        return Err(PlanimetryError::EmptyForeground);
    }
    let model = kmeans_fit(&matrix.features, &opts.kmeans)?;

    // cluster means in raw a*b* units, independent of standardization
    let mut sums = vec![[0.0f64; 2]; k];
    let mut sizes = vec![0usize; k];
    for (row, &label) in model.labels.iter().enumerate() {
        let f = matrix.features.row(row);
        sums[label][0] += f[0];
        sums[label][1] += f[1];
        sizes[label] += 1;
    }
    let centroids_ab: Vec<[f64; 2]> = sums
        .iter()
        .zip(&sizes)
        .map(|(s, &n)| {
            let n = n.max(1) as f64;
            [s[0] / n, s[1] / n]
        })
        .collect();

    let by_a = |a: &usize, b: &usize| {
        centroids_ab[*a][0]
            .total_cmp(&centroids_ab[*b][0])
            .then(a.cmp(b))
    };
    let affected = (0..k).max_by(by_a).expect("k >= 2");
    let unaffected = (0..k).min_by(by_a).expect("k >= 2");
    let roles: Vec<ClusterRole> = (0..k)
        .map(|j| {
            if j == affected {
                ClusterRole::Affected
            } else if j == unaffected || centroids_ab[j][0] < 0.0 {
                ClusterRole::Unaffected
            } else {
                ClusterRole::Affected
            }
        })
        .collect();

    let mut flags = Vec::new();
    let separation = squared_distance(&centroids_ab[affected], &centroids_ab[unaffected]).sqrt();
    if separation < opts.low_contrast_distance || centroids_ab[affected][0] < 0.0 {
        flags.push(Flag::LowContrast);
    }

    let (w, h) = (img.width(), img.height());
    let mut cluster_masks = vec![BinaryMask::filled(w, h, false)?; k];
    for (row, &pixel) in matrix.row_to_pixel.iter().enumerate() {
        cluster_masks[model.labels[row]].set_index(pixel, true);
    }

    Ok(SegmentationResult {
        background: foreground.complement(),
        foreground,
        cluster_masks,
        roles,
        centroids_ab,
        model,
        row_to_pixel: matrix.row_to_pixel,
        flags,
    })
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaMm2 {
    pub leaf: f64,
    pub unaffected: f64,
    pub affected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanimetryReport {
    /// Unaffected leaf pixels.
    pub wp: u64,
    /// Affected (lesion) pixels.
    pub wp1: u64,
    /// `wp + wp1`.
    pub tp: u64,
    pub damage_percent: f64,
    pub scale_mm2_per_px: Option<f64>,
    pub area_mm2: Option<AreaMm2>,
}

pub fn planimetry_report(wp: u64, wp1: u64, scale_mm2_per_px: Option<f64>) -> Result<PlanimetryReport, PlanimetryError> {
    let tp = wp + wp1;
    if tp == 0 {
        return Err(PlanimetryError::EmptyLeaf);
    }
    if let Some(s) = scale_mm2_per_px {
        if !s.is_finite() || s <= 0.0 {
            return Err(PlanimetryError::InvalidScale(s));
        }
    }
    Ok(PlanimetryReport {
        wp,
        wp1,
        tp,
        damage_percent: 100.0 * wp1 as f64 / tp as f64,
        scale_mm2_per_px,
        area_mm2: scale_mm2_per_px.map(|s| AreaMm2 {
            leaf: tp as f64 * s,
            unaffected: wp as f64 * s,
            affected: wp1 as f64 * s,
        }),
    })
}

// ---------------------------------------------------------------------------
// Grid method
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridEstimate {
    pub cell_px: u32,
    pub covered_cells: u64,
    pub area_px: u64,
}

/// Foreground count of every `cell_px x cell_px` cell, row-major over the
/// cell grid anchored at the origin.
fn cell_counts(mask: &BinaryMask, cell_px: u32) -> Vec<u64> {
    assert!(cell_px >= 1, "cell_px must be >= 1");
    let c = cell_px as usize;
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let cols = w.div_ceil(c);
    let mut counts = vec![0u64; cols * h.div_ceil(c)];
    for (i, &v) in mask.as_slice().iter().enumerate() {
        if v {
            let (x, y) = (i % w, i / w);
            counts[(y / c) * cols + x / c] += 1;
        }
    }
    counts
}

/// Graph-paper area estimate: a cell counts as leaf when strictly more than
/// half of its nominal `cell_px²` area is foreground. Partial cells at the
/// right and bottom edges are still judged against the full nominal area.
///
/// # Panics
///
/// If `cell_px` is 0.
pub fn grid_area(mask: &BinaryMask, cell_px: u32) -> GridEstimate {
    let nominal = cell_px as u64 * cell_px as u64;
    let covered_cells = cell_counts(mask, cell_px)
        .into_iter()
        .filter(|&n| 2 * n > nominal)
        .count() as u64;
    GridEstimate {
        cell_px,
        covered_cells,
        area_px: covered_cells * nominal,
    }
}

/// Cells that are neither empty nor completely covered.
pub fn boundary_cells(mask: &BinaryMask, cell_px: u32) -> u64 {
    let nominal = cell_px as u64 * cell_px as u64;
    cell_counts(mask, cell_px)
        .into_iter()
        .filter(|&n| n > 0 && n < nominal)
        .count() as u64
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub segment: SegmentOptions,
    pub grid_cell_px: u32,
    pub scale_mm2_per_px: Option<f64>,
    /// Fixed grayscale threshold; Otsu when `None`.
    pub threshold: Option<u8>,
    /// Count a low-contrast leaf as entirely unaffected instead of trusting
    /// an arbitrary split of healthy tissue.
    pub honor_low_contrast: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            segment: SegmentOptions::default(),
            grid_cell_px: 4,
            scale_mm2_per_px: None,
            threshold: None,
            honor_low_contrast: true,
        }
    }
}

/// Leaf area from plain grayscale thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binarization {
    pub threshold: u8,
    /// Whether the mask was inverted because the background is the bright
    /// side of the threshold.
    pub inverted: bool,
    pub leaf_px: u64,
}

/// Grayscale -> threshold leaf mask, oriented so the border is background.
pub fn grayscale_leaf_mask(img: &RgbImage, threshold: Option<u8>) -> (BinaryMask, Binarization) {
    let gray = to_grayscale(img);
    let threshold = match threshold {
        Some(t) => t,
        None => match otsu_threshold(&gray) {
            Ok(t) => t,
            Err(ImagingError::DegenerateHistogram(level)) => level,
            Err(e) => unreachable!("otsu only fails on degenerate histograms: {e}"),
        },
    };
    let mut mask = binarize(&gray, threshold);
    let border = border_indices(img.width(), img.height());
    let bright_border = border.iter().filter(|&&i| mask.as_slice()[i]).count() * 2 > border.len();
    if bright_border {
        mask = mask.complement();
    }
    let leaf_px = count_white(&mask);
    (
        mask,
        Binarization {
            threshold,
            inverted: bright_border,
            leaf_px,
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub width: u32,
    pub height: u32,
    pub report: PlanimetryReport,
    pub segmentation: SegmentationResult,
    /// Grid estimate of the whole leaf.
    pub leaf_grid: GridEstimate,
    /// Grid estimate of each cluster mask.
    pub cluster_grids: Vec<GridEstimate>,
    pub binarization: Binarization,
    /// Set when a low-contrast result was reported as lesion-free.
    pub lesions_suppressed: bool,
}

impl Analysis {
    /// Pixels counted in `wp1`.
    pub fn affected_mask(&self) -> BinaryMask {
        if self.lesions_suppressed {
            BinaryMask::filled(self.width, self.height, false).expect("non-zero dimensions")
        } else {
            self.segmentation.affected_mask()
        }
    }
}

pub fn analyze(img: &RgbImage, cfg: &PipelineConfig) -> Result<Analysis, AnalysisError> {
    if cfg.grid_cell_px == 0 {
        return Err(AnalysisError::new(Stage::Report, PlanimetryError::InvalidCellSize));
    }
    let foreground =
        remove_background(img, &cfg.segment.background).map_err(|e| AnalysisError::new(Stage::Background, e))?;
    let segmentation =
        segment_foreground(img, foreground, &cfg.segment).map_err(|e| AnalysisError::new(Stage::Segment, e))?;

    let lesions_suppressed = cfg.honor_low_contrast && segmentation.low_contrast();
    let mut wp = 0;
    let mut wp1 = 0;
    for (mask, role) in segmentation.cluster_masks.iter().zip(&segmentation.roles) {
        match role {
            ClusterRole::Affected if !lesions_suppressed => wp1 += count_white(mask),
            ClusterRole::Unaffected | ClusterRole::Affected => wp += count_white(mask),
            ClusterRole::Background => {}
        }
    }
    let report =
        planimetry_report(wp, wp1, cfg.scale_mm2_per_px).map_err(|e| AnalysisError::new(Stage::Report, e))?;
    let leaf_grid = grid_area(&segmentation.foreground, cfg.grid_cell_px);
    let cluster_grids = segmentation
        .cluster_masks
        .iter()
        .map(|m| grid_area(m, cfg.grid_cell_px))
        .collect();
    let (_, binarization) = grayscale_leaf_mask(img, cfg.threshold);
    Ok(Analysis {
        width: img.width(),
        height: img.height(),
        report,
        segmentation,
        leaf_grid,
        cluster_grids,
        binarization,
        lesions_suppressed,
    })
}

/// Decodes and analyzes an encoded PNG/JPEG.
pub fn analyze_bytes(bytes: &[u8], cfg: &PipelineConfig) -> Result<Analysis, AnalysisError> {
    let img = decode_image(bytes).map_err(|e| AnalysisError::new(Stage::Decode, e))?;
    analyze(&img, cfg)
}

/// Copy of `img` with the `highlight` pixels blended 50/50 with pure red.
pub fn overlay(img: &RgbImage, highlight: &BinaryMask) -> Result<RgbImage, ImagingError> {
    highlight.same_shape(img.width(), img.height())?;
    let mut data = img.as_bytes().to_vec();
    for (px, &on) in data.chunks_exact_mut(3).zip(highlight.as_slice()) {
        if on {
            let blend = |c: u8, t: u8| (c as u16 + t as u16).div_ceil(2) as u8;
            px[0] = blend(px[0], 255);
            px[1] = blend(px[1], 0);
            px[2] = blend(px[2], 0);
        }
    }
    RgbImage::new(img.width(), img.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GREEN: [u8; 3] = [60, 140, 60];

    fn square_on(bg: [u8; 3]) -> (RgbImage, BinaryMask) {
        let mut img = RgbImage::filled(30, 30, bg).unwrap();
        let mut truth = BinaryMask::filled(30, 30, false).unwrap();
        for y in 10..20 {
            for x in 10..20 {
                img.set_pixel(x, y, GREEN);
                truth.set(x, y, true);
            }
        }
        (img, truth)
    }

    #[test]
    fn background_removal_black_and_white() {
        for bg in [[0, 0, 0], [255, 255, 255]] {
            let (img, truth) = square_on(bg);
            let mask = remove_background(&img, &BackgroundOptions::default()).unwrap();
            assert_eq!(mask, truth, "background {bg:?}");
        }
        let (img, truth) = square_on([255, 255, 255]);
        let opts = BackgroundOptions {
            mode: BackgroundMode::White,
            ..Default::default()
        };
        assert_eq!(remove_background(&img, &opts).unwrap(), truth);
    }

    #[test]
    fn all_black_has_no_foreground() {
        let img = RgbImage::filled(8, 8, [0, 0, 0]).unwrap();
        assert_eq!(
            remove_background(&img, &BackgroundOptions::default()),
            Err(PlanimetryError::EmptyForeground)
        );
    }

    #[test]
    fn report_examples() {
        let r = planimetry_report(195612, 41246, None).unwrap();
        assert_eq!(r.tp, 236858);
        assert!((r.damage_percent - 17.4138).abs() < 1e-4);
        assert_eq!(planimetry_report(10, 0, None).unwrap().damage_percent, 0.0);
        assert_eq!(planimetry_report(0, 10, None).unwrap().damage_percent, 100.0);
        assert_eq!(planimetry_report(0, 0, None), Err(PlanimetryError::EmptyLeaf));
        assert!(planimetry_report(1, 1, Some(-1.0)).is_err());
        let scaled = planimetry_report(30, 10, Some(0.25)).unwrap();
        assert_eq!(
            scaled.area_mm2,
            Some(AreaMm2 {
                leaf: 10.0,
                unaffected: 7.5,
                affected: 2.5
            })
        );
    }

    #[test]
    fn grid_examples() {
        let full = BinaryMask::filled(10, 10, true).unwrap();
        assert_eq!(
            grid_area(&full, 5),
            GridEstimate {
                cell_px: 5,
                covered_cells: 4,
                area_px: 100
            }
        );
        // top half of a single 4x4 cell: exactly 50% is not enough
        let mut half = BinaryMask::filled(4, 4, false).unwrap();
        for x in 0..4 {
            half.set(x, 0, true);
            half.set(x, 1, true);
        }
        assert_eq!(grid_area(&half, 4).covered_cells, 0);
        half.set(0, 2, true);
        assert_eq!(grid_area(&half, 4).covered_cells, 1);
        assert_eq!(boundary_cells(&half, 4), 1);
    }

    #[test]
    fn partial_edge_cells_use_nominal_area() {
        // 5x5 full mask with 4-px cells: the three edge cells hold 4, 4 and 1
        // pixels out of a nominal 16
        let full = BinaryMask::filled(5, 5, true).unwrap();
        let g = grid_area(&full, 4);
        assert_eq!(g.covered_cells, 1);
        assert_eq!(boundary_cells(&full, 4), 3);
    }

    #[test]
    fn single_color_foreground_splits_into_two_masks() {
        let mut img = RgbImage::filled(7, 7, [0, 0, 0]).unwrap();
        for y in 2..5 {
            for x in 2..5 {
                img.set_pixel(x, y, GREEN);
            }
        }
        let seg = segment_leaf(&img, &SegmentOptions::default()).unwrap();
        assert_eq!(seg.cluster_masks.len(), 2);
        let total: u64 = seg.cluster_masks.iter().map(count_white).sum();
        assert_eq!(total, 9);
        assert!(seg.cluster_masks.iter().all(|m| count_white(m) > 0));
        assert!(seg.low_contrast());
    }

    #[test]
    fn k_below_two_rejected() {
        let (img, _) = square_on([0, 0, 0]);
        let opts = SegmentOptions {
            kmeans: KMeansConfig::default().with_k(1),
            ..Default::default()
        };
        assert_eq!(segment_leaf(&img, &opts), Err(PlanimetryError::InvalidK(1)));
    }

    #[test]
    fn overlay_tints_only_highlighted_pixels() {
        let img = RgbImage::new(2, 1, vec![0, 100, 200, 10, 10, 10]).unwrap();
        let mask = BinaryMask::new(2, 1, vec![true, false]).unwrap();
        let out = overlay(&img, &mask).unwrap();
        assert_eq!(out.as_bytes(), &[128, 50, 100, 10, 10, 10]);
    }

    #[test]
    fn grayscale_leaf_mask_orients_to_border() {
        let (img, truth) = square_on([255, 255, 255]);
        let (mask, b) = grayscale_leaf_mask(&img, None);
        assert!(b.inverted);
        assert_eq!(mask, truth);
        let (img, truth) = square_on([0, 0, 0]);
        let (mask, b) = grayscale_leaf_mask(&img, None);
        assert!(!b.inverted);
        assert_eq!(mask, truth);
    }

    #[test]
    fn errors_carry_stage() {
        let err = analyze_bytes(b"\x89PNG\r\n\x1a\n garbage", &PipelineConfig::default()).unwrap_err();
        assert_eq!(err.stage, Stage::Decode);
        let img = RgbImage::filled(4, 4, [255, 255, 255]).unwrap();
        let err = analyze(&img, &PipelineConfig::default()).unwrap_err();
        assert_eq!(err.stage, Stage::Background);
        assert_eq!(err.source, PlanimetryError::EmptyForeground);
    }
}
