//! Fixed-range channel histograms and distances between them.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorspace::srgb_to_lab;
use crate::imaging::{BinaryMask, ImagingError, RgbImage};

/// Default a* histogram range.
pub const A_STAR_RANGE: (f64, f64) = (-128.0, 128.0);
pub const DEFAULT_BINS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistogramError {
    #[error("no values to histogram")]
    EmptyInput,
    #[error("histogram has zero total")]
    EmptyHistogram,
    #[error("histograms differ in shape: {0}")]
    ShapeMismatch(String),
    #[error("invalid histogram parameters: {0}")]
    InvalidParameters(String),
    #[error("malformed histogram CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        let lo = self.lo + w * i as f64;
        let hi = if i + 1 == self.counts.len() { self.hi } else { self.lo + w * (i + 1) as f64 };
        (lo, hi)
    }

    /// Unit-sum bin probabilities.
    pub fn normalized(&self) -> Result<Vec<f64>, HistogramError> {
        if self.total == 0 {
            return Err(HistogramError::EmptyHistogram);
        }
        let t = self.total as f64;
        Ok(self.counts.iter().map(|&c| c as f64 / t).collect())
    }

    /// `bin_lo,bin_hi,count` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let (lo, hi) = self.bin_edges(i);
            writeln!(out, "{lo},{hi},{c}").unwrap();
        }
        out
    }

    /// Parses the format written by [`Histogram::to_csv`]. Bins must be
    /// contiguous and of equal width.
    pub fn from_csv(text: &str) -> Result<Self, HistogramError> {
        let mut edges = Vec::new();
        let mut counts = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (n == 0 && line.starts_with("bin_lo")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let err = |reason: &str| HistogramError::Csv {
                line: n + 1,
                reason: reason.to_string(),
            };
            if fields.len() != 3 {
                return Err(err("expected 3 fields"));
            }
            let lo = f64::from_str(fields[0]).map_err(|_| err("bad bin_lo"))?;
            let hi = f64::from_str(fields[1]).map_err(|_| err("bad bin_hi"))?;
            let c = u64::from_str(fields[2]).map_err(|_| err("bad count"))?;
            edges.push((lo, hi));
            counts.push(c);
        }
        let (Some(first), Some(last)) = (edges.first(), edges.last()) else {
            return Err(HistogramError::EmptyInput);
        };
        let (lo, hi) = (first.0, last.1);
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(HistogramError::InvalidParameters("bin range is empty".into()));
        }
        let total = counts.iter().sum();
        let h = Histogram {
            lo,
            hi,
            counts,
            total,
        };
        let tol = 1e-9 * (hi - lo).abs().max(1.0);
        for (i, &(a, b)) in edges.iter().enumerate() {
            let (ea, eb) = h.bin_edges(i);
            if (a - ea).abs() > tol || (b - eb).abs() > tol {
                return Err(HistogramError::Csv {
                    line: i + 2,
                    reason: "bins are not uniform".into(),
                });
            }
        }
        Ok(h)
    }
}

/// Uniform bins over `[lo, hi]`; out-of-range values land in the end bins
/// and `hi` itself belongs to the last bin.
pub fn compute_histogram(
    values: impl IntoIterator<Item = f64>,
    bin_count: usize,
    range: (f64, f64),
) -> Result<Histogram, HistogramError> {
    let (lo, hi) = range;
    if bin_count == 0 {
        return Err(HistogramError::InvalidParameters("bin_count must be >= 1".into()));
    }
    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
        return Err(HistogramError::InvalidParameters(format!("bad range [{lo}, {hi}]")));
    }
    let mut counts = vec![0u64; bin_count];
    let scale = bin_count as f64 / (hi - lo);
    let mut total = 0u64;
    for v in values {
        let pos = ((v - lo) * scale).floor();
        // NaN maps to bin 0 through the saturating cast
        let bin = (pos.max(0.0) as usize).min(bin_count - 1);
        counts[bin] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(HistogramError::EmptyInput);
    }
    Ok(Histogram {
        lo,
        hi,
        counts,
        total,
    })
}

/// Histogram of the a* channel over the pixels selected by `mask`.
pub fn a_star_histogram(
    img: &RgbImage,
    mask: &BinaryMask,
    bin_count: usize,
) -> Result<Histogram, HistogramError> {
    mask.same_shape(img.width(), img.height())?;
    let values = img
        .pixels()
        .zip(mask.as_slice())
        .filter(|(_, &m)| m)
        .map(|(p, _)| srgb_to_lab(p).a);
    compute_histogram(values, bin_count, A_STAR_RANGE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Σ min(p, q); 1 for identical histograms.
    #[default]
    Intersection,
    /// Σ (p − q)² / (p + q); 0 for identical histograms.
    ChiSquare,
    /// sqrt(1 − Σ sqrt(p q)); 0 for identical histograms.
    Bhattacharyya,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Intersection => "intersection",
            Metric::ChiSquare => "chi_square",
            Metric::Bhattacharyya => "bhattacharyya",
        }
    }
}

impl FromStr for Metric {
    type Err = HistogramError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "intersection" => Ok(Metric::Intersection),
            "chi_square" | "chisquare" | "chi2" => Ok(Metric::ChiSquare),
            "bhattacharyya" => Ok(Metric::Bhattacharyya),
            other => Err(HistogramError::InvalidParameters(format!("unknown metric {other:?}"))),
        }
    }
}

pub fn compare_histograms(h1: &Histogram, h2: &Histogram, metric: Metric) -> Result<f64, HistogramError> {
    if h1.bin_count() != h2.bin_count() || h1.lo != h2.lo || h1.hi != h2.hi {
        return Err(HistogramError::ShapeMismatch(format!(
            "{} bins over [{}, {}] vs {} bins over [{}, {}]",
            h1.bin_count(),
            h1.lo,
            h1.hi,
            h2.bin_count(),
            h2.lo,
            h2.hi
        )));
    }
    let p = h1.normalized()?;
    let q = h2.normalized()?;
    let pairs = p.iter().zip(&q);
    Ok(match metric {
        Metric::Intersection => pairs.map(|(a, b)| a.min(*b)).sum(),
        Metric::ChiSquare => pairs
            .map(|(a, b)| {
                let s = a + b;
                if s > 0.0 { (a - b) * (a - b) / s } else { 0.0 }
            })
            .sum(),
        Metric::Bhattacharyya => {
            let bc: f64 = pairs.map(|(a, b)| (a * b).sqrt()).sum();
            (1.0 - bc).max(0.0).sqrt()
        }
    })
}
