//! Synthetic leaf photographs with known ground truth.
//!
//! A green ellipse on a plain white or black field, with brown disks as
//! lesions. The generator records which pixels are leaf and which are lesion
//! so that segmentation output can be scored exactly.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::imaging::{count_white, BinaryMask, RgbImage};

pub const LEAF_GREEN: [u8; 3] = [60, 140, 60];
pub const LESION_BROWN: [u8; 3] = [150, 110, 40];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backdrop {
    White,
    Black,
}

impl Backdrop {
    pub fn rgb(&self) -> [u8; 3] {
        match self {
            Backdrop::White => [255, 255, 255],
            Backdrop::Black => [0, 0, 0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafSpec {
    pub width: u32,
    pub height: u32,
    pub backdrop: Backdrop,
    pub leaf_rgb: [u8; 3],
    pub lesion_rgb: [u8; 3],
    /// Target share of leaf pixels covered by lesions, in [0, 0.5].
    pub lesion_fraction: f64,
    /// Lesions are spread along the major axis of the leaf.
    pub lesion_count: usize,
    /// Per-channel uniform noise amplitude.
    pub noise: u8,
    pub seed: u64,
}

impl Default for LeafSpec {
    fn default() -> Self {
        Self {
            width: 200,
            height: 150,
            backdrop: Backdrop::White,
            leaf_rgb: LEAF_GREEN,
            lesion_rgb: LESION_BROWN,
            lesion_fraction: 0.2,
            lesion_count: 3,
            noise: 0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLeaf {
    pub image: RgbImage,
    /// Every leaf pixel, lesions included.
    pub leaf: BinaryMask,
    pub lesions: BinaryMask,
}

impl SyntheticLeaf {
    pub fn leaf_px(&self) -> u64 {
        count_white(&self.leaf)
    }

    pub fn lesion_px(&self) -> u64 {
        count_white(&self.lesions)
    }

    /// Ground-truth damage percentage.
    pub fn damage_percent(&self) -> f64 {
        100.0 * self.lesion_px() as f64 / self.leaf_px() as f64
    }

    pub fn healthy(&self) -> BinaryMask {
        let data = self
            .leaf
            .as_slice()
            .iter()
            .zip(self.lesions.as_slice())
            .map(|(&l, &d)| l && !d)
            .collect();
        BinaryMask::new(self.leaf.width(), self.leaf.height(), data).expect("same shape")
    }
}

struct Geometry {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
}

impl Geometry {
    fn of(spec: &LeafSpec) -> Self {
        Self {
            cx: spec.width as f64 / 2.0,
            cy: spec.height as f64 / 2.0,
            rx: spec.width as f64 * 0.4,
            ry: spec.height as f64 * 0.3,
        }
    }

    fn in_leaf(&self, x: f64, y: f64) -> bool {
        let dx = (x - self.cx) / self.rx;
        let dy = (y - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }

    fn lesion_centers(&self, count: usize) -> Vec<(f64, f64)> {
        (0..count)
            .map(|i| {
                let t = (i as f64 + 0.5) / count as f64 - 0.5;
                (self.cx + t * 1.5 * self.rx, self.cy)
            })
            .collect()
    }
}

fn leaf_mask(spec: &LeafSpec, geo: &Geometry) -> BinaryMask {
    let data = (0..spec.height)
        .flat_map(|y| (0..spec.width).map(move |x| (x, y)))
        .map(|(x, y)| geo.in_leaf(x as f64 + 0.5, y as f64 + 0.5))
        .collect();
    BinaryMask::new(spec.width, spec.height, data).expect("non-zero size")
}

/// Renders a leaf whose lesions cover exactly `round(lesion_fraction * leaf_px)`
/// pixels: the leaf pixels nearest to the lesion centers, so each lesion is a
/// rasterized disk up to ties on its rim.
pub fn generate_leaf(spec: &LeafSpec) -> SyntheticLeaf {
    let geo = Geometry::of(spec);
    let leaf = leaf_mask(spec, &geo);
    let mut lesions = BinaryMask::filled(spec.width, spec.height, false).expect("non-zero size");
    if spec.lesion_count > 0 {
        let centers = geo.lesion_centers(spec.lesion_count);
        let w = spec.width as usize;
        let mut ranked: Vec<(f64, usize)> = (0..leaf.len())
            .filter(|&i| leaf.as_slice()[i])
            .map(|i| {
                let (px, py) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
                let d = centers
                    .iter()
                    .map(|(cx, cy)| (px - cx).powi(2) + (py - cy).powi(2))
                    .fold(f64::INFINITY, f64::min);
                (d, i)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let target = (spec.lesion_fraction.clamp(0.0, 1.0) * ranked.len() as f64).round() as usize;
        for &(_, i) in &ranked[..target] {
            lesions.set_index(i, true);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = spec.noise as i16;
    let mut data = Vec::with_capacity(leaf.len() * 3);
    for i in 0..leaf.len() {
        let base = if lesions.as_slice()[i] {
            spec.lesion_rgb
        } else if leaf.as_slice()[i] {
            spec.leaf_rgb
        } else {
            spec.backdrop.rgb()
        };
        for c in base {
            // drawn for every pixel so leaf colors do not depend on the backdrop
            let jitter = if noise > 0 { rng.random_range(-noise..=noise) } else { 0 };
            data.push((c as i16 + jitter).clamp(0, 255) as u8);
        }
    }
    SyntheticLeaf {
        image: RgbImage::new(spec.width, spec.height, data).expect("buffer sized from spec"),
        leaf,
        lesions,
    }
}

/// Filled disk mask; a pixel is inside when its center is within `radius`.
pub fn disk_mask(width: u32, height: u32, cx: f64, cy: f64, radius: f64) -> BinaryMask {
    let data = (0..height)
        .flat_map(|y| (0..width).map(move |x| (x, y)))
        .map(|(x, y)| {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            dx * dx + dy * dy <= radius * radius
        })
        .collect();
    BinaryMask::new(width, height, data).expect("non-zero size")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureFormat {
    Png,
    Jpeg,
}

/// Sidecar written next to each fixture image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub file: String,
    pub width: u32,
    pub height: u32,
    pub backdrop: Backdrop,
    pub leaf_px: u64,
    pub lesion_px: u64,
    pub damage_percent: f64,
}

/// Writes `<stem>.png|jpg` and `<stem>.manifest.json` into `dir`, returning
/// the image path.
pub fn write_fixture(
    dir: &Path,
    stem: &str,
    spec: &LeafSpec,
    format: FixtureFormat,
) -> io::Result<PathBuf> {
    let leaf = generate_leaf(spec);
    let (bytes, ext) = match format {
        FixtureFormat::Png => (leaf.image.encode_png(), "png"),
        FixtureFormat::Jpeg => (leaf.image.encode_jpeg(), "jpg"),
    };
    let bytes = bytes.map_err(io::Error::other)?;
    let file = format!("{stem}.{ext}");
    let path = dir.join(&file);
    fs::write(&path, bytes)?;
    let manifest = FixtureManifest {
        file,
        width: spec.width,
        height: spec.height,
        backdrop: spec.backdrop,
        leaf_px: leaf.leaf_px(),
        lesion_px: leaf.lesion_px(),
        damage_percent: leaf.damage_percent(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    fs::write(dir.join(format!("{stem}.manifest.json")), json)?;
    Ok(path)
}

pub fn read_manifest(image_path: &Path) -> io::Result<FixtureManifest> {
    let stem = image_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "fixture path has no stem"))?;
    let text = fs::read_to_string(image_path.with_file_name(format!("{stem}.manifest.json")))?;
    serde_json::from_str(&text).map_err(io::Error::other)
}
