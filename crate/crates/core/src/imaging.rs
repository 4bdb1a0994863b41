//! Raster containers and the grayscale / threshold / count stages of the
//! pipeline.
//!
//! Three raster types mirror the three pipeline stages: [`RgbImage`] for the
//! decoded photograph, [`GrayImage`] after luma conversion and
//! [`BinaryMask`] after thresholding. All of them are row-major and carry
//! their own dimensions.

use std::io::Cursor;

use image::{DynamicImage, ImageFormat};
use thiserror::Error;

/// Rec. 601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.2989, 0.5870, 0.1140];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImagingError {
    #[error("unsupported image format (expected PNG or JPEG)")]
    UnsupportedFormat,
    #[error("corrupt image file: {0}")]
    CorruptFile(String),
    #[error("image has a zero dimension")]
    ZeroDimension,
    #[error("buffer length {actual} does not match {width}x{height} raster ({expected} expected)")]
    BadBufferLength {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("histogram is degenerate: every pixel has intensity {0}")]
    DegenerateHistogram(u8),
    #[error("image encoding failed: {0}")]
    Encode(String),
}

fn check_len(width: u32, height: u32, per_pixel: usize, actual: usize) -> Result<(), ImagingError> {
    if width == 0 || height == 0 {
        return Err(ImagingError::ZeroDimension);
    }
    let expected = width as usize * height as usize * per_pixel;
    if expected != actual {
        return Err(ImagingError::BadBufferLength {
            width,
            height,
            expected,
            actual,
        });
    }
    Ok(())
}

/// 8-bit sRGB raster, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImagingError> {
        check_len(width, height, 3, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image filled with a single color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, ImagingError> {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixel_at(y as usize * self.width as usize + x as usize)
    }

    /// Pixel by row-major index.
    pub fn pixel_at(&self, index: usize) -> [u8; 3] {
        let o = index * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = (y as usize * self.width as usize + x as usize) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl ExactSizeIterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImagingError> {
        let buf = image::RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("length checked at construction");
        encode(DynamicImage::ImageRgb8(buf), ImageFormat::Png)
    }

    pub fn encode_jpeg(&self) -> Result<Vec<u8>, ImagingError> {
        let buf = image::RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("length checked at construction");
        encode(DynamicImage::ImageRgb8(buf), ImageFormat::Jpeg)
    }
}

/// 8-bit intensity raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImagingError> {
        check_len(width, height, 1, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    /// Pixel counts per intensity level.
    pub fn level_counts(&self) -> [u64; 256] {
        let mut counts = [0u64; 256];
        for &v in &self.data {
            counts[v as usize] += 1;
        }
        counts
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImagingError> {
        let buf = image::GrayImage::from_raw(self.width, self.height, self.data.clone())
            .expect("length checked at construction");
        encode(DynamicImage::ImageLuma8(buf), ImageFormat::Png)
    }
}

/// Boolean raster; `true` is white / foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, data: Vec<bool>) -> Result<Self, ImagingError> {
        check_len(width, height, 1, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn set_index(&mut self, index: usize, value: bool) {
        self.data[index] = value;
    }

    pub fn same_shape(&self, width: u32, height: u32) -> Result<(), ImagingError> {
        if self.width != width || self.height != height {
            return Err(ImagingError::DimensionMismatch(
                self.width,
                self.height,
                width,
                height,
            ));
        }
        Ok(())
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| !v).collect(),
        }
    }

    /// 0 for black, 255 for white.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| if v { 255 } else { 0 }).collect(),
        }
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, ImagingError> {
        self.to_gray().encode_png()
    }
}

fn encode(img: DynamicImage, format: ImageFormat) -> Result<Vec<u8>, ImagingError> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, format)
        .map_err(|e| ImagingError::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

fn down16(v: u16) -> u8 {
    ((v as u32 + 128) / 257) as u8
}

/// Decodes a PNG or JPEG file into an 8-bit RGB raster.
///
/// Alpha is discarded. 16-bit sources are scaled to 8 bits with rounding
/// division by 257.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage, ImagingError> {
    let format = image::guess_format(bytes).map_err(|_| ImagingError::UnsupportedFormat)?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
        return Err(ImagingError::UnsupportedFormat);
    }
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| match e {
        image::ImageError::Limits(_) | image::ImageError::Decoding(_) | image::ImageError::IoError(_) => {
            ImagingError::CorruptFile(e.to_string())
        }
        image::ImageError::Unsupported(_) => ImagingError::UnsupportedFormat,
        other => ImagingError::CorruptFile(other.to_string()),
    })?;
    let (width, height) = (img.width(), img.height());
    if width == 0 || height == 0 {
        return Err(ImagingError::ZeroDimension);
    }
    let data = match img {
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => img.to_rgb16().into_raw().into_iter().map(down16).collect(),
        other => other.to_rgb8().into_raw(),
    };
    RgbImage::new(width, height, data)
}

/// Luma of one pixel with the Rec. 601 weights, rounded and clamped.
pub fn luma(rgb: [u8; 3]) -> u8 {
    let y = LUMA_WEIGHTS[0] * rgb[0] as f64
        + LUMA_WEIGHTS[1] * rgb[1] as f64
        + LUMA_WEIGHTS[2] * rgb[2] as f64;
    y.round().clamp(0.0, 255.0) as u8
}

pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        data: img.pixels().map(luma).collect(),
    }
}

/// Otsu's threshold: the level `t` maximizing between-class variance of the
/// split `{v <= t}` / `{v > t}`. The lowest maximizing level wins ties.
///
/// Class statistics are accumulated as exact integers, so the variance at a
/// level depends only on the split and not on the accumulation order.
pub fn otsu_threshold(img: &GrayImage) -> Result<u8, ImagingError> {
    let counts = img.level_counts();
    let total: u64 = counts.iter().sum();
    let sum_all: u64 = counts
        .iter()
        .enumerate()
        .map(|(level, &c)| level as u64 * c)
        .sum();

    let mut w0 = 0u64;
    let mut s0 = 0u64;
    let mut best: Option<(u8, f64)> = None;
    for (level, &c) in counts.iter().enumerate() {
        w0 += c;
        s0 += level as u64 * c;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let var = between_class_variance(total, w0, s0, sum_all);
        if best.is_none_or(|(_, b)| var > b) {
            best = Some((level as u8, var));
        }
    }
    match best {
        Some((t, _)) => Ok(t),
        None => Err(ImagingError::DegenerateHistogram(img.data[0])),
    }
}

/// `w0 * w1 * (mu0 - mu1)^2 / N^2` evaluated from integer class sums.
fn between_class_variance(total: u64, w0: u64, s0: u64, sum_all: u64) -> f64 {
    let w1 = total - w0;
    let s1 = sum_all - s0;
    let mu0 = s0 as f64 / w0 as f64;
    let mu1 = s1 as f64 / w1 as f64;
    let p0 = w0 as f64 / total as f64;
    let p1 = w1 as f64 / total as f64;
    p0 * p1 * (mu0 - mu1) * (mu0 - mu1)
}

/// `true` where intensity is strictly above `threshold`.
pub fn binarize(img: &GrayImage, threshold: u8) -> BinaryMask {
    BinaryMask {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| v > threshold).collect(),
    }
}

pub fn count_white(mask: &BinaryMask) -> u64 {
    mask.data.iter().filter(|&&v| v).count() as u64
}

pub fn count_black(mask: &BinaryMask) -> u64 {
    mask.len() as u64 - count_white(mask)
}
