//! sRGB <-> CIELAB (D65, 2° observer).
//!
//! The reference white is derived from the row sums of the sRGB->XYZ matrix
//! so that every neutral gray lands exactly on a* = b* = 0.

use serde::{Deserialize, Serialize};

use crate::clustering::FeatureMatrix;
use crate::imaging::{BinaryMask, ImagingError, RgbImage};

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

const WHITE: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabPixel {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabPixel {
    pub fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }

    /// Distance from the neutral axis in the a*b* plane.
    pub fn chroma(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

fn srgb_to_linear(c: u8) -> f64 {
    let v = c as f64 / 255.0;
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.0031308 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let cube = f * f * f;
    if cube > EPSILON {
        cube
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

pub fn srgb_to_lab(rgb: [u8; 3]) -> LabPixel {
    let lin = rgb.map(srgb_to_linear);
    let mut f = [0.0; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        let xyz = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
        f[i] = lab_f(xyz / WHITE[i]);
    }
    LabPixel {
        l: 116.0 * f[1] - 16.0,
        a: 500.0 * (f[0] - f[1]),
        b: 200.0 * (f[1] - f[2]),
    }
}

/// Inverse of [`srgb_to_lab`]; out-of-gamut channels are clamped.
pub fn lab_to_srgb(lab: LabPixel) -> [u8; 3] {
    let fy = (lab.l + 16.0) / 116.0;
    let fx = fy + lab.a / 500.0;
    let fz = fy - lab.b / 200.0;
    let y = if lab.l > KAPPA * EPSILON {
        fy * fy * fy
    } else {
        lab.l / KAPPA
    };
    let xyz = [lab_f_inv(fx) * WHITE[0], y * WHITE[1], lab_f_inv(fz) * WHITE[2]];
    let mut out = [0u8; 3];
    for (i, row) in XYZ_TO_RGB.iter().enumerate() {
        let lin = row[0] * xyz[0] + row[1] * xyz[1] + row[2] * xyz[2];
        out[i] = (linear_to_srgb(lin) * 255.0).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// (a*, b*) features of a set of pixels plus the pixel each row came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabPixelMatrix {
    pub features: FeatureMatrix,
    /// Row-major pixel index for each feature row.
    pub row_to_pixel: Vec<usize>,
}

impl LabPixelMatrix {
    pub fn len(&self) -> usize {
        self.row_to_pixel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_to_pixel.is_empty()
    }
}

/// Collects the a*b* coordinates of every pixel selected by `include`
/// (all pixels when `None`) in row-major order. Lightness is dropped.
pub fn image_to_ab_matrix(
    img: &RgbImage,
    include: Option<&BinaryMask>,
) -> Result<LabPixelMatrix, ImagingError> {
    if let Some(mask) = include {
        mask.same_shape(img.width(), img.height())?;
    }
    let mut data = Vec::new();
    let mut row_to_pixel = Vec::new();
    for (idx, rgb) in img.pixels().enumerate() {
        if include.is_some_and(|m| !m.as_slice()[idx]) {
            continue;
        }
        let lab = srgb_to_lab(rgb);
        data.push(lab.a);
        data.push(lab.b);
        row_to_pixel.push(idx);
    }
    let features = FeatureMatrix::new(row_to_pixel.len(), 2, data)
        .expect("two columns pushed per row");
    Ok(LabPixelMatrix {
        features,
        row_to_pixel,
    })
}
