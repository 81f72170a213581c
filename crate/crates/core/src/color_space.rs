//! sRGB to CIELAB conversion and per-frame mean LAB statistics.
//!
//! All conversions use the CIE 1976 L\*a\*b\* definition under the D65
//! reference white, in full `f64` precision (no 8-bit LAB quantization).

use std::sync::LazyLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// D65 reference white.
pub const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

/// Linear sRGB to XYZ (D65).
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

/// Pixels per partial sum in [`frame_mean_lab`]. The block layout is fixed so the
/// reduction order never depends on how many worker threads are available.
const MEAN_BLOCK_PIXELS: usize = 4096;

/// One 8-bit, gamma-encoded sRGB pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Rgb8Pixel {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb8Pixel {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    pub const fn gray(v: u8) -> Self {
        Self { r: v, g: v, b: v }
    }
}

impl From<[u8; 3]> for Rgb8Pixel {
    fn from([r, g, b]: [u8; 3]) -> Self {
        Self { r, g, b }
    }
}

/// A CIELAB coordinate. Used both for single pixels and for per-frame means.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LabTriple {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabTriple {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }

    pub fn is_finite(&self) -> bool {
        self.l.is_finite() && self.a.is_finite() && self.b.is_finite()
    }
}

/// A decoded RGB image. Pixels are stored packed (RGB24, row-major).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    index: usize,
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Frame {
    /// Builds a frame from a packed RGB24 buffer of exactly `3 * width * height` bytes.
    pub fn from_rgb_bytes(index: usize, width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "frame {index} has zero dimension {width}x{height}"
            )));
        }
        let expected = 3 * width as usize * height as usize;
        if data.len() != expected {
            return Err(Error::InvalidFrame(format!(
                "frame {index}: buffer holds {} bytes, {width}x{height} RGB needs {expected}",
                data.len()
            )));
        }
        Ok(Self {
            index,
            width,
            height,
            data,
        })
    }

    pub fn from_pixels(index: usize, width: u32, height: u32, pixels: &[Rgb8Pixel]) -> Result<Self> {
        let data = pixels.iter().flat_map(|p| [p.r, p.g, p.b]).collect();
        Self::from_rgb_bytes(index, width, height, data)
    }

    /// A frame filled with a single color.
    pub fn uniform(index: usize, width: u32, height: u32, color: Rgb8Pixel) -> Result<Self> {
        let n = width as usize * height as usize;
        let data = [color.r, color.g, color.b].repeat(n);
        Self::from_rgb_bytes(index, width, height, data)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn as_rgb_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_rgb_bytes(self) -> Vec<u8> {
        self.data
    }

    /// Row-major pixel iterator.
    pub fn pixels(&self) -> impl ExactSizeIterator<Item = Rgb8Pixel> + '_ {
        self.data.chunks_exact(3).map(|c| Rgb8Pixel::new(c[0], c[1], c[2]))
    }

    pub fn pixel(&self, x: u32, y: u32) -> Option<Rgb8Pixel> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let i = 3 * (y as usize * self.width as usize + x as usize);
        Some(Rgb8Pixel::new(self.data[i], self.data[i + 1], self.data[i + 2]))
    }

    /// Same pixels, new index.
    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }
}

fn srgb_decode(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

// Precomputed with the exact same expression, so results match the formula bit for bit.
static LINEAR_LUT: LazyLock<[f64; 256]> = LazyLock::new(|| {
    let mut lut = [0.0; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = srgb_decode(v as f64 / 255.0);
    }
    lut
});

/// Cube root for positive normal inputs, within 1 ulp of `f64::cbrt` and
/// several times cheaper: a bit-level estimate refined by two Halley steps and
/// one Newton step.
#[inline]
fn cbrt_positive(t: f64) -> f64 {
    let mut y = f64::from_bits(t.to_bits() / 3 + 0x2A9F_7893_782D_A1CE);
    for _ in 0..2 {
        let y3 = y * y * y;
        y *= (y3 + t + t) / (y3 + y3 + t);
    }
    y - (y * y * y - t) / (3.0 * y * y)
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        cbrt_positive(t)
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one 8-bit sRGB pixel to CIELAB (D65).
pub fn srgb_to_lab(p: Rgb8Pixel) -> LabTriple {
    let lut = &*LINEAR_LUT;
    let rgb = [lut[p.r as usize], lut[p.g as usize], lut[p.b as usize]];
    let [x, y, z] = SRGB_TO_XYZ.map(|row| row[0] * rgb[0] + row[1] * rgb[1] + row[2] * rgb[2]);
    let fx = lab_f(x / D65_WHITE[0]);
    let fy = lab_f(y / D65_WHITE[1]);
    let fz = lab_f(z / D65_WHITE[2]);
    LabTriple {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

fn block_deviation_sum(bytes: &[u8], origin: LabTriple) -> [f64; 3] {
    let mut acc = [0.0f64; 3];
    for px in bytes.chunks_exact(3) {
        let lab = srgb_to_lab(Rgb8Pixel::new(px[0], px[1], px[2]));
        acc[0] += lab.l - origin.l;
        acc[1] += lab.a - origin.a;
        acc[2] += lab.b - origin.b;
    }
    acc
}

/// Channel-wise mean of [`srgb_to_lab`] over every pixel of the frame.
///
/// Deviations from the first pixel are summed row-major in fixed-size blocks,
/// so a uniform frame yields exactly its pixel's value. Block partials may be
/// computed on the rayon pool but are always combined in block order, so the
/// result is bit-identical for any thread count.
pub fn frame_mean_lab(frame: &Frame) -> Result<LabTriple> {
    let n = frame.pixel_count();
    if n == 0 {
        return Err(Error::InvalidFrame(format!("frame {} has no pixels", frame.index)));
    }
    let origin = srgb_to_lab(Rgb8Pixel::new(frame.data[0], frame.data[1], frame.data[2]));
    let partials: Vec<[f64; 3]> = frame
        .data
        .par_chunks(3 * MEAN_BLOCK_PIXELS)
        .map(|block| block_deviation_sum(block, origin))
        .collect();
    let mut total = [0.0f64; 3];
    for p in &partials {
        total[0] += p[0];
        total[1] += p[1];
        total[2] += p[2];
    }
    let n = n as f64;
    Ok(LabTriple {
        l: origin.l + total[0] / n,
        a: origin.a + total[1] / n,
        b: origin.b + total[2] / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct transcription of the sRGB and CIELAB definitions, evaluated
    // independently (Python, float64) and frozen here.
    const RED_LAB: [f64; 3] = [53.24079414130722, 80.09245959641109, 67.20319651585301];
    const GREEN_LAB: [f64; 3] = [87.73472235279792, -86.1827164205346, 83.17932050269782];
    const BLUE_LAB: [f64; 3] = [32.29701093285073, 79.18751984512221, -107.8601617541481];
    const BROWN_LAB: [f64; 3] = [34.72481550617178, 25.000032280944275, 31.37206314119704];

    fn close(lab: LabTriple, expected: [f64; 3], tol: f64) -> bool {
        (lab.l - expected[0]).abs() < tol && (lab.a - expected[1]).abs() < tol && (lab.b - expected[2]).abs() < tol
    }

    #[test]
    fn cube_root_within_one_ulp() {
        // Covers every t that reaches the cube-root branch, with margin.
        let mut t = 0.008f64;
        while t < 1.2 {
            let (want, got) = (t.cbrt(), cbrt_positive(t));
            assert!(want.to_bits().abs_diff(got.to_bits()) <= 1, "t = {t}: {want} vs {got}");
            t += 1.3e-5;
        }
    }

    #[test]
    fn black_is_origin() {
        let lab = srgb_to_lab(Rgb8Pixel::gray(0));
        assert!(
            lab.l.abs() < 1e-12 && lab.a.abs() < 1e-12 && lab.b.abs() < 1e-12,
            "{lab:?}"
        );
    }

    #[test]
    fn white_is_reference_white() {
        let lab = srgb_to_lab(Rgb8Pixel::gray(255));
        assert!((lab.l - 100.0).abs() < 1e-4, "{lab:?}");
        assert!(lab.a.abs() < 0.01 && lab.b.abs() < 0.01);
    }

    #[test]
    fn primaries_match_reference_values() {
        assert!(close(srgb_to_lab(Rgb8Pixel::new(255, 0, 0)), RED_LAB, 1e-3));
        assert!(close(srgb_to_lab(Rgb8Pixel::new(0, 255, 0)), GREEN_LAB, 1e-3));
        assert!(close(srgb_to_lab(Rgb8Pixel::new(0, 0, 255)), BLUE_LAB, 1e-3));
        assert!(close(srgb_to_lab(Rgb8Pixel::new(128, 64, 32)), BROWN_LAB, 1e-3));
    }

    #[test]
    fn gray_axis_is_neutral_and_monotone() {
        let mut last = f64::NEG_INFINITY;
        for g in 0..=255u8 {
            let lab = srgb_to_lab(Rgb8Pixel::gray(g));
            assert!(lab.a.abs() < 0.01 && lab.b.abs() < 0.01, "gray {g}: {lab:?}");
            assert!(lab.l > last, "L* not increasing at {g}");
            last = lab.l;
        }
    }

    #[test]
    fn lut_matches_formula() {
        for v in 0..=255u32 {
            assert_eq!(
                LINEAR_LUT[v as usize].to_bits(),
                srgb_decode(v as f64 / 255.0).to_bits()
            );
        }
    }

    #[test]
    fn uniform_frame_mean_equals_pixel() {
        let px = Rgb8Pixel::new(17, 200, 99);
        let f = Frame::uniform(0, 7, 5, px).unwrap();
        assert_eq!(frame_mean_lab(&f).unwrap(), srgb_to_lab(px));
    }

    #[test]
    fn uniform_black_mean_is_zero() {
        let f = Frame::uniform(0, 4, 4, Rgb8Pixel::gray(0)).unwrap();
        let m = frame_mean_lab(&f).unwrap();
        assert!(m.l.abs() < 1e-12 && m.a.abs() < 1e-12 && m.b.abs() < 1e-12);
    }

    #[test]
    fn half_black_half_white_mean() {
        let mut px = vec![Rgb8Pixel::gray(0); 8];
        px.extend(vec![Rgb8Pixel::gray(255); 8]);
        let f = Frame::from_pixels(0, 4, 4, &px).unwrap();
        let m = frame_mean_lab(&f).unwrap();
        let expected = (srgb_to_lab(Rgb8Pixel::gray(0)).l + srgb_to_lab(Rgb8Pixel::gray(255)).l) / 2.0;
        assert!((m.l - expected).abs() < 1e-12);
        assert!((m.l - 50.0).abs() < 1e-5);
        assert!(m.a.abs() < 0.01 && m.b.abs() < 0.01);
    }

    #[test]
    fn four_color_mean_matches_naive_loop() {
        let px = [
            Rgb8Pixel::new(255, 0, 0),
            Rgb8Pixel::new(0, 255, 0),
            Rgb8Pixel::new(0, 0, 255),
            Rgb8Pixel::new(128, 64, 32),
        ];
        let f = Frame::from_pixels(0, 2, 2, &px).unwrap();
        let m = frame_mean_lab(&f).unwrap();
        let mut s = [0.0; 3];
        for p in px {
            let lab = srgb_to_lab(p);
            s[0] += lab.l;
            s[1] += lab.a;
            s[2] += lab.b;
        }
        assert!(close(m, s.map(|v| v / 4.0), 1e-9));
    }

    #[test]
    fn frame_rejects_bad_buffers() {
        assert!(Frame::from_rgb_bytes(0, 0, 4, vec![]).is_err());
        assert!(Frame::from_rgb_bytes(0, 2, 2, vec![0; 11]).is_err());
        assert!(Frame::from_rgb_bytes(0, 2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn pixel_accessor_is_row_major() {
        let px: Vec<Rgb8Pixel> = (0..6).map(|v| Rgb8Pixel::gray(v as u8)).collect();
        let f = Frame::from_pixels(0, 3, 2, &px).unwrap();
        assert_eq!(f.pixel(2, 1), Some(Rgb8Pixel::gray(5)));
        assert_eq!(f.pixel(3, 0), None);
    }
}
