//! Deterministic synthetic videos: runs of uniform colour segments with
//! small per-pixel noise. Used by the bench command and the test suites.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color_space::{Frame, Rgb8Pixel};
use crate::error::{Error, Result};

/// Segment colours. Consecutive entries (cyclically) are more than 30 ΔE00 apart.
pub const PALETTE: [Rgb8Pixel; 10] = [
    Rgb8Pixel::new(200, 40, 40),
    Rgb8Pixel::new(40, 60, 170),
    Rgb8Pixel::new(230, 210, 60),
    Rgb8Pixel::new(30, 110, 50),
    Rgb8Pixel::new(235, 235, 235),
    Rgb8Pixel::new(110, 40, 120),
    Rgb8Pixel::new(60, 190, 210),
    Rgb8Pixel::new(50, 45, 40),
    Rgb8Pixel::new(240, 150, 30),
    Rgb8Pixel::new(120, 120, 130),
];

pub const DEFAULT_SEGMENT_LEN: usize = 20;
pub const DEFAULT_NOISE: u8 = 2;
pub const DEFAULT_SEED: u64 = 0x5eed_f00d;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub width: u32,
    pub height: u32,
    pub frame_count: usize,
    pub segment_len: usize,
    /// Per-channel noise amplitude; each sample is offset by a value in `[-noise, noise]`.
    pub noise: u8,
    pub seed: u64,
}

impl SyntheticVideo {
    pub fn new(frame_count: usize, width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            frame_count,
            segment_len: DEFAULT_SEGMENT_LEN,
            noise: DEFAULT_NOISE,
            seed: DEFAULT_SEED,
        }
    }

    /// `segments` colour runs of `segment_len` frames each.
    pub fn segments(segments: usize, segment_len: usize, width: u32, height: u32) -> Self {
        Self {
            segment_len,
            ..Self::new(segments * segment_len, width, height)
        }
    }

    /// Parses `WxH`.
    pub fn parse_dims(s: &str) -> Result<(u32, u32)> {
        let bad = || Error::Config(format!("expected WIDTHxHEIGHT, got {s:?}"));
        let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let w: u32 = w.trim().parse().map_err(|_| bad())?;
        let h: u32 = h.trim().parse().map_err(|_| bad())?;
        if w == 0 || h == 0 {
            return Err(bad());
        }
        Ok((w, h))
    }

    pub fn segment_color(&self, segment: usize) -> Rgb8Pixel {
        PALETTE[segment % PALETTE.len()]
    }

    /// First frame of every segment after the first.
    pub fn transitions(&self) -> Vec<usize> {
        (1..)
            .map(|k| k * self.segment_len)
            .take_while(|&i| i < self.frame_count)
            .collect()
    }

    pub fn frame(&self, index: usize) -> Result<Frame> {
        let base = self.segment_color(index / self.segment_len.max(1));
        let n = self.width as usize * self.height as usize;
        let mut data = [base.r, base.g, base.b].repeat(n);
        if self.noise > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(index as u64);
            let mut noise = vec![0u8; data.len()];
            rng.fill_bytes(&mut noise);
            let span = 2 * self.noise as u16 + 1;
            for (v, r) in data.iter_mut().zip(noise) {
                let offset = (r as u16 % span) as i16 - self.noise as i16;
                *v = (*v as i16 + offset).clamp(0, 255) as u8;
            }
        }
        Frame::from_rgb_bytes(index, self.width, self.height, data)
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<Frame>> + '_ {
        (0..self.frame_count).map(|i| self.frame(i))
    }

    /// Raw RGB24 bytes of the whole video, frame-major.
    pub fn to_raw_rgb(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(self.frame_count * 3 * self.width as usize * self.height as usize);
        for f in self.iter() {
            out.extend_from_slice(f?.as_rgb_bytes());
        }
        Ok(out)
    }
}
