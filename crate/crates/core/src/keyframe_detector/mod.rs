//! Consecutive-frame ΔE00 series, JND gating and the adaptive `μ + k·σ`
//! threshold that selects keyframes.

mod trace;

use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use crate::color_space::{frame_mean_lab, Frame, LabTriple};
use crate::error::{Error, Result};
use crate::perceptual_metric::{ciede2000, DeltaE};

pub use trace::{parse_delta_trace, write_delta_trace, DeltaTrace, TraceRow};

/// Default just-noticeable difference in ΔE00 units.
pub const DEFAULT_JND: f64 = 1.0;

/// Which deltas feed the mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsPopulation {
    /// Every consecutive-frame delta in the video.
    #[default]
    All,
    /// Only deltas at or above the JND threshold.
    JndSurvivors,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub jnd_threshold: f64,
    pub include_first_frame: bool,
    pub sigma_multiplier: f64,
    pub stats_population: StatsPopulation,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            jnd_threshold: DEFAULT_JND,
            include_first_frame: false,
            sigma_multiplier: 1.0,
            stats_population: StatsPopulation::All,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.jnd_threshold.is_finite() && self.jnd_threshold >= 0.0) {
            return Err(Error::Config(format!(
                "jnd threshold must be finite and >= 0, got {}",
                self.jnd_threshold
            )));
        }
        if !(self.sigma_multiplier.is_finite() && self.sigma_multiplier > 0.0) {
            return Err(Error::Config(format!(
                "sigma multiplier must be finite and > 0, got {}",
                self.sigma_multiplier
            )));
        }
        Ok(())
    }
}

/// Ordered ΔE00 values between consecutive frames, with the JND gate applied.
///
/// `deltas[i]` is the difference between frames `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSeries {
    deltas: Vec<DeltaE>,
    jnd_mask: Vec<bool>,
    jnd_threshold: f64,
}

impl DeltaSeries {
    pub fn from_deltas(deltas: Vec<DeltaE>, jnd_threshold: f64) -> Self {
        let jnd_mask = deltas.iter().map(|d| d.value() >= jnd_threshold).collect();
        Self {
            deltas,
            jnd_mask,
            jnd_threshold,
        }
    }

    pub fn deltas(&self) -> &[DeltaE] {
        &self.deltas
    }

    pub fn jnd_mask(&self) -> &[bool] {
        &self.jnd_mask
    }

    pub fn jnd_threshold(&self) -> f64 {
        self.jnd_threshold
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Number of frames the series was built from.
    pub fn frame_count(&self) -> usize {
        self.deltas.len() + 1
    }

    pub fn surviving(&self) -> impl Iterator<Item = f64> + '_ {
        self.deltas
            .iter()
            .zip(&self.jnd_mask)
            .filter(|(_, &keep)| keep)
            .map(|(d, _)| d.value())
    }
}

/// Streaming builder for a [`DeltaSeries`].
///
/// Only the previous frame's mean LAB triple is retained between pushes, so
/// frame buffers can be dropped as soon as they have been pushed.
#[derive(Debug)]
pub struct DeltaAccumulator {
    jnd_threshold: f64,
    prev: Option<LabTriple>,
    next_index: usize,
    deltas: Vec<DeltaE>,
}

impl DeltaAccumulator {
    pub fn new(cfg: &DetectorConfig) -> Self {
        Self {
            jnd_threshold: cfg.jnd_threshold,
            prev: None,
            next_index: 0,
            deltas: Vec::new(),
        }
    }

    /// Adds the next frame. Returns the delta from the previous frame, if any.
    pub fn push(&mut self, frame: &Frame) -> Result<Option<DeltaE>> {
        self.check_index(frame.index())?;
        let mean = frame_mean_lab(frame)?;
        Ok(self.push_mean_unchecked(mean))
    }

    /// Adds a precomputed frame mean.
    pub fn push_mean(&mut self, index: usize, mean: LabTriple) -> Result<Option<DeltaE>> {
        self.check_index(index)?;
        if !mean.is_finite() {
            return Err(Error::InvalidFrame(format!("frame {index} has a non-finite mean")));
        }
        Ok(self.push_mean_unchecked(mean))
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index != self.next_index {
            return Err(Error::FrameGap {
                expected: self.next_index,
                found: index,
            });
        }
        Ok(())
    }

    fn push_mean_unchecked(&mut self, mean: LabTriple) -> Option<DeltaE> {
        self.next_index += 1;
        let delta = self.prev.map(|prev| ciede2000(prev, mean));
        if let Some(d) = delta {
            self.deltas.push(d);
        }
        self.prev = Some(mean);
        delta
    }

    pub fn frames_seen(&self) -> usize {
        self.next_index
    }

    pub fn passes_jnd(&self, delta: DeltaE) -> bool {
        delta.value() >= self.jnd_threshold
    }

    pub fn finish(self) -> Result<DeltaSeries> {
        if self.next_index == 0 {
            return Err(Error::NoFrames);
        }
        Ok(DeltaSeries::from_deltas(self.deltas, self.jnd_threshold))
    }
}

/// Mean and population standard deviation of the thresholding population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveStats {
    pub mu: f64,
    pub sigma: f64,
    /// No delta reached the JND threshold; nothing can be selected.
    pub stable: bool,
}

fn mean_and_population_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
    (mu, var.sqrt())
}

pub fn adaptive_stats(series: &DeltaSeries, population: StatsPopulation) -> AdaptiveStats {
    if !series.jnd_mask.iter().any(|&m| m) {
        return AdaptiveStats {
            mu: 0.0,
            sigma: 0.0,
            stable: true,
        };
    }
    let values: Vec<f64> = match population {
        StatsPopulation::All => series.deltas.iter().map(|d| d.value()).collect(),
        StatsPopulation::JndSurvivors => series.surviving().collect(),
    };
    let (mu, sigma) = mean_and_population_sd(&values);
    AdaptiveStats {
        mu,
        sigma,
        stable: false,
    }
}

/// Selected keyframes together with the statistics that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeResult {
    pub keyframes: Vec<usize>,
    pub mu: f64,
    pub sigma: f64,
    pub threshold: f64,
    pub total_frames: usize,
    pub stable: bool,
}

impl KeyframeResult {
    pub fn is_selected(&self, frame_index: usize) -> bool {
        self.keyframes.binary_search(&frame_index).is_ok()
    }
}

/// Applies the JND gate and the strict `delta > μ + k·σ` rule to a series.
///
/// A selected delta `deltas[i]` marks frame `i + 1` as the keyframe.
pub fn select_keyframes(series: &DeltaSeries, cfg: &DetectorConfig) -> KeyframeResult {
    let stats = adaptive_stats(series, cfg.stats_population);
    let threshold = stats.mu + cfg.sigma_multiplier * stats.sigma;
    let mut keyframes = Vec::new();
    if cfg.include_first_frame {
        keyframes.push(0);
    }
    if !stats.stable {
        keyframes.extend(
            series
                .deltas
                .iter()
                .zip(&series.jnd_mask)
                .enumerate()
                .filter(|(_, (d, &passed))| passed && d.value() > threshold)
                .map(|(i, _)| i + 1),
        );
    }
    KeyframeResult {
        keyframes,
        mu: stats.mu,
        sigma: stats.sigma,
        threshold,
        total_frames: series.frame_count(),
        stable: stats.stable,
    }
}

/// Computes the ΔE00 series over a frame stream.
///
/// The stream must start at index 0 with consecutive indices. Each frame is
/// dropped as soon as its mean has been taken.
pub fn build_delta_series<I, F>(frames: I, cfg: &DetectorConfig) -> Result<DeltaSeries>
where
    I: IntoIterator<Item = Result<F>>,
    F: Borrow<Frame>,
{
    cfg.validate()?;
    let mut acc = DeltaAccumulator::new(cfg);
    for frame in frames {
        acc.push(frame?.borrow())?;
    }
    acc.finish()
}

/// A full detector pass: the series plus the selection made from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub series: DeltaSeries,
    pub result: KeyframeResult,
}

impl Detection {
    pub fn trace(&self) -> DeltaTrace {
        DeltaTrace::new(&self.series, &self.result)
    }
}

pub fn run_detector<I, F>(frames: I, cfg: &DetectorConfig) -> Result<Detection>
where
    I: IntoIterator<Item = Result<F>>,
    F: Borrow<Frame>,
{
    let series = build_delta_series(frames, cfg)?;
    let result = select_keyframes(&series, cfg);
    Ok(Detection { series, result })
}

/// Like [`run_detector`], but hands each frame to `observe` before it is
/// dropped, together with whether it can still be selected: its incoming
/// delta passed the JND gate, or it is frame 0 and `include_first_frame` is set.
///
/// The final selection is always a subset of the frames flagged here.
pub fn run_detector_observed<I, F, O>(frames: I, cfg: &DetectorConfig, mut observe: O) -> Result<Detection>
where
    I: IntoIterator<Item = Result<F>>,
    F: Borrow<Frame>,
    O: FnMut(&Frame, bool) -> Result<()>,
{
    cfg.validate()?;
    let mut acc = DeltaAccumulator::new(cfg);
    for frame in frames {
        let frame = frame?;
        let frame = frame.borrow();
        let candidate = match acc.push(frame)? {
            Some(d) => acc.passes_jnd(d),
            None => cfg.include_first_frame,
        };
        observe(frame, candidate)?;
    }
    let series = acc.finish()?;
    let result = select_keyframes(&series, cfg);
    Ok(Detection { series, result })
}

pub fn detect_keyframes<I, F>(frames: I, cfg: &DetectorConfig) -> Result<KeyframeResult>
where
    I: IntoIterator<Item = Result<F>>,
    F: Borrow<Frame>,
{
    run_detector(frames, cfg).map(|d| d.result)
}
