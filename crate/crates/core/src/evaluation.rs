//! Evaluation protocol: FPS-scaled frame matching accuracy, histogram-based
//! fidelity, compression ratio and detector throughput.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::color_space::Frame;
use crate::error::{Error, Result};
use crate::ingestion::{GroundTruth, Predictions, VideoMeta};
use crate::keyframe_detector::{select_keyframes, DeltaAccumulator, DetectorConfig};

/// Upper bound on the matching window, in seconds.
pub const MAX_TIME_WINDOW: f64 = 10.0;
/// Frame-rate damping constant of the window scaling.
pub const FPS_ALPHA: f64 = 10.0;
pub const MIN_THRESHOLD_FRAMES: i64 = 30;
/// Cap on the window as a fraction of the video length.
pub const MAX_THRESHOLD_FRACTION: f64 = 0.03;

pub const BINS_PER_CHANNEL: usize = 32;
pub const HISTOGRAM_LEN: usize = 3 * BINS_PER_CHANNEL;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub meta: VideoMeta,
    pub actual: Vec<usize>,
    pub predicted: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    /// Matching window in frames; 0 when the record hit the guard path.
    pub threshold_frames: i64,
    pub matched: usize,
    pub accuracy_pct: f64,
}

/// FPS-scaled matching window for a video.
///
/// The raw window `trunc(fps * 10 * fps / (fps + 10))` is clamped to at least
/// 30 frames and then to at most `trunc(0.03 * frame_count)`; when the bounds
/// cross, the upper bound wins.
pub fn matching_threshold(fps: f64, frame_count: usize) -> i64 {
    let time_scaling = MAX_TIME_WINDOW * fps / (fps + FPS_ALPHA);
    let raw = (fps * time_scaling) as i64;
    let max_threshold = (frame_count as f64 * MAX_THRESHOLD_FRACTION) as i64;
    raw.max(MIN_THRESHOLD_FRAMES).min(max_threshold)
}

/// `round(100 * matched / total, 2)` with ties away from zero, in exact
/// integer arithmetic.
pub fn accuracy_pct(matched: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let (m, t) = (matched as u128, total as u128);
    let hundredths = (2 * m * 10_000 + t) / (2 * t);
    hundredths as f64 / 100.0
}

/// Number of predictions lying within `window` frames of some actual index.
pub fn count_matches(actual: &[usize], predicted: &[usize], window: i64) -> usize {
    if window < 0 {
        return 0;
    }
    let mut sorted = actual.to_vec();
    sorted.sort_unstable();
    let window = window as u64;
    predicted
        .iter()
        .filter(|&&p| {
            let at = sorted.partition_point(|&a| a < p);
            let near = |a: usize| (a as u64).abs_diff(p as u64) <= window;
            sorted.get(at).is_some_and(|&a| near(a)) || at.checked_sub(1).is_some_and(|i| near(sorted[i]))
        })
        .count()
}

pub fn score_matching(rec: &EvalRecord) -> MatchReport {
    if rec.predicted.is_empty() || rec.meta.fps == 0.0 || rec.meta.frame_count == 0 {
        return MatchReport {
            threshold_frames: 0,
            matched: 0,
            accuracy_pct: 0.0,
        };
    }
    let threshold_frames = matching_threshold(rec.meta.fps, rec.meta.frame_count);
    let matched = count_matches(&rec.actual, &rec.predicted, threshold_frames);
    MatchReport {
        threshold_frames,
        matched,
        accuracy_pct: accuracy_pct(matched, rec.predicted.len()),
    }
}

/// 32 bins per RGB channel, concatenated R, G, B, L1-normalised.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram {
    bins: [f64; HISTOGRAM_LEN],
}

impl ColorHistogram {
    pub fn bins(&self) -> &[f64; HISTOGRAM_LEN] {
        &self.bins
    }

    pub fn from_bins(bins: [f64; HISTOGRAM_LEN]) -> Self {
        Self { bins }
    }
}

pub fn color_histogram(frame: &Frame) -> ColorHistogram {
    let mut counts = [0u64; HISTOGRAM_LEN];
    for px in frame.as_rgb_bytes().chunks_exact(3) {
        counts[px[0] as usize >> 3] += 1;
        counts[BINS_PER_CHANNEL + (px[1] as usize >> 3)] += 1;
        counts[2 * BINS_PER_CHANNEL + (px[2] as usize >> 3)] += 1;
    }
    let total = 3.0 * frame.pixel_count() as f64;
    ColorHistogram {
        bins: counts.map(|c| c as f64 / total),
    }
}

/// Cosine similarity, clamped to `[0, 1]` (histograms are non-negative).
pub fn cosine_similarity(a: &ColorHistogram, b: &ColorHistogram) -> Result<f64> {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.bins.iter().zip(&b.bins) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityMode {
    /// `1 - max_i min_j (1 - cos(k_i, g_j))`: one minus the directed
    /// Hausdorff cosine distance from predictions to truth.
    #[default]
    Default,
    /// `1 - max_i min_j cos(k_i, g_j)`, evaluated as written. A perfect
    /// prediction scores 0 under this form.
    Literal,
}

impl FidelityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FidelityMode::Default => "default",
            FidelityMode::Literal => "literal",
        }
    }
}

pub fn fidelity_from_histograms(
    predicted: &[ColorHistogram],
    truth: &[ColorHistogram],
    mode: FidelityMode,
) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::FidelityUndefined("no predicted frames"));
    }
    if truth.is_empty() {
        return Err(Error::FidelityUndefined("no ground-truth frames"));
    }
    let term = |sim: f64| match mode {
        FidelityMode::Default => 1.0 - sim,
        FidelityMode::Literal => sim,
    };
    let mut worst = f64::NEG_INFINITY;
    for k in predicted {
        let mut best = f64::INFINITY;
        for g in truth {
            best = best.min(term(cosine_similarity(k, g)?));
        }
        worst = worst.max(best);
    }
    Ok((1.0 - worst).clamp(0.0, 1.0))
}

pub fn fidelity(predicted: &[Frame], truth: &[Frame], mode: FidelityMode) -> Result<f64> {
    let p: Vec<_> = predicted.iter().map(color_histogram).collect();
    let t: Vec<_> = truth.iter().map(color_histogram).collect();
    fidelity_from_histograms(&p, &t, mode)
}

/// Streams a video once, keeping histograms only for the requested indices.
pub fn collect_histograms<I, F>(frames: I, wanted: &BTreeSet<usize>) -> Result<BTreeMap<usize, ColorHistogram>>
where
    I: IntoIterator<Item = Result<F>>,
    F: Borrow<Frame>,
{
    let mut out = BTreeMap::new();
    let Some(&last) = wanted.last() else {
        return Ok(out);
    };
    for frame in frames {
        let frame = frame?;
        let frame = frame.borrow();
        if wanted.contains(&frame.index()) {
            out.insert(frame.index(), color_histogram(frame));
        }
        if frame.index() >= last {
            break;
        }
    }
    if let Some(missing) = wanted.iter().find(|i| !out.contains_key(i)) {
        return Err(Error::Validation(format!("frame {missing} not present in the video")));
    }
    Ok(out)
}

/// Fidelity of `predicted` against `actual` keyframes of one video stream.
pub fn video_fidelity<I, F>(frames: I, predicted: &[usize], actual: &[usize], mode: FidelityMode) -> Result<f64>
where
    I: IntoIterator<Item = Result<F>>,
    F: Borrow<Frame>,
{
    if predicted.is_empty() {
        return Err(Error::FidelityUndefined("no predicted frames"));
    }
    if actual.is_empty() {
        return Err(Error::FidelityUndefined("no ground-truth frames"));
    }
    let wanted: BTreeSet<usize> = predicted.iter().chain(actual).copied().collect();
    let hist = collect_histograms(frames, &wanted)?;
    let pick = |idx: &[usize]| idx.iter().map(|i| hist[i].clone()).collect::<Vec<_>>();
    fidelity_from_histograms(&pick(predicted), &pick(actual), mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compression {
    /// `total / keyframes`; `None` when no keyframes were selected.
    pub ratio: Option<f64>,
    /// Percentage of frames removed, `(1 - keyframes / total) * 100`.
    pub pct: f64,
}

pub fn compression(total_frames: usize, keyframes: usize) -> Result<Compression> {
    if total_frames == 0 {
        return Err(Error::ZeroTotalFrames);
    }
    if keyframes > total_frames {
        return Err(Error::Validation(format!(
            "{keyframes} keyframes exceed {total_frames} total frames"
        )));
    }
    let ratio = (keyframes > 0).then(|| total_frames as f64 / keyframes as f64);
    let pct = (total_frames - keyframes) as f64 * 100.0 / total_frames as f64;
    Ok(Compression { ratio, pct })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub frames: usize,
    pub width: u32,
    pub height: u32,
    pub elapsed_s: f64,
    pub fps: f64,
    pub keyframes: usize,
}

/// Times a detector pass over `frames`, counting only detector work.
///
/// Time spent producing each frame (decoding, generation) is excluded by
/// timing each accumulator step individually.
pub fn measure_throughput<I, F>(frames: I, cfg: &DetectorConfig) -> Result<ThroughputReport>
where
    I: IntoIterator<Item = Result<F>>,
    F: Borrow<Frame>,
{
    cfg.validate()?;
    let mut acc = DeltaAccumulator::new(cfg);
    let mut busy = Duration::ZERO;
    let mut dims = (0, 0);
    for frame in frames {
        let frame = frame?;
        let frame = frame.borrow();
        dims = (frame.width(), frame.height());
        let start = Instant::now();
        acc.push(frame)?;
        busy += start.elapsed();
    }
    let n = acc.frames_seen();
    if n < 2 {
        return Err(Error::Config(format!("need ≥ 2 frames, got {n}")));
    }
    let start = Instant::now();
    let series = acc.finish()?;
    let result = select_keyframes(&series, cfg);
    busy += start.elapsed();
    let elapsed_s = busy.as_secs_f64().max(f64::MIN_POSITIVE);
    Ok(ThroughputReport {
        frames: n,
        width: dims.0,
        height: dims.1,
        elapsed_s,
        fps: n as f64 / elapsed_s,
        keyframes: result.keyframes.len(),
    })
}

/// One scored video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub source_id: String,
    pub accuracy_pct: f64,
    pub fidelity: Option<f64>,
    pub compression_ratio: Option<f64>,
    pub compression_pct: f64,
    pub threshold_frames: i64,
    pub n_predicted: usize,
    pub n_actual: usize,
}

/// Scores one video. `fidelity` comes from [`video_fidelity`] when frames are available.
pub fn evaluate_video(truth: &GroundTruth, predictions: &Predictions, fidelity: Option<f64>) -> Result<VideoReport> {
    let rec = EvalRecord {
        meta: truth.meta.clone(),
        actual: truth.actual.clone(),
        predicted: predictions.predicted_frames.clone(),
    };
    let matching = score_matching(&rec);
    let mut unique = rec.predicted.clone();
    unique.sort_unstable();
    unique.dedup();
    let comp = compression(truth.meta.frame_count, unique.len())?;
    Ok(VideoReport {
        source_id: truth.meta.source_id.clone(),
        accuracy_pct: matching.accuracy_pct,
        fidelity,
        compression_ratio: comp.ratio,
        compression_pct: comp.pct,
        threshold_frames: matching.threshold_frames,
        n_predicted: rec.predicted.len(),
        n_actual: rec.actual.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedVideo {
    pub source_id: String,
    pub reason: String,
}

/// Unweighted per-video means. Fidelity and ratio are averaged over the
/// videos where they are defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub videos: usize,
    pub mean_accuracy_pct: Option<f64>,
    pub mean_fidelity: Option<f64>,
    pub mean_compression_ratio: Option<f64>,
    pub mean_compression_pct: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize(rows: &[VideoReport]) -> CorpusSummary {
    CorpusSummary {
        videos: rows.len(),
        mean_accuracy_pct: mean(rows.iter().map(|r| r.accuracy_pct)),
        mean_fidelity: mean(rows.iter().filter_map(|r| r.fidelity)),
        mean_compression_ratio: mean(rows.iter().filter_map(|r| r.compression_ratio)),
        mean_compression_pct: mean(rows.iter().map(|r| r.compression_pct)),
    }
}

/// Writes the per-video report CSV. Undefined values are empty cells.
pub fn write_report_csv<W: Write>(rows: &[VideoReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record([
            "source_id",
            "accuracy_pct",
            "fidelity",
            "compression_ratio",
            "compression_pct",
            "threshold_frames",
            "n_predicted",
            "n_actual",
        ])
        .map_err(|e| Error::Validation(e.to_string()))?;
    }
    for row in rows {
        w.serialize(row).map_err(|e| Error::Validation(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<report>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color_space::Rgb8Pixel;

    fn rec(fps: f64, frame_count: usize, actual: &[usize], predicted: &[usize]) -> EvalRecord {
        EvalRecord {
            meta: VideoMeta {
                source_id: "v".into(),
                fps,
                frame_count,
            },
            actual: actual.to_vec(),
            predicted: predicted.to_vec(),
        }
    }

    #[test]
    fn threshold_hand_traces() {
        assert_eq!(matching_threshold(30.0, 10_000), 225);
        assert_eq!(matching_threshold(30.0, 500), 15);
        assert_eq!(matching_threshold(60.0, 100_000), 514);
        // Short clip: raw window below 30 frames is lifted to the floor.
        assert_eq!(matching_threshold(1.0, 10_000), 30);
        assert_eq!(matching_threshold(25.0, 33), 0);
        assert_eq!(matching_threshold(25.0, 34), 1);
    }

    #[test]
    fn guard_paths() {
        assert_eq!(score_matching(&rec(30.0, 100, &[1], &[])).accuracy_pct, 0.0);
        assert_eq!(score_matching(&rec(0.0, 100, &[1], &[1])).accuracy_pct, 0.0);
        assert_eq!(score_matching(&rec(30.0, 0, &[], &[1])).accuracy_pct, 0.0);
    }

    #[test]
    fn scoring_examples() {
        let r = score_matching(&rec(30.0, 10_000, &[200], &[100]));
        assert_eq!((r.threshold_frames, r.matched, r.accuracy_pct), (225, 1, 100.0));
        let r = score_matching(&rec(30.0, 10_000, &[200], &[100, 9000]));
        assert_eq!((r.matched, r.accuracy_pct), (1, 50.0));
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(accuracy_pct(2, 3), 66.67);
        assert_eq!(accuracy_pct(1, 3), 33.33);
        // 1/8 = 12.5% exactly; 1/16 = 6.25%; 1/32 = 3.125% -> 3.13
        assert_eq!(accuracy_pct(1, 32), 3.13);
        assert_eq!(accuracy_pct(1, 160), 0.63);
        assert_eq!(accuracy_pct(0, 7), 0.0);
    }

    #[test]
    fn histograms() {
        let black = color_histogram(&Frame::uniform(0, 3, 3, Rgb8Pixel::gray(0)).unwrap());
        let white = color_histogram(&Frame::uniform(0, 3, 3, Rgb8Pixel::gray(255)).unwrap());
        for c in 0..3 {
            assert!((black.bins()[c * BINS_PER_CHANNEL] - 1.0 / 3.0).abs() < 1e-15);
            assert!((white.bins()[c * BINS_PER_CHANNEL + 31] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(cosine_similarity(&black, &white).unwrap(), 0.0);
        assert!((cosine_similarity(&black, &black).unwrap() - 1.0).abs() < 1e-15);
        let edge = color_histogram(&Frame::uniform(0, 1, 1, Rgb8Pixel::new(7, 8, 15)).unwrap());
        assert!(edge.bins()[0] > 0.0 && edge.bins()[33] > 0.0 && edge.bins()[65] > 0.0);
    }

    #[test]
    fn zero_vector_rejected() {
        let z = ColorHistogram::from_bins([0.0; HISTOGRAM_LEN]);
        let mut b = [0.0; HISTOGRAM_LEN];
        b[0] = 1.0;
        assert!(matches!(
            cosine_similarity(&z, &ColorHistogram::from_bins(b)),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn fidelity_modes() {
        let black = Frame::uniform(0, 2, 2, Rgb8Pixel::gray(0)).unwrap();
        let white = Frame::uniform(0, 2, 2, Rgb8Pixel::gray(255)).unwrap();
        let same = std::slice::from_ref(&black);
        assert!((fidelity(same, same, FidelityMode::Default).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(same, same, FidelityMode::Literal).unwrap().abs() < 1e-12);
        assert_eq!(fidelity(same, &[white], FidelityMode::Default).unwrap(), 0.0);
        assert!(matches!(
            fidelity(&[], same, FidelityMode::Default),
            Err(Error::FidelityUndefined(_))
        ));
    }

    #[test]
    fn compression_examples() {
        let c = compression(1000, 10).unwrap();
        assert_eq!((c.ratio, c.pct), (Some(100.0), 99.0));
        let c = compression(1000, 1000).unwrap();
        assert_eq!((c.ratio, c.pct), (Some(1.0), 0.0));
        let c = compression(200, 1).unwrap();
        assert_eq!((c.ratio, c.pct), (Some(200.0), 99.5));
        let c = compression(200, 0).unwrap();
        assert_eq!((c.ratio, c.pct), (None, 100.0));
        assert!(matches!(compression(0, 0), Err(Error::ZeroTotalFrames)));
        assert!(compression(5, 6).is_err());
    }

    #[test]
    fn throughput_needs_two_frames() {
        let one = [Frame::uniform(0, 2, 2, Rgb8Pixel::gray(0))];
        let err = measure_throughput(one, &DetectorConfig::default()).unwrap_err();
        assert!(err.to_string().contains("need ≥ 2 frames"));
    }

    #[test]
    fn histograms_for_missing_frames() {
        let frames = (0..3).map(|i| Frame::uniform(i, 2, 2, Rgb8Pixel::gray(i as u8)));
        let wanted: BTreeSet<usize> = [1, 5].into_iter().collect();
        assert!(collect_histograms(frames, &wanted).is_err());
    }

    #[test]
    fn corpus_summary_is_unweighted() {
        let row = |id: &str, acc: f64, fid: Option<f64>| VideoReport {
            source_id: id.into(),
            accuracy_pct: acc,
            fidelity: fid,
            compression_ratio: Some(100.0),
            compression_pct: 99.0,
            threshold_frames: 30,
            n_predicted: 1,
            n_actual: 1,
        };
        let s = summarize(&[row("a", 100.0, Some(0.5)), row("b", 50.0, None)]);
        assert_eq!(s.videos, 2);
        assert_eq!(s.mean_accuracy_pct, Some(75.0));
        assert_eq!(s.mean_fidelity, Some(0.5));
        assert_eq!(summarize(&[]).mean_accuracy_pct, None);
    }
}
