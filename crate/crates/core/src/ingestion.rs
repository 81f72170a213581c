//! Frame sources (image sequences, raw RGB24 pipes) and annotation files.
//!
//! Every source is a lazy iterator holding at most one decoded frame; the
//! consumer owns each frame it receives.

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::ops::Deref;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::color_space::Frame;
use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 2] = ["png", "ppm"];

/// Compares file names so that embedded numbers order numerically
/// (`frame2.png` before `frame10.png`).
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut x, mut y) = (a.as_bytes(), b.as_bytes());
    loop {
        match (x.first(), y.first()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(c), Some(d)) if c.is_ascii_digit() && d.is_ascii_digit() => {
                let run_x = x.iter().take_while(|c| c.is_ascii_digit()).count();
                let run_y = y.iter().take_while(|c| c.is_ascii_digit()).count();
                let trim = |s: &[u8]| -> usize { s.iter().take_while(|&&c| c == b'0').count() };
                let (dx, dy) = (&x[..run_x], &y[..run_y]);
                let (dx, dy) = (&dx[trim(dx).min(run_x - 1)..], &dy[trim(dy).min(run_y - 1)..]);
                let ord = dx.len().cmp(&dy.len()).then_with(|| dx.cmp(dy));
                if ord != Ordering::Equal {
                    return ord;
                }
                x = &x[run_x..];
                y = &y[run_y..];
            }
            (Some(c), Some(d)) => {
                if c != d {
                    return c.cmp(d);
                }
                x = &x[1..];
                y = &y[1..];
            }
        }
    }
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

/// Decodes a PNG or binary PPM file into an RGB frame.
pub fn read_image_frame(path: &Path, index: usize) -> Result<Frame> {
    let decode_err = |message: String| Error::Decode {
        path: path.to_owned(),
        message,
    };
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| decode_err(e.to_string()))?.into_rgb8();
    let (w, h) = img.dimensions();
    Frame::from_rgb_bytes(index, w, h, img.into_raw()).map_err(|e| decode_err(e.to_string()))
}

/// Writes a frame as binary PPM (P6, maxval 255).
pub fn write_ppm(frame: &Frame, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write!(out, "P6\n{} {}\n255\n", frame.width(), frame.height())
        .and_then(|_| out.write_all(frame.as_rgb_bytes()))
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Frames decoded one at a time from a directory of PNG/PPM files.
#[derive(Debug)]
pub struct ImageSequence {
    paths: Vec<PathBuf>,
    next: usize,
    first: Option<(PathBuf, (u32, u32))>,
    failed: bool,
}

impl ImageSequence {
    /// Lists `*.png` / `*.ppm` files in `dir`, ordered by [`natural_cmp`] on file name.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_file() && has_image_extension(&path) {
                paths.push(path);
            }
        }
        paths.sort_by(|a, b| {
            let name = |p: &PathBuf| p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            natural_cmp(&name(a), &name(b))
        });
        Self::from_paths(paths)
    }

    /// Uses the given paths in the given order.
    pub fn from_paths(paths: Vec<PathBuf>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::NoFrames);
        }
        Ok(Self {
            paths,
            next: 0,
            first: None,
            failed: false,
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }
}

impl Iterator for ImageSequence {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next >= self.paths.len() {
            return None;
        }
        let index = self.next;
        self.next += 1;
        let path = &self.paths[index];
        let result = read_image_frame(path, index).and_then(|frame| {
            let dims = (frame.width(), frame.height());
            match &self.first {
                None => self.first = Some((path.clone(), dims)),
                Some((first, first_dims)) if *first_dims != dims => {
                    return Err(Error::DimensionMismatch {
                        first: first.clone(),
                        first_dims: *first_dims,
                        second: path.clone(),
                        second_dims: dims,
                    })
                }
                Some(_) => {}
            }
            Ok(frame)
        });
        self.failed = result.is_err();
        Some(result)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.paths.len() - self.next;
        (0, Some(rest))
    }
}

/// Packed RGB24 frames read from a byte stream until EOF.
#[derive(Debug)]
pub struct RawRgbReader<R> {
    source: R,
    width: u32,
    height: u32,
    frame_bytes: usize,
    offset: u64,
    index: usize,
    done: bool,
}

impl<R: Read> RawRgbReader<R> {
    pub fn new(source: R, width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "raw frame dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self {
            source,
            width,
            height,
            frame_bytes: 3 * width as usize * height as usize,
            offset: 0,
            index: 0,
            done: false,
        })
    }

    pub fn bytes_read(&self) -> u64 {
        self.offset
    }

    fn read_frame(&mut self) -> Result<Option<Frame>> {
        let mut buf = vec![0u8; self.frame_bytes];
        let mut filled = 0;
        while filled < buf.len() {
            match self.source.read(&mut buf[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(source) => {
                    return Err(Error::Read {
                        offset: self.offset + filled as u64,
                        source,
                    })
                }
            }
        }
        if filled == 0 {
            return Ok(None);
        }
        if filled < buf.len() {
            return Err(Error::PartialFrame { offset: self.offset });
        }
        self.offset += filled as u64;
        let frame = Frame::from_rgb_bytes(self.index, self.width, self.height, buf)?;
        self.index += 1;
        Ok(Some(frame))
    }
}

impl<R: Read> Iterator for RawRgbReader<R> {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = self.read_frame().transpose();
        if !matches!(item, Some(Ok(_))) {
            self.done = true;
        }
        item
    }
}

/// Counts how many frames handed out through [`FrameTracker::track`] are alive.
#[derive(Debug, Clone, Default)]
pub struct FrameTracker {
    inner: Arc<TrackerCounts>,
}

#[derive(Debug, Default)]
struct TrackerCounts {
    live: AtomicUsize,
    peak: AtomicUsize,
    total: AtomicUsize,
}

impl FrameTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn track<I>(&self, frames: I) -> TrackedFrames<I::IntoIter>
    where
        I: IntoIterator<Item = Result<Frame>>,
    {
        TrackedFrames {
            inner: frames.into_iter(),
            tracker: self.clone(),
        }
    }

    pub fn live(&self) -> usize {
        self.inner.live.load(AtomicOrdering::SeqCst)
    }

    /// Largest number of tracked frames that were alive at the same time.
    pub fn peak(&self) -> usize {
        self.inner.peak.load(AtomicOrdering::SeqCst)
    }

    pub fn total(&self) -> usize {
        self.inner.total.load(AtomicOrdering::SeqCst)
    }

    fn wrap(&self, frame: Frame) -> TrackedFrame {
        let live = self.inner.live.fetch_add(1, AtomicOrdering::SeqCst) + 1;
        self.inner.peak.fetch_max(live, AtomicOrdering::SeqCst);
        self.inner.total.fetch_add(1, AtomicOrdering::SeqCst);
        TrackedFrame {
            frame,
            tracker: self.clone(),
        }
    }
}

pub struct TrackedFrames<I> {
    inner: I,
    tracker: FrameTracker,
}

impl<I: Iterator<Item = Result<Frame>>> Iterator for TrackedFrames<I> {
    type Item = Result<TrackedFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        self.inner.next().map(|r| r.map(|frame| self.tracker.wrap(frame)))
    }
}

/// A frame whose lifetime is recorded by a [`FrameTracker`].
#[derive(Debug)]
pub struct TrackedFrame {
    frame: Frame,
    tracker: FrameTracker,
}

impl Deref for TrackedFrame {
    type Target = Frame;

    fn deref(&self) -> &Frame {
        &self.frame
    }
}

impl Borrow<Frame> for TrackedFrame {
    fn borrow(&self) -> &Frame {
        &self.frame
    }
}

impl Drop for TrackedFrame {
    fn drop(&mut self) {
        self.tracker.inner.live.fetch_sub(1, AtomicOrdering::SeqCst);
    }
}

/// Per-video metadata needed by the matching protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub source_id: String,
    /// Native frame rate. Zero is allowed and scores as 0 accuracy.
    pub fps: f64,
    pub frame_count: usize,
}

/// Validated ground-truth keyframes for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub meta: VideoMeta,
    /// Strictly increasing, all `< frame_count`.
    pub actual: Vec<usize>,
}

/// On-disk ground-truth schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthFile {
    pub source_id: String,
    pub fps: f64,
    pub frame_count: usize,
    pub actual_frames: Vec<usize>,
}

impl GroundTruth {
    pub fn new(meta: VideoMeta, mut actual: Vec<usize>) -> Result<Self> {
        if !(meta.fps.is_finite() && meta.fps >= 0.0) {
            return Err(Error::Validation(format!(
                "{}: fps must be finite and >= 0, got {}",
                meta.source_id, meta.fps
            )));
        }
        actual.sort_unstable();
        actual.dedup();
        if let Some(&bad) = actual.iter().find(|&&i| i >= meta.frame_count) {
            return Err(Error::Validation(format!(
                "{}: keyframe index {bad} out of range for frame_count {}",
                meta.source_id, meta.frame_count
            )));
        }
        Ok(Self { meta, actual })
    }

    pub fn from_file(file: GroundTruthFile) -> Result<Self> {
        Self::new(
            VideoMeta {
                source_id: file.source_id,
                fps: file.fps,
                frame_count: file.frame_count,
            },
            file.actual_frames,
        )
    }

    pub fn to_file(&self) -> GroundTruthFile {
        GroundTruthFile {
            source_id: self.meta.source_id.clone(),
            fps: self.meta.fps,
            frame_count: self.meta.frame_count,
            actual_frames: self.actual.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("ground truth serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

fn schema_err(context: &str, e: serde_json::Error) -> Error {
    Error::Schema {
        context: context.to_owned(),
        message: e.to_string(),
    }
}

pub fn parse_ground_truth(json: &str, context: &str) -> Result<GroundTruth> {
    let file: GroundTruthFile = serde_json::from_str(json).map_err(|e| schema_err(context, e))?;
    GroundTruth::from_file(file)
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(&text, &path.display().to_string())
}

/// Predicted keyframes for one video. Also accepts the extractor's keyframes
/// JSON, whose list is named `keyframes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub source_id: String,
    #[serde(alias = "keyframes")]
    pub predicted_frames: Vec<usize>,
}

pub fn parse_predictions(json: &str, context: &str) -> Result<Predictions> {
    serde_json::from_str(json).map_err(|e| schema_err(context, e))
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Predictions> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text, &path.display().to_string())
}

fn json_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_owned()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")))
        .collect();
    files.sort();
    Ok(files)
}

fn load_many<T>(path: &Path, parse: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for file in json_files(path)? {
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let context = file.display().to_string();
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| schema_err(&context, e))?;
        match value {
            serde_json::Value::Array(items) => {
                for (i, item) in items.into_iter().enumerate() {
                    out.push(parse(&item.to_string(), &format!("{context}[{i}]"))?);
                }
            }
            _ => out.push(parse(&text, &context)?),
        }
    }
    Ok(out)
}

/// Loads ground truth from a JSON file (one object or an array) or from every
/// `*.json` file in a directory.
pub fn load_ground_truth_set(path: impl AsRef<Path>) -> Result<Vec<GroundTruth>> {
    load_many(path.as_ref(), parse_ground_truth)
}

/// Same layout rules as [`load_ground_truth_set`].
pub fn load_prediction_set(path: impl AsRef<Path>) -> Result<Vec<Predictions>> {
    load_many(path.as_ref(), parse_predictions)
}
