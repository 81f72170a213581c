use std::borrow::Borrow;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use prism_core::ingestion::write_ppm;
use prism_core::keyframe_detector::Detection;
use prism_core::{run_detector_observed, DetectorConfig, Frame};
use serde::Serialize;

use crate::config::FileConfig;
use crate::input::{InputArgs, InputEcho};
use crate::{emit, to_json_pretty, write_file, DetectorArgs, Format};

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Keyframes document path; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    pub keyframes_out: Option<PathBuf>,
    /// Per-delta trace CSV.
    #[arg(long, value_name = "FILE")]
    pub trace_out: Option<PathBuf>,
    /// Directory that receives each keyframe as kf_<index>.ppm.
    #[arg(long, value_name = "DIR")]
    pub dump_frames: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Effective configuration echoed into the keyframes document. Output paths
/// and thread counts are left out so that equal inputs give equal documents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractConfig {
    pub input: InputEcho,
    pub detector: DetectorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyframesDoc {
    pub source_id: String,
    pub total_frames: usize,
    pub mu: f64,
    pub sigma: f64,
    pub threshold: f64,
    pub keyframes: Vec<usize>,
    pub stable: bool,
    pub config: ExtractConfig,
}

impl KeyframesDoc {
    pub fn new(source_id: String, detection: &Detection, config: ExtractConfig) -> Self {
        let r = &detection.result;
        Self {
            source_id,
            total_frames: r.total_frames,
            mu: r.mu,
            sigma: r.sigma,
            threshold: r.threshold,
            keyframes: r.keyframes.clone(),
            stable: r.stable,
            config,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => to_json_pretty(self),
            Format::Csv => {
                let mut s = String::new();
                let _ = writeln!(s, "# source_id={}", self.source_id);
                let _ = writeln!(s, "# total_frames={}", self.total_frames);
                let _ = writeln!(s, "# mu={}", self.mu);
                let _ = writeln!(s, "# sigma={}", self.sigma);
                let _ = writeln!(s, "# threshold={}", self.threshold);
                let _ = writeln!(s, "# stable={}", self.stable);
                let _ = writeln!(
                    s,
                    "# config={}",
                    serde_json::to_string(&self.config).expect("config serializes")
                );
                s.push_str("frame_index\n");
                for k in &self.keyframes {
                    let _ = writeln!(s, "{k}");
                }
                s
            }
        }
    }
}

/// Frames that may still be selected are written to a hidden staging
/// directory while streaming; once the threshold is known the selected ones
/// are moved into place and the rest are discarded with the directory.
struct FrameDump {
    dir: PathBuf,
    staging: tempfile::TempDir,
}

impl FrameDump {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let staging = tempfile::Builder::new()
            .prefix(".prism-staging-")
            .tempdir_in(dir)
            .with_context(|| format!("creating a staging directory in {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            staging,
        })
    }

    fn staged(&self, index: usize) -> PathBuf {
        self.staging.path().join(format!("{index}.ppm"))
    }

    fn stage(&self, frame: &Frame) -> prism_core::Result<()> {
        write_ppm(frame, &self.staged(frame.index()))
    }

    fn commit(self, keyframes: &[usize]) -> Result<()> {
        for &k in keyframes {
            let dest = self.dir.join(format!("kf_{k}.ppm"));
            fs::rename(self.staged(k), &dest).with_context(|| format!("writing {}", dest.display()))?;
        }
        self.staging.close().context("removing the staging directory")
    }
}

/// Runs the detector over a frame stream, holding one frame at a time.
/// With `dump_dir`, selected keyframes are written there as PPM files.
pub fn extract_stream<I, F>(frames: I, cfg: &DetectorConfig, dump_dir: Option<&Path>) -> Result<Detection>
where
    I: IntoIterator<Item = prism_core::Result<F>>,
    F: Borrow<Frame>,
{
    let dump = dump_dir.map(FrameDump::create).transpose()?;
    let detection = run_detector_observed(frames, cfg, |frame, candidate| match &dump {
        Some(d) if candidate => d.stage(frame),
        _ => Ok(()),
    })?;
    if let Some(d) = dump {
        d.commit(&detection.result.keyframes)?;
    }
    Ok(detection)
}

pub fn cmd_extract(args: &ExtractArgs, file: &FileConfig) -> Result<()> {
    let detector = file.detector(&args.detector)?;
    let format = file.format(args.format);
    let input = args.input.resolve()?;
    let source_id = input.source_id(args.input.source_id.as_deref());
    let detection = extract_stream(input.open()?, &detector, args.dump_frames.as_deref())?;

    if let Some(path) = &args.trace_out {
        let mut buf = Vec::new();
        detection.trace().write_to(&mut buf)?;
        write_file(path, buf)?;
    }
    let doc = KeyframesDoc::new(source_id, &detection, ExtractConfig { input, detector });
    emit(args.keyframes_out.as_deref(), &doc.render(format))
}
