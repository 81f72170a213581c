//! Frame sources: image directories, raw RGB24 pipes and the built-in generator.

use std::fs::File;
use std::io::{self, Read};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use prism_core::ingestion::{ImageSequence, RawRgbReader};
use prism_core::synthetic::SyntheticVideo;
use prism_core::Frame;
use serde::Serialize;

pub type FrameStream = Box<dyn Iterator<Item = prism_core::Result<Frame>> + Send>;

#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    /// Directory of PNG or PPM frames, read in natural filename order.
    #[arg(long, value_name = "DIR")]
    pub input_dir: Option<PathBuf>,
    /// Packed RGB24 frames with no header, from PATH or stdin when PATH is
    /// omitted or `-`. Requires --width and --height.
    #[arg(long, value_name = "PATH", num_args = 0..=1, default_missing_value = "-")]
    pub raw_pipe: Option<PathBuf>,
    /// Generate N frames of WIDTHxHEIGHT colour segments instead of reading input.
    #[arg(long, num_args = 2, value_names = ["N", "WxH"])]
    pub synthetic: Option<Vec<String>>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    /// Frame rate, recorded in the output.
    #[arg(long)]
    pub fps: Option<f64>,
    /// Identifier written to the output; derived from the input when omitted.
    #[arg(long)]
    pub source_id: Option<String>,
}

/// Resolved input, echoed into every output document.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputSpec {
    InputDir {
        path: PathBuf,
    },
    RawPipe {
        path: PathBuf,
        width: u32,
        height: u32,
    },
    Synthetic {
        frames: usize,
        width: u32,
        height: u32,
        segment_len: usize,
        noise: u8,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputEcho {
    #[serde(flatten)]
    pub spec: InputSpec,
    pub fps: Option<f64>,
}

impl InputArgs {
    pub fn resolve(&self) -> Result<InputEcho> {
        let given = [
            self.input_dir.is_some(),
            self.raw_pipe.is_some(),
            self.synthetic.is_some(),
        ];
        if given.iter().filter(|&&g| g).count() != 1 {
            bail!("exactly one of --input-dir, --raw-pipe or --synthetic is required");
        }
        if let Some(fps) = self.fps {
            if !(fps.is_finite() && fps >= 0.0) {
                bail!("--fps must be finite and >= 0, got {fps}");
            }
        }
        let dims_flags = self.width.is_some() || self.height.is_some();
        let spec = if let Some(dir) = &self.input_dir {
            if dims_flags {
                bail!("--width/--height only apply to --raw-pipe");
            }
            InputSpec::InputDir { path: dir.clone() }
        } else if let Some(path) = &self.raw_pipe {
            let (Some(width), Some(height)) = (self.width, self.height) else {
                bail!("--raw-pipe requires --width and --height");
            };
            if width == 0 || height == 0 {
                bail!("frame dimensions must be positive, got {width}x{height}");
            }
            InputSpec::RawPipe {
                path: path.clone(),
                width,
                height,
            }
        } else {
            if dims_flags {
                bail!("--width/--height only apply to --raw-pipe");
            }
            let args = self.synthetic.as_deref().unwrap_or_default();
            let [n, dims] = args else {
                bail!("--synthetic takes N and WIDTHxHEIGHT");
            };
            let frames: usize = n
                .parse()
                .with_context(|| format!("--synthetic frame count must be a non-negative integer, got {n:?}"))?;
            let (width, height) = SyntheticVideo::parse_dims(dims)?;
            let video = SyntheticVideo::new(frames, width, height);
            InputSpec::Synthetic {
                frames,
                width,
                height,
                segment_len: video.segment_len,
                noise: video.noise,
                seed: video.seed,
            }
        };
        Ok(InputEcho { spec, fps: self.fps })
    }
}

impl InputEcho {
    pub fn source_id(&self, explicit: Option<&str>) -> String {
        if let Some(id) = explicit {
            return id.to_owned();
        }
        match &self.spec {
            InputSpec::InputDir { path } => file_name(path).unwrap_or_else(|| "frames".into()),
            InputSpec::RawPipe { path, .. } if path.as_os_str() == "-" => "stdin".into(),
            InputSpec::RawPipe { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "pipe".into()),
            InputSpec::Synthetic {
                frames, width, height, ..
            } => format!("synthetic-{frames}-{width}x{height}"),
        }
    }

    pub fn synthetic(&self) -> Option<SyntheticVideo> {
        match self.spec {
            InputSpec::Synthetic {
                frames,
                width,
                height,
                segment_len,
                noise,
                seed,
            } => Some(SyntheticVideo {
                width,
                height,
                frame_count: frames,
                segment_len,
                noise,
                seed,
            }),
            _ => None,
        }
    }

    /// Opens the input as a lazily decoded frame stream.
    pub fn open(&self) -> Result<FrameStream> {
        Ok(match &self.spec {
            InputSpec::InputDir { path } => {
                let seq = ImageSequence::open(path).with_context(|| format!("reading {}", path.display()))?;
                Box::new(seq)
            }
            InputSpec::RawPipe { path, width, height } => {
                let source: Box<dyn Read + Send> = if path.as_os_str() == "-" {
                    Box::new(io::stdin())
                } else {
                    Box::new(File::open(path).with_context(|| format!("opening {}", path.display()))?)
                };
                Box::new(RawRgbReader::new(source, *width, *height)?)
            }
            InputSpec::Synthetic { .. } => {
                let video = self.synthetic().expect("synthetic spec");
                Box::new((0..video.frame_count).map(move |i| video.frame(i)))
            }
        })
    }
}

fn file_name(path: &std::path::Path) -> Option<String> {
    let path = if path.file_name().is_none() {
        path.canonicalize().ok()?
    } else {
        path.to_path_buf()
    };
    path.file_name().map(|s| s.to_string_lossy().into_owned())
}
