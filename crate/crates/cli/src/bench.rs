use anyhow::Result;
use clap::Args;
use prism_core::evaluation::{measure_throughput, ThroughputReport};
use prism_core::{DetectorConfig, Frame};
use serde::Serialize;

use crate::config::FileConfig;
use crate::extract::ExtractConfig;
use crate::input::{InputArgs, InputEcho};
use crate::{emit, to_json_pretty, DetectorArgs, Format};

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchDoc {
    #[serde(flatten)]
    pub report: ThroughputReport,
    pub config: ExtractConfig,
}

impl BenchDoc {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => to_json_pretty(self),
            Format::Csv => {
                let r = &self.report;
                format!(
                    "frames,width,height,elapsed_s,fps,keyframes\n{},{},{},{},{},{}\n",
                    r.frames, r.width, r.height, r.elapsed_s, r.fps, r.keyframes
                )
            }
        }
    }
}

/// Times the detector on `input`. Generated frames are produced on the fly
/// outside the timed sections; decoded inputs are read into memory first.
pub fn bench(input: &InputEcho, cfg: &DetectorConfig) -> Result<ThroughputReport> {
    Ok(match input.synthetic() {
        Some(video) => measure_throughput(video.iter(), cfg)?,
        None => {
            let frames: Vec<Frame> = input.open()?.collect::<prism_core::Result<_>>()?;
            measure_throughput(frames.into_iter().map(Ok), cfg)?
        }
    })
}

pub fn cmd_bench(args: &BenchArgs, file: &FileConfig) -> Result<()> {
    let detector = file.detector(&args.detector)?;
    let input = args.input.resolve()?;
    let report = bench(&input, &detector)?;
    let doc = BenchDoc {
        report,
        config: ExtractConfig { input, detector },
    };
    emit(None, &doc.render(file.format(args.format)))
}
