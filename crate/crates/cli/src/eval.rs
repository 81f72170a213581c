use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::Args;
use prism_core::evaluation::{
    evaluate_video, summarize, video_fidelity, write_report_csv, CorpusSummary, FidelityMode, SkippedVideo, VideoReport,
};
use prism_core::ingestion::{load_ground_truth_set, load_prediction_set, GroundTruth, ImageSequence, Predictions};
use prism_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::FileConfig;
use crate::{emit, to_json_pretty, write_file, FidelityModeArg, Format};

pub const REPORT_CSV: &str = "report.csv";
pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Annotation JSON file (one object or an array) or a directory of them.
    #[arg(long, value_name = "PATH")]
    pub ground_truth: PathBuf,
    /// Prediction JSON file (one object or an array) or a directory of them.
    /// Keyframes documents written by `extract` are accepted.
    #[arg(long, value_name = "PATH")]
    pub predictions: PathBuf,
    /// Frames for fidelity scoring: a subdirectory per source_id, or the
    /// frames themselves when only one video is annotated.
    #[arg(long, value_name = "DIR")]
    pub input_dir: Option<PathBuf>,
    /// Directory that receives report.csv and summary.json.
    #[arg(long, value_name = "DIR")]
    pub report_out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub fidelity_mode: Option<FidelityModeArg>,
    /// Rendering of the report printed to stdout.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalConfig {
    pub ground_truth: PathBuf,
    pub predictions: PathBuf,
    pub input_dir: Option<PathBuf>,
    pub fidelity_mode: FidelityMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub summary: CorpusSummary,
    pub videos: Vec<VideoReport>,
    pub skipped: Vec<SkippedVideo>,
    pub config: EvalConfig,
}

impl EvalReport {
    pub fn csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        write_report_csv(&self.videos, &mut buf)?;
        Ok(String::from_utf8(buf)?)
    }
}

fn frames_dir(root: Option<&Path>, source_id: &str, single: bool) -> Option<PathBuf> {
    let root = root?;
    let sub = root.join(source_id);
    if sub.is_dir() {
        Some(sub)
    } else if single {
        Some(root.to_path_buf())
    } else {
        None
    }
}

fn score(
    truth: &GroundTruth,
    pred: &Predictions,
    frames: Option<&Path>,
    mode: FidelityMode,
) -> prism_core::Result<VideoReport> {
    let fidelity = match frames {
        None => None,
        Some(dir) => match video_fidelity(ImageSequence::open(dir)?, &pred.predicted_frames, &truth.actual, mode) {
            Ok(f) => Some(f),
            Err(Error::FidelityUndefined(_)) => None,
            Err(e) => return Err(e),
        },
    };
    evaluate_video(truth, pred, fidelity)
}

/// Scores every annotated video that has predictions. Videos are scored in
/// parallel; rows come back in source_id order.
pub fn evaluate(config: EvalConfig) -> Result<EvalReport> {
    let truths = load_ground_truth_set(&config.ground_truth)?;
    let preds = load_prediction_set(&config.predictions)?;

    let mut truth_by_id = BTreeMap::new();
    for t in truths {
        if let Some(dup) = truth_by_id.insert(t.meta.source_id.clone(), t) {
            bail!("duplicate ground truth for source_id {:?}", dup.meta.source_id);
        }
    }
    let mut pred_by_id = BTreeMap::new();
    for p in preds {
        if let Some(dup) = pred_by_id.insert(p.source_id.clone(), p) {
            bail!("duplicate predictions for source_id {:?}", dup.source_id);
        }
    }

    let single = truth_by_id.len() == 1;
    let mut skipped = Vec::new();
    let mut jobs = Vec::new();
    for (id, truth) in &truth_by_id {
        match pred_by_id.get(id) {
            Some(p) => jobs.push((truth, p, frames_dir(config.input_dir.as_deref(), id, single))),
            None => skipped.push(SkippedVideo {
                source_id: id.clone(),
                reason: "no predictions".into(),
            }),
        }
    }
    for id in pred_by_id.keys().filter(|id| !truth_by_id.contains_key(*id)) {
        skipped.push(SkippedVideo {
            source_id: id.clone(),
            reason: "no ground truth".into(),
        });
    }

    let scored: Vec<_> = jobs
        .par_iter()
        .map(|(t, p, dir)| score(t, p, dir.as_deref(), config.fidelity_mode))
        .collect();
    let mut videos = Vec::new();
    for ((t, _, _), result) in jobs.iter().zip(scored) {
        match result {
            Ok(row) => videos.push(row),
            Err(e) => skipped.push(SkippedVideo {
                source_id: t.meta.source_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    skipped.sort_by(|a, b| a.source_id.cmp(&b.source_id));
    Ok(EvalReport {
        summary: summarize(&videos),
        videos,
        skipped,
        config,
    })
}

pub fn cmd_eval(args: &EvalArgs, file: &FileConfig) -> Result<()> {
    let config = EvalConfig {
        ground_truth: args.ground_truth.clone(),
        predictions: args.predictions.clone(),
        input_dir: args.input_dir.clone(),
        fidelity_mode: file.fidelity_mode(args.fidelity_mode),
    };
    let report = evaluate(config)?;
    let json = to_json_pretty(&report);
    let csv = report.csv()?;
    if let Some(dir) = &args.report_out {
        write_file(&dir.join(REPORT_CSV), &csv)?;
        write_file(&dir.join(SUMMARY_JSON), &json)?;
    }
    emit(
        None,
        match file.format(args.format) {
            Format::Json => &json,
            Format::Csv => &csv,
        },
    )?;
    if report.videos.is_empty() {
        bail!("no video could be scored ({} skipped)", report.skipped.len());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn config(gt: PathBuf, pred: PathBuf) -> EvalConfig {
        EvalConfig {
            ground_truth: gt,
            predictions: pred,
            input_dir: None,
            fidelity_mode: FidelityMode::Default,
        }
    }

    #[test]
    fn partial_predictions_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let gt = write(
            dir.path(),
            "gt.json",
            r#"[{"source_id":"b","fps":25,"frame_count":1000,"actual_frames":[100]},
                {"source_id":"a","fps":25,"frame_count":1000,"actual_frames":[100,500]}]"#,
        );
        let pred = write(
            dir.path(),
            "p.json",
            r#"{"source_id":"a","predicted_frames":[110,900]}"#,
        );
        let r = evaluate(config(gt, pred)).unwrap();
        assert_eq!(r.videos.len(), 1);
        assert_eq!(r.videos[0].source_id, "a");
        assert_eq!(r.videos[0].accuracy_pct, 50.0);
        assert_eq!(r.videos[0].fidelity, None);
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.skipped[0].source_id, "b");
        assert_eq!(r.summary.videos, 1);
    }

    #[test]
    fn orphan_predictions_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let gt = write(
            dir.path(),
            "gt.json",
            r#"{"source_id":"a","fps":25,"frame_count":1000,"actual_frames":[100]}"#,
        );
        let pred = write(
            dir.path(),
            "p.json",
            r#"[{"source_id":"a","predicted_frames":[]},{"source_id":"z","predicted_frames":[1]}]"#,
        );
        let r = evaluate(config(gt.clone(), pred)).unwrap();
        assert_eq!(r.videos[0].accuracy_pct, 0.0);
        assert_eq!(r.skipped[0].reason, "no ground truth");
        let dup = write(
            dir.path(),
            "dup.json",
            r#"[{"source_id":"a","predicted_frames":[]},{"source_id":"a","predicted_frames":[1]}]"#,
        );
        assert!(evaluate(config(gt, dup)).is_err());
    }
}
