//! Training-free perceptual keyframe extraction.
//!
//! Frames are reduced to their mean CIELAB colour, consecutive means are
//! compared with CIEDE2000, differences below the just-noticeable threshold
//! are gated out, and frames whose incoming difference exceeds the
//! per-video `μ + k·σ` threshold are reported as keyframes. The
//! [`evaluation`] module scores predictions against annotated keyframes.

pub mod color_space;
pub mod error;
pub mod evaluation;
pub mod ingestion;
pub mod keyframe_detector;
pub mod perceptual_metric;
pub mod synthetic;

pub use color_space::{frame_mean_lab, srgb_to_lab, Frame, LabTriple, Rgb8Pixel};
pub use error::{Error, Result};
pub use keyframe_detector::{
    adaptive_stats, build_delta_series, detect_keyframes, run_detector, run_detector_observed, select_keyframes,
    DeltaSeries, DetectorConfig, KeyframeResult, StatsPopulation,
};
pub use perceptual_metric::{ciede2000, DeltaE};
