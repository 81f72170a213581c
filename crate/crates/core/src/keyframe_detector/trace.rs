//! Per-delta CSV trace: `#`-prefixed header lines with the run statistics,
//! then one row per consecutive-frame delta.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{DeltaSeries, KeyframeResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// The later frame of the pair, i.e. the frame that would be the keyframe.
    pub frame_index: usize,
    pub delta_e00: f64,
    pub passed_jnd: bool,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTrace {
    pub mu: f64,
    pub sigma: f64,
    pub threshold: f64,
    pub jnd_threshold: f64,
    pub total_frames: usize,
    pub rows: Vec<TraceRow>,
}

impl DeltaTrace {
    pub fn new(series: &DeltaSeries, result: &KeyframeResult) -> Self {
        let rows = series
            .deltas()
            .iter()
            .zip(series.jnd_mask())
            .enumerate()
            .map(|(i, (d, &passed))| TraceRow {
                frame_index: i + 1,
                delta_e00: d.value(),
                passed_jnd: passed,
                selected: result.is_selected(i + 1),
            })
            .collect();
        Self {
            mu: result.mu,
            sigma: result.sigma,
            threshold: result.threshold,
            jnd_threshold: series.jnd_threshold(),
            total_frames: result.total_frames,
            rows,
        }
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<trace>", e);
        writeln!(out, "# mu={}", self.mu).map_err(io)?;
        writeln!(out, "# sigma={}", self.sigma).map_err(io)?;
        writeln!(out, "# threshold={}", self.threshold).map_err(io)?;
        writeln!(out, "# jnd_threshold={}", self.jnd_threshold).map_err(io)?;
        writeln!(out, "# total_frames={}", self.total_frames).map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record(["frame_index", "delta_e00", "passed_jnd", "selected"])
                .map_err(|e| Error::Trace(e.to_string()))?;
        }
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Trace(e.to_string()))?;
        }
        w.flush().map_err(io)
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut header: [Option<String>; 5] = Default::default();
        const KEYS: [&str; 5] = ["mu", "sigma", "threshold", "jnd_threshold", "total_frames"];
        let mut body = String::new();
        for line in input.lines() {
            let line = line.map_err(|e| Error::io("<trace>", e))?;
            match line.strip_prefix('#') {
                Some(comment) => {
                    let (key, value) = comment
                        .trim()
                        .split_once('=')
                        .ok_or_else(|| Error::Trace(format!("bad header line {line:?}")))?;
                    if let Some(slot) = KEYS.iter().position(|k| *k == key.trim()) {
                        header[slot] = Some(value.trim().to_owned());
                    }
                }
                None => {
                    body.push_str(&line);
                    body.push('\n');
                }
            }
        }
        let field = |i: usize| {
            header[i]
                .as_deref()
                .ok_or_else(|| Error::Trace(format!("missing header {}", KEYS[i])))
        };
        let float = |i: usize| -> Result<f64> {
            field(i)?
                .parse()
                .map_err(|_| Error::Trace(format!("header {} is not a number", KEYS[i])))
        };
        let rows = csv::Reader::from_reader(body.as_bytes())
            .deserialize()
            .collect::<std::result::Result<Vec<TraceRow>, _>>()
            .map_err(|e| Error::Trace(e.to_string()))?;
        Ok(Self {
            mu: float(0)?,
            sigma: float(1)?,
            threshold: float(2)?,
            jnd_threshold: float(3)?,
            total_frames: field(4)?
                .parse()
                .map_err(|_| Error::Trace("header total_frames is not an integer".into()))?,
            rows,
        })
    }
}

pub fn write_delta_trace<W: Write>(series: &DeltaSeries, result: &KeyframeResult, out: W) -> Result<()> {
    DeltaTrace::new(series, result).write_to(out)
}

pub fn parse_delta_trace<R: BufRead>(input: R) -> Result<DeltaTrace> {
    DeltaTrace::read_from(input)
}
