//! Optional TOML configuration file.
//!
//! ```toml
//! fidelity_mode = "default"
//! format = "json"
//!
//! [detector]
//! jnd_threshold = 1.0
//! sigma_multiplier = 1.0
//! include_first_frame = false
//! stats_population = "all"
//! ```

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use prism_core::evaluation::FidelityMode;
use prism_core::{DetectorConfig, StatsPopulation};
use serde::Deserialize;

use crate::{DetectorArgs, Format};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub fidelity_mode: Option<FidelityMode>,
    pub format: Option<Format>,
    #[serde(default)]
    pub detector: DetectorOverrides,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorOverrides {
    pub jnd_threshold: Option<f64>,
    pub sigma_multiplier: Option<f64>,
    pub include_first_frame: Option<bool>,
    pub stats_population: Option<StatsPopulation>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        // toml's messages span several lines; keep diagnostics on one.
        toml::from_str(text).map_err(|e| anyhow::anyhow!(e.message().to_owned()))
    }

    /// Flags over file values over defaults, validated.
    pub fn detector(&self, flags: &DetectorArgs) -> Result<DetectorConfig> {
        let base = DetectorConfig::default();
        let file = &self.detector;
        let cfg = DetectorConfig {
            jnd_threshold: flags.jnd.or(file.jnd_threshold).unwrap_or(base.jnd_threshold),
            sigma_multiplier: flags
                .sigma_mult
                .or(file.sigma_multiplier)
                .unwrap_or(base.sigma_multiplier),
            include_first_frame: flags
                .include_first
                .or(file.include_first_frame)
                .unwrap_or(base.include_first_frame),
            stats_population: flags
                .stats_population
                .map(Into::into)
                .or(file.stats_population)
                .unwrap_or(base.stats_population),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn format(&self, flag: Option<Format>) -> Format {
        flag.or(self.format).unwrap_or_default()
    }

    pub fn fidelity_mode(&self, flag: Option<crate::FidelityModeArg>) -> FidelityMode {
        flag.map(Into::into).or(self.fidelity_mode).unwrap_or_default()
    }
}
