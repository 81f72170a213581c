//! The `prism` command-line front end.

pub mod bench;
pub mod config;
pub mod eval;
pub mod extract;
pub mod input;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use prism_core::evaluation::FidelityMode;
use prism_core::{ciede2000, LabTriple, StatsPopulation};

use crate::config::FileConfig;

pub const THREADS_ENV: &str = "PRISM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "prism", version, about = "Perceptual keyframe extraction and evaluation")]
pub struct Cli {
    /// TOML file with default settings; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect keyframes in one video.
    Extract(extract::ExtractArgs),
    /// Score predicted keyframes against annotations.
    Eval(eval::EvalArgs),
    /// Measure detector throughput.
    Bench(bench::BenchArgs),
    /// Print the CIEDE2000 difference between two L*a*b* colours.
    Deltae(DeltaeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FidelityModeArg {
    Default,
    Literal,
}

impl From<FidelityModeArg> for FidelityMode {
    fn from(m: FidelityModeArg) -> Self {
        match m {
            FidelityModeArg::Default => FidelityMode::Default,
            FidelityModeArg::Literal => FidelityMode::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatsPopulationArg {
    All,
    JndSurvivors,
}

impl From<StatsPopulationArg> for StatsPopulation {
    fn from(p: StatsPopulationArg) -> Self {
        match p {
            StatsPopulationArg::All => StatsPopulation::All,
            StatsPopulationArg::JndSurvivors => StatsPopulation::JndSurvivors,
        }
    }
}

/// Detector flags shared by `extract` and `bench`. Unset flags fall back to
/// the config file, then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct DetectorArgs {
    /// Just-noticeable difference in ΔE00 units; smaller deltas are ignored.
    #[arg(long, value_name = "DE")]
    pub jnd: Option<f64>,
    /// Multiplier k in the `μ + k·σ` threshold.
    #[arg(long, value_name = "K")]
    pub sigma_mult: Option<f64>,
    /// Always report frame 0 as a keyframe.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub include_first: Option<bool>,
    /// Deltas used for the mean and standard deviation.
    #[arg(long, value_enum)]
    pub stats_population: Option<StatsPopulationArg>,
}

#[derive(Debug, Args)]
pub struct DeltaeArgs {
    #[arg(allow_negative_numbers = true, value_names = ["L1", "A1", "B1", "L2", "A2", "B2"], num_args = 6)]
    pub values: Vec<f64>,
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Extract(args) => extract::cmd_extract(&args, &file),
        Command::Eval(args) => eval::cmd_eval(&args, &file),
        Command::Bench(args) => bench::cmd_bench(&args, &file),
        Command::Deltae(args) => cmd_deltae(&args),
    }
}

pub fn cmd_deltae(args: &DeltaeArgs) -> Result<()> {
    if let Some(bad) = args.values.iter().find(|v| !v.is_finite()) {
        bail!("colour components must be finite, got {bad}");
    }
    let v = &args.values;
    let d = ciede2000(LabTriple::new(v[0], v[1], v[2]), LabTriple::new(v[3], v[4], v[5]));
    println!("{}", format_deltae(d.value()));
    Ok(())
}

pub fn format_deltae(value: f64) -> String {
    format!("{value:.4}")
}

/// Sizes the global rayon pool from `PRISM_THREADS`, if set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")
}

/// Writes `contents` to `path`, or to stdout when no path is given.
pub(crate) fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(path) => write_file(path, contents),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .context("writing to stdout")
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn to_json_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deltae_parses_negative_components() {
        let cli = Cli::try_parse_from(["prism", "deltae", "50", "2.6772", "-79.7751", "50", "0", "-82.7485"]).unwrap();
        let Command::Deltae(args) = cli.command else {
            panic!("wrong subcommand");
        };
        assert_eq!(args.values[2], -79.7751);
    }

    #[test]
    fn deltae_rejects_non_numeric() {
        assert!(Cli::try_parse_from(["prism", "deltae", "50", "x", "0", "50", "0", "0"]).is_err());
        assert!(Cli::try_parse_from(["prism", "deltae", "50", "0", "0"]).is_err());
    }

    #[test]
    fn four_decimals() {
        assert_eq!(format_deltae(0.0), "0.0000");
        assert_eq!(format_deltae(2.04246), "2.0425");
    }

    #[test]
    fn include_first_forms() {
        let parse = |extra: &[&str]| {
            let mut argv = vec!["prism", "extract", "--synthetic", "3", "2x2"];
            argv.extend_from_slice(extra);
            let Command::Extract(a) = Cli::try_parse_from(argv).unwrap().command else {
                panic!("wrong subcommand");
            };
            a.detector.include_first
        };
        assert_eq!(parse(&[]), None);
        assert_eq!(parse(&["--include-first"]), Some(true));
        assert_eq!(parse(&["--include-first", "false"]), Some(false));
    }
}
