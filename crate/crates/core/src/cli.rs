//! Command-line front end: `synth`, `ingest-check`, `features`, `crossval`
//! and `report`.
//!
//! Settings come from flags, then from an optional `key = value` config file
//! (`--config`), then from defaults. Flags win.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::evaluate::{CvConfig, Subset};
use crate::features::write_feature_csv;
use crate::ingest::validate_rates;
use crate::pipeline::{self, PipelineError, BOXPLOT_SVG, FEATURES_DIR};
use crate::plot::render_box_plot;
use crate::regress::Scenario;
use crate::synth::{write_cohort, CohortSpec, DEFAULT_SEED, MIN_COHORT};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "hfee", version, about = "Heat-flux augmented energy expenditure estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Generate a seeded synthetic cohort under the data root.
    Synth,
    /// Parse every subject and report sampling diagnostics.
    IngestCheck,
    /// Write 30 s feature tables to <out>/features/<id>.csv.
    Features,
    /// Run leave-one-subject-out cross-validation and write JSON reports.
    Crossval,
    /// Summarize existing reports.
    Report,
}

#[derive(Debug, Args, Default, Clone)]
pub struct Flags {
    /// Plain-text `key = value` settings file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Cohort directory [default: data].
    #[arg(long, global = true)]
    pub data_root: Option<PathBuf>,
    /// Output directory for features, reports and figures [default: out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for `synth` [default: 2020].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cohort size for `synth` [default: 15].
    #[arg(long, global = true)]
    pub subjects: Option<usize>,
    /// hr, hrhf, hf or all.
    #[arg(long, global = true)]
    pub scenario: Option<String>,
    /// all, low or both.
    #[arg(long, global = true)]
    pub subset: Option<String>,
    /// Also write a box-plot SVG of the reports.
    #[arg(long, global = true)]
    pub emit_svg: bool,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_root: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub subjects: usize,
    pub scenarios: Vec<Scenario>,
    pub subsets: Vec<Subset>,
    pub emit_svg: bool,
}

impl RunConfig {
    pub fn cv_configs(&self) -> Vec<CvConfig> {
        self.subsets
            .iter()
            .flat_map(|&subset| self.scenarios.iter().map(move |&scenario| CvConfig::new(scenario, subset)))
            .collect()
    }
}

pub fn parse_scenarios(s: &str) -> Result<Vec<Scenario>, CliError> {
    match s {
        "all" => Ok(Scenario::ALL.to_vec()),
        other => other.parse().map(|s| vec![s]).map_err(CliError::Config),
    }
}

pub fn parse_subsets(s: &str) -> Result<Vec<Subset>, CliError> {
    match s {
        "both" => Ok(Subset::ALL.to_vec()),
        other => other.parse().map(|s| vec![s]).map_err(CliError::Config),
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are ignored.
pub fn parse_config_file(text: &str) -> Result<HashMap<String, String>, CliError> {
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
        map.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(map)
}

impl Flags {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                parse_config_file(&text)?
            }
            None => HashMap::new(),
        };
        let known = ["data_root", "out", "seed", "subjects", "scenario", "subset", "emit_svg"];
        if let Some(k) = file.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(CliError::Config(format!("unknown key {k:?}")));
        }
        let get = |k: &str| file.get(k).map(String::as_str);
        let number = |k: &str| -> Result<Option<u64>, CliError> {
            get(k).map(|v| v.parse::<u64>().map_err(|_| CliError::Config(format!("{k} must be an integer")))).transpose()
        };
        let emit_svg = self.emit_svg
            || match get("emit_svg") {
                None => false,
                Some("true" | "1" | "yes") => true,
                Some("false" | "0" | "no") => false,
                Some(v) => return Err(CliError::Config(format!("emit_svg must be true or false, got {v:?}"))),
            };
        Ok(RunConfig {
            data_root: self.data_root.clone().or_else(|| get("data_root").map(PathBuf::from)).unwrap_or_else(|| "data".into()),
            out: self.out.clone().or_else(|| get("out").map(PathBuf::from)).unwrap_or_else(|| "out".into()),
            seed: self.seed.or(number("seed")?).unwrap_or(DEFAULT_SEED),
            subjects: self.subjects.or(number("subjects")?.map(|n| n as usize)).unwrap_or(15),
            scenarios: parse_scenarios(self.scenario.as_deref().or(get("scenario")).unwrap_or("all"))?,
            subsets: parse_subsets(self.subset.as_deref().or(get("subset")).unwrap_or("both"))?,
            emit_svg,
        })
    }
}

pub fn cmd_synth(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    if cfg.subjects < MIN_COHORT {
        return Err(CliError::Config(format!(
            "--subjects must be at least {MIN_COHORT} for leave-one-subject-out evaluation"
        )));
    }
    let spec = CohortSpec { n_subjects: cfg.subjects, seed: cfg.seed, ..CohortSpec::default() };
    let cohort = write_cohort(&spec, &cfg.data_root).map_err(PipelineError::from)?;
    let hours: f64 = cohort.iter().map(|s| f64::from(s.truth.total_duration_s())).sum::<f64>() / 3600.0;
    writeln!(out, "wrote {} subjects ({hours:.1} h) to {}", cohort.len(), cfg.data_root.display())?;
    Ok(())
}

pub fn cmd_ingest_check(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let cohort = pipeline::load_cohort(&cfg.data_root)?;
    writeln!(out, "subject\tstream\tsamples\tmean_interval_s\tgaps\tstatus")?;
    for rec in &cohort.recordings {
        for s in validate_rates(rec).streams {
            let mean = s.mean_interval_s.map_or("-".to_string(), |m| format!("{m:.5}"));
            let status = if s.out_of_band { "OUT_OF_BAND" } else { "ok" };
            writeln!(out, "{}\t{}\t{}\t{mean}\t{}\t{status}", rec.subject_id, s.stream, s.n_samples, s.gap_count)?;
        }
    }
    writeln!(out, "{} subjects, {} profiles", cohort.recordings.len(), cohort.profiles.len())?;
    Ok(())
}

pub fn cmd_features(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let cohort = pipeline::load_cohort(&cfg.data_root)?;
    let tables = pipeline::build_tables(&cohort.recordings)?;
    let dir = cfg.out.join(FEATURES_DIR);
    for t in &tables {
        write_feature_csv(&dir.join(format!("{}.csv", t.subject_id)), t).map_err(PipelineError::from)?;
        writeln!(out, "{}\t{} rows\t{} bins dropped", t.subject_id, t.rows.len(), t.dropped_bins)?;
    }
    Ok(())
}

pub fn cmd_crossval(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let cohort = pipeline::load_cohort(&cfg.data_root)?;
    let tables = pipeline::build_tables(&cohort.recordings)?;
    let reports = pipeline::run_configs(&tables, &cohort.profiles, &cfg.cv_configs())?;
    for r in &reports {
        for f in &r.failed_folds {
            writeln!(err, "warning: {} fold {} failed: {}", r.config.label(), f.subject_id, f.reason)?;
        }
    }
    for path in pipeline::write_reports(&cfg.out, &reports)? {
        writeln!(out, "wrote {}", path.display())?;
    }
    if cfg.emit_svg {
        let path = write_svg(&cfg.out, &reports)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn write_svg(dir: &Path, reports: &[crate::evaluate::CvReport]) -> Result<PathBuf, CliError> {
    let path = dir.join(BOXPLOT_SVG);
    fs::write(&path, render_box_plot(reports)).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

pub fn cmd_report(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let reports = pipeline::read_reports(&cfg.out)?;
    writeln!(out, "{:<8} {:<14} {:>9} {:>9} {:>6} {:>7}", "scenario", "subset", "median_r2", "mean_r2", "folds", "failed")?;
    for r in &reports {
        writeln!(
            out,
            "{:<8} {:<14} {:>9.4} {:>9.4} {:>6} {:>7}",
            r.config.scenario.name(),
            r.config.subset.name(),
            r.box_stats.median,
            r.box_stats.mean,
            r.per_subject_r2.len(),
            r.failed_folds.len()
        )?;
    }
    if cfg.emit_svg {
        let path = write_svg(&cfg.out, &reports)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            write!(out, "{e}")?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Config(e.to_string())),
    };
    let cfg = cli.flags.resolve()?;
    match cli.command {
        Command::Synth => cmd_synth(&cfg, out),
        Command::IngestCheck => cmd_ingest_check(&cfg, out),
        Command::Features => cmd_features(&cfg, out),
        Command::Crossval => cmd_crossval(&cfg, out, err),
        Command::Report => cmd_report(&cfg, out),
    }
}
