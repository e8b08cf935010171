//! Cohort-level orchestration shared by the CLI and the C API.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::evaluate::{run_loocv, CvConfig, CvReport, EvalError};
use crate::features::{build_feature_table, FeatureError, FeatureTable};
use crate::ingest::{parse_recording, IngestError, SensorRecording};
use crate::subjects::{read_profiles, SubjectError, SubjectProfile};
use crate::synth::{SynthError, SUBJECTS_CSV, SUBJECTS_DIR};

pub const BOXPLOT_SVG: &str = "boxplot.svg";
pub const FEATURES_DIR: &str = "features";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Subject(#[from] SubjectError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{config}: {source}")]
    Eval { config: String, source: EvalError },
    #[error("no subject directories under {}", .0.display())]
    EmptyCohort(PathBuf),
    #[error("no cross-validation reports in {}", .0.display())]
    MissingReports(PathBuf),
    #[error("{}: invalid report: {source}", path.display())]
    BadReport { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// Parsed recordings and profiles of one data root.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub recordings: Vec<SensorRecording>,
    pub profiles: Vec<SubjectProfile>,
}

/// Subject ids under `<root>/subjects/`, sorted.
pub fn list_subjects(root: &Path) -> Result<Vec<String>, PipelineError> {
    let dir = root.join(SUBJECTS_DIR);
    let mut ids = Vec::new();
    for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
        let entry = entry.map_err(io_err(&dir))?;
        if entry.file_type().map_err(io_err(&dir))?.is_dir() {
            ids.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    ids.sort();
    if ids.is_empty() {
        return Err(PipelineError::EmptyCohort(dir));
    }
    Ok(ids)
}

/// Parses every subject directory (in parallel) plus `subjects.csv`.
pub fn load_cohort(root: &Path) -> Result<Cohort, PipelineError> {
    let ids = list_subjects(root)?;
    let recordings = ids
        .par_iter()
        .map(|id| parse_recording(&root.join(SUBJECTS_DIR).join(id), id))
        .collect::<Result<Vec<_>, _>>()?;
    let profiles = read_profiles(&root.join(SUBJECTS_CSV))?;
    Ok(Cohort { recordings, profiles })
}

pub fn build_tables(recordings: &[SensorRecording]) -> Result<Vec<FeatureTable>, PipelineError> {
    Ok(recordings.par_iter().map(build_feature_table).collect::<Result<Vec<_>, _>>()?)
}

pub fn run_configs(
    tables: &[FeatureTable],
    profiles: &[SubjectProfile],
    configs: &[CvConfig],
) -> Result<Vec<CvReport>, PipelineError> {
    configs
        .iter()
        .map(|&config| {
            run_loocv(tables, profiles, config)
                .map(|run| run.report)
                .map_err(|source| PipelineError::Eval { config: config.label(), source })
        })
        .collect()
}

pub fn report_file_name(config: &CvConfig) -> String {
    format!("report_{}_{}.json", config.scenario.slug(), config.subset.slug())
}

pub fn write_reports(out: &Path, reports: &[CvReport]) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    reports
        .iter()
        .map(|r| {
            let path = out.join(report_file_name(&r.config));
            fs::write(&path, r.to_json() + "\n").map_err(io_err(&path))?;
            Ok(path)
        })
        .collect()
}

/// Reads every `report_*.json` in `out`, ordered by configuration.
pub fn read_reports(out: &Path) -> Result<Vec<CvReport>, PipelineError> {
    let entries = match fs::read_dir(out) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(PipelineError::MissingReports(out.to_path_buf())),
        Err(source) => return Err(PipelineError::Io { path: out.to_path_buf(), source }),
    };
    let mut reports = Vec::new();
    for entry in entries {
        let path = entry.map_err(io_err(out))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if !(name.starts_with("report_") && name.ends_with(".json")) {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let report = CvReport::from_json(&text).map_err(|source| PipelineError::BadReport { path: path.clone(), source })?;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(PipelineError::MissingReports(out.to_path_buf()));
    }
    reports.sort_by_key(|r| (r.config.subset, r.config.scenario));
    Ok(reports)
}
