//! Leave-one-subject-out cross-validation scored by the coefficient of
//! determination, plus box-plot summaries of the per-subject scores.
//!
//! Within each fold the PCA projector and the OLS parameters are fitted on
//! the training subjects only. The held-out subject's R² uses that subject's
//! own mean EE over the evaluated rows as its baseline.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureRow, FeatureTable};
use crate::regress::{assemble_design, fit_ols, predict, ModelFit, Scenario};
use crate::subjects::{fit_projector, PcaProjector, SubjectProfile};

/// Minimum number of subjects for a leave-one-subject-out run.
pub const MIN_SUBJECTS: usize = 3;
/// Whisker reach in units of the interquartile range.
pub const WHISKER_IQR: f64 = 1.5;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("y and ŷ differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no values to score")]
    Empty,
    #[error("ground truth is constant; R² is undefined")]
    ConstantTruth,
    #[error("cross-validation needs at least {MIN_SUBJECTS} subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("subject {0} has no rows in the selected subset")]
    SubsetEmpty(String),
    #[error("no profile for subject {0}")]
    MissingProfile(String),
    #[error("duplicate subject {0}")]
    DuplicateSubject(String),
    #[error("every fold failed")]
    AllFoldsFailed,
}

/// Which rows take part in fitting and scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    All,
    LowIntensity,
}

impl Subset {
    pub const ALL: [Subset; 2] = [Subset::All, Subset::LowIntensity];

    pub fn includes(self, row: &FeatureRow) -> bool {
        match self {
            Subset::All => true,
            Subset::LowIntensity => row.activity.is_low_intensity(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subset::All => "all",
            Subset::LowIntensity => "low_intensity",
        }
    }

    /// Short token used on the command line and in file names.
    pub fn slug(self) -> &'static str {
        match self {
            Subset::All => "all",
            Subset::LowIntensity => "low",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Subset::All),
            "low" | "low_intensity" => Ok(Subset::LowIntensity),
            _ => Err(format!("unknown subset {s:?} (expected all or low)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CvConfig {
    pub scenario: Scenario,
    pub subset: Subset,
}

impl CvConfig {
    pub fn new(scenario: Scenario, subset: Subset) -> Self {
        Self { scenario, subset }
    }

    /// Group label such as `HR_HF/low_intensity`.
    pub fn label(&self) -> String {
        format!("{}/{}", self.scenario, self.subset)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub median: f64,
    pub mean: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub subject_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub config: CvConfig,
    pub per_subject_r2: BTreeMap<String, f64>,
    #[serde(rename = "box")]
    pub box_stats: BoxStats,
    pub failed_folds: Vec<FoldFailure>,
}

impl CvReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("CvReport serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// What one successful fold produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldOutcome {
    pub held_out: String,
    pub projector: PcaProjector,
    pub fit: ModelFit,
    pub r2: f64,
    pub n_test_rows: usize,
}

/// Full fold-level detail of a run, from which the report is derived.
#[derive(Debug, Clone)]
pub struct LoocvRun {
    pub report: CvReport,
    /// One entry per subject, in subject-id order.
    pub folds: Vec<Result<FoldOutcome, FoldFailure>>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `R² = 1 − mean((y − ŷ)²) / mean((y − ȳ)²)` with `ȳ = mean(y)`.
pub fn r_squared(y: &[f64], y_hat: &[f64]) -> Result<f64, EvalError> {
    if y.len() != y_hat.len() {
        return Err(EvalError::LengthMismatch(y.len(), y_hat.len()));
    }
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    let y_bar = mean(y);
    let n = y.len() as f64;
    let baseline = y.iter().map(|v| (v - y_bar).powi(2)).sum::<f64>() / n;
    if baseline == 0.0 {
        return Err(EvalError::ConstantTruth);
    }
    let residual = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    Ok(1.0 - residual / baseline)
}

/// Linear interpolation between order statistics (`sorted` ascending).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

/// Box-plot statistics. Panics on an empty slice.
pub fn box_stats(values: &[f64]) -> BoxStats {
    assert!(!values.is_empty(), "box_stats needs at least one value");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile(&sorted, 0.25);
    let median = quantile(&sorted, 0.5);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let (low_fence, high_fence) = (q1 - WHISKER_IQR * iqr, q3 + WHISKER_IQR * iqr);
    let inside = || sorted.iter().copied().filter(|v| (low_fence..=high_fence).contains(v));
    BoxStats {
        median,
        mean: mean(values),
        q1,
        q3,
        whisker_low: inside().next().unwrap_or(q1),
        whisker_high: inside().next_back().unwrap_or(q3),
        outliers: sorted.iter().copied().filter(|v| !(low_fence..=high_fence).contains(v)).collect(),
    }
}

fn rows_in<'a>(table: &'a FeatureTable, subset: Subset) -> impl Iterator<Item = (&'a str, &'a FeatureRow)> + 'a {
    table.rows.iter().filter(move |r| subset.includes(r)).map(move |r| (table.subject_id.as_str(), r))
}

/// One fold: everything fitted on `tables` minus `held_out`.
pub fn run_fold(
    tables: &[FeatureTable],
    profiles: &HashMap<&str, &SubjectProfile>,
    config: CvConfig,
    held_out: usize,
) -> Result<FoldOutcome, FoldFailure> {
    let held_id = tables[held_out].subject_id.clone();
    let fail = |reason: String| FoldFailure { subject_id: held_id.clone(), reason };

    let training: Vec<&FeatureTable> =
        tables.iter().enumerate().filter(|&(i, _)| i != held_out).map(|(_, t)| t).collect();
    let training_profiles: Vec<SubjectProfile> =
        training.iter().map(|t| (*profiles[t.subject_id.as_str()]).clone()).collect();
    let projector = fit_projector(&training_profiles).map_err(|e| fail(e.to_string()))?;
    let x_proj: HashMap<String, f64> =
        tables.iter().map(|t| (t.subject_id.clone(), projector.project(profiles[t.subject_id.as_str()]))).collect();

    let train = assemble_design(training.iter().flat_map(|t| rows_in(t, config.subset)), &x_proj, config.scenario)
        .map_err(|e| fail(e.to_string()))?;
    let fit = fit_ols(&train).map_err(|e| fail(e.to_string()))?;

    let test = assemble_design(rows_in(&tables[held_out], config.subset), &x_proj, config.scenario)
        .map_err(|e| fail(e.to_string()))?;
    let y_hat = predict(&fit, &test.h).map_err(|e| fail(e.to_string()))?;
    let r2 = r_squared(&test.y, &y_hat).map_err(|e| fail(e.to_string()))?;
    Ok(FoldOutcome { held_out: held_id, projector, fit, r2, n_test_rows: test.y.len() })
}

/// Leave-one-subject-out cross-validation. Folds run in parallel; results
/// are assembled in subject-id order. Folds that fail (rank deficiency, too
/// few rows, constant truth) are recorded and left out of the box statistics.
pub fn run_loocv(
    tables: &[FeatureTable],
    profiles: &[SubjectProfile],
    config: CvConfig,
) -> Result<LoocvRun, EvalError> {
    if tables.len() < MIN_SUBJECTS {
        return Err(EvalError::TooFewSubjects(tables.len()));
    }
    let mut tables: Vec<FeatureTable> = tables.to_vec();
    tables.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    if let Some(w) = tables.windows(2).find(|w| w[0].subject_id == w[1].subject_id) {
        return Err(EvalError::DuplicateSubject(w[0].subject_id.clone()));
    }
    let by_id: HashMap<&str, &SubjectProfile> = profiles.iter().map(|p| (p.subject_id.as_str(), p)).collect();
    for t in &tables {
        if !by_id.contains_key(t.subject_id.as_str()) {
            return Err(EvalError::MissingProfile(t.subject_id.clone()));
        }
        if rows_in(t, config.subset).next().is_none() {
            return Err(EvalError::SubsetEmpty(t.subject_id.clone()));
        }
    }

    let folds: Vec<Result<FoldOutcome, FoldFailure>> =
        (0..tables.len()).into_par_iter().map(|k| run_fold(&tables, &by_id, config, k)).collect();

    let per_subject_r2: BTreeMap<String, f64> =
        folds.iter().filter_map(|f| f.as_ref().ok()).map(|f| (f.held_out.clone(), f.r2)).collect();
    if per_subject_r2.is_empty() {
        return Err(EvalError::AllFoldsFailed);
    }
    let values: Vec<f64> = per_subject_r2.values().copied().collect();
    let report = CvReport {
        config,
        box_stats: box_stats(&values),
        per_subject_r2,
        failed_folds: folds.iter().filter_map(|f| f.as_ref().err().cloned()).collect(),
    };
    Ok(LoocvRun { report, folds })
}
