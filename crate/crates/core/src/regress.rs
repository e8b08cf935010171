//! Ordinary least squares over the three predictor scenarios.
//!
//! Every scenario's design matrix starts with an intercept column. The
//! estimator is the least-squares minimizer `(HᵀH)⁻¹Hᵀy`, computed through a
//! Householder QR factorization rather than by forming `HᵀH`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureRow;
use crate::linalg::{qr_least_squares, Matrix};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum RegressError {
    #[error("need at least {p} rows for {p} parameters, got {n}")]
    TooFewRows { n: usize, p: usize },
    #[error("design matrix is rank deficient (effective rank {rank} < {p})")]
    RankDeficient { rank: usize, p: usize },
    #[error("design has {got} columns, model expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("no x_proj value for subject {0}")]
    MissingProjection(String),
    #[error("design or target contains non-finite values")]
    NonFinite,
}

/// Predictor set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "HR")]
    Hr,
    #[serde(rename = "HR_HF")]
    HrHf,
    #[serde(rename = "HF")]
    Hf,
}

const HR_SCHEMA: &[&str] = &["intercept", "hr", "x_proj"];
const HR_HF_SCHEMA: &[&str] = &[
    "intercept",
    "hr",
    "hf",
    "hf_med_short",
    "hf_med_long",
    "temp",
    "temp_med_short",
    "temp_med_long",
    "x_proj",
];
const HF_SCHEMA: &[&str] = &[
    "intercept",
    "hf",
    "hf_med_short",
    "hf_med_long",
    "temp",
    "temp_med_short",
    "temp_med_long",
    "x_proj",
];

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Hr, Scenario::HrHf, Scenario::Hf];

    pub fn column_schema(self) -> &'static [&'static str] {
        match self {
            Scenario::Hr => HR_SCHEMA,
            Scenario::HrHf => HR_HF_SCHEMA,
            Scenario::Hf => HF_SCHEMA,
        }
    }

    pub fn n_params(self) -> usize {
        self.column_schema().len()
    }

    /// Display name: `HR`, `HR_HF` or `HF`.
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Hr => "HR",
            Scenario::HrHf => "HR_HF",
            Scenario::Hf => "HF",
        }
    }

    /// Lower-case token used on the command line and in file names.
    pub fn slug(self) -> &'static str {
        match self {
            Scenario::Hr => "hr",
            Scenario::HrHf => "hrhf",
            Scenario::Hf => "hf",
        }
    }

    fn row_values(self, row: &FeatureRow, x_proj: f64) -> Vec<f64> {
        self.column_schema()
            .iter()
            .map(|&c| match c {
                "intercept" => 1.0,
                "hr" => row.hr,
                "hf" => row.hf,
                "hf_med_short" => row.hf_med_short,
                "hf_med_long" => row.hf_med_long,
                "temp" => row.temp,
                "temp_med_short" => row.temp_med_short,
                "temp_med_long" => row.temp_med_long,
                "x_proj" => x_proj,
                other => unreachable!("unknown column {other}"),
            })
            .collect()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hr" => Ok(Scenario::Hr),
            "hrhf" | "hr_hf" | "hr/hf" => Ok(Scenario::HrHf),
            "hf" => Ok(Scenario::Hf),
            _ => Err(format!("unknown scenario {s:?} (expected hr, hrhf or hf)")),
        }
    }
}

/// Observation matrix and target for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub scenario: Scenario,
    pub h: Matrix,
    pub y: Vec<f64>,
}

/// Builds `H` (columns per the scenario schema) and `y = ee_true` from
/// `(subject_id, row)` pairs, in the given order.
pub fn assemble_design<'a, I>(
    rows: I,
    x_proj_by_subject: &HashMap<String, f64>,
    scenario: Scenario,
) -> Result<Design, RegressError>
where
    I: IntoIterator<Item = (&'a str, &'a FeatureRow)>,
{
    let p = scenario.n_params();
    let mut data = Vec::new();
    let mut y = Vec::new();
    for (subject, row) in rows {
        let x_proj = *x_proj_by_subject
            .get(subject)
            .ok_or_else(|| RegressError::MissingProjection(subject.to_string()))?;
        data.extend(scenario.row_values(row, x_proj));
        y.push(row.ee_true);
    }
    Ok(Design { scenario, h: Matrix::from_row_major(y.len(), p, data), y })
}

/// Least-squares parameters for `y ≈ H θ` by Householder QR.
pub fn ols_solve(h: &Matrix, y: &[f64]) -> Result<Vec<f64>, RegressError> {
    let (n, p) = (h.rows(), h.cols());
    if y.len() != n {
        return Err(RegressError::SchemaMismatch { expected: n, got: y.len() });
    }
    if n < p {
        return Err(RegressError::TooFewRows { n, p });
    }
    if !h.as_slice().iter().chain(y).all(|v| v.is_finite()) {
        return Err(RegressError::NonFinite);
    }
    let sol = qr_least_squares(h, y);
    let largest = sol.singular_values.first().copied().unwrap_or(0.0);
    let rank = sol.singular_values.iter().filter(|&&s| s > RANK_TOLERANCE * largest).count();
    if rank < p || !sol.x.iter().all(|v| v.is_finite()) {
        return Err(RegressError::RankDeficient { rank, p });
    }
    Ok(sol.x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub scenario: Scenario,
    pub schema: Vec<String>,
    pub theta: Vec<f64>,
    pub n_rows: usize,
    /// Mean training residual; zero up to rounding when an intercept is present.
    pub residual_mean: f64,
}

impl ModelFit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ModelFit serializes")
    }
}

pub fn fit_ols(design: &Design) -> Result<ModelFit, RegressError> {
    let p = design.scenario.n_params();
    if design.h.cols() != p {
        return Err(RegressError::SchemaMismatch { expected: p, got: design.h.cols() });
    }
    let theta = ols_solve(&design.h, &design.y)?;
    let fitted = design.h.mul_vec(&theta);
    let n = design.y.len();
    let residual_mean = design.y.iter().zip(&fitted).map(|(y, f)| y - f).sum::<f64>() / n as f64;
    Ok(ModelFit {
        scenario: design.scenario,
        schema: design.scenario.column_schema().iter().map(|s| s.to_string()).collect(),
        theta,
        n_rows: n,
        residual_mean,
    })
}

/// `ŷ = H θ̂`.
pub fn predict(fit: &ModelFit, h: &Matrix) -> Result<Vec<f64>, RegressError> {
    if h.cols() != fit.theta.len() {
        return Err(RegressError::SchemaMismatch { expected: fit.theta.len(), got: h.cols() });
    }
    Ok(h.mul_vec(&fit.theta))
}
