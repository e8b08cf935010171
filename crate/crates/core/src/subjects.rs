//! Subject background variables and their one-dimensional PCA projection.
//!
//! The five background variables (age, gender, height, weight, activity
//! level) are z-scored over the fitting population and projected onto the
//! leading eigenvector of their correlation matrix. The eigenvector's sign
//! is fixed so the weight coordinate is non-negative.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{symmetric_eigen, Matrix};

pub const SUBJECTS_HEADER: &str = "subject_id,age_y,gender,height_cm,weight_kg,activity_level";

/// Number of background variables.
pub const N_BACKGROUND: usize = 5;
/// Position of body weight in [`SubjectProfile::features`].
pub const WEIGHT_INDEX: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "M")]
    Male,
    #[serde(rename = "F")]
    Female,
}

impl Gender {
    /// Numeric encoding used for PCA: male 0, female 1.
    pub fn code(self) -> f64 {
        match self {
            Gender::Male => 0.0,
            Gender::Female => 1.0,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Male => "M",
            Gender::Female => "F",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub age: f64,
    pub gender: Gender,
    pub height_cm: f64,
    pub weight_kg: f64,
    /// Self-reported overall physical activity, 1–10.
    pub activity_level: u8,
}

impl SubjectProfile {
    /// Background variables in the order age, gender, height, weight,
    /// activity level.
    pub fn features(&self) -> [f64; N_BACKGROUND] {
        [self.age, self.gender.code(), self.height_cm, self.weight_kg, f64::from(self.activity_level)]
    }

    pub fn validate(&self) -> Result<(), SubjectError> {
        let bad = |reason: &str| SubjectError::InvalidProfile { subject_id: self.subject_id.clone(), reason: reason.into() };
        if !(self.age.is_finite() && self.age > 0.0) {
            return Err(bad("age must be positive"));
        }
        if !(self.height_cm.is_finite() && self.height_cm > 0.0) {
            return Err(bad("height must be positive"));
        }
        if !(self.weight_kg.is_finite() && self.weight_kg > 0.0) {
            return Err(bad("weight must be positive"));
        }
        if !(1..=10).contains(&self.activity_level) {
            return Err(bad("activity level must be within 1..=10"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SubjectError {
    #[error("PCA needs at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("every background variable is constant across the fitting subjects")]
    DegenerateFeature,
    #[error("subject {subject_id}: {reason}")]
    InvalidProfile { subject_id: String, reason: String },
    #[error("{}:{line}: {reason}", path.display())]
    MalformedRow { path: PathBuf, line: u64, reason: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

/// Fitted one-component PCA over standardized background variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjector {
    pub means: [f64; N_BACKGROUND],
    pub scales: [f64; N_BACKGROUND],
    /// Unit-norm first principal component.
    pub loading: [f64; N_BACKGROUND],
    /// Variance of the training projections (largest eigenvalue).
    pub explained_variance: f64,
}

/// Fits the projector. Profiles are ordered by subject id first so the
/// result does not depend on input order.
///
/// A variable that is constant across the population carries no variance:
/// it gets scale 1 and a zero loading. Only a population in which every
/// variable is constant is rejected.
pub fn fit_projector(profiles: &[SubjectProfile]) -> Result<PcaProjector, SubjectError> {
    if profiles.len() < 2 {
        return Err(SubjectError::TooFewSubjects(profiles.len()));
    }
    let mut ordered: Vec<&SubjectProfile> = profiles.iter().collect();
    ordered.sort_by(|a, b| {
        a.subject_id.cmp(&b.subject_id).then_with(|| {
            a.features().iter().zip(b.features()).map(|(x, y)| x.total_cmp(&y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let x: Vec<[f64; N_BACKGROUND]> = ordered.iter().map(|p| p.features()).collect();
    let n = x.len() as f64;

    let mut means = [0.0; N_BACKGROUND];
    let mut scales = [1.0; N_BACKGROUND];
    let mut active = [false; N_BACKGROUND];
    for j in 0..N_BACKGROUND {
        means[j] = x.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / (n - 1.0);
        if var > 0.0 {
            scales[j] = var.sqrt();
            active[j] = true;
        }
    }
    if !active.iter().any(|&a| a) {
        return Err(SubjectError::DegenerateFeature);
    }

    let z: Vec<[f64; N_BACKGROUND]> = x
        .iter()
        .map(|r| std::array::from_fn(|j| if active[j] { (r[j] - means[j]) / scales[j] } else { 0.0 }))
        .collect();
    let mut cov = Matrix::zeros(N_BACKGROUND, N_BACKGROUND);
    for i in 0..N_BACKGROUND {
        for j in i..N_BACKGROUND {
            let c = z.iter().map(|r| r[i] * r[j]).sum::<f64>() / (n - 1.0);
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }

    let eig = symmetric_eigen(&cov);
    let mut loading: [f64; N_BACKGROUND] = std::array::from_fn(|j| eig.vectors[0][j]);
    let norm = loading.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut loading {
        *v /= norm;
    }
    // Sign rule: weight coordinate non-negative; if it is zero, the first
    // non-zero coordinate is made positive.
    let pivot = if loading[WEIGHT_INDEX] != 0.0 {
        loading[WEIGHT_INDEX]
    } else {
        loading.iter().copied().find(|v| *v != 0.0).unwrap_or(1.0)
    };
    if pivot < 0.0 {
        for v in &mut loading {
            *v = -*v;
        }
    }
    for v in &mut loading {
        if *v == 0.0 {
            *v = 0.0; // normalize -0.0 for bitwise-stable serialization
        }
    }

    Ok(PcaProjector { means, scales, loading, explained_variance: eig.values[0] })
}

impl PcaProjector {
    /// `loading · ((features − means) / scales)`.
    pub fn project(&self, profile: &SubjectProfile) -> f64 {
        let f = profile.features();
        (0..N_BACKGROUND).map(|j| self.loading[j] * (f[j] - self.means[j]) / self.scales[j]).sum()
    }
}

pub fn project(projector: &PcaProjector, profile: &SubjectProfile) -> f64 {
    projector.project(profile)
}

/// Reads `subjects.csv`.
pub fn read_profiles(path: &Path) -> Result<Vec<SubjectProfile>, SubjectError> {
    let io_err = |source| SubjectError::Io { path: path.to_path_buf(), source };
    let text = fs::read_to_string(path).map_err(io_err)?;
    let malformed = |line: usize, reason: String| SubjectError::MalformedRow { path: path.to_path_buf(), line: line as u64, reason };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SUBJECTS_HEADER => {}
        _ => return Err(malformed(1, format!("expected header `{SUBJECTS_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(malformed(line_no, format!("expected 6 columns, found {}", fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| malformed(line_no, format!("not a number: {s:?}")));
        let gender = match fields[2] {
            "M" => Gender::Male,
            "F" => Gender::Female,
            g => return Err(malformed(line_no, format!("gender must be M or F, got {g:?}"))),
        };
        let activity_level = fields[5]
            .parse::<u8>()
            .map_err(|_| malformed(line_no, format!("activity level must be an integer, got {:?}", fields[5])))?;
        let profile = SubjectProfile {
            subject_id: fields[0].to_string(),
            age: num(fields[1])?,
            gender,
            height_cm: num(fields[3])?,
            weight_kg: num(fields[4])?,
            activity_level,
        };
        profile.validate()?;
        out.push(profile);
    }
    Ok(out)
}

pub fn write_profiles(path: &Path, profiles: &[SubjectProfile]) -> Result<(), SubjectError> {
    let wrap = |source| SubjectError::Io { path: path.to_path_buf(), source };
    let mut w = io::BufWriter::new(fs::File::create(path).map_err(wrap)?);
    (|| -> io::Result<()> {
        writeln!(w, "{SUBJECTS_HEADER}")?;
        for p in profiles {
            writeln!(w, "{},{},{},{},{},{}", p.subject_id, p.age, p.gender, p.height_cm, p.weight_kg, p.activity_level)?;
        }
        w.flush()
    })()
    .map_err(wrap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(id: &str, age: f64, gender: Gender, height: f64, weight: f64, level: u8) -> SubjectProfile {
        SubjectProfile { subject_id: id.into(), age, gender, height_cm: height, weight_kg: weight, activity_level: level }
    }

    fn cohort() -> Vec<SubjectProfile> {
        vec![
            profile("A", 25.0, Gender::Male, 181.0, 82.0, 7),
            profile("B", 41.0, Gender::Female, 163.0, 60.0, 4),
            profile("C", 33.0, Gender::Male, 175.0, 90.0, 5),
            profile("D", 29.0, Gender::Female, 170.0, 66.0, 9),
        ]
    }

    #[test]
    fn weight_only_difference_loads_on_weight() {
        let a = profile("A", 30.0, Gender::Male, 180.0, 70.0, 5);
        let b = profile("B", 30.0, Gender::Male, 180.0, 90.0, 5);
        let proj = fit_projector(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(proj.loading, [0.0, 0.0, 0.0, 1.0, 0.0]);
        let z = 1.0 / 2f64.sqrt();
        assert!((proj.project(&a) + z).abs() < 1e-12);
        assert!((proj.project(&b) - z).abs() < 1e-12);
    }

    #[test]
    fn loading_is_unit_and_sign_fixed() {
        let proj = fit_projector(&cohort()).unwrap();
        let norm: f64 = proj.loading.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(proj.loading[WEIGHT_INDEX] >= 0.0);
        assert!(proj.scales.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn training_projections_are_centred() {
        let profiles = cohort();
        let proj = fit_projector(&profiles).unwrap();
        let mean: f64 = profiles.iter().map(|p| proj.project(p)).sum::<f64>() / profiles.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn mean_profile_projects_to_zero() {
        let males = vec![
            profile("A", 25.0, Gender::Male, 180.0, 80.0, 4),
            profile("B", 35.0, Gender::Male, 170.0, 70.0, 6),
        ];
        let proj = fit_projector(&males).unwrap();
        let mid = profile("M", 30.0, Gender::Male, 175.0, 75.0, 5);
        assert_eq!(proj.project(&mid), 0.0);
    }

    #[test]
    fn fit_is_order_independent() {
        let mut profiles = cohort();
        let a = fit_projector(&profiles).unwrap();
        profiles.reverse();
        let b = fit_projector(&profiles).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_too_few_and_fully_constant() {
        let p = profile("A", 30.0, Gender::Male, 180.0, 70.0, 5);
        assert!(matches!(fit_projector(std::slice::from_ref(&p)), Err(SubjectError::TooFewSubjects(1))));
        let mut q = p.clone();
        q.subject_id = "B".into();
        assert!(matches!(fit_projector(&[p, q]), Err(SubjectError::DegenerateFeature)));
    }

    #[test]
    fn profile_validation() {
        assert!(profile("A", 30.0, Gender::Male, 180.0, 70.0, 0).validate().is_err());
        assert!(profile("A", 30.0, Gender::Male, 180.0, 70.0, 11).validate().is_err());
        assert!(profile("A", 0.0, Gender::Male, 180.0, 70.0, 5).validate().is_err());
        assert!(profile("A", 30.0, Gender::Male, 180.0, -1.0, 5).validate().is_err());
        assert!(profile("A", 30.0, Gender::Female, 160.0, 55.5, 10).validate().is_ok());
    }

    #[test]
    fn profiles_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("subjects.csv");
        let profiles = cohort();
        write_profiles(&path, &profiles).unwrap();
        assert_eq!(read_profiles(&path).unwrap(), profiles);

        fs::write(&path, format!("{SUBJECTS_HEADER}\nA,30,X,180,70,5\n")).unwrap();
        assert!(matches!(read_profiles(&path), Err(SubjectError::MalformedRow { line: 2, .. })));
    }
}
