//! Seeded synthetic cohorts in the ingest file layout.
//!
//! Each subject follows a randomized protocol of five activity bouts. True
//! EE is constant within a bout (body weight × bout MET × 1.163 W/kg). The
//! sensor streams are generated from it:
//!
//! * HR is affine in true EE plus an AR(1) disturbance whose SD is
//!   multiplied during sitting and standing, plus a per-subject offset;
//! * HF is a first-order lag of true EE with a per-subject gain, a slow
//!   drift and white noise;
//! * heat-sink temperature relaxes slowly towards ambient plus a multiple of
//!   the noiseless HF;
//! * breaths arrive every 2.5–3.5 s carrying true EE plus noise.
//!
//! With every noise term at zero the HR column is an exact affine function
//! of the binned EE, so the linear model class contains the truth.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{write_recording, ActivityInterval, ActivityLabel, IngestError, Sample, SensorRecording};
use crate::subjects::{write_profiles, Gender, SubjectError, SubjectProfile};

pub const MIN_BOUT_S: u32 = 5 * 60;
pub const MAX_BOUT_S: u32 = 45 * 60;
pub const MIN_PROTOCOL_S: u32 = 96 * 60;
pub const MAX_PROTOCOL_S: u32 = 163 * 60;
pub const SAMPLE_RATE_HZ: f64 = 20.0;
/// 1 MET expressed in W per kg of body mass.
pub const WATTS_PER_KG_MET: f64 = 1.163;
pub const DEFAULT_SEED: u64 = 2020;
pub const MIN_COHORT: usize = 3;

pub const SUBJECTS_DIR: &str = "subjects";
pub const SUBJECTS_CSV: &str = "subjects.csv";
pub const GROUND_TRUTH_DIR: &str = "ground_truth";
pub const COHORT_SPEC_JSON: &str = "cohort_spec.json";
pub const GROUND_TRUTH_HEADER: &str = "timestamp_s,ee_true_w";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Subject(#[from] SubjectError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

/// Standard deviations of every random disturbance. All zero gives a
/// noiseless cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    /// Stationary SD of the AR(1) HR disturbance, bpm.
    pub hr_sd_bpm: f64,
    /// Factor (≥ 1) applied to `hr_sd_bpm` during sitting and standing.
    pub low_intensity_hr_multiplier: f64,
    /// Per-subject HR offset SD, bpm.
    pub hr_offset_sd_bpm: f64,
    /// Per-sample white HF noise, W/m².
    pub hf_sd: f64,
    /// Stationary SD of the slow HF drift, W/m².
    pub hf_drift_sd: f64,
    /// Per-subject relative SD of the HF sensor gain.
    pub hf_gain_sd: f64,
    /// Per-subject HF offset SD, W/m².
    pub hf_offset_sd: f64,
    /// Per-sample white temperature noise, °C.
    pub temp_sd: f64,
    /// Per-breath calorimeter noise, W.
    pub ee_sd_w: f64,
}

impl NoiseProfile {
    pub fn zero() -> Self {
        Self {
            hr_sd_bpm: 0.0,
            low_intensity_hr_multiplier: 1.0,
            hr_offset_sd_bpm: 0.0,
            hf_sd: 0.0,
            hf_drift_sd: 0.0,
            hf_gain_sd: 0.0,
            hf_offset_sd: 0.0,
            temp_sd: 0.0,
            ee_sd_w: 0.0,
        }
    }
}

impl Default for NoiseProfile {
    fn default() -> Self {
        Self {
            hr_sd_bpm: 4.0,
            low_intensity_hr_multiplier: 3.0,
            hr_offset_sd_bpm: 4.0,
            hf_sd: 2.0,
            hf_drift_sd: 15.0,
            hf_gain_sd: 0.15,
            hf_offset_sd: 12.0,
            temp_sd: 0.02,
            ee_sd_w: 15.0,
        }
    }
}

/// MET range a bout of each activity is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetRanges {
    pub sitting: (f64, f64),
    pub standing: (f64, f64),
    pub walking: (f64, f64),
    pub cycling: (f64, f64),
    pub arm_ergometry: (f64, f64),
}

impl MetRanges {
    pub fn range(&self, label: ActivityLabel) -> (f64, f64) {
        match label {
            ActivityLabel::Sitting => self.sitting,
            ActivityLabel::Standing => self.standing,
            ActivityLabel::Walking => self.walking,
            ActivityLabel::Cycling => self.cycling,
            ActivityLabel::ArmErgometry => self.arm_ergometry,
        }
    }
}

impl Default for MetRanges {
    fn default() -> Self {
        Self {
            sitting: (1.0, 1.5),
            standing: (1.3, 2.0),
            walking: (2.5, 5.0),
            cycling: (4.0, 8.0),
            arm_ergometry: (2.5, 5.0),
        }
    }
}

/// Deterministic maps from true EE to the sensor signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeModel {
    pub hr_rest_bpm: f64,
    pub hr_bpm_per_watt: f64,
    /// Correlation time of the HR disturbance, s.
    pub hr_noise_tau_s: f64,
    pub hf_offset_w_m2: f64,
    pub hf_w_m2_per_watt: f64,
    /// Correlation time of the HF drift, s.
    pub hf_drift_tau_s: f64,
    pub ambient_temp_c: f64,
    pub temp_c_per_w_m2: f64,
    /// Time constant of the heat-sink temperature, s.
    pub heat_sink_tau_s: f64,
    pub met: MetRanges,
}

impl Default for GenerativeModel {
    fn default() -> Self {
        Self {
            hr_rest_bpm: 50.0,
            hr_bpm_per_watt: 0.16,
            hr_noise_tau_s: 30.0,
            hf_offset_w_m2: -5.0,
            hf_w_m2_per_watt: 0.25,
            hf_drift_tau_s: 300.0,
            ambient_temp_c: 24.0,
            temp_c_per_w_m2: 0.05,
            heat_sink_tau_s: 600.0,
            met: MetRanges::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_subjects: usize,
    pub seed: u64,
    pub noise: NoiseProfile,
    /// Time constant of the first-order lag from EE to heat flux, s.
    pub thermal_lag_s: f64,
    pub model: GenerativeModel,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            n_subjects: 15,
            seed: DEFAULT_SEED,
            noise: NoiseProfile::default(),
            thermal_lag_s: 90.0,
            model: GenerativeModel::default(),
        }
    }
}

impl CohortSpec {
    /// Default cohort with every noise term switched off.
    pub fn noiseless(seed: u64) -> Self {
        Self { seed, noise: NoiseProfile::zero(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.n_subjects < MIN_COHORT {
            return bad("at least 3 subjects are required for leave-one-subject-out evaluation");
        }
        let n = &self.noise;
        let sds = [n.hr_sd_bpm, n.hr_offset_sd_bpm, n.hf_sd, n.hf_drift_sd, n.hf_gain_sd, n.hf_offset_sd, n.temp_sd, n.ee_sd_w];
        if sds.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("noise standard deviations must be finite and non-negative");
        }
        if n.low_intensity_hr_multiplier.is_nan() || n.low_intensity_hr_multiplier < 1.0 {
            return bad("low-intensity HR noise multiplier must be at least 1");
        }
        let m = &self.model;
        if !(self.thermal_lag_s > 0.0 && m.heat_sink_tau_s > 0.0 && m.hr_noise_tau_s > 0.0 && m.hf_drift_tau_s > 0.0) {
            return bad("time constants must be positive");
        }
        Ok(())
    }

    pub fn subject_id(index: usize) -> String {
        format!("S{:02}", index + 1)
    }

    pub fn n_male(&self) -> usize {
        // Nine of fifteen.
        (self.n_subjects * 9 + 7) / 15
    }
}

/// One bout of the exercise protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bout {
    pub label: ActivityLabel,
    pub duration_s: u32,
}

pub fn protocol_total_s(schedule: &[Bout]) -> u32 {
    schedule.iter().map(|b| b.duration_s).sum()
}

fn subject_rng(seed: u64, subject_index: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((subject_index as u64) << 8 | purpose);
    rng
}

const PROTOCOL_STREAM: u64 = 1;
const PROFILE_STREAM: u64 = 2;
const SIGNAL_STREAM: u64 = 3;

/// One bout of each activity class in random order, each 5–45 min, total
/// 96–163 min. Durations are redrawn until the total fits.
pub fn generate_protocol(seed: u64, subject_index: usize) -> Vec<Bout> {
    let mut rng = subject_rng(seed, subject_index, PROTOCOL_STREAM);
    let mut labels = ActivityLabel::ALL;
    rand::seq::SliceRandom::shuffle(&mut labels[..], &mut rng);
    loop {
        let bouts: Vec<Bout> = labels
            .iter()
            .map(|&label| Bout { label, duration_s: rng.random_range(MIN_BOUT_S..=MAX_BOUT_S) })
            .collect();
        if (MIN_PROTOCOL_S..=MAX_PROTOCOL_S).contains(&protocol_total_s(&bouts)) {
            return bouts;
        }
    }
}

fn generate_profile(spec: &CohortSpec, subject_index: usize) -> SubjectProfile {
    let mut rng = subject_rng(spec.seed, subject_index, PROFILE_STREAM);
    let gender = if subject_index < spec.n_male() { Gender::Male } else { Gender::Female };
    let (height, weight) = match gender {
        Gender::Male => ((179.0, 6.5), (82.0, 9.0)),
        Gender::Female => ((166.0, 6.0), (64.0, 7.0)),
    };
    let mut draw = |(mu, sd): (f64, f64), lo: f64, hi: f64| {
        let v: f64 = Normal::new(mu, sd).expect("valid normal").sample(&mut rng);
        (v.clamp(lo, hi) * 10.0).round() / 10.0
    };
    let height_cm = draw(height, 150.0, 205.0);
    let weight_kg = draw(weight, 45.0, 120.0);
    SubjectProfile {
        subject_id: CohortSpec::subject_id(subject_index),
        age: f64::from(rng.random_range(23u32..=45)),
        gender,
        height_cm,
        weight_kg,
        activity_level: rng.random_range(1..=10),
    }
}

/// Hidden per-subject parameters and the true EE trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeGroundTruth {
    pub subject_id: String,
    pub schedule: Vec<Bout>,
    /// True EE of each bout, W.
    pub bout_ee_w: Vec<f64>,
    pub hr_offset_bpm: f64,
    pub hf_gain: f64,
    pub hf_offset_w_m2: f64,
    /// True EE at 1 s resolution, W.
    pub ee_trajectory: Vec<Sample>,
}

impl GenerativeGroundTruth {
    pub fn total_duration_s(&self) -> u32 {
        protocol_total_s(&self.schedule)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSubject {
    pub recording: SensorRecording,
    pub profile: SubjectProfile,
    pub truth: GenerativeGroundTruth,
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

/// Unit-variance AR(1) series at 1 s steps with correlation time `tau`.
fn ar1_unit(rng: &mut ChaCha8Rng, len: usize, tau: f64) -> Vec<f64> {
    let rho = (-1.0 / tau).exp();
    let innov = (1.0 - rho * rho).sqrt();
    let mut x: f64 = rng.sample(StandardNormal);
    (0..len)
        .map(|_| {
            let cur = x;
            let z: f64 = rng.sample(StandardNormal);
            x = rho * x + innov * z;
            cur
        })
        .collect()
}

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    sd * z
}

/// Generates one subject's recording, profile and hidden ground truth.
pub fn generate_recording(spec: &CohortSpec, subject_index: usize) -> SyntheticSubject {
    let model = &spec.model;
    let noise = &spec.noise;
    let schedule = generate_protocol(spec.seed, subject_index);
    let profile = generate_profile(spec, subject_index);
    let mut rng = subject_rng(spec.seed, subject_index, SIGNAL_STREAM);

    let bout_ee_w: Vec<f64> = schedule
        .iter()
        .map(|b| {
            let (lo, hi) = model.met.range(b.label);
            let met = rng.random_range(lo..=hi);
            round_to(profile.weight_kg * met * WATTS_PER_KG_MET, 3)
        })
        .collect();
    let hr_offset_bpm = gauss(&mut rng, noise.hr_offset_sd_bpm);
    let hf_gain = 1.0 + gauss(&mut rng, noise.hf_gain_sd);
    let hf_offset_w_m2 = model.hf_offset_w_m2 + gauss(&mut rng, noise.hf_offset_sd);

    let total_s = protocol_total_s(&schedule);
    let mut activities = Vec::with_capacity(schedule.len());
    let mut second_bout = Vec::with_capacity(total_s as usize);
    let mut start = 0u32;
    for (k, b) in schedule.iter().enumerate() {
        activities.push(ActivityInterval { start: f64::from(start), end: f64::from(start + b.duration_s), label: b.label });
        second_bout.extend(std::iter::repeat_n(k, b.duration_s as usize));
        start += b.duration_s;
    }
    let total = f64::from(total_s);
    let bout_at = |t: f64| second_bout[(t.floor() as usize).min(second_bout.len() - 1)];
    let ee_at = |t: f64| bout_ee_w[bout_at(t)];

    // HR: affine in EE, AR(1) disturbance scaled up at rest.
    let hr_unit = ar1_unit(&mut rng, total_s as usize, model.hr_noise_tau_s);
    let hr_at = |t: f64| {
        let sec = (t.floor() as usize).min(hr_unit.len() - 1);
        let label = schedule[second_bout[sec]].label;
        let mult = match label {
            ActivityLabel::Sitting | ActivityLabel::Standing => noise.low_intensity_hr_multiplier,
            _ => 1.0,
        };
        model.hr_rest_bpm + model.hr_bpm_per_watt * ee_at(t) + hr_offset_bpm + noise.hr_sd_bpm * mult * hr_unit[sec]
    };
    // Each beat carries the interval to the next beat.
    let mut rr_intervals = Vec::new();
    let mut t = 0.5;
    while t < total {
        let rr = round_to(60000.0 / hr_at(t).max(30.0), 3);
        rr_intervals.push(Sample::new(t, rr));
        t = round_to(t + rr / 1000.0, 6);
    }

    // Breaths every 2.5–3.5 s.
    let mut breaths = Vec::new();
    let mut t = 1.0;
    while t < total {
        breaths.push(Sample::new(t, round_to(ee_at(t) + gauss(&mut rng, noise.ee_sd_w), 3)));
        t = round_to(t + rng.random_range(2.5..3.5), 3);
    }

    // HF and heat-sink temperature at 20 Hz.
    let n = (total * SAMPLE_RATE_HZ) as usize;
    let dt = 1.0 / SAMPLE_RATE_HZ;
    let drift = ar1_unit(&mut rng, total_s as usize, model.hf_drift_tau_s);
    let lag_decay = (-dt / spec.thermal_lag_s).exp();
    let sink_decay = (-dt / model.heat_sink_tau_s).exp();
    let mut lagged_ee = bout_ee_w[0];
    let clean_hf = |lagged: f64| hf_offset_w_m2 + hf_gain * model.hf_w_m2_per_watt * lagged;
    let mut sink = model.ambient_temp_c + model.temp_c_per_w_m2 * clean_hf(lagged_ee);
    let mut hf_samples = Vec::with_capacity(n);
    let mut temp_samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / SAMPLE_RATE_HZ;
        let hf = clean_hf(lagged_ee);
        let sec = (t.floor() as usize).min(drift.len() - 1);
        let observed_hf = hf + noise.hf_drift_sd * drift[sec] + gauss(&mut rng, noise.hf_sd);
        hf_samples.push(Sample::new(t, round_to(observed_hf, 4)));
        temp_samples.push(Sample::new(t, round_to(sink + gauss(&mut rng, noise.temp_sd), 4)));
        lagged_ee = ee_at(t) + (lagged_ee - ee_at(t)) * lag_decay;
        let target = model.ambient_temp_c + model.temp_c_per_w_m2 * hf;
        sink = target + (sink - target) * sink_decay;
    }

    let ee_trajectory = (0..total_s).map(|s| Sample::new(f64::from(s), ee_at(f64::from(s)))).collect();
    let subject_id = profile.subject_id.clone();
    SyntheticSubject {
        recording: SensorRecording {
            subject_id: subject_id.clone(),
            hf_samples,
            temp_samples,
            rr_intervals,
            breaths,
            activities,
        },
        truth: GenerativeGroundTruth { subject_id, schedule, bout_ee_w, hr_offset_bpm, hf_gain, hf_offset_w_m2, ee_trajectory },
        profile,
    }
}

/// Generates every subject of the cohort in memory (in parallel).
pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<SyntheticSubject>, SynthError> {
    spec.validate()?;
    Ok((0..spec.n_subjects).into_par_iter().map(|i| generate_recording(spec, i)).collect())
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.to_path_buf(), source }
}

/// Writes `ground_truth/<id>.csv`.
pub fn write_ground_truth(path: &Path, truth: &GenerativeGroundTruth) -> Result<(), SynthError> {
    let mut w = io::BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    (|| -> io::Result<()> {
        writeln!(w, "{GROUND_TRUTH_HEADER}")?;
        for s in &truth.ee_trajectory {
            writeln!(w, "{},{}", s.t, s.value)?;
        }
        w.flush()
    })()
    .map_err(io_err(path))
}

/// Generates the cohort and writes it under `root`:
/// `subjects/<id>/*.csv`, `subjects.csv`, `ground_truth/<id>.csv` and
/// `cohort_spec.json`.
pub fn write_cohort(spec: &CohortSpec, root: &Path) -> Result<Vec<SyntheticSubject>, SynthError> {
    let cohort = generate_cohort(spec)?;
    let truth_dir = root.join(GROUND_TRUTH_DIR);
    fs::create_dir_all(&truth_dir).map_err(io_err(&truth_dir))?;
    cohort.par_iter().try_for_each(|s| -> Result<(), SynthError> {
        write_recording(&root.join(SUBJECTS_DIR).join(&s.profile.subject_id), &s.recording)?;
        write_ground_truth(&truth_dir.join(format!("{}.csv", s.profile.subject_id)), &s.truth)
    })?;
    let profiles: Vec<SubjectProfile> = cohort.iter().map(|s| s.profile.clone()).collect();
    write_profiles(&root.join(SUBJECTS_CSV), &profiles)?;
    let spec_path = root.join(COHORT_SPEC_JSON);
    let json = serde_json::to_string_pretty(spec).expect("CohortSpec serializes");
    fs::write(&spec_path, json + "\n").map_err(io_err(&spec_path))?;
    Ok(cohort)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::bin_average;

    fn small_spec(noise: NoiseProfile) -> CohortSpec {
        CohortSpec { n_subjects: 3, noise, ..CohortSpec::default() }
    }

    #[test]
    fn protocol_respects_bounds_and_classes() {
        for i in 0..50 {
            let p = generate_protocol(11, i);
            assert_eq!(p.len(), 5);
            assert!(p.iter().all(|b| (MIN_BOUT_S..=MAX_BOUT_S).contains(&b.duration_s)));
            assert!((MIN_PROTOCOL_S..=MAX_PROTOCOL_S).contains(&protocol_total_s(&p)));
            for label in ActivityLabel::ALL {
                assert!(p.iter().any(|b| b.label == label));
            }
        }
    }

    #[test]
    fn protocol_is_deterministic() {
        assert_eq!(generate_protocol(7, 3), generate_protocol(7, 3));
        assert_ne!(generate_protocol(7, 3), generate_protocol(7, 4));
    }

    #[test]
    fn spec_validation() {
        assert!(CohortSpec::default().validate().is_ok());
        let mut s = CohortSpec { n_subjects: 2, ..CohortSpec::default() };
        assert!(s.validate().is_err());
        s.n_subjects = 3;
        s.noise.low_intensity_hr_multiplier = 0.5;
        assert!(s.validate().is_err());
        s.noise.low_intensity_hr_multiplier = 3.0;
        s.noise.hf_sd = -1.0;
        assert!(s.validate().is_err());
        s.noise.hf_sd = 0.0;
        s.thermal_lag_s = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn default_gender_split() {
        assert_eq!(CohortSpec::default().n_male(), 9);
    }

    #[test]
    fn zero_noise_breaths_match_truth() {
        let spec = small_spec(NoiseProfile::zero());
        let s = generate_recording(&spec, 0);
        let truth = &s.truth.ee_trajectory;
        let mut bin_end = 30.0;
        while bin_end <= f64::from(s.truth.total_duration_s()) {
            let covered = s.recording.activities.iter().any(|a| a.start <= bin_end - 30.0 && a.end >= bin_end);
            if covered {
                let breath = bin_average(&s.recording.breaths, bin_end).unwrap();
                let truth_avg = bin_average(truth, bin_end).unwrap();
                assert!((breath - truth_avg).abs() < 1e-9, "bin {bin_end}: {breath} vs {truth_avg}");
            }
            bin_end += 30.0;
        }
    }

    #[test]
    fn streams_are_valid_recordings() {
        let s = generate_recording(&small_spec(NoiseProfile::default()), 1);
        let r = &s.recording;
        for stream in [&r.hf_samples, &r.temp_samples, &r.rr_intervals, &r.breaths] {
            assert!(stream.windows(2).all(|w| w[0].t < w[1].t));
            assert!(stream.iter().all(|x| x.value.is_finite()));
        }
        assert!(r.rr_intervals.iter().all(|x| x.value > 0.0));
        let summary = crate::ingest::validate_rates(r);
        assert_eq!(summary.flagged().count(), 0);
        assert!(summary.streams.iter().all(|s| s.gap_count == 0));
        assert!((23.0..=45.0).contains(&s.profile.age));
        s.profile.validate().unwrap();
    }
}
