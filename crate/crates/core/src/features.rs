//! 30 s feature bins with lagged median heat flux and heat-sink temperature.
//!
//! All windows are half-open, `[a, b)`. A bin ending at `bin_end` covers
//! `[bin_end - 30, bin_end)`; the lagged medians use the raw 20 Hz samples in
//! `[bin_end - 90, bin_end - 30)` and `[bin_end - 420, bin_end - 120)`.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ActivityInterval, ActivityLabel, Sample, SensorRecording};

pub const BIN_S: f64 = 30.0;

/// A lag window `[bin_end - end_s, bin_end - start_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagWindow {
    pub start_s: f64,
    pub end_s: f64,
}

pub const SHORT_LAG: LagWindow = LagWindow { start_s: 30.0, end_s: 90.0 };
pub const LONG_LAG: LagWindow = LagWindow { start_s: 120.0, end_s: 420.0 };

pub const FEATURE_CSV_HEADER: &str =
    "bin_end_s,hr_bpm,hf,hf_med_short,hf_med_long,temp,temp_med_short,temp_med_long,ee_w,activity";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("subject {subject_id}: no usable 30 s bins ({dropped_bins} dropped)")]
    NoUsableRows { subject_id: String, dropped_bins: usize },
    #[error("{}: {source}", path.display())]
    Io { path: std::path::PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub bin_end: f64,
    /// Beats per minute.
    pub hr: f64,
    pub hf: f64,
    pub hf_med_short: f64,
    pub hf_med_long: f64,
    pub temp: f64,
    pub temp_med_short: f64,
    pub temp_med_long: f64,
    /// Ground truth EE in watts.
    pub ee_true: f64,
    pub activity: ActivityLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub subject_id: String,
    pub rows: Vec<FeatureRow>,
    /// Bins overlapping the recording that failed the row existence rule.
    pub dropped_bins: usize,
}

/// Samples with timestamp in `[lo, hi)`; `samples` must be sorted by time.
fn in_range(samples: &[Sample], lo: f64, hi: f64) -> &[Sample] {
    let a = samples.partition_point(|s| s.t < lo);
    let b = samples.partition_point(|s| s.t < hi);
    &samples[a..b.max(a)]
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> Option<f64> {
    let n = values.len();
    (n > 0).then(|| values.sum::<f64>() / n as f64)
}

/// Heart rate over the bin as `60000 / mean(rr)`; `None` if no beat falls in
/// `[bin_end - 30, bin_end)`.
pub fn bin_heart_rate(rr_intervals: &[Sample], bin_end: f64) -> Option<f64> {
    mean(in_range(rr_intervals, bin_end - BIN_S, bin_end).iter().map(|s| s.value)).map(|rr| 60000.0 / rr)
}

/// Arithmetic mean of samples in `[bin_end - 30, bin_end)`.
pub fn bin_average(samples: &[Sample], bin_end: f64) -> Option<f64> {
    mean(in_range(samples, bin_end - BIN_S, bin_end).iter().map(|s| s.value))
}

/// Median of the samples in `[bin_end - lag_end, bin_end - lag_start)`. Even
/// counts average the two middle values.
pub fn window_median(samples: &[Sample], bin_end: f64, lag_start: f64, lag_end: f64) -> Option<f64> {
    debug_assert!(lag_start < lag_end);
    let mut values: Vec<f64> = in_range(samples, bin_end - lag_end, bin_end - lag_start)
        .iter()
        .map(|s| s.value)
        .collect();
    median_in_place(&mut values)
}

pub(crate) fn median_in_place(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (lower, &mut upper_mid, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        Some(upper_mid)
    } else {
        let lower_mid = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((lower_mid + upper_mid) / 2.0)
    }
}

fn lagged(samples: &[Sample], bin_end: f64, lag: LagWindow) -> Option<f64> {
    window_median(samples, bin_end, lag.start_s, lag.end_s)
}

/// The single activity interval covering `[lo, hi)`, if any.
fn covering_activity(activities: &[ActivityInterval], lo: f64, hi: f64) -> Option<ActivityLabel> {
    let mut covering = activities.iter().filter(|a| a.start <= lo && a.end >= hi);
    match (covering.next(), covering.next()) {
        (Some(a), None) => Some(a.label),
        _ => None,
    }
}

/// Assembles one row per 30 s bin that has a full long-window history and at
/// least one beat, breath, HF and temperature sample, and lies entirely within
/// one activity. Other bins are dropped and counted.
pub fn build_feature_table(rec: &SensorRecording) -> Result<FeatureTable, FeatureError> {
    let no_rows = |dropped_bins| FeatureError::NoUsableRows { subject_id: rec.subject_id.clone(), dropped_bins };
    let (Some(t_start), Some(t_end)) = (rec.start_time(), rec.end_time()) else {
        return Err(no_rows(0));
    };

    // Bins on the absolute 30 s grid that overlap [t_start, t_end).
    let first_k = (t_start / BIN_S).floor() as i64 + 1;
    let last_k = (t_end / BIN_S).ceil() as i64;
    let mut rows = Vec::new();
    let mut candidates = 0usize;
    for k in first_k..=last_k {
        let bin_end = k as f64 * BIN_S;
        candidates += 1;
        if bin_end - LONG_LAG.end_s < t_start {
            continue;
        }
        let row = (|| {
            Some(FeatureRow {
                bin_end,
                hr: bin_heart_rate(&rec.rr_intervals, bin_end)?,
                hf: bin_average(&rec.hf_samples, bin_end)?,
                hf_med_short: lagged(&rec.hf_samples, bin_end, SHORT_LAG)?,
                hf_med_long: lagged(&rec.hf_samples, bin_end, LONG_LAG)?,
                temp: bin_average(&rec.temp_samples, bin_end)?,
                temp_med_short: lagged(&rec.temp_samples, bin_end, SHORT_LAG)?,
                temp_med_long: lagged(&rec.temp_samples, bin_end, LONG_LAG)?,
                ee_true: bin_average(&rec.breaths, bin_end)?,
                activity: covering_activity(&rec.activities, bin_end - BIN_S, bin_end)?,
            })
        })();
        if let Some(row) = row {
            rows.push(row);
        }
    }
    let dropped_bins = candidates - rows.len();
    if rows.is_empty() {
        return Err(no_rows(dropped_bins));
    }
    Ok(FeatureTable { subject_id: rec.subject_id.clone(), rows, dropped_bins })
}

/// Writes a feature table as CSV with [`FEATURE_CSV_HEADER`].
pub fn write_feature_csv(path: &Path, table: &FeatureTable) -> Result<(), FeatureError> {
    let wrap = |source| FeatureError::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(wrap)?;
    }
    let mut w = io::BufWriter::new(fs::File::create(path).map_err(wrap)?);
    let body = (|| -> io::Result<()> {
        writeln!(w, "{FEATURE_CSV_HEADER}")?;
        for r in &table.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.bin_end,
                r.hr,
                r.hf,
                r.hf_med_short,
                r.hf_med_long,
                r.temp,
                r.temp_med_short,
                r.temp_med_long,
                r.ee_true,
                r.activity
            )?;
        }
        w.flush()
    })();
    body.map_err(wrap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(pairs: &[(f64, f64)]) -> Vec<Sample> {
        pairs.iter().map(|&(t, v)| Sample::new(t, v)).collect()
    }

    /// `duration` seconds of 20 Hz HF/temp from `f(t)`, one beat per second,
    /// one breath every 3 s, and a single activity.
    pub(super) fn synthetic(duration: f64, f: impl Fn(f64) -> f64) -> SensorRecording {
        let n = (duration * 20.0) as usize;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 / 20.0).collect();
        SensorRecording {
            subject_id: "S".into(),
            hf_samples: grid.iter().map(|&t| Sample::new(t, f(t))).collect(),
            temp_samples: grid.iter().map(|&t| Sample::new(t, 30.0 + f(t) / 4.0)).collect(),
            rr_intervals: (1..duration as usize).map(|i| Sample::new(i as f64, 1000.0)).collect(),
            breaths: (0..(duration / 3.0) as usize).map(|i| Sample::new(i as f64 * 3.0 + 1.0, 100.0)).collect(),
            activities: vec![ActivityInterval { start: 0.0, end: duration, label: ActivityLabel::Sitting }],
        }
    }

    #[test]
    fn heart_rate_from_rr() {
        let rr = samples(&[(1.0, 1000.0), (2.0, 1000.0), (3.0, 1000.0)]);
        assert_eq!(bin_heart_rate(&rr, 30.0), Some(60.0));
        let rr = samples(&[(5.0, 800.0), (6.0, 1200.0)]);
        assert_eq!(bin_heart_rate(&rr, 30.0), Some(60.0));
        assert_eq!(bin_heart_rate(&rr, 60.0), None);
    }

    #[test]
    fn bin_average_cases() {
        let s = samples(&[(0.0, 4.0), (10.0, 4.0), (29.9, 4.0)]);
        assert_eq!(bin_average(&s, 30.0), Some(4.0));
        let s = samples(&[(31.0, 1.0), (45.0, 3.0), (60.0, 100.0)]);
        assert_eq!(bin_average(&s, 60.0), Some(2.0));
        assert_eq!(bin_average(&s, 30.0), None);
    }

    #[test]
    fn window_median_cases() {
        let constant = samples(&[(0.0, 7.0), (1.0, 7.0), (2.0, 7.0), (3.0, 7.0)]);
        assert_eq!(window_median(&constant, 100.0, 96.0, 100.0), Some(7.0));
        let odd = samples(&[(10.0, 1.0), (11.0, 100.0), (12.0, 2.0)]);
        assert_eq!(window_median(&odd, 100.0, 30.0, 90.0), Some(2.0));
        let even = samples(&[(10.0, 4.0), (11.0, 1.0), (12.0, 3.0), (13.0, 2.0)]);
        assert_eq!(window_median(&even, 100.0, 30.0, 90.0), Some(2.5));
        assert_eq!(window_median(&even, 200.0, 30.0, 90.0), None);
    }

    #[test]
    fn window_median_is_half_open() {
        // Window for bin_end 100, lag (30, 90) is [10, 70).
        let s = samples(&[(9.999, -50.0), (10.0, 1.0), (69.999, 3.0), (70.0, 1000.0)]);
        assert_eq!(window_median(&s, 100.0, 30.0, 90.0), Some(2.0));
    }

    #[test]
    fn six_hundred_seconds_give_seven_rows() {
        let table = build_feature_table(&synthetic(600.0, |_| 5.0)).unwrap();
        let ends: Vec<f64> = table.rows.iter().map(|r| r.bin_end).collect();
        assert_eq!(ends, [420.0, 450.0, 480.0, 510.0, 540.0, 570.0, 600.0]);
        assert_eq!(table.dropped_bins, 13);
        let r = &table.rows[0];
        assert_eq!((r.hr, r.hf, r.hf_med_long, r.ee_true), (60.0, 5.0, 5.0, 100.0));
    }

    #[test]
    fn short_recording_has_no_rows() {
        let err = build_feature_table(&synthetic(400.0, |_| 5.0)).unwrap_err();
        assert!(matches!(err, FeatureError::NoUsableRows { .. }));
    }

    #[test]
    fn bins_straddling_activity_boundary_are_dropped() {
        let mut rec = synthetic(900.0, |_| 5.0);
        rec.activities = vec![
            ActivityInterval { start: 0.0, end: 615.0, label: ActivityLabel::Sitting },
            ActivityInterval { start: 615.0, end: 900.0, label: ActivityLabel::Cycling },
        ];
        let table = build_feature_table(&rec).unwrap();
        assert!(table.rows.iter().all(|r| r.bin_end != 630.0));
        assert!(table.rows.iter().any(|r| r.bin_end == 600.0 && r.activity == ActivityLabel::Sitting));
        assert!(table.rows.iter().any(|r| r.bin_end == 660.0 && r.activity == ActivityLabel::Cycling));
    }

    #[test]
    fn lag_ordering_for_monotone_signal() {
        let table = build_feature_table(&synthetic(900.0, |t| 2.0 * t)).unwrap();
        for r in &table.rows {
            assert!(r.hf_med_long <= r.hf_med_short && r.hf_med_short <= r.hf);
            assert!(r.temp_med_long <= r.temp_med_short && r.temp_med_short <= r.temp);
        }
        let table = build_feature_table(&synthetic(900.0, |t| -t)).unwrap();
        for r in &table.rows {
            assert!(r.hf_med_long >= r.hf_med_short && r.hf_med_short >= r.hf);
        }
    }

    #[test]
    fn feature_csv_has_header_and_rows() {
        let table = build_feature_table(&synthetic(600.0, |_| 5.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features/S.csv");
        write_feature_csv(&path, &table).unwrap();
        let text = fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(FEATURE_CSV_HEADER));
        assert_eq!(lines.next(), Some("420,60,5,5,5,31.25,31.25,31.25,100,sitting"));
        assert_eq!(lines.count(), 6);
    }
}
