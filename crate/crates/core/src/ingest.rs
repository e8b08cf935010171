//! Raw sensor stream ingestion.
//!
//! A subject directory holds five headed CSV files (`hf.csv`, `temp.csv`,
//! `rr.csv`, `calorimeter.csv`, `activities.csv`). Parsing validates every
//! row, checks that timestamps strictly increase, and re-bases all streams so
//! the earliest timestamp of the subject is `t = 0`.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HF_FILE: &str = "hf.csv";
pub const TEMP_FILE: &str = "temp.csv";
pub const RR_FILE: &str = "rr.csv";
pub const CALORIMETER_FILE: &str = "calorimeter.csv";
pub const ACTIVITIES_FILE: &str = "activities.csv";

pub const HF_HEADER: &str = "timestamp_s,heat_flux_w_m2";
pub const TEMP_HEADER: &str = "timestamp_s,temp_c";
pub const RR_HEADER: &str = "beat_time_s,rr_ms";
pub const CALORIMETER_HEADER: &str = "breath_time_s,ee_w";
pub const ACTIVITIES_HEADER: &str = "start_s,end_s,activity";

/// Nominal sample rate of the heat flux and heat-sink temperature streams.
pub const NOMINAL_RATE_HZ: f64 = 20.0;
/// Accepted band for the mean inter-sample interval of a 20 Hz stream.
pub const RATE_BAND_S: (f64, f64) = (0.045, 0.055);
/// Inter-sample intervals above this count as gaps.
pub const GAP_THRESHOLD_S: f64 = 0.25;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing stream file {}", path.display())]
    MissingFile { path: PathBuf },
    #[error("{}:{line}: malformed row: {reason}", path.display())]
    MalformedRow { path: PathBuf, line: u64, reason: String },
    #[error("{}:{line}: timestamp does not increase", path.display())]
    NonMonotoneTime { path: PathBuf, line: u64 },
    #[error("{}: stream has no data rows", path.display())]
    EmptyStream { path: PathBuf },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

/// The five activity classes of the exercise protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityLabel {
    Sitting,
    Standing,
    Walking,
    Cycling,
    ArmErgometry,
}

impl ActivityLabel {
    pub const ALL: [ActivityLabel; 5] = [
        ActivityLabel::Sitting,
        ActivityLabel::Standing,
        ActivityLabel::Walking,
        ActivityLabel::Cycling,
        ActivityLabel::ArmErgometry,
    ];

    /// Sitting, standing and walking form the low-intensity subset.
    pub fn is_low_intensity(self) -> bool {
        matches!(self, ActivityLabel::Sitting | ActivityLabel::Standing | ActivityLabel::Walking)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityLabel::Sitting => "sitting",
            ActivityLabel::Standing => "standing",
            ActivityLabel::Walking => "walking",
            ActivityLabel::Cycling => "cycling",
            ActivityLabel::ArmErgometry => "arm_ergometry",
        }
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown activity label {0:?}")]
pub struct UnknownActivity(pub String);

impl FromStr for ActivityLabel {
    type Err = UnknownActivity;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActivityLabel::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| UnknownActivity(s.to_string()))
    }
}

/// One timestamped value: a 20 Hz sample, an R-R interval (ms) at its beat
/// time, or a breath's EE (W) at its breath time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub value: f64,
}

impl Sample {
    pub fn new(t: f64, value: f64) -> Self {
        Self { t, value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityInterval {
    pub start: f64,
    pub end: f64,
    pub label: ActivityLabel,
}

/// Raw per-subject streams on a common, re-based time axis (seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRecording {
    pub subject_id: String,
    /// Heat flux, W/m².
    pub hf_samples: Vec<Sample>,
    /// Heat-sink temperature, °C.
    pub temp_samples: Vec<Sample>,
    /// R-R intervals, ms, keyed by beat time.
    pub rr_intervals: Vec<Sample>,
    /// Breath-by-breath calorimeter EE, W.
    pub breaths: Vec<Sample>,
    pub activities: Vec<ActivityInterval>,
}

impl SensorRecording {
    /// Earliest timestamp over all streams, including activity starts.
    pub fn start_time(&self) -> Option<f64> {
        [&self.hf_samples, &self.temp_samples, &self.rr_intervals, &self.breaths]
            .into_iter()
            .filter_map(|s| s.first().map(|x| x.t))
            .chain(self.activities.first().map(|a| a.start))
            .reduce(f64::min)
    }

    /// Latest timestamp over all streams, including activity ends.
    pub fn end_time(&self) -> Option<f64> {
        [&self.hf_samples, &self.temp_samples, &self.rr_intervals, &self.breaths]
            .into_iter()
            .filter_map(|s| s.last().map(|x| x.t))
            .chain(self.activities.last().map(|a| a.end))
            .reduce(f64::max)
    }

    /// Adds `offset` seconds to every timestamp.
    pub fn shift_time(&mut self, offset: f64) {
        for stream in [
            &mut self.hf_samples,
            &mut self.temp_samples,
            &mut self.rr_intervals,
            &mut self.breaths,
        ] {
            for s in stream.iter_mut() {
                s.t += offset;
            }
        }
        for a in &mut self.activities {
            a.start += offset;
            a.end += offset;
        }
    }

    /// Shifts the recording so its earliest timestamp is zero.
    pub fn rebase(&mut self) {
        if let Some(t0) = self.start_time() {
            if t0 != 0.0 {
                self.shift_time(-t0);
            }
        }
    }
}

fn read_rows(path: &Path, header: &str) -> Result<Vec<(u64, csv::StringRecord)>, IngestError> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(IngestError::MissingFile { path: path.to_path_buf() })
        }
        Err(source) => return Err(IngestError::Io { path: path.to_path_buf(), source }),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(io::BufReader::new(file));
    let expected: Vec<&str> = header.split(',').collect();
    let mut rows = Vec::new();
    let mut seen_header = false;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.into_kind() {
                csv::ErrorKind::Io(source) => IngestError::Io { path: path.to_path_buf(), source },
                kind => IngestError::MalformedRow {
                    path: path.to_path_buf(),
                    line,
                    reason: format!("{kind:?}"),
                },
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if !seen_header {
            seen_header = true;
            if record.iter().ne(expected.iter().copied()) {
                return Err(IngestError::MalformedRow {
                    path: path.to_path_buf(),
                    line,
                    reason: format!("expected header `{header}`"),
                });
            }
            continue;
        }
        if record.len() != expected.len() {
            return Err(IngestError::MalformedRow {
                path: path.to_path_buf(),
                line,
                reason: format!("expected {} columns, found {}", expected.len(), record.len()),
            });
        }
        rows.push((line, record));
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyStream { path: path.to_path_buf() });
    }
    Ok(rows)
}

fn parse_number(path: &Path, line: u64, field: &str) -> Result<f64, IngestError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(IngestError::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason: format!("non-finite value {field:?}"),
        }),
        Err(_) => Err(IngestError::MalformedRow {
            path: path.to_path_buf(),
            line,
            reason: format!("not a number: {field:?}"),
        }),
    }
}

/// Parses a two-column `timestamp,value` stream. `positive` additionally
/// rejects values ≤ 0 (R-R intervals).
fn parse_samples(path: &Path, header: &str, positive: bool) -> Result<Vec<Sample>, IngestError> {
    let rows = read_rows(path, header)?;
    let mut out: Vec<Sample> = Vec::with_capacity(rows.len());
    for (line, record) in &rows {
        let t = parse_number(path, *line, &record[0])?;
        let value = parse_number(path, *line, &record[1])?;
        if positive && value <= 0.0 {
            return Err(IngestError::MalformedRow {
                path: path.to_path_buf(),
                line: *line,
                reason: format!("value must be positive, got {value}"),
            });
        }
        if out.last().is_some_and(|prev| t <= prev.t) {
            return Err(IngestError::NonMonotoneTime { path: path.to_path_buf(), line: *line });
        }
        out.push(Sample { t, value });
    }
    Ok(out)
}

fn parse_activities(path: &Path) -> Result<Vec<ActivityInterval>, IngestError> {
    let rows = read_rows(path, ACTIVITIES_HEADER)?;
    let mut out: Vec<ActivityInterval> = Vec::with_capacity(rows.len());
    for (line, record) in &rows {
        let start = parse_number(path, *line, &record[0])?;
        let end = parse_number(path, *line, &record[1])?;
        let label = record[2].parse::<ActivityLabel>().map_err(|e| IngestError::MalformedRow {
            path: path.to_path_buf(),
            line: *line,
            reason: e.to_string(),
        })?;
        if end <= start {
            return Err(IngestError::MalformedRow {
                path: path.to_path_buf(),
                line: *line,
                reason: format!("activity ends ({end}) before it starts ({start})"),
            });
        }
        if out.last().is_some_and(|prev| start < prev.end) {
            return Err(IngestError::NonMonotoneTime { path: path.to_path_buf(), line: *line });
        }
        out.push(ActivityInterval { start, end, label });
    }
    Ok(out)
}

/// Parses the five stream files under `dir` into a re-based recording.
pub fn parse_recording(dir: &Path, subject_id: &str) -> Result<SensorRecording, IngestError> {
    let mut rec = SensorRecording {
        subject_id: subject_id.to_string(),
        hf_samples: parse_samples(&dir.join(HF_FILE), HF_HEADER, false)?,
        temp_samples: parse_samples(&dir.join(TEMP_FILE), TEMP_HEADER, false)?,
        rr_intervals: parse_samples(&dir.join(RR_FILE), RR_HEADER, true)?,
        breaths: parse_samples(&dir.join(CALORIMETER_FILE), CALORIMETER_HEADER, false)?,
        activities: parse_activities(&dir.join(ACTIVITIES_FILE))?,
    };
    rec.rebase();
    Ok(rec)
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), IngestError> {
    let wrap = |source| IngestError::Io { path: path.to_path_buf(), source };
    let file = fs::File::create(path).map_err(wrap)?;
    let mut w = io::BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(wrap)
}

fn write_samples(path: &Path, header: &str, samples: &[Sample]) -> Result<(), IngestError> {
    write_file(path, |w| {
        writeln!(w, "{header}")?;
        for s in samples {
            writeln!(w, "{},{}", s.t, s.value)?;
        }
        Ok(())
    })
}

/// Writes a recording in the stream file layout. `f64` values use the
/// shortest representation that parses back to the identical value.
pub fn write_recording(dir: &Path, rec: &SensorRecording) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(|source| IngestError::Io { path: dir.to_path_buf(), source })?;
    write_samples(&dir.join(HF_FILE), HF_HEADER, &rec.hf_samples)?;
    write_samples(&dir.join(TEMP_FILE), TEMP_HEADER, &rec.temp_samples)?;
    write_samples(&dir.join(RR_FILE), RR_HEADER, &rec.rr_intervals)?;
    write_samples(&dir.join(CALORIMETER_FILE), CALORIMETER_HEADER, &rec.breaths)?;
    write_file(&dir.join(ACTIVITIES_FILE), |w| {
        writeln!(w, "{ACTIVITIES_HEADER}")?;
        for a in &rec.activities {
            writeln!(w, "{},{},{}", a.start, a.end, a.label)?;
        }
        Ok(())
    })
}

/// Sampling diagnostics for one continuous stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamRate {
    pub stream: &'static str,
    pub n_samples: usize,
    /// Mean inter-sample interval in seconds (`None` for fewer than two samples).
    pub mean_interval_s: Option<f64>,
    pub gap_count: usize,
    pub out_of_band: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub subject_id: String,
    pub streams: Vec<StreamRate>,
}

impl ValidationSummary {
    pub fn flagged(&self) -> impl Iterator<Item = &StreamRate> {
        self.streams.iter().filter(|s| s.out_of_band)
    }
}

fn stream_rate(stream: &'static str, samples: &[Sample]) -> StreamRate {
    let n = samples.len();
    let mean_interval_s = (n >= 2).then(|| (samples[n - 1].t - samples[0].t) / (n - 1) as f64);
    let gap_count = samples.windows(2).filter(|w| w[1].t - w[0].t > GAP_THRESHOLD_S).count();
    let out_of_band = mean_interval_s.is_none_or(|m| !(RATE_BAND_S.0..=RATE_BAND_S.1).contains(&m));
    StreamRate { stream, n_samples: n, mean_interval_s, gap_count, out_of_band }
}

/// Reports mean sample interval and gap count for the 20 Hz streams. Never
/// fails; out-of-band streams are only flagged.
pub fn validate_rates(rec: &SensorRecording) -> ValidationSummary {
    ValidationSummary {
        subject_id: rec.subject_id.clone(),
        streams: vec![stream_rate("hf", &rec.hf_samples), stream_rate("temp", &rec.temp_samples)],
    }
}
