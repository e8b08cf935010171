//! C ABI over the hfee pipeline.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns an
//! [`HfeeStatus`]; on failure a message for the calling thread is available
//! from [`hfee_last_error`]. Panics are caught and reported as
//! `HFEE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use hfee::evaluate::EvalError;
use hfee::linalg::Matrix;
use hfee::pipeline::{self, PipelineError};
use hfee::synth::{write_cohort, CohortSpec, SynthError};
use hfee::{
    build_feature_table, ols_solve, parse_recording, r_squared, run_loocv, ActivityLabel, CvConfig, CvReport,
    FeatureError, FeatureTable, IngestError, RegressError, Scenario, SensorRecording, Subset,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfeeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    MissingFile = 4,
    MalformedRow = 5,
    NonMonotoneTime = 6,
    EmptyStream = 7,
    NoUsableRows = 8,
    RankDeficient = 9,
    TooFewRows = 10,
    ConstantTruth = 11,
    Evaluation = 12,
    OutOfRange = 13,
    Panic = 14,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfeeScenario {
    Hr = 0,
    HrHf = 1,
    Hf = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfeeSubset {
    All = 0,
    LowIntensity = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfeeActivity {
    Sitting = 0,
    Standing = 1,
    Walking = 2,
    Cycling = 3,
    ArmErgometry = 4,
}

/// One 30 s feature row.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfeeFeatureRow {
    pub bin_end: f64,
    pub hr: f64,
    pub hf: f64,
    pub hf_med_short: f64,
    pub hf_med_long: f64,
    pub temp: f64,
    pub temp_med_short: f64,
    pub temp_med_long: f64,
    pub ee_true: f64,
    pub activity: HfeeActivity,
}

/// Box-plot summary of a cross-validation report.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfeeBoxSummary {
    pub median: f64,
    pub mean: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub n_outliers: usize,
    pub n_subjects: usize,
    pub n_failed_folds: usize,
}

/// Parsed sensor recording.
pub struct HfeeRecording(SensorRecording);

/// Feature table of one subject.
pub struct HfeeFeatureTable(FeatureTable);

/// Cross-validation report for one (scenario, subset) pair.
pub struct HfeeReport(CvReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(HfeeStatus, String);

impl Failure {
    fn new(status: HfeeStatus, message: impl Into<String>) -> Self {
        Failure(status, message.into())
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        let status = match e {
            IngestError::MissingFile { .. } => HfeeStatus::MissingFile,
            IngestError::MalformedRow { .. } => HfeeStatus::MalformedRow,
            IngestError::NonMonotoneTime { .. } => HfeeStatus::NonMonotoneTime,
            IngestError::EmptyStream { .. } => HfeeStatus::EmptyStream,
            IngestError::Io { .. } => HfeeStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        let status = match e {
            FeatureError::NoUsableRows { .. } => HfeeStatus::NoUsableRows,
            FeatureError::Io { .. } => HfeeStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

impl From<RegressError> for Failure {
    fn from(e: RegressError) -> Self {
        let status = match e {
            RegressError::RankDeficient { .. } => HfeeStatus::RankDeficient,
            RegressError::TooFewRows { .. } => HfeeStatus::TooFewRows,
            _ => HfeeStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let status = match e {
            EvalError::ConstantTruth => HfeeStatus::ConstantTruth,
            EvalError::LengthMismatch(..) | EvalError::Empty => HfeeStatus::InvalidArgument,
            _ => HfeeStatus::Evaluation,
        };
        Failure(status, e.to_string())
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Ingest(inner) => inner.into(),
            SynthError::InvalidSpec(_) => Failure(HfeeStatus::InvalidArgument, e.to_string()),
            _ => Failure(HfeeStatus::Io, e.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Ingest(inner) => inner.into(),
            PipelineError::Features(inner) => inner.into(),
            PipelineError::Synth(inner) => inner.into(),
            PipelineError::Eval { source, .. } => source.into(),
            PipelineError::Io { .. } | PipelineError::EmptyCohort(_) => Failure(HfeeStatus::Io, e.to_string()),
            _ => Failure(HfeeStatus::Evaluation, e.to_string()),
        }
    }
}

/// Runs `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> HfeeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HfeeStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {what}"));
            HfeeStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    Ok(PathBuf::from(str_arg(p, name)?))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(HfeeStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(HfeeStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(HfeeStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::new(HfeeStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::new(HfeeStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message describing the last failed call on this thread, or NULL after a
/// successful call. The pointer stays valid until the next call into the
/// library on the same thread.
#[no_mangle]
pub extern "C" fn hfee_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hfee_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Writes a synthetic cohort with default noise under `data_root`.
///
/// # Safety
/// `data_root` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hfee_synth_cohort(data_root: *const c_char, n_subjects: usize, seed: u64) -> HfeeStatus {
    guard(|| {
        let root = path_arg(data_root, "data_root")?;
        let spec = CohortSpec { n_subjects, seed, ..CohortSpec::default() };
        write_cohort(&spec, &root)?;
        Ok(())
    })
}

/// Parses the five stream files in `dir`.
///
/// # Safety
/// String arguments must be valid NUL-terminated strings; `out` must be a
/// valid pointer. On success `*out` owns a handle for [`hfee_recording_free`].
#[no_mangle]
pub unsafe extern "C" fn hfee_recording_parse(
    dir: *const c_char,
    subject_id: *const c_char,
    out: *mut *mut HfeeRecording,
) -> HfeeStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let rec = parse_recording(&path_arg(dir, "dir")?, str_arg(subject_id, "subject_id")?)?;
        *out = Box::into_raw(Box::new(HfeeRecording(rec)));
        Ok(())
    })
}

/// Recording length in seconds, from the earliest to the latest timestamp.
///
/// # Safety
/// `rec` must be a live handle or NULL; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hfee_recording_duration_s(rec: *const HfeeRecording, out: *mut f64) -> HfeeStatus {
    guard(|| {
        let rec = &handle(rec, "rec")?.0;
        let out = out_ptr(out, "out")?;
        *out = match (rec.start_time(), rec.end_time()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        };
        Ok(())
    })
}

/// # Safety
/// `rec` must be NULL or a handle from [`hfee_recording_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hfee_recording_free(rec: *mut HfeeRecording) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// Builds the 30 s feature table of a recording.
///
/// # Safety
/// `rec` must be a live handle; `out` must be valid. On success `*out` owns a
/// handle for [`hfee_features_free`].
#[no_mangle]
pub unsafe extern "C" fn hfee_features_build(rec: *const HfeeRecording, out: *mut *mut HfeeFeatureTable) -> HfeeStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let table = build_feature_table(&handle(rec, "rec")?.0)?;
        *out = Box::into_raw(Box::new(HfeeFeatureTable(table)));
        Ok(())
    })
}

/// Number of rows, or 0 for a NULL handle.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hfee_features_row_count(table: *const HfeeFeatureTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.rows.len())
}

/// Number of candidate bins that did not produce a row, or 0 for NULL.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hfee_features_dropped_bins(table: *const HfeeFeatureTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.dropped_bins)
}

/// Copies row `index` into `out`.
///
/// # Safety
/// `table` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hfee_features_row(
    table: *const HfeeFeatureTable,
    index: usize,
    out: *mut HfeeFeatureRow,
) -> HfeeStatus {
    guard(|| {
        let rows = &handle(table, "table")?.0.rows;
        let out = out_ptr(out, "out")?;
        let r = rows
            .get(index)
            .ok_or_else(|| Failure::new(HfeeStatus::OutOfRange, format!("row {index} of {}", rows.len())))?;
        *out = HfeeFeatureRow {
            bin_end: r.bin_end,
            hr: r.hr,
            hf: r.hf,
            hf_med_short: r.hf_med_short,
            hf_med_long: r.hf_med_long,
            temp: r.temp,
            temp_med_short: r.temp_med_short,
            temp_med_long: r.temp_med_long,
            ee_true: r.ee_true,
            activity: match r.activity {
                ActivityLabel::Sitting => HfeeActivity::Sitting,
                ActivityLabel::Standing => HfeeActivity::Standing,
                ActivityLabel::Walking => HfeeActivity::Walking,
                ActivityLabel::Cycling => HfeeActivity::Cycling,
                ActivityLabel::ArmErgometry => HfeeActivity::ArmErgometry,
            },
        };
        Ok(())
    })
}

/// # Safety
/// `table` must be NULL or a handle from [`hfee_features_build`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hfee_features_free(table: *mut HfeeFeatureTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Least-squares `theta` (length `p`) for `y ≈ H theta`, with `H` given
/// row-major as `n × p`.
///
/// # Safety
/// `h` must point to `n * p` doubles, `y` to `n`, `theta_out` to `p`.
#[no_mangle]
pub unsafe extern "C" fn hfee_ols_solve(
    h: *const f64,
    n: usize,
    p: usize,
    y: *const f64,
    theta_out: *mut f64,
) -> HfeeStatus {
    guard(|| {
        if p == 0 {
            return Err(Failure::new(HfeeStatus::InvalidArgument, "p must be positive"));
        }
        let len = n.checked_mul(p).ok_or_else(|| Failure::new(HfeeStatus::InvalidArgument, "n * p overflows"))?;
        let h = Matrix::from_row_major(n, p, slice_arg(h, len, "h")?.to_vec());
        let y = slice_arg(y, n, "y")?;
        if theta_out.is_null() {
            return Err(Failure::new(HfeeStatus::NullPointer, "theta_out is null"));
        }
        let theta = ols_solve(&h, y)?;
        std::slice::from_raw_parts_mut(theta_out, p).copy_from_slice(&theta);
        Ok(())
    })
}

/// Coefficient of determination of `y_hat` against `y`, both of length `n`.
///
/// # Safety
/// `y` and `y_hat` must point to `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hfee_r_squared(y: *const f64, y_hat: *const f64, n: usize, out: *mut f64) -> HfeeStatus {
    guard(|| {
        let value = r_squared(slice_arg(y, n, "y")?, slice_arg(y_hat, n, "y_hat")?)?;
        *out_ptr(out, "out")? = value;
        Ok(())
    })
}

/// Loads the cohort under `data_root` and runs leave-one-subject-out
/// cross-validation for one configuration.
///
/// # Safety
/// `data_root` must be a valid NUL-terminated string; `out` must be valid. On
/// success `*out` owns a handle for [`hfee_report_free`].
#[no_mangle]
pub unsafe extern "C" fn hfee_crossval(
    data_root: *const c_char,
    scenario: HfeeScenario,
    subset: HfeeSubset,
    out: *mut *mut HfeeReport,
) -> HfeeStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let root = path_arg(data_root, "data_root")?;
        let scenario = match scenario {
            HfeeScenario::Hr => Scenario::Hr,
            HfeeScenario::HrHf => Scenario::HrHf,
            HfeeScenario::Hf => Scenario::Hf,
        };
        let subset = match subset {
            HfeeSubset::All => Subset::All,
            HfeeSubset::LowIntensity => Subset::LowIntensity,
        };
        let cohort = pipeline::load_cohort(&root)?;
        let tables = pipeline::build_tables(&cohort.recordings)?;
        let run = run_loocv(&tables, &cohort.profiles, CvConfig::new(scenario, subset))?;
        *out = Box::into_raw(Box::new(HfeeReport(run.report)));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hfee_report_summary(report: *const HfeeReport, out: *mut HfeeBoxSummary) -> HfeeStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        let b = &r.box_stats;
        *out_ptr(out, "out")? = HfeeBoxSummary {
            median: b.median,
            mean: b.mean,
            q1: b.q1,
            q3: b.q3,
            whisker_low: b.whisker_low,
            whisker_high: b.whisker_high,
            n_outliers: b.outliers.len(),
            n_subjects: r.per_subject_r2.len(),
            n_failed_folds: r.failed_folds.len(),
        };
        Ok(())
    })
}

/// R² of one held-out subject.
///
/// # Safety
/// `report` must be a live handle, `subject_id` a valid NUL-terminated
/// string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn hfee_report_subject_r2(
    report: *const HfeeReport,
    subject_id: *const c_char,
    out: *mut f64,
) -> HfeeStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        let id = str_arg(subject_id, "subject_id")?;
        let value = *r
            .per_subject_r2
            .get(id)
            .ok_or_else(|| Failure::new(HfeeStatus::OutOfRange, format!("no R² for subject {id}")))?;
        *out_ptr(out, "out")? = value;
        Ok(())
    })
}

/// The report as pretty-printed JSON, or NULL on error. Release with
/// [`hfee_string_free`].
///
/// # Safety
/// `report` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hfee_report_to_json(report: *const HfeeReport) -> *mut c_char {
    let mut json = ptr::null_mut();
    let status = guard(|| {
        let text = handle(report, "report")?.0.to_json();
        json = CString::new(text).map_err(|e| Failure::new(HfeeStatus::Evaluation, e.to_string()))?.into_raw();
        Ok(())
    });
    if status == HfeeStatus::Ok {
        json
    } else {
        ptr::null_mut()
    }
}

/// # Safety
/// `report` must be NULL or a handle from [`hfee_crossval`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hfee_report_free(report: *mut HfeeReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hfee_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
