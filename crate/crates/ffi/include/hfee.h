#ifndef HFEE_H
#define HFEE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HfeeStatus {
  HFEE_STATUS_OK = 0,
  HFEE_STATUS_NULL_POINTER = 1,
  HFEE_STATUS_INVALID_ARGUMENT = 2,
  HFEE_STATUS_IO = 3,
  HFEE_STATUS_MISSING_FILE = 4,
  HFEE_STATUS_MALFORMED_ROW = 5,
  HFEE_STATUS_NON_MONOTONE_TIME = 6,
  HFEE_STATUS_EMPTY_STREAM = 7,
  HFEE_STATUS_NO_USABLE_ROWS = 8,
  HFEE_STATUS_RANK_DEFICIENT = 9,
  HFEE_STATUS_TOO_FEW_ROWS = 10,
  HFEE_STATUS_CONSTANT_TRUTH = 11,
  HFEE_STATUS_EVALUATION = 12,
  HFEE_STATUS_OUT_OF_RANGE = 13,
  HFEE_STATUS_PANIC = 14,
} HfeeStatus;

typedef enum HfeeActivity {
  HFEE_ACTIVITY_SITTING = 0,
  HFEE_ACTIVITY_STANDING = 1,
  HFEE_ACTIVITY_WALKING = 2,
  HFEE_ACTIVITY_CYCLING = 3,
  HFEE_ACTIVITY_ARM_ERGOMETRY = 4,
} HfeeActivity;

typedef enum HfeeScenario {
  HFEE_SCENARIO_HR = 0,
  HFEE_SCENARIO_HR_HF = 1,
  HFEE_SCENARIO_HF = 2,
} HfeeScenario;

typedef enum HfeeSubset {
  HFEE_SUBSET_ALL = 0,
  HFEE_SUBSET_LOW_INTENSITY = 1,
} HfeeSubset;

/**
 * Feature table of one subject.
 */
typedef struct HfeeFeatureTable HfeeFeatureTable;

/**
 * Parsed sensor recording.
 */
typedef struct HfeeRecording HfeeRecording;

/**
 * Cross-validation report for one (scenario, subset) pair.
 */
typedef struct HfeeReport HfeeReport;

/**
 * One 30 s feature row.
 */
typedef struct HfeeFeatureRow {
  double bin_end;
  double hr;
  double hf;
  double hf_med_short;
  double hf_med_long;
  double temp;
  double temp_med_short;
  double temp_med_long;
  double ee_true;
  enum HfeeActivity activity;
} HfeeFeatureRow;

/**
 * Box-plot summary of a cross-validation report.
 */
typedef struct HfeeBoxSummary {
  double median;
  double mean;
  double q1;
  double q3;
  double whisker_low;
  double whisker_high;
  size_t n_outliers;
  size_t n_subjects;
  size_t n_failed_folds;
} HfeeBoxSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or NULL after a
 * successful call. The pointer stays valid until the next call into the
 * library on the same thread.
 */
const char *hfee_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hfee_version(void);

/**
 * Writes a synthetic cohort with default noise under `data_root`.
 *
 * # Safety
 * `data_root` must be a valid NUL-terminated string.
 */
enum HfeeStatus hfee_synth_cohort(const char *data_root, size_t n_subjects, uint64_t seed);

/**
 * Parses the five stream files in `dir`.
 *
 * # Safety
 * String arguments must be valid NUL-terminated strings; `out` must be a
 * valid pointer. On success `*out` owns a handle for [`hfee_recording_free`].
 */
enum HfeeStatus hfee_recording_parse(const char *dir,
                                     const char *subject_id,
                                     struct HfeeRecording **out);

/**
 * Recording length in seconds, from the earliest to the latest timestamp.
 *
 * # Safety
 * `rec` must be a live handle or NULL; `out` must be valid.
 */
enum HfeeStatus hfee_recording_duration_s(const struct HfeeRecording *rec, double *out);

/**
 * # Safety
 * `rec` must be NULL or a handle from [`hfee_recording_parse`] not yet freed.
 */
void hfee_recording_free(struct HfeeRecording *rec);

/**
 * Builds the 30 s feature table of a recording.
 *
 * # Safety
 * `rec` must be a live handle; `out` must be valid. On success `*out` owns a
 * handle for [`hfee_features_free`].
 */
enum HfeeStatus hfee_features_build(const struct HfeeRecording *rec, struct HfeeFeatureTable **out);

/**
 * Number of rows, or 0 for a NULL handle.
 *
 * # Safety
 * `table` must be NULL or a live handle.
 */
size_t hfee_features_row_count(const struct HfeeFeatureTable *table);

/**
 * Number of candidate bins that did not produce a row, or 0 for NULL.
 *
 * # Safety
 * `table` must be NULL or a live handle.
 */
size_t hfee_features_dropped_bins(const struct HfeeFeatureTable *table);

/**
 * Copies row `index` into `out`.
 *
 * # Safety
 * `table` must be a live handle; `out` must be valid.
 */
enum HfeeStatus hfee_features_row(const struct HfeeFeatureTable *table,
                                  size_t index,
                                  struct HfeeFeatureRow *out);

/**
 * # Safety
 * `table` must be NULL or a handle from [`hfee_features_build`] not yet freed.
 */
void hfee_features_free(struct HfeeFeatureTable *table);

/**
 * Least-squares `theta` (length `p`) for `y ≈ H theta`, with `H` given
 * row-major as `n × p`.
 *
 * # Safety
 * `h` must point to `n * p` doubles, `y` to `n`, `theta_out` to `p`.
 */
enum HfeeStatus hfee_ols_solve(const double *h,
                               size_t n,
                               size_t p,
                               const double *y,
                               double *theta_out);

/**
 * Coefficient of determination of `y_hat` against `y`, both of length `n`.
 *
 * # Safety
 * `y` and `y_hat` must point to `n` doubles; `out` must be valid.
 */
enum HfeeStatus hfee_r_squared(const double *y, const double *y_hat, size_t n, double *out);

/**
 * Loads the cohort under `data_root` and runs leave-one-subject-out
 * cross-validation for one configuration.
 *
 * # Safety
 * `data_root` must be a valid NUL-terminated string; `out` must be valid. On
 * success `*out` owns a handle for [`hfee_report_free`].
 */
enum HfeeStatus hfee_crossval(const char *data_root,
                              enum HfeeScenario scenario,
                              enum HfeeSubset subset,
                              struct HfeeReport **out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be valid.
 */
enum HfeeStatus hfee_report_summary(const struct HfeeReport *report, struct HfeeBoxSummary *out);

/**
 * R² of one held-out subject.
 *
 * # Safety
 * `report` must be a live handle, `subject_id` a valid NUL-terminated
 * string and `out` valid.
 */
enum HfeeStatus hfee_report_subject_r2(const struct HfeeReport *report,
                                       const char *subject_id,
                                       double *out);

/**
 * The report as pretty-printed JSON, or NULL on error. Release with
 * [`hfee_string_free`].
 *
 * # Safety
 * `report` must be NULL or a live handle.
 */
char *hfee_report_to_json(const struct HfeeReport *report);

/**
 * # Safety
 * `report` must be NULL or a handle from [`hfee_crossval`] not yet freed.
 */
void hfee_report_free(struct HfeeReport *report);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void hfee_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HFEE_H */
