//! Energy expenditure estimation from wrist heat flux, heat-sink
//! temperature and heart rate.
//!
//! The pipeline runs raw sensor CSV streams ([`ingest`]) through 30 s
//! feature bins with lagged medians ([`features`]), a one-dimensional PCA
//! summary of subject background variables ([`subjects`]), ordinary least
//! squares ([`regress`]) and leave-one-subject-out cross-validation scored
//! by R² ([`evaluate`]). [`synth`] produces seeded synthetic cohorts in the
//! same file layout, and [`plot`] renders box plots of the results.

pub mod evaluate;
pub mod features;
pub mod ingest;
pub mod linalg;
pub mod pipeline;
pub mod plot;
pub mod regress;
pub mod subjects;
pub mod synth;

pub mod cli;

pub use evaluate::{box_stats, r_squared, run_loocv, BoxStats, CvConfig, CvReport, EvalError, Subset};
pub use features::{build_feature_table, FeatureError, FeatureRow, FeatureTable};
pub use ingest::{parse_recording, validate_rates, ActivityLabel, IngestError, Sample, SensorRecording};
pub use linalg::Matrix;
pub use pipeline::{Cohort, PipelineError};
pub use regress::{assemble_design, fit_ols, ols_solve, predict, Design, ModelFit, RegressError, Scenario};
pub use subjects::{fit_projector, Gender, PcaProjector, SubjectError, SubjectProfile};
pub use synth::{generate_protocol, generate_recording, CohortSpec, NoiseProfile, SynthError};
