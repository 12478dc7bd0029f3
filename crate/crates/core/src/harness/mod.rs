//! Horizon sweeps, extrapolation and pass/fail reporting.

pub mod config;
pub mod extrapolate;
pub mod report;
pub mod studies;

pub use config::{MeshRule, StudyKind, SweepConfig, TestFunction, Thresholds, SCHEMA_VERSION};
pub use extrapolate::{richardson, Extrapolation};
pub use report::{Row, RowStatus, RunMetadata, Summary, SweepReport, Verdict};
pub use studies::{
    run_all, run_bbm_check, run_delta_infty_study, run_delta_zero_study, run_study, StudyRun,
    EXIT_CONFIG_ERROR, EXIT_PASS, EXIT_STUDY_FAILURE,
};
