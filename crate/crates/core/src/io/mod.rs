//! File formats: datasets, configuration, reports and figures.

pub mod config;
pub mod data;
pub mod plot;
pub mod report;

pub use config::{Config, TestKind, TestPlan};
pub use data::{load_dataset, read_dataset, sha256_hex, to_cohort, write_wide, Dataset, Schema};
pub use report::{analyze, format_ci, AnalysisReport, CurveExport};
