//! Unsupervised anomaly detection benchmark for IoT telemetry.
//!
//! Two detectors trained on normal-only data — an isolation forest and a
//! one-class SVM — evaluated side by side on classification metrics
//! (accuracy, precision, recall, F1) and resource metrics (batch inference
//! time, serialized model size, peak RAM), with deterministic seeded runs
//! and portable binary model formats.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`dataset`]: CSV ingestion, min-max scaling, 70:30 splitting,
//!   normal-only filtering, synthetic data generation
//! - [`iforest`]: isolation forest fitting, scoring, thresholding
//! - [`ocsvm`]: one-class SVM (SMO solver) plus a brute-force dual oracle
//! - [`eval`]: confusion matrices and derived metrics
//! - [`profile`]: wall-time, model-size, and peak-RSS measurement
//! - [`pipeline`] / [`report`] / [`config`]: orchestration, report
//!   emission, and run configuration

pub mod codec;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod iforest;
pub mod matrix;
pub mod ocsvm;
pub mod pipeline;
pub mod profile;
pub mod report;

pub use config::{CliOverrides, EvalScope, ModelSelection, RunConfig};
pub use error::Error;
pub use matrix::Matrix;
pub use pipeline::run_pipeline;
pub use report::BenchmarkReport;
