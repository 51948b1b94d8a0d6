//! Benchmark reports: a JSON document holding everything a run produced,
//! plus flat CSV emissions and plot-data files.
//!
//! The report separates deterministic content (config echo, confusion
//! counts, metrics, model sizes, comparison) from the `environment` block,
//! which holds machine-dependent facts: host identification, timestamp,
//! and the measured timings and memory. Two runs of the same config and
//! seed produce byte-identical reports outside that block.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Error;
use crate::eval::{ConfusionMatrix, MetricsReport, NormalizedConfusion};
use crate::profile::ResourceReport;

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str =
    "model,accuracy,precision,recall,f1,inference_ms,model_size_bytes,peak_ram_mb";
pub const PEAK_RAM_NOTE: &str =
    "peak RAM is the process high-water mark and includes harness overhead";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Fitted-model facts that are not part of the parameter echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelDetail {
    Iforest { threshold: f64, subsample_effective: usize },
    Ocsvm { gamma: f64, support_vectors: usize, rho: f64, iterations: usize, converged: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub detail: ModelDetail,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    pub normalized: NormalizedConfusion,
    pub model_size_bytes: usize,
}

/// Row counts at each pipeline stage; deterministic per config seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSummary {
    pub rows_total: usize,
    pub anomalies_total: usize,
    pub train_rows: usize,
    pub train_normal_rows: usize,
    pub eval_rows: usize,
    pub eval_anomalies: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub iforest: f64,
    pub ocsvm: f64,
    /// "iforest", "ocsvm", or "tie"; decided by the data, never hard-coded.
    pub winner: String,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Classification metrics; higher wins.
    pub metrics: Vec<MetricComparison>,
    /// Resource metrics; lower wins. Present when both models were profiled.
    pub resources: Vec<MetricComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResources {
    pub model: String,
    pub resource: ResourceReport,
}

/// Machine-dependent facts: everything here may differ between two runs of
/// the same config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentBlock {
    pub os: String,
    pub arch: String,
    pub cpu: String,
    pub timestamp: String,
    pub peak_ram_note: String,
    pub resources: Vec<ModelResources>,
    /// Resource winners (lower is better); measured values, so they live
    /// with the other volatile content.
    pub resource_comparison: Vec<MetricComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub run: RunConfig,
    pub data: DataSummary,
    pub models: Vec<ModelReport>,
    /// Classification-metric winners; deterministic, so part of the body.
    pub comparison: Option<Vec<MetricComparison>>,
    pub environment: EnvironmentBlock,
}

impl BenchmarkReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn resources_for(&self, name: &str) -> Option<&ResourceReport> {
        self.environment.resources.iter().find(|r| r.model == name).map(|r| &r.resource)
    }

    /// The deterministic portion of the report: everything except the
    /// `environment` block, as canonical JSON. Two runs of the same config
    /// and seed produce identical body strings.
    pub fn body_json(&self) -> Result<String, Error> {
        let mut value = serde_json::to_value(self)?;
        if let Some(obj) = value.as_object_mut() {
            obj.remove("environment");
        }
        Ok(serde_json::to_string_pretty(&value)?)
    }
}

/// Captures the host identification half of the environment block.
pub fn environment_capture() -> EnvironmentBlock {
    EnvironmentBlock {
        os: std::env::consts::OS.to_string(),
        arch: std::env::consts::ARCH.to_string(),
        cpu: cpu_identifier(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        peak_ram_note: PEAK_RAM_NOTE.to_string(),
        resources: Vec::new(),
        resource_comparison: Vec::new(),
    }
}

fn cpu_identifier() -> String {
    #[cfg(target_os = "linux")]
    {
        if let Ok(info) = std::fs::read_to_string("/proc/cpuinfo") {
            for line in info.lines() {
                if let Some(rest) = line.strip_prefix("model name") {
                    if let Some((_, name)) = rest.split_once(':') {
                        return name.trim().to_string();
                    }
                }
            }
        }
    }
    "unknown".to_string()
}

/// Per-metric winners with margins across the two models. Errors unless the
/// report holds both.
pub fn compare_models(report: &BenchmarkReport) -> Result<Comparison, Error> {
    let iforest = report
        .model("iforest")
        .ok_or_else(|| Error::Report("comparison needs an iforest model block".into()))?;
    let ocsvm = report
        .model("ocsvm")
        .ok_or_else(|| Error::Report("comparison needs an ocsvm model block".into()))?;

    let higher_wins = |metric: &str, a: f64, b: f64| MetricComparison {
        metric: metric.to_string(),
        iforest: a,
        ocsvm: b,
        winner: if a > b {
            "iforest".into()
        } else if b > a {
            "ocsvm".into()
        } else {
            "tie".into()
        },
        margin: (a - b).abs(),
    };
    let lower_wins = |metric: &str, a: f64, b: f64| MetricComparison {
        metric: metric.to_string(),
        iforest: a,
        ocsvm: b,
        winner: if a < b {
            "iforest".into()
        } else if b < a {
            "ocsvm".into()
        } else {
            "tie".into()
        },
        margin: (a - b).abs(),
    };

    let metrics = vec![
        higher_wins("accuracy", iforest.metrics.accuracy, ocsvm.metrics.accuracy),
        higher_wins("precision", iforest.metrics.precision, ocsvm.metrics.precision),
        higher_wins("recall", iforest.metrics.recall, ocsvm.metrics.recall),
        higher_wins("f1", iforest.metrics.f1, ocsvm.metrics.f1),
    ];

    let mut resources = Vec::new();
    if let (Some(fi), Some(fo)) = (report.resources_for("iforest"), report.resources_for("ocsvm"))
    {
        resources.push(lower_wins(
            "inference_ms",
            fi.timing.total_batch_ms,
            fo.timing.total_batch_ms,
        ));
        resources.push(lower_wins(
            "model_size_bytes",
            fi.model_size_bytes as f64,
            fo.model_size_bytes as f64,
        ));
        if let (Some(ri), Some(ro)) = (fi.peak_ram_mb, fo.peak_ram_mb) {
            resources.push(lower_wins("peak_ram_mb", ri, ro));
        }
    }

    Ok(Comparison { metrics, resources })
}

fn write_file(path: &Path, content: &str) -> Result<(), Error> {
    std::fs::write(path, content)
        .map_err(|source| Error::WriteFile { path: path.display().to_string(), source })
}

/// Writes the report as JSON, or as a flat CSV with one row per model. The
/// CSV columns are fixed; every value comes straight out of the report.
pub fn emit_report(
    report: &BenchmarkReport,
    format: ReportFormat,
    path: &Path,
) -> Result<(), Error> {
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report)?;
            text.push('\n');
            write_file(path, &text)
        }
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for model in &report.models {
                let (inference_ms, peak_ram) = match report.resources_for(&model.name) {
                    Some(r) => (
                        r.timing.total_batch_ms.to_string(),
                        r.peak_ram_mb.map_or_else(|| "unsupported".to_string(), |v| v.to_string()),
                    ),
                    None => (String::new(), String::new()),
                };
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    model.name,
                    model.metrics.accuracy,
                    model.metrics.precision,
                    model.metrics.recall,
                    model.metrics.f1,
                    inference_ms,
                    model.model_size_bytes,
                    peak_ram,
                ));
            }
            write_file(path, &out)
        }
    }
}

/// Writes the grouped-bar plot data: `metrics_bars.csv` with
/// (metric, model, value) rows, and one two-column (model, value) file per
/// resource metric. Values are copied from the report verbatim.
pub fn emit_plot_data(report: &BenchmarkReport, outdir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut written = Vec::new();

    let mut bars = String::from("metric,model,value\n");
    for model in &report.models {
        for (metric, value) in [
            ("accuracy", model.metrics.accuracy),
            ("precision", model.metrics.precision),
            ("recall", model.metrics.recall),
            ("f1", model.metrics.f1),
        ] {
            bars.push_str(&format!("{metric},{},{value}\n", model.name));
        }
    }
    let path = outdir.join("metrics_bars.csv");
    write_file(&path, &bars)?;
    written.push(path);

    let mut size = String::from("model,value\n");
    for model in &report.models {
        size.push_str(&format!("{},{}\n", model.name, model.model_size_bytes));
    }
    let path = outdir.join("model_size_bars.csv");
    write_file(&path, &size)?;
    written.push(path);

    let mut inference = String::from("model,value\n");
    let mut ram = String::from("model,value\n");
    for entry in &report.environment.resources {
        inference.push_str(&format!("{},{}\n", entry.model, entry.resource.timing.total_batch_ms));
        if let Some(peak) = entry.resource.peak_ram_mb {
            ram.push_str(&format!("{},{peak}\n", entry.model));
        }
    }
    let path = outdir.join("inference_time_bars.csv");
    write_file(&path, &inference)?;
    written.push(path);
    let path = outdir.join("peak_ram_bars.csv");
    write_file(&path, &ram)?;
    written.push(path);

    Ok(written)
}

pub fn load_report(path: &Path) -> Result<BenchmarkReport, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::ReadFile { path: path.display().to_string(), source })?;
    Ok(serde_json::from_str(&text)?)
}
