//! Telemetry ingestion and preprocessing.
//!
//! Loads labelled telemetry CSVs (TON_IoT-style: a header row, numeric
//! sensor columns, a binary `label` column), drops timestamp/metadata
//! columns, min-max scales features to the training range, splits
//! train/test, and filters the training side down to normal-only rows.
//! Also generates small synthetic datasets with separable anomalies for
//! benchmarking without the real corpus.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{Matrix, MatrixError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot open {path}: {source}")]
    Open { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing label column {0:?}")]
    MissingLabelColumn(String),
    #[error("no feature columns left after dropping {0:?}")]
    NoFeatureColumns(Vec<String>),
    #[error("non-numeric value {value:?} at row {row}, column {column:?}")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("empty data section (header only)")]
    EmptyData,
    #[error("empty frame")]
    EmptyFrame,
    #[error("frame dimension {got} does not match scaler dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("train ratio {0} outside (0, 1)")]
    BadRatio(f64),
    #[error("need at least 2 rows to split, got {0}")]
    TooFewRows(usize),
    #[error("no normal samples")]
    NoNormalSamples,
    #[error("invalid synthetic spec: {0}")]
    BadSyntheticSpec(String),
    #[error("labels length {labels} does not match row count {rows}")]
    LabelMismatch { labels: usize, rows: usize },
    #[error("feature name count {names} does not match column count {cols}")]
    NameMismatch { names: usize, cols: usize },
    #[error("non-finite feature value at row {row}, column {column:?}")]
    NonFinite { row: usize, column: String },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Labelled tabular telemetry: a feature matrix plus binary labels
/// (0 = normal, 1 = anomaly) and column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    feature_names: Vec<String>,
    features: Matrix,
    labels: Vec<u8>,
}

impl TelemetryFrame {
    /// Builds a frame, enforcing the structural invariants: label count
    /// equals row count, name count equals column count, at least one
    /// feature column, and every feature value finite.
    pub fn new(
        feature_names: Vec<String>,
        features: Matrix,
        labels: Vec<u8>,
    ) -> Result<Self, DatasetError> {
        if labels.len() != features.rows() {
            return Err(DatasetError::LabelMismatch { labels: labels.len(), rows: features.rows() });
        }
        if feature_names.len() != features.cols() {
            return Err(DatasetError::NameMismatch {
                names: feature_names.len(),
                cols: features.cols(),
            });
        }
        if features.cols() == 0 {
            return Err(DatasetError::NoFeatureColumns(vec![]));
        }
        for (r, row) in features.iter_rows().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(DatasetError::NonFinite {
                        row: r + 1,
                        column: feature_names[c].clone(),
                    });
                }
            }
        }
        Ok(Self { feature_names, features, labels })
    }

    pub fn row_count(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// New frame containing the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Writes the frame as a CSV with the feature columns in order followed
    /// by a `label` column.
    pub fn write_csv(&self, path: &Path) -> Result<(), DatasetError> {
        let file = std::fs::File::create(path)
            .map_err(|source| DatasetError::Write { path: path.display().to_string(), source })?;
        let mut w = csv::Writer::from_writer(file);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("label");
        w.write_record(&header)?;
        for (row, label) in self.features.iter_rows().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
            rec.push(label.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| DatasetError::Write { path: path.display().to_string(), source })?;
        Ok(())
    }
}

/// Per-feature minimum and maximum, fitted on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn dim(&self) -> usize {
        self.min.len()
    }
}

/// Which CSV columns to drop, where the label lives, and which label values
/// mean "anomaly".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSchema {
    /// Columns removed before feature extraction; entries that do not exist
    /// in the header are ignored.
    pub drop_columns: Vec<String>,
    pub label_column: String,
    /// Attack-category column; read and discarded (binary framing only).
    pub type_column: String,
    /// Label cell values mapped to anomaly = 1; everything else is normal.
    pub label_positive_values: Vec<String>,
}

impl Default for IngestSchema {
    fn default() -> Self {
        Self {
            drop_columns: vec!["ts".into(), "date".into(), "time".into()],
            label_column: "label".into(),
            type_column: "type".into(),
            label_positive_values: vec!["1".into()],
        }
    }
}

/// Recipe for a desk-scale synthetic dataset: a tight normal cluster at the
/// origin plus anomalies sampled away from it, separable by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub normal_count: usize,
    pub anomaly_count: usize,
    pub dim: usize,
    /// Standard deviation of the isotropic normal cluster.
    pub spread: f64,
    /// Half-width of the anomaly sampling box; must exceed 3 x spread.
    pub halfwidth: f64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), DatasetError> {
        if self.normal_count == 0 {
            return Err(DatasetError::BadSyntheticSpec("normal_count must be positive".into()));
        }
        if self.dim == 0 {
            return Err(DatasetError::BadSyntheticSpec("dim must be positive".into()));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(DatasetError::BadSyntheticSpec("spread must be positive".into()));
        }
        if !(self.halfwidth > 3.0 * self.spread && self.halfwidth.is_finite()) {
            return Err(DatasetError::BadSyntheticSpec(format!(
                "halfwidth {} must exceed 3 x spread = {}",
                self.halfwidth,
                3.0 * self.spread
            )));
        }
        Ok(())
    }
}

/// Loads a telemetry CSV: drops the configured columns, extracts the label
/// column as binary marks, and parses every remaining column as `f64` in
/// header order. Row order is preserved.
pub fn load_csv(path: &Path, schema: &IngestSchema) -> Result<TelemetryFrame, DatasetError> {
    let file = std::fs::File::open(path)
        .map_err(|source| DatasetError::Open { path: path.display().to_string(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);

    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == schema.label_column)
        .ok_or_else(|| DatasetError::MissingLabelColumn(schema.label_column.clone()))?;

    let mut feature_idx = Vec::new();
    let mut feature_names = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        if i == label_idx || name == schema.type_column {
            continue;
        }
        if schema.drop_columns.iter().any(|d| d == name) {
            continue;
        }
        feature_idx.push(i);
        feature_names.push(name.to_string());
    }
    if feature_idx.is_empty() {
        return Err(DatasetError::NoFeatureColumns(schema.drop_columns.clone()));
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_no + 1; // 1-based data rows, header not counted
        for (&idx, name) in feature_idx.iter().zip(&feature_names) {
            let raw = record.get(idx).unwrap_or("");
            let value: f64 = raw.trim().parse().map_err(|_| DatasetError::NonNumeric {
                row,
                column: name.clone(),
                value: raw.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::NonNumeric {
                    row,
                    column: name.clone(),
                    value: raw.to_string(),
                });
            }
            data.push(value);
        }
        let raw_label = record.get(label_idx).unwrap_or("").trim();
        let positive = schema.label_positive_values.iter().any(|v| v == raw_label);
        labels.push(u8::from(positive));
    }
    if labels.is_empty() {
        return Err(DatasetError::EmptyData);
    }

    let rows = labels.len();
    let cols = feature_names.len();
    let features = Matrix::from_vec(data, rows, cols)?;
    TelemetryFrame::new(feature_names, features, labels)
}

/// Per-column minimum and maximum of the training features.
pub fn fit_minmax(train: &TelemetryFrame) -> Result<ScalerParams, DatasetError> {
    if train.row_count() == 0 {
        return Err(DatasetError::EmptyFrame);
    }
    let d = train.dim();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for row in train.features().iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(ScalerParams { min, max })
}

/// Maps each value x to (x - min) / (max - min). Constant columns map to
/// 0.0. Values outside the fitted range are NOT clamped: out-of-range
/// telemetry is itself anomaly signal.
pub fn apply_minmax(
    frame: &TelemetryFrame,
    params: &ScalerParams,
) -> Result<TelemetryFrame, DatasetError> {
    if frame.dim() != params.dim() {
        return Err(DatasetError::DimensionMismatch { expected: params.dim(), got: frame.dim() });
    }
    let d = frame.dim();
    let mut scaled = Matrix::zeros(frame.row_count(), d);
    for r in 0..frame.row_count() {
        let row = frame.features().row(r);
        for j in 0..d {
            let range = params.max[j] - params.min[j];
            let v = if range > 0.0 { (row[j] - params.min[j]) / range } else { 0.0 };
            scaled.set(r, j, v);
        }
    }
    TelemetryFrame::new(frame.feature_names().to_vec(), scaled, frame.labels().to_vec())
}

/// Shuffles rows with a seeded generator and assigns the first
/// floor(ratio x n) to the training frame, the rest to the test frame.
/// Same seed, same split.
pub fn split_train_test(
    frame: &TelemetryFrame,
    train_ratio: f64,
    seed: u64,
) -> Result<(TelemetryFrame, TelemetryFrame), DatasetError> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(DatasetError::BadRatio(train_ratio));
    }
    let n = frame.row_count();
    if n < 2 {
        return Err(DatasetError::TooFewRows(n));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    // the epsilon keeps e.g. 0.7 * 10 from flooring to 6
    let train_n = (train_ratio * n as f64 + 1e-9).floor() as usize;
    let (train_idx, test_idx) = idx.split_at(train_n.min(n));
    Ok((frame.select_rows(train_idx), frame.select_rows(test_idx)))
}

/// Keeps only rows labelled normal (0), preserving order. Errors when no
/// normal rows remain, since training would be impossible.
pub fn filter_normal(frame: &TelemetryFrame) -> Result<TelemetryFrame, DatasetError> {
    let idx: Vec<usize> =
        frame.labels().iter().enumerate().filter(|(_, &l)| l == 0).map(|(i, _)| i).collect();
    if idx.is_empty() {
        return Err(DatasetError::NoNormalSamples);
    }
    Ok(frame.select_rows(&idx))
}

/// Generates `normal_count` rows from an isotropic Gaussian cluster at the
/// origin and `anomaly_count` rows uniform over the box
/// `[-halfwidth, halfwidth]^d` excluding the ball of radius 3 x spread.
/// Column names are `f0..f{d-1}`; deterministic per seed.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<TelemetryFrame, DatasetError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim;
    let mut data = Vec::with_capacity((spec.normal_count + spec.anomaly_count) * d);
    for _ in 0..spec.normal_count {
        for _ in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            data.push(z * spec.spread);
        }
    }
    let exclusion = 3.0 * spec.spread;
    for _ in 0..spec.anomaly_count {
        // rejection sampling; the spec invariant keeps the acceptance
        // probability bounded away from zero
        loop {
            let candidate: Vec<f64> =
                (0..d).map(|_| rng.random_range(-spec.halfwidth..spec.halfwidth)).collect();
            let norm = candidate.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > exclusion {
                data.extend_from_slice(&candidate);
                break;
            }
        }
    }
    let mut labels = vec![0u8; spec.normal_count];
    labels.extend(std::iter::repeat_n(1u8, spec.anomaly_count));
    let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    let rows = spec.normal_count + spec.anomaly_count;
    let features = Matrix::from_vec(data, rows, d)?;
    TelemetryFrame::new(names, features, labels)
}
