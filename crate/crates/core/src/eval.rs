//! Confusion-matrix construction and the derived classification metrics,
//! carried as percentages to match the usual benchmark tables, with raw
//! fractions stored alongside to avoid rounding ambiguity.
//!
//! The anomaly class (label 1) is the positive class throughout. Degenerate
//! denominators yield 0.0 plus an explicit flag instead of an error so that
//! benchmark runs complete even when a model predicts a single class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("truth has {truth} entries but predictions have {predicted}")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("empty confusion matrix")]
    EmptyMatrix,
}

pub const FLAG_NO_POSITIVE_PREDICTIONS: &str = "no positive predictions";
pub const FLAG_NO_POSITIVE_TRUTH: &str = "no positive truth";

/// TP/TN/FP/FN counts with anomaly = positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub true_negatives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_count: u64) -> Self {
        Self {
            true_positives: tp,
            true_negatives: tn,
            false_positives: fp,
            false_negatives: fn_count,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }
}

/// Counts prediction outcomes against ground truth. Any nonzero mark is
/// treated as the anomaly class.
pub fn confusion(truth: &[u8], predicted: &[u8]) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch { truth: truth.len(), predicted: predicted.len() });
    }
    if truth.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t != 0, p != 0) {
            (true, true) => cm.true_positives += 1,
            (false, false) => cm.true_negatives += 1,
            (false, true) => cm.false_positives += 1,
            (true, false) => cm.false_negatives += 1,
        }
    }
    Ok(cm)
}

/// 100 * (TP + TN) / total.
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    Ok(100.0 * (cm.true_positives + cm.true_negatives) as f64 / total as f64)
}

/// 100 * TP / (TP + FP); 0.0 when nothing was predicted positive (the
/// caller flags that case).
pub fn precision(cm: &ConfusionMatrix) -> f64 {
    let denom = cm.true_positives + cm.false_positives;
    if denom == 0 {
        return 0.0;
    }
    100.0 * cm.true_positives as f64 / denom as f64
}

/// 100 * TP / (TP + FN); 0.0 when the truth has no positives.
pub fn recall(cm: &ConfusionMatrix) -> f64 {
    let denom = cm.true_positives + cm.false_negatives;
    if denom == 0 {
        return 0.0;
    }
    100.0 * cm.true_positives as f64 / denom as f64
}

/// Harmonic mean 2PR / (P + R) of precision and recall (both in percent);
/// 0.0 when P + R = 0.
pub fn f1(precision_pct: f64, recall_pct: f64) -> f64 {
    let sum = precision_pct + recall_pct;
    if sum <= 0.0 {
        return 0.0;
    }
    2.0 * precision_pct * recall_pct / sum
}

/// Row-normalized rates. A zero row leaves its rates undefined (`None`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedConfusion {
    pub tpr: Option<f64>,
    pub fnr: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
}

pub fn normalized_confusion(cm: &ConfusionMatrix) -> NormalizedConfusion {
    let pos = cm.true_positives + cm.false_negatives;
    let neg = cm.true_negatives + cm.false_positives;
    let (tpr, fnr) = if pos > 0 {
        let p = pos as f64;
        (Some(cm.true_positives as f64 / p), Some(cm.false_negatives as f64 / p))
    } else {
        (None, None)
    };
    let (tnr, fpr) = if neg > 0 {
        let n = neg as f64;
        (Some(cm.true_negatives as f64 / n), Some(cm.false_positives as f64 / n))
    } else {
        (None, None)
    };
    NormalizedConfusion { tpr, fnr, tnr, fpr }
}

/// Metric values as fractions in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricFractions {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// The four classification metrics in percent, plus raw fractions and any
/// degeneracy flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fractions: MetricFractions,
    pub flags: Vec<String>,
}

impl MetricsReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self, EvalError> {
        let acc = accuracy(cm)?;
        let prec = precision(cm);
        let rec = recall(cm);
        let f1_pct = f1(prec, rec);
        let mut flags = Vec::new();
        if cm.true_positives + cm.false_positives == 0 {
            flags.push(FLAG_NO_POSITIVE_PREDICTIONS.to_string());
        }
        if cm.true_positives + cm.false_negatives == 0 {
            flags.push(FLAG_NO_POSITIVE_TRUTH.to_string());
        }
        Ok(Self {
            accuracy: acc,
            precision: prec,
            recall: rec,
            f1: f1_pct,
            fractions: MetricFractions {
                accuracy: acc / 100.0,
                precision: prec / 100.0,
                recall: rec / 100.0,
                f1: f1_pct / 100.0,
            },
            flags,
        })
    }
}
