//! Resource measurement: batch inference wall time, serialized model size,
//! and peak resident memory.
//!
//! Timing uses the monotonic clock, discards warmup runs, and reports the
//! median over repeats (robust to scheduler noise on desk machines). The
//! timed region must contain scoring only: no I/O, no serialization, no
//! metric computation, and no concurrent work. Peak RAM is read from the
//! OS high-water mark for the whole process, which matches "during model
//! execution" at process granularity but includes harness overhead; reports
//! carry that caveat.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("cannot time an empty batch")]
    EmptyBatch,
    #[error("need at least 3 repeats for a median, got {0}")]
    TooFewRepeats(usize),
    #[error("need at least 1 warmup run, got {0}")]
    TooFewWarmups(usize),
}

/// Median-of-repeats batch timing with the raw measurements kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    /// Median wall time of scoring the full batch, in milliseconds.
    pub total_batch_ms: f64,
    /// 1000 * total_batch_ms / sample_count.
    pub per_sample_us: f64,
    pub repeats: usize,
    pub warmup_runs: usize,
    pub sample_count: usize,
    /// The individual post-warmup measurements, in order.
    pub raw_ms: Vec<f64>,
}

/// Times `scorer` over the full batch: `warmup` discarded runs, then
/// `repeats` measured runs, reporting the median. The scorer is called with
/// the batch and must do the scoring work itself (and nothing else).
pub fn time_inference<F: FnMut(&Matrix)>(
    mut scorer: F,
    batch: &Matrix,
    repeats: usize,
    warmup: usize,
) -> Result<TimingReport, ProfileError> {
    if batch.rows() == 0 {
        return Err(ProfileError::EmptyBatch);
    }
    if repeats < 3 {
        return Err(ProfileError::TooFewRepeats(repeats));
    }
    if warmup < 1 {
        return Err(ProfileError::TooFewWarmups(warmup));
    }
    for _ in 0..warmup {
        scorer(batch);
    }
    let mut raw_ms = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        scorer(batch);
        raw_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let total_batch_ms = median(&raw_ms);
    Ok(TimingReport {
        total_batch_ms,
        per_sample_us: 1e3 * total_batch_ms / batch.rows() as f64,
        repeats,
        warmup_runs: warmup,
        sample_count: batch.rows(),
        raw_ms,
    })
}

/// Median with the even-count convention of averaging the middle pair.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Byte length of a serialized model artifact; this is the model-size
/// metric.
pub fn measure_model_size(bytes: &[u8]) -> usize {
    bytes.len()
}

/// Resource measurements for one model: exact serialized size, peak
/// resident memory, and the batch timing report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    /// Byte length of the serialized model artifact.
    pub model_size_bytes: usize,
    /// Peak RSS in MB (1 MB = 2^20 bytes); `None` when the platform offers
    /// no high-water-mark facility.
    pub peak_ram_mb: Option<f64>,
    pub timing: TimingReport,
}

/// Resident-set snapshots around a measured task. `peak_mb` is `None` when
/// the platform offers no high-water-mark facility; reports print an
/// "unsupported" marker rather than a fabricated number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamProbe {
    /// Max of the process high-water mark and the start/end samples, in MB
    /// (1 MB = 2^20 bytes).
    pub peak_mb: Option<f64>,
    pub rss_start_mb: Option<f64>,
    pub rss_end_mb: Option<f64>,
}

/// Runs `task` and samples resident memory at start and end plus the OS
/// lifetime high-water mark.
pub fn measure_peak_ram<T>(task: impl FnOnce() -> T) -> (T, RamProbe) {
    let rss_start = current_rss_bytes();
    let result = task();
    let rss_end = current_rss_bytes();
    let hwm = peak_rss_bytes();
    let to_mb = |b: u64| b as f64 / (1u64 << 20) as f64;
    let peak_mb = [hwm, rss_start, rss_end].iter().flatten().max().copied().map(to_mb);
    (
        result,
        RamProbe {
            peak_mb,
            rss_start_mb: rss_start.map(to_mb),
            rss_end_mb: rss_end.map(to_mb),
        },
    )
}

/// Current resident-set size of this process, if the platform exposes it.
pub fn current_rss_bytes() -> Option<u64> {
    #[cfg(target_os = "linux")]
    {
        let status = std::fs::read_to_string("/proc/self/status").ok()?;
        for line in status.lines() {
            if let Some(rest) = line.strip_prefix("VmRSS:") {
                let kb: u64 = rest.split_whitespace().next()?.parse().ok()?;
                return Some(kb * 1024);
            }
        }
        None
    }
    #[cfg(not(target_os = "linux"))]
    {
        None
    }
}

/// Lifetime peak resident-set size (high-water mark) of this process.
pub fn peak_rss_bytes() -> Option<u64> {
    #[cfg(unix)]
    {
        let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
        let rc = unsafe { libc::getrusage(libc::RUSAGE_SELF, &mut usage) };
        if rc != 0 || usage.ru_maxrss <= 0 {
            return None;
        }
        // ru_maxrss is KiB on Linux, bytes on macOS
        #[cfg(target_os = "macos")]
        let bytes = usage.ru_maxrss as u64;
        #[cfg(not(target_os = "macos"))]
        let bytes = usage.ru_maxrss as u64 * 1024;
        Some(bytes)
    }
    #[cfg(not(unix))]
    {
        None
    }
}
