//! One-class SVM with an RBF kernel, built from scratch.
//!
//! Training solves the standard nu-parameterised one-class dual
//!
//! ```text
//! minimize   1/2 sum_ij alpha_i alpha_j k(x_i, x_j)
//! subject to 0 <= alpha_i <= 1/(nu n),  sum_i alpha_i = 1
//! ```
//!
//! by pairwise (SMO-style) updates on the maximal-KKT-violation pair, with
//! deterministic lowest-index tie-breaking. The offset `rho` is recovered
//! from the gradient at the unbounded support vectors, and the decision
//! function `f(x) = sum_i alpha_i k(sv_i, x) - rho` is >= 0 inside the
//! learned boundary. Points with negative decision values are anomalies.
//!
//! `brute_force_dual` solves the same dual by simplex-grid enumeration plus
//! local pair descent; it exists so the solver can be checked against an
//! independent optimum on tiny instances.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::codec::{CodecError, Reader, Writer};
use crate::matrix::Matrix;

const MAGIC: [u8; 4] = *b"OSv1";
/// Full kernel matrix is precomputed up to this many training rows; larger
/// problems fall back to an LRU row cache.
const FULL_KERNEL_MAX_ROWS: usize = 4096;
/// Row-cache memory budget in bytes.
const ROW_CACHE_BUDGET: usize = 256 << 20;

#[derive(Debug, Error)]
pub enum OcSvmError {
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("nu {nu} with {n} rows gives nu*n < 1; the alpha bound is infeasible")]
    InfeasibleNu { nu: f64, n: usize },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("brute-force oracle is limited to 6 rows, got {0}")]
    OracleTooLarge(usize),
    #[error("cannot resolve scale gamma: training features have zero variance")]
    DegenerateGamma,
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// RBF width: a fixed positive value, or `scale` = 1 / (d * mean per-feature
/// variance) resolved against the training data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaParam {
    Scale,
    Fixed(f64),
}

impl Serialize for GammaParam {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            GammaParam::Scale => s.serialize_str("scale"),
            GammaParam::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for GammaParam {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(GammaParam::Fixed(v)),
            Raw::Text(t) if t == "scale" => Ok(GammaParam::Scale),
            Raw::Text(t) => Err(D::Error::custom(format!(
                "gamma must be a positive number or \"scale\", got {t:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcSvmParams {
    /// Upper bound on the training outlier fraction and lower bound on the
    /// support-vector fraction.
    pub nu: f64,
    pub gamma: GammaParam,
    /// KKT violation tolerance at convergence.
    pub tolerance: f64,
    /// Iteration budget: `max_passes * n` pairwise updates.
    pub max_passes: usize,
    /// Carried for report provenance; the solver itself is deterministic
    /// and draws no random numbers.
    pub seed: u64,
}

impl Default for OcSvmParams {
    fn default() -> Self {
        Self { nu: 0.05, gamma: GammaParam::Scale, tolerance: 1e-3, max_passes: 10, seed: 0 }
    }
}

/// A fitted one-class SVM: retained support vectors (alpha > 0), their dual
/// coefficients, the offset, and the resolved kernel width. Immutable after
/// fitting; concurrent prediction is safe.
#[derive(Debug, Clone, PartialEq)]
pub struct OcSvmModel {
    support_vectors: Matrix,
    alphas: Vec<f64>,
    rho: f64,
    gamma: f64,
    params: OcSvmParams,
}

/// Everything the solver knows at convergence, including the full training
/// alpha vector (with exact zeros) that the model itself drops.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub model: OcSvmModel,
    /// Dual coefficients for every training row.
    pub alphas: Vec<f64>,
    /// Pairwise updates performed.
    pub iterations: usize,
    pub converged: bool,
    /// Final selection gap max(g_low - g_up, 0); bounds every KKT residual.
    pub final_violation: f64,
    /// Dual objective value at the returned alphas.
    pub objective: f64,
}

/// `exp(-gamma * ||x - y||^2)`, in (0, 1].
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64, OcSvmError> {
    if x.len() != y.len() {
        return Err(OcSvmError::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    Ok(rbf(x, y, gamma))
}

#[inline]
fn rbf(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let mut d2 = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

/// Resolves the gamma parameter against training data: `scale` becomes
/// `1 / (d * mean per-feature variance)`.
pub fn resolve_gamma(train: &Matrix, gamma: GammaParam) -> Result<f64, OcSvmError> {
    match gamma {
        GammaParam::Fixed(v) => {
            if !(v > 0.0 && v.is_finite()) {
                return Err(OcSvmError::BadParams(format!("gamma must be positive, got {v}")));
            }
            Ok(v)
        }
        GammaParam::Scale => {
            let n = train.rows();
            let d = train.cols();
            if n == 0 || d == 0 {
                return Err(OcSvmError::DegenerateGamma);
            }
            let mut mean_var = 0.0;
            for c in 0..d {
                let mut sum = 0.0;
                let mut sum_sq = 0.0;
                for r in 0..n {
                    let v = train.get(r, c);
                    sum += v;
                    sum_sq += v * v;
                }
                let mean = sum / n as f64;
                mean_var += (sum_sq / n as f64 - mean * mean).max(0.0);
            }
            mean_var /= d as f64;
            let g = 1.0 / (d as f64 * mean_var);
            if !g.is_finite() || g <= 0.0 {
                return Err(OcSvmError::DegenerateGamma);
            }
            Ok(g)
        }
    }
}

/// Kernel value storage: a full precomputed matrix for small problems, an
/// LRU row cache above `FULL_KERNEL_MAX_ROWS`.
enum KernelStore<'a> {
    Full { k: Vec<f64>, n: usize },
    Cached {
        train: &'a Matrix,
        gamma: f64,
        rows: std::collections::HashMap<usize, Vec<f64>>,
        order: std::collections::VecDeque<usize>,
        cap: usize,
    },
}

impl<'a> KernelStore<'a> {
    fn new(train: &'a Matrix, gamma: f64) -> Self {
        let n = train.rows();
        if n <= FULL_KERNEL_MAX_ROWS {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                k[i * n + i] = 1.0;
                for j in (i + 1)..n {
                    let v = rbf(train.row(i), train.row(j), gamma);
                    k[i * n + j] = v;
                    k[j * n + i] = v;
                }
            }
            KernelStore::Full { k, n }
        } else {
            let cap = (ROW_CACHE_BUDGET / (8 * n)).max(16);
            KernelStore::Cached {
                train,
                gamma,
                rows: std::collections::HashMap::new(),
                order: std::collections::VecDeque::new(),
                cap,
            }
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        match self {
            KernelStore::Full { k, n } => &k[i * *n..(i + 1) * *n],
            KernelStore::Cached { train, gamma, rows, order, cap } => {
                if !rows.contains_key(&i) {
                    if rows.len() >= *cap {
                        if let Some(evict) = order.pop_front() {
                            rows.remove(&evict);
                        }
                    }
                    let xi = train.row(i);
                    let row: Vec<f64> =
                        (0..train.rows()).map(|j| rbf(xi, train.row(j), *gamma)).collect();
                    rows.insert(i, row);
                    order.push_back(i);
                }
                rows.get(&i).unwrap()
            }
        }
    }
}

fn validate_fit_inputs(train: &Matrix, params: &OcSvmParams) -> Result<(), OcSvmError> {
    let n = train.rows();
    if n < 2 {
        return Err(OcSvmError::TooFewRows(n));
    }
    if !train.all_finite() {
        return Err(OcSvmError::NonFinite);
    }
    if !(params.nu > 0.0 && params.nu <= 1.0) {
        return Err(OcSvmError::BadParams(format!("nu must be in (0, 1], got {}", params.nu)));
    }
    if params.nu * (n as f64) < 1.0 {
        return Err(OcSvmError::InfeasibleNu { nu: params.nu, n });
    }
    if !(params.tolerance > 0.0 && params.tolerance.is_finite()) {
        return Err(OcSvmError::BadParams(format!(
            "tolerance must be positive, got {}",
            params.tolerance
        )));
    }
    if params.max_passes == 0 {
        return Err(OcSvmError::BadParams("max_passes must be positive".into()));
    }
    Ok(())
}

/// Fits the one-class SVM; see [`fit_ocsvm_detailed`] for the solver
/// diagnostics.
pub fn fit_ocsvm(train: &Matrix, params: &OcSvmParams) -> Result<OcSvmModel, OcSvmError> {
    Ok(fit_ocsvm_detailed(train, params)?.model)
}

/// Fits the one-class SVM and returns the full solve outcome.
pub fn fit_ocsvm_detailed(train: &Matrix, params: &OcSvmParams) -> Result<SolveOutcome, OcSvmError> {
    validate_fit_inputs(train, params)?;
    let n = train.rows();
    let gamma = resolve_gamma(train, params.gamma)?;
    let upper = 1.0 / (params.nu * n as f64);
    let mut store = KernelStore::new(train, gamma);

    // feasible start: mass 1 spread over the first ceil(nu n) rows, the
    // last of them fractional
    let mut alpha = vec![0.0; n];
    let full = (params.nu * n as f64).floor() as usize;
    let full = full.min(n);
    for a in alpha.iter_mut().take(full) {
        *a = upper;
    }
    if full < n {
        let remainder = 1.0 - full as f64 * upper;
        if remainder > 0.0 {
            alpha[full] = remainder.min(upper);
        }
    }

    // gradient of the dual objective: g = K alpha
    let mut g = vec![0.0; n];
    for (j, &aj) in alpha.iter().enumerate() {
        if aj > 0.0 {
            let row = store.row(j);
            for (gk, &kjk) in g.iter_mut().zip(row) {
                *gk += aj * kjk;
            }
        }
    }

    let budget = params.max_passes.saturating_mul(n);
    let mut iterations = 0usize;
    let mut converged = false;
    let final_violation;

    loop {
        // maximal-violation pair; strict comparisons keep the lowest index
        // on ties
        let mut i_up = usize::MAX;
        let mut g_up = f64::INFINITY;
        let mut i_low = usize::MAX;
        let mut g_low = f64::NEG_INFINITY;
        for (idx, (&a, &gi)) in alpha.iter().zip(&g).enumerate() {
            if a < upper && gi < g_up {
                g_up = gi;
                i_up = idx;
            }
            if a > 0.0 && gi > g_low {
                g_low = gi;
                i_low = idx;
            }
        }
        let violation = g_low - g_up;
        if violation <= params.tolerance || i_up == usize::MAX {
            converged = true;
            final_violation = violation.max(0.0);
            break;
        }
        if iterations >= budget {
            final_violation = violation;
            break;
        }

        let (i, j) = (i_up, i_low);
        let (k_ii, k_ij) = {
            let row_i = store.row(i);
            (row_i[i], row_i[j])
        };
        let k_jj = {
            let row_j = store.row(j);
            row_j[j]
        };
        let eta = k_ii - 2.0 * k_ij + k_jj;

        let cap_i = upper - alpha[i];
        let cap_j = alpha[j];
        let t_max = cap_i.min(cap_j);
        let t = if eta > 1e-12 { ((g_low - g_up) / eta).min(t_max) } else { t_max };

        if t == cap_i {
            alpha[i] = upper;
        } else {
            alpha[i] += t;
        }
        if t == cap_j {
            alpha[j] = 0.0;
        } else {
            alpha[j] -= t;
        }

        {
            let row_i = store.row(i);
            for (gk, &kik) in g.iter_mut().zip(row_i) {
                *gk += t * kik;
            }
        }
        {
            let row_j = store.row(j);
            for (gk, &kjk) in g.iter_mut().zip(row_j) {
                *gk -= t * kjk;
            }
        }
        iterations += 1;
    }

    // rho: mean gradient over unbounded support vectors; with none, the
    // midpoint of the bound groups' feasible interval
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lo = f64::NEG_INFINITY; // max g over alpha = upper
    let mut hi = f64::INFINITY; // min g over alpha = 0
    for (idx, &a) in alpha.iter().enumerate() {
        if a > 0.0 && a < upper {
            free_sum += g[idx];
            free_count += 1;
        } else if a >= upper {
            lo = lo.max(g[idx]);
        } else {
            hi = hi.min(g[idx]);
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo
    } else {
        hi
    };

    let objective = 0.5 * alpha.iter().zip(&g).map(|(a, gi)| a * gi).sum::<f64>();

    let sv_idx: Vec<usize> =
        alpha.iter().enumerate().filter(|(_, &a)| a > 0.0).map(|(i, _)| i).collect();
    let model = OcSvmModel {
        support_vectors: train.select_rows(&sv_idx),
        alphas: sv_idx.iter().map(|&i| alpha[i]).collect(),
        rho,
        gamma,
        params: *params,
    };

    Ok(SolveOutcome { model, alphas: alpha, iterations, converged, final_violation, objective })
}

/// Dual objective `1/2 sum_ij alpha_i alpha_j k(x_i, x_j)` evaluated from
/// scratch. Quadratic in the row count; intended for verification.
pub fn dual_objective(train: &Matrix, alphas: &[f64], gamma: f64) -> Result<f64, OcSvmError> {
    if alphas.len() != train.rows() {
        return Err(OcSvmError::DimensionMismatch { expected: train.rows(), got: alphas.len() });
    }
    let n = train.rows();
    let mut obj = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if alphas[j] != 0.0 {
                obj += alphas[i] * alphas[j] * rbf(train.row(i), train.row(j), gamma);
            }
        }
    }
    Ok(0.5 * obj)
}

/// Largest KKT residual of a candidate solution under offset `rho`: zero
/// alphas must sit inside (f >= 0), bound alphas outside (f <= 0), and
/// unbounded alphas on the boundary (f = 0), each up to the returned slack.
pub fn kkt_max_residual(
    train: &Matrix,
    alphas: &[f64],
    gamma: f64,
    nu: f64,
    rho: f64,
) -> Result<f64, OcSvmError> {
    if alphas.len() != train.rows() {
        return Err(OcSvmError::DimensionMismatch { expected: train.rows(), got: alphas.len() });
    }
    let n = train.rows();
    let upper = 1.0 / (nu * n as f64);
    let eps = upper * 1e-10;
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut gi = 0.0;
        for j in 0..n {
            if alphas[j] > 0.0 {
                gi += alphas[j] * rbf(train.row(i), train.row(j), gamma);
            }
        }
        let f = gi - rho;
        let residual = if alphas[i] <= eps {
            (-f).max(0.0)
        } else if alphas[i] >= upper - eps {
            f.max(0.0)
        } else {
            f.abs()
        };
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// Minimises the same dual by projected exhaustive search on a simplex grid
/// of `grid_steps` divisions, then refines the best cell by local
/// coordinate-pair descent until a sweep improves the objective by less
/// than 1e-9. Limited to 6 rows; this is the verification oracle.
pub fn brute_force_dual(
    train: &Matrix,
    params: &OcSvmParams,
    grid_steps: usize,
) -> Result<Vec<f64>, OcSvmError> {
    let n = train.rows();
    if n > 6 {
        return Err(OcSvmError::OracleTooLarge(n));
    }
    validate_fit_inputs(train, params)?;
    if grid_steps == 0 {
        return Err(OcSvmError::BadParams("grid_steps must be positive".into()));
    }
    let gamma = resolve_gamma(train, params.gamma)?;
    let upper = 1.0 / (params.nu * n as f64);

    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = rbf(train.row(i), train.row(j), gamma);
        }
    }
    let objective = |alpha: &[f64]| -> f64 {
        let mut obj = 0.0;
        for i in 0..n {
            for j in 0..n {
                obj += alpha[i] * alpha[j] * k[i * n + j];
            }
        }
        0.5 * obj
    };

    // grid enumeration: compositions of grid_steps into n parts, each part
    // capped by the alpha upper bound
    let cap_units = ((upper * grid_steps as f64) + 1e-9).floor() as usize;
    let mut best: Vec<f64> = vec![1.0 / n as f64; n]; // uniform point is always feasible
    let mut best_obj = objective(&best);
    let mut units = vec![0usize; n];
    enumerate_compositions(grid_steps, cap_units, 0, &mut units, &mut |units| {
        let alpha: Vec<f64> =
            units.iter().map(|&u| u as f64 / grid_steps as f64).collect();
        let obj = objective(&alpha);
        if obj < best_obj {
            best_obj = obj;
            best = alpha;
        }
    });

    // local refinement around the best cell
    let mut alpha = best;
    for _ in 0..10_000 {
        let before = objective(&alpha);
        for i in 0..n {
            for j in (i + 1)..n {
                let gi: f64 = (0..n).map(|l| alpha[l] * k[i * n + l]).sum();
                let gj: f64 = (0..n).map(|l| alpha[l] * k[j * n + l]).sum();
                let eta = k[i * n + i] - 2.0 * k[i * n + j] + k[j * n + j];
                let t_lo = (-alpha[i]).max(alpha[j] - upper);
                let t_hi = (upper - alpha[i]).min(alpha[j]);
                let t = if eta > 1e-15 {
                    ((gj - gi) / eta).clamp(t_lo, t_hi)
                } else if gj > gi {
                    t_hi
                } else if gj < gi {
                    t_lo
                } else {
                    0.0
                };
                if t != 0.0 {
                    if t == t_hi && t_hi == upper - alpha[i] {
                        alpha[i] = upper;
                    } else {
                        alpha[i] += t;
                    }
                    if t == t_hi && t_hi == alpha[j] {
                        alpha[j] = 0.0;
                    } else {
                        alpha[j] -= t;
                    }
                    alpha[i] = alpha[i].clamp(0.0, upper);
                    alpha[j] = alpha[j].clamp(0.0, upper);
                }
            }
        }
        if before - objective(&alpha) < 1e-9 {
            break;
        }
    }
    Ok(alpha)
}

fn enumerate_compositions(
    remaining: usize,
    cap: usize,
    idx: usize,
    units: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    let n = units.len();
    if idx == n - 1 {
        if remaining <= cap {
            units[idx] = remaining;
            visit(units);
        }
        return;
    }
    // the remaining parts can absorb at most (n - idx - 1) * cap units
    let tail_cap = (n - idx - 1) * cap;
    let min_here = remaining.saturating_sub(tail_cap);
    for u in min_here..=cap.min(remaining) {
        units[idx] = u;
        enumerate_compositions(remaining - u, cap, idx + 1, units, visit);
    }
}

impl OcSvmModel {
    pub fn support_vector_count(&self) -> usize {
        self.alphas.len()
    }

    pub fn support_vectors(&self) -> &Matrix {
        &self.support_vectors
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn params(&self) -> &OcSvmParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.cols()
    }

    /// `f(x) = sum_i alpha_i k(sv_i, x) - rho`; >= 0 inside the boundary.
    pub fn decision_value(&self, point: &[f64]) -> Result<f64, OcSvmError> {
        if point.len() != self.dim() {
            return Err(OcSvmError::DimensionMismatch { expected: self.dim(), got: point.len() });
        }
        let mut sum = 0.0;
        for (sv, &a) in self.support_vectors.iter_rows().zip(&self.alphas) {
            sum += a * rbf(sv, point, self.gamma);
        }
        Ok(sum - self.rho)
    }

    pub fn decision_values(&self, batch: &Matrix) -> Result<Vec<f64>, OcSvmError> {
        if batch.cols() != self.dim() {
            return Err(OcSvmError::DimensionMismatch { expected: self.dim(), got: batch.cols() });
        }
        batch.iter_rows().map(|row| self.decision_value(row)).collect()
    }

    /// Label 1 (anomaly) iff the decision value is strictly negative.
    pub fn predict(&self, batch: &Matrix) -> Result<Vec<u8>, OcSvmError> {
        Ok(self.decision_values(batch)?.iter().map(|&f| u8::from(f < 0.0)).collect())
    }
}

/// Encodes the model as the portable "OSv1" byte format: magic tag, params,
/// resolved gamma, support-vector count and matrix, alphas, offset. The
/// byte length of this artifact is the model-size metric.
pub fn serialize_ocsvm(model: &OcSvmModel) -> Vec<u8> {
    let mut w = Writer::new();
    w.magic(MAGIC);
    w.f64(model.params.nu);
    w.f64(model.params.tolerance);
    w.u64(model.params.max_passes as u64);
    w.u64(model.params.seed);
    w.u8(u8::from(model.params.gamma == GammaParam::Scale));
    w.f64(model.gamma);
    w.u32(model.dim() as u32);
    w.u32(model.support_vector_count() as u32);
    for row in model.support_vectors.iter_rows() {
        for &v in row {
            w.f64(v);
        }
    }
    for &a in &model.alphas {
        w.f64(a);
    }
    w.f64(model.rho);
    w.into_bytes()
}

pub fn deserialize_ocsvm(bytes: &[u8]) -> Result<OcSvmModel, OcSvmError> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let nu = r.f64()?;
    let tolerance = r.f64()?;
    let max_passes = r.u64()? as usize;
    let seed = r.u64()?;
    let gamma_is_scale = r.u8()? != 0;
    let gamma = r.f64()?;
    let dim = r.u32()? as usize;
    let m = r.u32()? as usize;
    if dim == 0 {
        return Err(CodecError::Invalid { field: "dim", detail: "zero feature count".into() }.into());
    }
    if m == 0 {
        return Err(CodecError::Invalid { field: "sv_count", detail: "no support vectors".into() }.into());
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(CodecError::Invalid { field: "gamma", detail: format!("{gamma}") }.into());
    }
    let mut data = Vec::with_capacity(m * dim);
    for _ in 0..m * dim {
        data.push(r.f64()?);
    }
    let mut alphas = Vec::with_capacity(m);
    for _ in 0..m {
        let a = r.f64()?;
        if !(a > 0.0 && a.is_finite()) {
            return Err(CodecError::Invalid { field: "alpha", detail: format!("{a}") }.into());
        }
        alphas.push(a);
    }
    let rho = r.f64()?;
    r.finish()?;
    let support_vectors = Matrix::from_vec(data, m, dim)
        .map_err(|e| CodecError::Invalid { field: "support_vectors", detail: e.to_string() })?;
    Ok(OcSvmModel {
        support_vectors,
        alphas,
        rho,
        gamma,
        params: OcSvmParams {
            nu,
            gamma: if gamma_is_scale { GammaParam::Scale } else { GammaParam::Fixed(gamma) },
            tolerance,
            max_passes,
            seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
        let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        Matrix::from_vec(data, n, d).unwrap()
    }

    #[test]
    fn rbf_kernel_reference_points() {
        let x = [1.0, 2.0];
        assert_eq!(rbf_kernel(&x, &x, 0.7).unwrap(), 1.0);

        // gamma = 1, ||x - y||^2 = ln 2 -> exp(-ln 2) = 0.5
        let y = [1.0 + (2f64.ln()).sqrt(), 2.0];
        assert!((rbf_kernel(&x, &y, 1.0).unwrap() - 0.5).abs() < 1e-12);

        // large gamma at unit distance decays to zero
        let z = [2.0, 2.0];
        assert!(rbf_kernel(&x, &z, 1e6).unwrap() < 1e-10);
    }

    #[test]
    fn rbf_kernel_dimension_mismatch() {
        assert!(matches!(
            rbf_kernel(&[1.0], &[1.0, 2.0], 1.0),
            Err(OcSvmError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn two_points_nu_one_forces_half_half() {
        let train = matrix(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        let params =
            OcSvmParams { nu: 1.0, gamma: GammaParam::Fixed(0.5), ..OcSvmParams::default() };
        let out = fit_ocsvm_detailed(&train, &params).unwrap();
        assert_eq!(out.alphas, vec![0.5, 0.5]);
        assert!(out.converged);
    }

    #[test]
    fn mirror_points_split_mass_evenly() {
        let train = matrix(&[vec![-1.0, 0.0], vec![1.0, 0.0]]);
        let params =
            OcSvmParams { nu: 0.5, gamma: GammaParam::Fixed(0.3), ..OcSvmParams::default() };
        let out = fit_ocsvm_detailed(&train, &params).unwrap();
        assert!((out.alphas[0] - 0.5).abs() < 1e-9);
        assert!((out.alphas[1] - 0.5).abs() < 1e-9);

        let oracle = brute_force_dual(&train, &params, 32).unwrap();
        let fit_obj = dual_objective(&train, &out.alphas, out.model.gamma()).unwrap();
        let oracle_obj = dual_objective(&train, &oracle, out.model.gamma()).unwrap();
        assert!(fit_obj <= oracle_obj + 1e-6);
    }

    #[test]
    fn oracle_two_points_nu_one() {
        let train = matrix(&[vec![0.0], vec![3.0]]);
        let params =
            OcSvmParams { nu: 1.0, gamma: GammaParam::Fixed(1.0), ..OcSvmParams::default() };
        let alpha = brute_force_dual(&train, &params, 16).unwrap();
        assert!((alpha[0] - 0.5).abs() < 1e-9);
        assert!((alpha[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn oracle_identical_points_objective_is_half() {
        // all kernel entries are 1, so the objective is (sum alpha)^2 / 2 =
        // 1/2 for any feasible alpha
        let train = matrix(&[vec![2.0], vec![2.0]]);
        let params =
            OcSvmParams { nu: 0.5, gamma: GammaParam::Fixed(1.0), ..OcSvmParams::default() };
        let alpha = brute_force_dual(&train, &params, 16).unwrap();
        let obj = dual_objective(&train, &alpha, 1.0).unwrap();
        assert!((obj - 0.5).abs() < 1e-9);
    }

    #[test]
    fn oracle_equilateral_symmetry() {
        // equilateral triangle in the plane: all pairwise kernels equal, so
        // the symmetric point is optimal
        let h = 3f64.sqrt() / 2.0;
        let train = matrix(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]]);
        let params =
            OcSvmParams { nu: 0.9, gamma: GammaParam::Fixed(0.8), ..OcSvmParams::default() };
        let alpha = brute_force_dual(&train, &params, 30).unwrap();
        for &a in &alpha {
            assert!((a - 1.0 / 3.0).abs() < 1e-6, "alpha = {alpha:?}");
        }
    }

    #[test]
    fn solver_matches_oracle_on_small_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..12 {
            let n = 2 + (case % 5);
            let d = 1 + (case % 3);
            let train = random_matrix(&mut rng, n, d);
            let nu = if case % 2 == 0 { 0.5 } else { 1.0 };
            if nu * (n as f64) < 1.0 {
                continue;
            }
            let params = OcSvmParams { nu, gamma: GammaParam::Scale, ..OcSvmParams::default() };
            let out = fit_ocsvm_detailed(&train, &params).unwrap();
            let oracle = brute_force_dual(&train, &params, 24).unwrap();
            let gamma = out.model.gamma();
            let fit_obj = dual_objective(&train, &out.alphas, gamma).unwrap();
            let oracle_obj = dual_objective(&train, &oracle, gamma).unwrap();
            assert!(
                fit_obj <= oracle_obj + 1e-6,
                "case {case}: solver {fit_obj} vs oracle {oracle_obj}"
            );
        }
    }

    #[test]
    fn oracle_too_large() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let train = random_matrix(&mut rng, 7, 2);
        assert!(matches!(
            brute_force_dual(&train, &OcSvmParams::default(), 8),
            Err(OcSvmError::OracleTooLarge(7))
        ));
    }

    #[test]
    fn fit_rejects_infeasible_nu() {
        let train = matrix(&[vec![0.0], vec![1.0], vec![2.0]]);
        let params = OcSvmParams { nu: 0.1, ..OcSvmParams::default() };
        assert!(matches!(
            fit_ocsvm(&train, &params),
            Err(OcSvmError::InfeasibleNu { n: 3, .. })
        ));
    }

    #[test]
    fn fit_rejects_non_finite_features() {
        let train = Matrix::from_vec(vec![0.0, f64::NAN], 2, 1).unwrap();
        let params = OcSvmParams { nu: 1.0, ..OcSvmParams::default() };
        assert!(matches!(fit_ocsvm(&train, &params), Err(OcSvmError::NonFinite)));
    }

    fn blob(n: usize, seed: u64) -> Matrix {
        let spec = SyntheticSpec {
            normal_count: n,
            anomaly_count: 0,
            dim: 3,
            spread: 1.0,
            halfwidth: 4.0,
        };
        generate_synthetic(&spec, seed).unwrap().features().clone()
    }

    #[test]
    fn feasibility_after_fit() {
        for seed in 0..5 {
            let train = blob(150, seed);
            let params = OcSvmParams { nu: 0.2, ..OcSvmParams::default() };
            let out = fit_ocsvm_detailed(&train, &params).unwrap();
            let upper = 1.0 / (0.2 * 150.0);
            let sum: f64 = out.alphas.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9, "sum = {sum}");
            for &a in &out.alphas {
                assert!((-1e-12..=upper + 1e-12).contains(&a));
            }
        }
    }

    #[test]
    fn kkt_residuals_within_tolerance_after_fit() {
        for seed in 0..5 {
            let train = blob(120, seed + 10);
            let params = OcSvmParams { nu: 0.15, ..OcSvmParams::default() };
            let out = fit_ocsvm_detailed(&train, &params).unwrap();
            assert!(out.converged, "seed {seed} did not converge");
            let residual = kkt_max_residual(
                &train,
                &out.alphas,
                out.model.gamma(),
                params.nu,
                out.model.rho(),
            )
            .unwrap();
            assert!(residual <= params.tolerance, "seed {seed}: residual {residual}");
        }
    }

    #[test]
    fn unbounded_support_vectors_sit_on_the_boundary() {
        let train = blob(100, 3);
        let params = OcSvmParams { nu: 0.3, ..OcSvmParams::default() };
        let out = fit_ocsvm_detailed(&train, &params).unwrap();
        let upper = 1.0 / (params.nu * 100.0);
        let mut found = 0;
        for (i, &a) in out.alphas.iter().enumerate() {
            if a > 0.0 && a < upper {
                let f = out.model.decision_value(train.row(i)).unwrap();
                assert!(f.abs() <= params.tolerance, "row {i}: f = {f}");
                found += 1;
            }
        }
        assert!(found > 0, "expected at least one unbounded support vector");
    }

    #[test]
    fn nu_bounds_the_training_outlier_fraction() {
        // free support vectors sit on f = 0 up to the solver tolerance, so
        // their sign is arbitrary; a decided outlier is f < -tolerance,
        // which at convergence implies alpha at the upper bound and hence a
        // count of at most nu * n
        for seed in 0..10 {
            let n = 250;
            let train = blob(n, seed + 50);
            let params = OcSvmParams { nu: 0.1, ..OcSvmParams::default() };
            let out = fit_ocsvm_detailed(&train, &params).unwrap();
            assert!(out.converged);
            let outliers = train
                .iter_rows()
                .filter(|row| out.model.decision_value(row).unwrap() < -params.tolerance)
                .count();
            let fraction = outliers as f64 / n as f64;
            assert!(
                fraction <= params.nu + 2.0 / n as f64,
                "seed {seed}: outlier fraction {fraction} exceeds nu + 2/n"
            );
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let train = blob(80, 4);
        let params = OcSvmParams { nu: 0.25, ..OcSvmParams::default() };
        let a = fit_ocsvm_detailed(&train, &params).unwrap();
        let b = fit_ocsvm_detailed(&train, &params).unwrap();
        assert_eq!(a.alphas, b.alphas);
        assert_eq!(a.model.rho(), b.model.rho());
    }

    #[test]
    fn decision_value_hand_built_model() {
        let model = OcSvmModel {
            support_vectors: matrix(&[vec![1.0, 2.0]]),
            alphas: vec![1.0],
            rho: 0.5,
            gamma: 1.0,
            params: OcSvmParams::default(),
        };
        // at the support vector itself the kernel is 1
        assert!((model.decision_value(&[1.0, 2.0]).unwrap() - 0.5).abs() < 1e-15);
        // far away the kernel vanishes and f tends to -rho
        let far = [1e3, 2e3];
        assert!((model.decision_value(&far).unwrap() - (-0.5)).abs() < 1e-9);
    }

    #[test]
    fn predict_boundary_convention() {
        let model = OcSvmModel {
            support_vectors: matrix(&[vec![0.0]]),
            alphas: vec![1.0],
            rho: 1.0, // f(0) = 1 - 1 = 0 exactly
            gamma: 1.0,
            params: OcSvmParams::default(),
        };
        let batch = matrix(&[vec![0.0]]);
        assert_eq!(model.predict(&batch).unwrap(), vec![0]);

        let nudged = OcSvmModel { rho: 1.0 + 1e-9, ..model };
        assert_eq!(nudged.predict(&batch).unwrap(), vec![1]);
    }

    #[test]
    fn separable_anomalies_are_flagged() {
        let mut flagged = 0usize;
        for seed in 0..10 {
            let spec = SyntheticSpec {
                normal_count: 100,
                anomaly_count: 10,
                dim: 2,
                spread: 1.0,
                halfwidth: 10.0,
            };
            let frame = generate_synthetic(&spec, seed).unwrap();
            let train = frame.features().select_rows(&(0..100).collect::<Vec<_>>());
            let model = fit_ocsvm(&train, &OcSvmParams::default()).unwrap();
            let labels = model.predict(frame.features()).unwrap();
            flagged += labels[100..].iter().filter(|&&l| l == 1).count();
        }
        assert!(flagged >= 80, "only {flagged}/100 anomalies flagged");
    }

    #[test]
    fn serialization_round_trips_decision_values() {
        let train = blob(90, 8);
        let model = fit_ocsvm(&train, &OcSvmParams { nu: 0.2, ..OcSvmParams::default() }).unwrap();
        let restored = deserialize_ocsvm(&serialize_ocsvm(&model)).unwrap();
        let probes = blob(100, 9);
        for row in probes.iter_rows() {
            assert_eq!(model.decision_value(row).unwrap(), restored.decision_value(row).unwrap());
        }
        assert_eq!(model.params(), restored.params());
    }

    #[test]
    fn corrupt_magic_fails_to_decode() {
        let train = blob(40, 10);
        let model = fit_ocsvm(&train, &OcSvmParams { nu: 0.2, ..OcSvmParams::default() }).unwrap();
        let mut bytes = serialize_ocsvm(&model);
        bytes[0] = b'!';
        assert!(matches!(
            deserialize_ocsvm(&bytes),
            Err(OcSvmError::Codec(CodecError::BadMagic { .. }))
        ));
        assert!(deserialize_ocsvm(&bytes[..bytes.len() / 2]).is_err());
    }

    #[test]
    fn more_support_vectors_serialize_strictly_larger() {
        let train = blob(200, 11);
        let small = fit_ocsvm(&train, &OcSvmParams { nu: 0.1, ..OcSvmParams::default() }).unwrap();
        let large = fit_ocsvm(&train, &OcSvmParams { nu: 0.5, ..OcSvmParams::default() }).unwrap();
        assert!(large.support_vector_count() > small.support_vector_count());
        assert!(serialize_ocsvm(&large).len() > serialize_ocsvm(&small).len());
    }

    #[test]
    fn gamma_param_serde_forms() {
        assert_eq!(serde_json::to_string(&GammaParam::Scale).unwrap(), "\"scale\"");
        assert_eq!(serde_json::to_string(&GammaParam::Fixed(0.5)).unwrap(), "0.5");
        assert_eq!(serde_json::from_str::<GammaParam>("\"scale\"").unwrap(), GammaParam::Scale);
        assert_eq!(serde_json::from_str::<GammaParam>("2.5").unwrap(), GammaParam::Fixed(2.5));
        assert!(serde_json::from_str::<GammaParam>("\"auto\"").is_err());
    }
}
