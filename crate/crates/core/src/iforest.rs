//! Isolation forest built from scratch: random-partition trees grown on
//! subsamples, average path-length scoring, and contamination-quantile
//! thresholding calibrated on training scores.
//!
//! Anomalies are rare and different, so random axis-aligned splits isolate
//! them in fewer steps; a point's score is `2^(-E(h)/c(psi))` where `E(h)`
//! is its mean path length over the forest and `c(psi)` the average
//! unsuccessful-search path length of a binary tree over `psi` points.
//! Scores live in (0, 1]: near 1 means anomalous, near 0.5 and below means
//! normal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{CodecError, Reader, Writer};
use crate::matrix::Matrix;

const MAGIC: [u8; 4] = *b"IFv1";
/// Hard ceiling on encoded tree depth; fitted trees never exceed
/// ceil(log2 psi) <= 32, so anything deeper is a corrupt stream.
const MAX_DECODE_DEPTH: usize = 64;
const EULER_MASCHERONI: f64 = 0.577_215_664_9;

#[derive(Debug, Error)]
pub enum IForestError {
    #[error("need at least 2 training rows, got {0}")]
    TooFewRows(usize),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("point has {got} features, tree requires at least {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("cannot calibrate a threshold on empty scores")]
    EmptyScores,
    #[error("contamination {0} outside [0, 0.5]")]
    BadContamination(f64),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// One node of an isolation tree: an axis-aligned split or a leaf holding
/// the count of training points that reached it.
#[derive(Debug, Clone, PartialEq)]
pub enum IsolationTreeNode {
    Internal {
        split_feature: usize,
        split_value: f64,
        left: Box<IsolationTreeNode>,
        right: Box<IsolationTreeNode>,
    },
    External { size: usize },
}

impl IsolationTreeNode {
    /// Longest root-to-leaf edge count.
    pub fn height(&self) -> usize {
        match self {
            Self::External { .. } => 0,
            Self::Internal { left, right, .. } => 1 + left.height().max(right.height()),
        }
    }

    /// Total training points across the leaves.
    pub fn leaf_size_sum(&self) -> usize {
        match self {
            Self::External { size } => *size,
            Self::Internal { left, right, .. } => left.leaf_size_sum() + right.leaf_size_sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IForestParams {
    pub tree_count: usize,
    /// Requested subsample size psi; capped at the training size when
    /// fitting.
    pub subsample_size: usize,
    /// Assumed anomaly fraction used to place the score threshold at the
    /// (1 - contamination) quantile of training scores.
    pub contamination: f64,
    pub seed: u64,
}

impl Default for IForestParams {
    fn default() -> Self {
        Self { tree_count: 100, subsample_size: 256, contamination: 0.1, seed: 0 }
    }
}

/// A fitted forest: `tree_count` trees, the effective subsample size, and a
/// calibrated score threshold. Immutable after fitting; scoring from many
/// threads is safe.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForestModel {
    trees: Vec<IsolationTreeNode>,
    subsample_effective: usize,
    dim: usize,
    threshold: f64,
    params: IForestParams,
    /// Cached c(subsample_effective); recomputed on deserialize.
    norm: f64,
}

/// Average path length of an unsuccessful search in a binary search tree of
/// `n` points: `c(n) = 2 H(n-1) - 2 (n-1)/n` with `H(i) = ln(i) + gamma`,
/// and `c(0) = c(1) = 0`.
pub fn expected_path_c(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    2.0 * ((nf - 1.0).ln() + EULER_MASCHERONI) - 2.0 * (nf - 1.0) / nf
}

/// The score map `2^(-mean_path / c(psi))`: 1.0 at mean path 0, 0.5 when
/// the mean path equals `c(psi)`, and decreasing towards 0 as paths grow.
pub fn anomaly_score(mean_path_length: f64, subsample_size: usize) -> f64 {
    2f64.powf(-mean_path_length / expected_path_c(subsample_size))
}

/// Grows one isolation tree over every row of `sample`. Recursion stops at
/// `height_limit`, at single-row nodes, and on nodes where no column has
/// distinct values.
pub fn build_tree<R: Rng>(
    sample: &Matrix,
    height_limit: usize,
    rng: &mut R,
) -> IsolationTreeNode {
    let rows: Vec<usize> = (0..sample.rows()).collect();
    grow(sample, rows, 0, height_limit, rng)
}

fn grow<R: Rng>(
    m: &Matrix,
    rows: Vec<usize>,
    depth: usize,
    height_limit: usize,
    rng: &mut R,
) -> IsolationTreeNode {
    if depth >= height_limit || rows.len() <= 1 {
        return IsolationTreeNode::External { size: rows.len() };
    }

    // columns that still vary across this node's rows
    let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
    for c in 0..m.cols() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in &rows {
            let v = m.get(r, c);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo < hi {
            candidates.push((c, lo, hi));
        }
    }

    while !candidates.is_empty() {
        let k = rng.random_range(0..candidates.len());
        let (col, lo, hi) = candidates[k];
        let mut split = rng.random_range(lo..hi);
        if split <= lo {
            // pathologically narrow range; fall back to the midpoint
            split = lo + (hi - lo) * 0.5;
        }
        if !(split > lo && split < hi) {
            // range too narrow to split strictly inside; treat as constant
            candidates.swap_remove(k);
            continue;
        }
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| m.get(r, col) < split);
        return IsolationTreeNode::Internal {
            split_feature: col,
            split_value: split,
            left: Box::new(grow(m, left_rows, depth + 1, height_limit, rng)),
            right: Box::new(grow(m, right_rows, depth + 1, height_limit, rng)),
        };
    }
    IsolationTreeNode::External { size: rows.len() }
}

/// Edges traversed from `root` to the external node reached by `point`,
/// plus `c(leaf_size)` as the adjustment for the unbuilt subtree.
pub fn path_length(root: &IsolationTreeNode, point: &[f64]) -> Result<f64, IForestError> {
    let mut node = root;
    let mut edges = 0.0;
    loop {
        match node {
            IsolationTreeNode::External { size } => return Ok(edges + expected_path_c(*size)),
            IsolationTreeNode::Internal { split_feature, split_value, left, right } => {
                let Some(&v) = point.get(*split_feature) else {
                    return Err(IForestError::DimensionMismatch {
                        expected: split_feature + 1,
                        got: point.len(),
                    });
                };
                edges += 1.0;
                node = if v < *split_value { left } else { right };
            }
        }
    }
}

/// Threshold at the (1 - contamination) empirical quantile of the training
/// scores, with linear interpolation between order statistics.
/// Contamination 0 places the threshold just above the maximum so that no
/// training point is flagged.
pub fn calibrate_threshold(train_scores: &[f64], contamination: f64) -> Result<f64, IForestError> {
    if train_scores.is_empty() {
        return Err(IForestError::EmptyScores);
    }
    if !(0.0..=0.5).contains(&contamination) || contamination.is_nan() {
        return Err(IForestError::BadContamination(contamination));
    }
    let mut sorted = train_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    if contamination == 0.0 {
        return Ok(sorted[sorted.len() - 1] + 1e-9);
    }
    let q = 1.0 - contamination;
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let value = if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    };
    Ok(value)
}

/// Fits a forest on normal-only training rows: each tree is grown on an
/// independent uniform subsample of `min(psi, n)` rows without replacement
/// with height limit `ceil(log2 min(psi, n))`, then the score threshold is
/// calibrated on the training scores. Deterministic per seed; each tree
/// draws from its own stream of the seeded generator, so construction order
/// does not matter.
pub fn fit_iforest(train: &Matrix, params: &IForestParams) -> Result<IsolationForestModel, IForestError> {
    let n = train.rows();
    if n < 2 {
        return Err(IForestError::TooFewRows(n));
    }
    if !train.all_finite() {
        return Err(IForestError::NonFinite);
    }
    if params.tree_count == 0 {
        return Err(IForestError::BadParams("tree_count must be positive".into()));
    }
    if params.subsample_size < 2 {
        return Err(IForestError::BadParams("subsample_size must be at least 2".into()));
    }
    if !(0.0..=0.5).contains(&params.contamination) || params.contamination.is_nan() {
        return Err(IForestError::BadContamination(params.contamination));
    }

    let psi = params.subsample_size.min(n);
    let height_limit = (psi as f64).log2().ceil() as usize;

    let trees: Vec<IsolationTreeNode> = (0..params.tree_count)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64 + 1);
            let idx = rand::seq::index::sample(&mut rng, n, psi).into_vec();
            grow(train, idx, 0, height_limit, &mut rng)
        })
        .collect();

    let mut model = IsolationForestModel {
        trees,
        subsample_effective: psi,
        dim: train.cols(),
        threshold: 0.0,
        params: *params,
        norm: expected_path_c(psi),
    };
    let train_scores = model.scores(train)?;
    model.threshold = calibrate_threshold(&train_scores, params.contamination)?;
    Ok(model)
}

impl IsolationForestModel {
    pub fn trees(&self) -> &[IsolationTreeNode] {
        &self.trees
    }

    pub fn subsample_effective(&self) -> usize {
        self.subsample_effective
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn params(&self) -> &IForestParams {
        &self.params
    }

    /// Anomaly score `2^(-mean_path / c(psi))` in (0, 1]; larger is more
    /// anomalous.
    pub fn score(&self, point: &[f64]) -> Result<f64, IForestError> {
        if point.len() != self.dim {
            return Err(IForestError::DimensionMismatch { expected: self.dim, got: point.len() });
        }
        let mut total = 0.0;
        for tree in &self.trees {
            total += path_length(tree, point)?;
        }
        let mean_path = total / self.trees.len() as f64;
        Ok(2f64.powf(-mean_path / self.norm))
    }

    /// Mean path length of `point` over all trees.
    pub fn mean_path_length(&self, point: &[f64]) -> Result<f64, IForestError> {
        if point.len() != self.dim {
            return Err(IForestError::DimensionMismatch { expected: self.dim, got: point.len() });
        }
        let mut total = 0.0;
        for tree in &self.trees {
            total += path_length(tree, point)?;
        }
        Ok(total / self.trees.len() as f64)
    }

    pub fn scores(&self, batch: &Matrix) -> Result<Vec<f64>, IForestError> {
        if batch.cols() != self.dim {
            return Err(IForestError::DimensionMismatch { expected: self.dim, got: batch.cols() });
        }
        batch.iter_rows().map(|row| self.score(row)).collect()
    }

    /// Label 1 iff score strictly exceeds the calibrated threshold.
    pub fn classify(&self, batch: &Matrix) -> Result<Vec<u8>, IForestError> {
        Ok(self.scores(batch)?.iter().map(|&s| u8::from(s > self.threshold)).collect())
    }
}

/// Encodes the model as the portable "IFv1" byte format: magic tag, params,
/// then each tree in pre-order. The byte length of this artifact is the
/// model-size metric.
pub fn serialize_iforest(model: &IsolationForestModel) -> Vec<u8> {
    let mut w = Writer::new();
    w.magic(MAGIC);
    w.u32(model.params.tree_count as u32);
    w.u32(model.params.subsample_size as u32);
    w.u32(model.subsample_effective as u32);
    w.f64(model.params.contamination);
    w.u64(model.params.seed);
    w.u32(model.dim as u32);
    w.f64(model.threshold);
    for tree in &model.trees {
        encode_node(&mut w, tree);
    }
    w.into_bytes()
}

fn encode_node(w: &mut Writer, node: &IsolationTreeNode) {
    match node {
        IsolationTreeNode::External { size } => {
            w.u8(0);
            w.u32(*size as u32);
        }
        IsolationTreeNode::Internal { split_feature, split_value, left, right } => {
            w.u8(1);
            w.u32(*split_feature as u32);
            w.f64(*split_value);
            encode_node(w, left);
            encode_node(w, right);
        }
    }
}

pub fn deserialize_iforest(bytes: &[u8]) -> Result<IsolationForestModel, IForestError> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let tree_count = r.u32()? as usize;
    let subsample_size = r.u32()? as usize;
    let subsample_effective = r.u32()? as usize;
    let contamination = r.f64()?;
    let seed = r.u64()?;
    let dim = r.u32()? as usize;
    let threshold = r.f64()?;
    if dim == 0 {
        return Err(CodecError::Invalid { field: "dim", detail: "zero feature count".into() }.into());
    }
    if tree_count == 0 {
        return Err(CodecError::Invalid { field: "tree_count", detail: "zero trees".into() }.into());
    }
    let mut trees = Vec::with_capacity(tree_count);
    for _ in 0..tree_count {
        trees.push(decode_node(&mut r, dim, 0)?);
    }
    r.finish()?;
    Ok(IsolationForestModel {
        trees,
        subsample_effective,
        dim,
        threshold,
        params: IForestParams { tree_count, subsample_size, contamination, seed },
        norm: expected_path_c(subsample_effective),
    })
}

fn decode_node(r: &mut Reader, dim: usize, depth: usize) -> Result<IsolationTreeNode, CodecError> {
    if depth > MAX_DECODE_DEPTH {
        return Err(CodecError::Invalid {
            field: "tree",
            detail: format!("nesting deeper than {MAX_DECODE_DEPTH}"),
        });
    }
    match r.u8()? {
        0 => Ok(IsolationTreeNode::External { size: r.u32()? as usize }),
        1 => {
            let split_feature = r.u32()? as usize;
            if split_feature >= dim {
                return Err(CodecError::Invalid {
                    field: "split_feature",
                    detail: format!("index {split_feature} out of range for dim {dim}"),
                });
            }
            let split_value = r.f64()?;
            let left = Box::new(decode_node(r, dim, depth + 1)?);
            let right = Box::new(decode_node(r, dim, depth + 1)?);
            Ok(IsolationTreeNode::Internal { split_feature, split_value, left, right })
        }
        tag => Err(CodecError::Invalid { field: "node_tag", detail: format!("unknown tag {tag}") }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticSpec};

    fn matrix_1d(values: &[f64]) -> Matrix {
        Matrix::from_vec(values.to_vec(), values.len(), 1).unwrap()
    }

    fn external(size: usize) -> IsolationTreeNode {
        IsolationTreeNode::External { size }
    }

    /// Model with hand-built trees, for exercising the scoring arithmetic
    /// in isolation.
    fn model_with_trees(trees: Vec<IsolationTreeNode>, psi: usize, threshold: f64) -> IsolationForestModel {
        IsolationForestModel {
            trees,
            subsample_effective: psi,
            dim: 1,
            threshold,
            params: IForestParams { subsample_size: psi, ..IForestParams::default() },
            norm: expected_path_c(psi),
        }
    }

    #[test]
    fn c_of_small_n() {
        assert_eq!(expected_path_c(0), 0.0);
        assert_eq!(expected_path_c(1), 0.0);
        // 2*(ln 1 + gamma) - 2*1/2 = 2*gamma - 1
        let expected = 2.0 * EULER_MASCHERONI - 1.0;
        assert!((expected_path_c(2) - expected).abs() < 1e-12);
        assert!((expected_path_c(2) - 0.15443).abs() < 1e-5);
    }

    #[test]
    fn c_of_256() {
        assert!((expected_path_c(256) - 10.2448).abs() < 1e-3);
    }

    #[test]
    fn c_is_nondecreasing() {
        let mut prev = expected_path_c(2);
        for n in 3..=10_000 {
            let cur = expected_path_c(n);
            assert!(cur >= prev, "c({n}) = {cur} < c({}) = {prev}", n - 1);
            prev = cur;
        }
    }

    #[test]
    fn build_tree_single_row() {
        let m = matrix_1d(&[3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(build_tree(&m, 8, &mut rng), external(1));
    }

    #[test]
    fn build_tree_identical_rows() {
        let m = matrix_1d(&[4.0; 7]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(build_tree(&m, 8, &mut rng), external(7));
    }

    #[test]
    fn build_tree_leaf_sizes_sum_to_sample() {
        let m = matrix_1d(&[0.0, 1.0, 5.0, 9.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let tree = build_tree(&m, 8, &mut rng);
        assert_eq!(tree.leaf_size_sum(), 4);
    }

    #[test]
    fn build_tree_respects_height_limit() {
        let values: Vec<f64> = (0..64).map(f64::from).collect();
        let m = matrix_1d(&values);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tree = build_tree(&m, 3, &mut rng);
            assert!(tree.height() <= 3);
        }
    }

    #[test]
    fn splits_lie_strictly_between_column_extremes() {
        // every subset range is contained in the global range, so checking
        // all splits against the global extremes is a sound (if weaker)
        // version of the per-node invariant
        fn check(node: &IsolationTreeNode, lo: f64, hi: f64) {
            if let IsolationTreeNode::Internal { split_value, left, right, .. } = node {
                assert!(*split_value > lo && *split_value < hi);
                check(left, lo, hi);
                check(right, lo, hi);
            }
        }
        let m = matrix_1d(&[1.0, 2.0, 3.0, 10.0]);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tree = build_tree(&m, 8, &mut rng);
            check(&tree, 1.0, 10.0);
        }
    }

    #[test]
    fn path_length_of_bare_external_nodes() {
        assert_eq!(path_length(&external(1), &[0.0]).unwrap(), 0.0);
        let p = path_length(&external(5), &[0.0]).unwrap();
        assert!((p - expected_path_c(5)).abs() < 1e-12);
    }

    #[test]
    fn path_length_hand_traced_tree() {
        // x < 1.0 -> leaf(1); else x < 2.0 -> leaf(3); else leaf(1)
        let tree = IsolationTreeNode::Internal {
            split_feature: 0,
            split_value: 1.0,
            left: Box::new(external(1)),
            right: Box::new(IsolationTreeNode::Internal {
                split_feature: 0,
                split_value: 2.0,
                left: Box::new(external(3)),
                right: Box::new(external(1)),
            }),
        };
        let p = path_length(&tree, &[1.5]).unwrap();
        assert!((p - (2.0 + expected_path_c(3))).abs() < 1e-12);
        assert_eq!(path_length(&tree, &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn path_length_dimension_mismatch() {
        let tree = IsolationTreeNode::Internal {
            split_feature: 2,
            split_value: 0.0,
            left: Box::new(external(1)),
            right: Box::new(external(1)),
        };
        assert!(matches!(
            path_length(&tree, &[0.0]),
            Err(IForestError::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn score_of_mean_path_equal_to_c_is_half() {
        // every tree is a bare external node of size psi, so the mean path
        // is exactly c(psi)
        let psi = 256;
        let model = model_with_trees(vec![external(psi); 10], psi, 0.5);
        assert_eq!(model.score(&[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn score_of_zero_mean_path_is_one() {
        let model = model_with_trees(vec![external(1); 10], 256, 0.5);
        assert_eq!(model.score(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn score_formula_at_reference_points() {
        for psi in [2usize, 64, 256, 1000] {
            let c = expected_path_c(psi);
            assert_eq!(anomaly_score(c, psi), 0.5);
            assert_eq!(anomaly_score(0.0, psi), 1.0);
            assert_eq!(anomaly_score(2.0 * c, psi), 0.25);
        }
    }

    #[test]
    fn model_score_matches_formula_over_mean_path() {
        let psi = 64;
        let model = model_with_trees(vec![external(psi), external(1), external(9)], psi, 0.5);
        let mean = model.mean_path_length(&[0.0]).unwrap();
        let expected =
            (expected_path_c(psi) + expected_path_c(1) + expected_path_c(9)) / 3.0;
        assert!((mean - expected).abs() < 1e-12);
        assert_eq!(model.score(&[0.0]).unwrap(), anomaly_score(mean, psi));
    }

    #[test]
    fn fit_echoes_parameters() {
        let spec = SyntheticSpec { normal_count: 1000, anomaly_count: 0, dim: 3, spread: 1.0, halfwidth: 4.0 };
        let frame = generate_synthetic(&spec, 5).unwrap();
        let model = fit_iforest(frame.features(), &IForestParams::default()).unwrap();
        assert_eq!(model.trees().len(), 100);
        assert_eq!(model.subsample_effective(), 256);
        for tree in model.trees() {
            assert_eq!(tree.leaf_size_sum(), 256);
        }
    }

    #[test]
    fn fit_caps_subsample_at_training_size() {
        let spec = SyntheticSpec { normal_count: 100, anomaly_count: 0, dim: 2, spread: 1.0, halfwidth: 4.0 };
        let frame = generate_synthetic(&spec, 6).unwrap();
        let model = fit_iforest(frame.features(), &IForestParams::default()).unwrap();
        assert_eq!(model.subsample_effective(), 100);
        // ceil(log2 100) = 7
        for tree in model.trees() {
            assert!(tree.height() <= 7, "height {}", tree.height());
        }
    }

    #[test]
    fn fit_is_deterministic_per_seed() {
        let spec = SyntheticSpec { normal_count: 300, anomaly_count: 0, dim: 2, spread: 1.0, halfwidth: 4.0 };
        let frame = generate_synthetic(&spec, 7).unwrap();
        let params = IForestParams { seed: 99, ..IForestParams::default() };
        let a = fit_iforest(frame.features(), &params).unwrap();
        let b = fit_iforest(frame.features(), &params).unwrap();
        let probe = [0.3, -2.5];
        assert_eq!(a.score(&probe).unwrap(), b.score(&probe).unwrap());
        assert_eq!(a.threshold(), b.threshold());
    }

    #[test]
    fn fit_rejects_degenerate_inputs() {
        let m = matrix_1d(&[1.0]);
        assert!(matches!(
            fit_iforest(&m, &IForestParams::default()),
            Err(IForestError::TooFewRows(1))
        ));
        let m2 = matrix_1d(&[1.0, 2.0]);
        let bad = IForestParams { contamination: 0.6, ..IForestParams::default() };
        assert!(matches!(fit_iforest(&m2, &bad), Err(IForestError::BadContamination(_))));
    }

    #[test]
    fn threshold_interpolates_between_order_statistics() {
        let scores: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let t = calibrate_threshold(&scores, 0.1).unwrap();
        // (1 - 0.1) quantile of ten equally spaced points: between the 9th
        // and 10th order statistics, h = 0.9 * 9 = 8.1 -> 0.9 + 0.1 * 0.1
        assert!((t - 0.91).abs() < 1e-12);
        assert!(t > 0.9 && t < 1.0);
    }

    #[test]
    fn threshold_zero_contamination_flags_nothing() {
        let scores = [0.2, 0.9, 0.4];
        let t = calibrate_threshold(&scores, 0.0).unwrap();
        assert!(scores.iter().all(|&s| s <= t));
        assert!(t > 0.9);
    }

    #[test]
    fn threshold_of_constant_scores() {
        let t = calibrate_threshold(&[0.5; 8], 0.2).unwrap();
        assert_eq!(t, 0.5);
    }

    #[test]
    fn classify_uses_strict_inequality() {
        let psi = 64;
        // every point scores exactly 0.5
        let mut model = model_with_trees(vec![external(psi); 4], psi, 0.5);
        let batch = matrix_1d(&[0.0, 1.0]);
        assert_eq!(model.classify(&batch).unwrap(), vec![0, 0]);
        model.threshold = 0.5 - 1e-9;
        assert_eq!(model.classify(&batch).unwrap(), vec![1, 1]);
    }

    #[test]
    fn separable_anomalies_are_flagged() {
        let mut flagged_total = 0usize;
        for seed in 0..10 {
            let spec = SyntheticSpec {
                normal_count: 100,
                anomaly_count: 10,
                dim: 2,
                spread: 1.0,
                halfwidth: 10.0,
            };
            let frame = generate_synthetic(&spec, seed).unwrap();
            let normal_rows: Vec<usize> = (0..100).collect();
            let train = frame.features().select_rows(&normal_rows);
            let params = IForestParams { seed, ..IForestParams::default() };
            let model = fit_iforest(&train, &params).unwrap();
            let labels = model.classify(frame.features()).unwrap();
            flagged_total += labels[100..].iter().filter(|&&l| l == 1).count();
        }
        assert!(flagged_total >= 80, "only {flagged_total}/100 anomalies flagged");
    }

    #[test]
    fn anomaly_scores_exceed_normal_scores_on_every_seed() {
        for seed in 0..10 {
            let spec = SyntheticSpec {
                normal_count: 200,
                anomaly_count: 20,
                dim: 3,
                spread: 1.0,
                halfwidth: 10.0,
            };
            let frame = generate_synthetic(&spec, seed).unwrap();
            let train = frame.features().select_rows(&(0..200).collect::<Vec<_>>());
            let model =
                fit_iforest(&train, &IForestParams { seed, ..IForestParams::default() }).unwrap();
            let scores = model.scores(frame.features()).unwrap();
            let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
            assert!(
                mean(&scores[200..]) > mean(&scores[..200]),
                "seed {seed}: anomaly mean not above normal mean"
            );
        }
    }

    #[test]
    fn serialization_round_trips_scores() {
        let spec = SyntheticSpec { normal_count: 400, anomaly_count: 0, dim: 4, spread: 1.0, halfwidth: 4.0 };
        let frame = generate_synthetic(&spec, 13).unwrap();
        let model = fit_iforest(frame.features(), &IForestParams::default()).unwrap();
        let bytes = serialize_iforest(&model);
        let restored = deserialize_iforest(&bytes).unwrap();
        let probes = generate_synthetic(
            &SyntheticSpec { normal_count: 90, anomaly_count: 10, dim: 4, spread: 1.5, halfwidth: 6.0 },
            14,
        )
        .unwrap();
        for row in probes.features().iter_rows() {
            assert_eq!(model.score(row).unwrap(), restored.score(row).unwrap());
        }
        assert_eq!(model.threshold(), restored.threshold());
    }

    #[test]
    fn truncated_bytes_fail_to_decode() {
        let m = matrix_1d(&[1.0, 2.0, 3.0, 4.0]);
        let model =
            fit_iforest(&m, &IForestParams { subsample_size: 4, ..IForestParams::default() }).unwrap();
        let bytes = serialize_iforest(&model);
        for cut in [0, 3, 10, bytes.len() - 1] {
            assert!(deserialize_iforest(&bytes[..cut]).is_err(), "cut at {cut} decoded");
        }
    }

    #[test]
    fn corrupt_magic_fails_to_decode() {
        let m = matrix_1d(&[1.0, 2.0, 3.0, 4.0]);
        let model = fit_iforest(&m, &IForestParams::default()).unwrap();
        let mut bytes = serialize_iforest(&model);
        bytes[0] = b'X';
        assert!(matches!(
            deserialize_iforest(&bytes),
            Err(IForestError::Codec(CodecError::BadMagic { .. }))
        ));
    }

    #[test]
    fn more_trees_serialize_strictly_larger() {
        let spec = SyntheticSpec { normal_count: 500, anomaly_count: 0, dim: 3, spread: 1.0, halfwidth: 4.0 };
        let frame = generate_synthetic(&spec, 21).unwrap();
        let small = fit_iforest(
            frame.features(),
            &IForestParams { tree_count: 100, ..IForestParams::default() },
        )
        .unwrap();
        let large = fit_iforest(
            frame.features(),
            &IForestParams { tree_count: 200, ..IForestParams::default() },
        )
        .unwrap();
        assert!(serialize_iforest(&large).len() > serialize_iforest(&small).len());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn scores_stay_in_unit_interval(seed in 0u64..500, n in 10usize..120) {
                let spec = SyntheticSpec {
                    normal_count: n, anomaly_count: 0, dim: 2, spread: 1.0, halfwidth: 4.0,
                };
                let frame = generate_synthetic(&spec, seed).unwrap();
                let params = IForestParams { seed, subsample_size: 32, ..IForestParams::default() };
                let model = fit_iforest(frame.features(), &params).unwrap();
                let probes = generate_synthetic(&SyntheticSpec {
                    normal_count: 20, anomaly_count: 5, dim: 2, spread: 2.0, halfwidth: 8.0,
                }, seed + 1).unwrap();
                for row in probes.features().iter_rows() {
                    let s = model.score(row).unwrap();
                    prop_assert!(s > 0.0 && s <= 1.0, "score {s} outside (0, 1]");
                }
            }

            #[test]
            fn score_is_monotone_decreasing_in_mean_path(psi in 2usize..512) {
                let c = expected_path_c(psi);
                let mut prev = f64::INFINITY;
                for k in 0..10 {
                    let mean_path = k as f64 * 0.5;
                    let s = 2f64.powf(-mean_path / c);
                    prop_assert!(s < prev);
                    prev = s;
                }
            }
        }
    }
}
