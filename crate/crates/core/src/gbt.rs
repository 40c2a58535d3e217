//! Gradient-boosted regression trees on squared loss.
//!
//! Each round fits a tree to first- and second-order statistics of the loss
//! (`g = ŷ - y`, `h = 1`) by exact greedy search over midpoint thresholds.

use crate::ts::FeatureMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbtError {
    #[error("need at least 2 rows, got {0}")]
    EmptyDataset(usize),
    #[error("{rows} feature rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("model expects {expected} features, got {got}")]
    FeatureCountMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("non-finite value in features or targets")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_reg: f64,
    pub min_split_gain: f64,
    pub min_child_weight: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams { n_rounds: 100, max_depth: 4, learning_rate: 0.1, l2_reg: 1.0, min_split_gain: 0.0, min_child_weight: 1.0 }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<(), GbtError> {
        let bad = |m: &str| Err(GbtError::InvalidParams(m.to_string()));
        if self.n_rounds == 0 {
            return bad("n_rounds must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.l2_reg >= 0.0 && self.min_split_gain >= 0.0 && self.min_child_weight >= 0.0) {
            return bad("l2_reg, min_split_gain and min_child_weight must be non-negative");
        }
        if !(self.l2_reg.is_finite() && self.min_split_gain.is_finite() && self.min_child_weight.is_finite()) {
            return bad("parameters must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go to `left`.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { weight: f64 },
}

/// Nodes in creation order; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { weight } => return weight,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] < threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtEnsemble {
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
    pub params: GbtParams,
    pub n_features: usize,
}

impl GbtEnsemble {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_row_rounds(row, self.trees.len())
    }

    /// Prediction using only the first `rounds` trees. Accumulates in the
    /// same order as training, so training-row predictions reproduce the
    /// boosting state bit for bit.
    pub fn predict_row_rounds(&self, row: &[f64], rounds: usize) -> f64 {
        self.trees[..rounds.min(self.trees.len())]
            .iter()
            .fold(self.base_score, |acc, t| acc + self.params.learning_rate * t.predict_row(row))
    }

    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>, GbtError> {
        if features.cols() != self.n_features {
            return Err(GbtError::FeatureCountMismatch { expected: self.n_features, got: features.cols() });
        }
        Ok((0..features.rows()).map(|i| self.predict_row(features.row(i))).collect())
    }
}

pub(crate) fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    if g == 0.0 {
        0.0
    } else {
        -g / (h + lambda)
    }
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d == 0.0 {
        0.0
    } else {
        g * g / d
    }
}

pub(crate) fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - score(gl + gr, hl + hr, lambda)) - gamma
}

struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Builder<'a> {
    columns: &'a [Vec<f64>],
    grad: &'a [f64],
    params: &'a GbtParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    /// Grows the subtree over the rows listed (per feature, sorted by that
    /// feature's value) in `sorted`; returns its node index.
    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let rows = &sorted[0];
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h = rows.len() as f64;
        let lambda = self.params.l2_reg;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { weight: leaf_weight(g, h, lambda) });
        if depth >= self.params.max_depth || rows.len() < 2 {
            return id;
        }
        let Some(best) = self.find_split(&sorted, g, h) else {
            return id;
        };
        let col = &self.columns[best.feature];
        let (left, right): (Vec<Vec<usize>>, Vec<Vec<usize>>) = sorted
            .into_iter()
            .map(|list| list.into_iter().partition(|&r| col[r] < best.threshold))
            .unzip();
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left: l, right: r };
        id
    }

    fn find_split(&self, sorted: &[Vec<usize>], g: f64, h: f64) -> Option<Best> {
        let p = self.params;
        let mut best: Option<Best> = None;
        for (f, list) in sorted.iter().enumerate() {
            let col = &self.columns[f];
            let (mut gl, mut hl) = (0.0, 0.0);
            for w in 0..list.len() - 1 {
                gl += self.grad[list[w]];
                hl += 1.0;
                let (a, b) = (col[list[w]], col[list[w + 1]]);
                if a == b {
                    continue;
                }
                let hr = h - hl;
                if hl < p.min_child_weight || hr < p.min_child_weight {
                    continue;
                }
                let gain = split_gain(gl, hl, g - gl, hr, p.l2_reg, p.min_split_gain);
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold <= a {
                        threshold = b;
                    }
                    best = Some(Best { gain, feature: f, threshold });
                }
            }
        }
        best
    }
}

/// Boosts `params.n_rounds` trees on squared error, starting from the mean
/// target. Identical rows simply yield leaf-only trees.
pub fn fit(features: &FeatureMatrix, targets: &[f64], params: &GbtParams) -> Result<GbtEnsemble, GbtError> {
    params.validate()?;
    let n = features.rows();
    if n != targets.len() {
        return Err(GbtError::LengthMismatch { rows: n, targets: targets.len() });
    }
    if n < 2 {
        return Err(GbtError::EmptyDataset(n));
    }
    if features.data().iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(GbtError::NonFinite);
    }
    let columns: Vec<Vec<f64>> = (0..features.cols()).map(|j| features.column(j)).collect();
    let presorted: Vec<Vec<usize>> = columns
        .iter()
        .map(|c| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| c[a].total_cmp(&c[b]));
            idx
        })
        .collect();
    let base_score = targets.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut grad = vec![0.0; n];
    for _ in 0..params.n_rounds {
        for i in 0..n {
            grad[i] = pred[i] - targets[i];
        }
        // Zero-column matrices still get a root leaf.
        let sorted = if presorted.is_empty() { vec![(0..n).collect()] } else { presorted.clone() };
        let mut b = Builder { columns: &columns, grad: &grad, params, nodes: Vec::new() };
        b.grow(sorted, 0);
        let tree = RegressionTree { nodes: b.nodes };
        for (i, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict_row(features.row(i));
        }
        trees.push(tree);
    }
    Ok(GbtEnsemble { base_score, trees, params: params.clone(), n_features: features.cols() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    fn random_data(seed: u64, n: usize, f: usize) -> (FeatureMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..f).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y = rows.iter().map(|r| r[0].sin() + 0.5 * r[f - 1] * r[0] + rng.random_range(-0.1..0.1)).collect();
        (matrix(&rows), y)
    }

    fn rmse(a: &[f64], b: &[f64]) -> f64 {
        (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
    }

    #[test]
    fn depth_zero_predicts_the_mean() {
        let (x, y) = random_data(1, 30, 3);
        let m = fit(&x, &y, &GbtParams { max_depth: 0, ..GbtParams::default() }).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        for p in m.predict(&x).unwrap() {
            assert!((p - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn unregularised_leaf_is_mean_residual() {
        let r = [0.5, -1.25, 2.0, 0.75];
        let g: f64 = r.iter().map(|v| -v).sum();
        assert!((leaf_weight(g, r.len() as f64, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn step_function_is_learned() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 99.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| if r[0] > 0.5 { 1.0 } else { 0.0 }).collect();
        let p = GbtParams { max_depth: 1, n_rounds: 50, ..GbtParams::default() };
        let m = fit(&matrix(&rows), &y, &p).unwrap();
        let pred = m.predict(&matrix(&rows)).unwrap();
        let err = rmse(&pred, &y);
        // Each side's residual shrinks by (1 - η·H/(H+λ)) per round.
        let bound = 0.5 * (1.0f64 - 0.1 * 50.0 / 51.0).powi(50);
        assert!(err < 0.01 && err <= bound * 1.0000001, "{err} vs {bound}");
    }

    #[test]
    fn empty_ensemble_and_single_stump() {
        let (x, y) = random_data(2, 20, 2);
        let mut m = fit(&x, &y, &GbtParams { max_depth: 1, n_rounds: 1, ..GbtParams::default() }).unwrap();
        let mut values = m.predict(&x).unwrap();
        values.sort_by(f64::total_cmp);
        values.dedup();
        assert_eq!(values.len(), 2);
        m.trees.clear();
        assert!(m.predict(&x).unwrap().iter().all(|&p| p == m.base_score));
    }

    #[test]
    fn identical_rows_give_base_score() {
        let x = matrix(&vec![vec![1.0, 2.0]; 10]);
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let m = fit(&x, &y, &GbtParams::default()).unwrap();
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
        assert!(m.predict(&x).unwrap().iter().all(|&p| p == 4.5));
    }

    #[test]
    fn errors() {
        let x = matrix(&[vec![1.0], vec![2.0]]);
        assert!(matches!(fit(&x, &[1.0], &GbtParams::default()), Err(GbtError::LengthMismatch { .. })));
        let one = matrix(&[vec![1.0]]);
        assert!(matches!(fit(&one, &[1.0], &GbtParams::default()), Err(GbtError::EmptyDataset(1))));
        let bad = GbtParams { learning_rate: 1.5, ..GbtParams::default() };
        assert!(matches!(fit(&x, &[1.0, 2.0], &bad), Err(GbtError::InvalidParams(_))));
        assert!(matches!(fit(&x, &[1.0, f64::NAN], &GbtParams::default()), Err(GbtError::NonFinite)));
        let m = fit(&x, &[1.0, 2.0], &GbtParams::default()).unwrap();
        let wide = matrix(&[vec![1.0, 2.0]]);
        assert!(matches!(m.predict(&wide), Err(GbtError::FeatureCountMismatch { expected: 1, got: 2 })));
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // Two identical columns: the split must use feature 0.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i < 5 { 0.0 } else { 1.0 }).collect();
        let m = fit(&matrix(&rows), &y, &GbtParams { max_depth: 1, n_rounds: 1, ..GbtParams::default() }).unwrap();
        assert_eq!(m.trees[0].nodes[0], Node::Split { feature: 0, threshold: 4.5, left: 1, right: 2 });
    }

    /// Naive recursive evaluator used as an oracle.
    fn walk(nodes: &[Node], i: usize, row: &[f64]) -> f64 {
        match &nodes[i] {
            Node::Leaf { weight } => *weight,
            Node::Split { feature, threshold, left, right } => {
                if row[*feature] < *threshold {
                    walk(nodes, *left, row)
                } else {
                    walk(nodes, *right, row)
                }
            }
        }
    }

    fn random_tree(rng: &mut ChaCha8Rng, depth: usize, f: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf { weight: rng.random_range(-1.0..1.0) });
        if depth > 0 && rng.random_bool(0.7) {
            let feature = rng.random_range(0..f);
            let threshold = rng.random_range(-1.0..1.0);
            let left = random_tree(rng, depth - 1, f, nodes);
            let right = random_tree(rng, depth - 1, f, nodes);
            nodes[id] = Node::Split { feature, threshold, left, right };
        }
        id
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn predict_matches_naive_walk(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = 3;
            let trees: Vec<RegressionTree> = (0..5)
                .map(|_| {
                    let mut nodes = Vec::new();
                    random_tree(&mut rng, 4, f, &mut nodes);
                    RegressionTree { nodes }
                })
                .collect();
            let m = GbtEnsemble { base_score: 0.3, trees, params: GbtParams::default(), n_features: f };
            let (x, _) = random_data(seed, 25, f);
            let got = m.predict(&x).unwrap();
            for (i, g) in got.iter().enumerate() {
                let row = x.row(i);
                let mut want = 0.3;
                for t in &m.trees {
                    want += 0.1 * walk(&t.nodes, 0, row);
                }
                prop_assert_eq!(*g, want);
            }
        }

        #[test]
        fn training_rmse_never_increases(seed in 0u64..10_000, depth in 1usize..5) {
            let (x, y) = random_data(seed, 40, 3);
            let m = fit(&x, &y, &GbtParams { n_rounds: 15, max_depth: depth, ..GbtParams::default() }).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..=15 {
                let pred: Vec<f64> = (0..x.rows()).map(|i| m.predict_row_rounds(x.row(i), k)).collect();
                let e = rmse(&pred, &y);
                prop_assert!(e <= prev + 1e-12);
                prev = e;
            }
            prop_assert!(m.trees.iter().all(|t| t.depth() <= depth));
        }

        #[test]
        fn l2_shrinks_leaf_weights(g in -100.0f64..100.0, h in 1.0f64..50.0, lambda in 0.01f64..10.0) {
            prop_assume!(g != 0.0);
            prop_assert!(leaf_weight(g, h, lambda).abs() < leaf_weight(g, h, 0.0).abs());
        }

        #[test]
        fn monotone_feature_transform_keeps_partitions(seed in 0u64..10_000) {
            let (x, y) = random_data(seed, 30, 2);
            let warped: Vec<Vec<f64>> = (0..x.rows()).map(|i| x.row(i).iter().map(|v| v.powi(3) + 2.0 * v).collect()).collect();
            let p = GbtParams { n_rounds: 10, ..GbtParams::default() };
            let a = fit(&x, &y, &p).unwrap().predict(&x).unwrap();
            let xw = matrix(&warped);
            let b = fit(&xw, &y, &p).unwrap().predict(&xw).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn fit_is_deterministic(seed in 0u64..10_000) {
            let (x, y) = random_data(seed, 30, 3);
            prop_assert_eq!(fit(&x, &y, &GbtParams::default()).unwrap(), fit(&x, &y, &GbtParams::default()).unwrap());
        }
    }
}
