//! CART regression trees and bootstrap-aggregated forests.

use std::collections::HashMap;
use std::hash::Hash;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Population variance of the targets.
pub fn squared_loss_impurity(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptyNode);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    Ok(y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// `sum_k p_k (1 - p_k)` over the label frequencies.
pub fn gini_impurity<T: Eq + Hash>(labels: &[T]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyNode);
    }
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let n = labels.len() as f64;
    Ok(counts.values().map(|&c| {
        let p = c as f64 / n;
        p * (1.0 - p)
    }).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// `|D| L(D) - |D_L| L(D_L) - |D_R| L(D_R)`.
    pub decrease: f64,
}

/// Best split over all rows of `x`, or `None` when nothing reduces impurity.
pub fn best_split(x: &Matrix, y: &[f64], features: &[usize]) -> Option<Split> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    best_split_rows(x, y, &rows, features, 1)
}

fn best_split_rows(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n = rows.len();
    if n < 2 || n < 2 * min_leaf {
        return None;
    }
    let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n as f64;
    // centered targets keep the prefix-sum variances well conditioned
    let centered: Vec<f64> = rows.iter().map(|&r| y[r] - mean).collect();
    let total_sq: f64 = centered.iter().map(|c| c * c).sum();
    let total_sum: f64 = centered.iter().sum();
    let parent = total_sq - total_sum * total_sum / n as f64;
    let eps = 1e-12 * parent.max(1e-300);
    if parent <= 0.0 || centered.iter().all(|c| *c == centered[0]) {
        return None;
    }

    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<Split> = None;
    let mut order: Vec<usize> = (0..n).collect();
    for &f in &features {
        order.sort_by(|&a, &b| x.get(rows[a], f).total_cmp(&x.get(rows[b], f)));
        let (mut sum_l, mut sq_l) = (0.0, 0.0);
        for pos in 0..n - 1 {
            let c = centered[order[pos]];
            sum_l += c;
            sq_l += c * c;
            let n_l = pos + 1;
            let n_r = n - n_l;
            let v = x.get(rows[order[pos]], f);
            let v_next = x.get(rows[order[pos + 1]], f);
            if v_next <= v || n_l < min_leaf || n_r < min_leaf {
                continue;
            }
            let sum_r = total_sum - sum_l;
            let sq_r = total_sq - sq_l;
            let sse_l = (sq_l - sum_l * sum_l / n_l as f64).max(0.0);
            let sse_r = (sq_r - sum_r * sum_r / n_r as f64).max(0.0);
            let decrease = parent - sse_l - sse_r;
            if decrease <= eps {
                continue;
            }
            let threshold = v + (v_next - v) / 2.0;
            if best.map_or(true, |b| decrease > b.decrease + eps) {
                best = Some(Split { feature: f, threshold, decrease });
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        decrease: f64,
        n_samples: usize,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

/// Nodes stored in pre-order; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            max = max.max(d);
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push((left, d + 1));
                stack.push((right, d + 1));
            }
        }
        max
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Features drawn per split.
    pub k: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
}

pub fn fit_tree<R: Rng>(x: &Matrix, y: &[f64], params: &TreeParams, rng: &mut R) -> Result<Tree> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    fit_tree_rows(x, y, rows, params, rng)
}

fn fit_tree_rows<R: Rng>(
    x: &Matrix,
    y: &[f64],
    rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> Result<Tree> {
    if rows.is_empty() || x.cols() == 0 {
        return Err(Error::EmptyInput);
    }
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch { left: x.rows(), right: y.len() });
    }
    let d = x.cols();
    if params.k == 0 || params.k > d {
        return Err(Error::BadConfig(format!("features per split must be in 1..={d}, got {}", params.k)));
    }
    let min_leaf = params.min_samples_leaf.max(1);

    let mut nodes: Vec<Node> = Vec::new();
    // (rows, depth, parent whose right child this is)
    let mut stack: Vec<(Vec<usize>, usize, Option<usize>)> = vec![(rows, 0, None)];
    while let Some((rows, depth, parent)) = stack.pop() {
        let id = nodes.len();
        if let Some(p) = parent {
            if let Node::Split { right, .. } = &mut nodes[p] {
                *right = id;
            }
        }
        let n = rows.len();
        let value = rows.iter().map(|&r| y[r]).sum::<f64>() / n as f64;
        let can_split = params.max_depth.map_or(true, |m| depth < m) && n >= 2 * min_leaf;
        let split = if can_split {
            let mut feats = sample(rng, d, params.k).into_vec();
            feats.sort_unstable();
            best_split_rows(x, y, &rows, &feats, min_leaf)
        } else {
            None
        };
        match split {
            None => nodes.push(Node::Leaf { value, n_samples: n }),
            Some(s) => {
                let (left, right): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&r| x.get(r, s.feature) <= s.threshold);
                nodes.push(Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: id + 1,
                    right: usize::MAX,
                    decrease: s.decrease,
                    n_samples: n,
                });
                stack.push((right, depth + 1, Some(id)));
                stack.push((left, depth + 1, None));
            }
        }
    }
    Ok(Tree { nodes })
}

/// Default features per split: `round(sqrt(d))`, at least 1.
pub fn default_k(d: usize) -> usize {
    ((d as f64).sqrt().round() as usize).clamp(1, d.max(1))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for tree `i` of a forest seeded with `seed`.
pub fn child_seed(seed: u64, i: usize) -> u64 {
    splitmix64(splitmix64(seed) ^ (i as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features per split; `round(sqrt(d))` when unset.
    #[serde(default)]
    pub max_features: Option<usize>,
    #[serde(default = "one")]
    pub min_samples_leaf: usize,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "yes")]
    pub bootstrap: bool,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Default for ForestParams {
    fn default() -> Self {
        Self::new(100, 0)
    }
}

impl ForestParams {
    pub fn new(n_trees: usize, seed: u64) -> Self {
        Self { n_trees, max_features: None, min_samples_leaf: 1, max_depth: None, bootstrap: true, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub k: usize,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub seed: u64,
    #[serde(skip)]
    pub oob_indices: Vec<Vec<usize>>,
}

pub fn fit_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<ForestModel> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput);
    }
    if params.n_trees == 0 {
        return Err(Error::BadConfig("forest needs at least one tree".into()));
    }
    let k = params.max_features.unwrap_or_else(|| default_k(d));
    let tree_params = TreeParams { k, min_samples_leaf: params.min_samples_leaf, max_depth: params.max_depth };

    let fitted: Vec<(Tree, Vec<usize>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(params.seed, i));
            let (rows, oob) = if params.bootstrap {
                let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let mut drawn = vec![false; n];
                for &r in &rows {
                    drawn[r] = true;
                }
                (rows, (0..n).filter(|&r| !drawn[r]).collect())
            } else {
                ((0..n).collect(), Vec::new())
            };
            fit_tree_rows(x, y, rows, &tree_params, &mut rng).map(|t| (t, oob))
        })
        .collect::<Result<_>>()?;

    let (trees, oob_indices) = fitted.into_iter().unzip();
    Ok(ForestModel {
        trees,
        k,
        n_features: d,
        feature_names: (0..d).map(|j| format!("x{j}")).collect(),
        seed: params.seed,
        oob_indices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDistribution {
    pub tree_outputs: Vec<f64>,
    pub bin_edges: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub point_estimate: f64,
}

impl PredictionDistribution {
    pub fn from_outputs(tree_outputs: Vec<f64>, bins: usize) -> Result<Self> {
        if tree_outputs.is_empty() {
            return Err(Error::EmptyInput);
        }
        if bins == 0 {
            return Err(Error::BadConfig("histogram needs at least one bin".into()));
        }
        let m = tree_outputs.len() as f64;
        let lo = tree_outputs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tree_outputs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let point_estimate = tree_outputs.iter().sum::<f64>() / m;
        if lo == hi {
            return Ok(Self { tree_outputs, bin_edges: vec![lo, hi], probabilities: vec![1.0], point_estimate });
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for v in &tree_outputs {
            let b = (((v - lo) / width).floor() as usize).min(bins - 1);
            counts[b] += 1;
        }
        let mut bin_edges: Vec<f64> = (0..bins).map(|b| lo + b as f64 * width).collect();
        bin_edges.push(hi);
        Ok(Self {
            tree_outputs,
            bin_edges,
            probabilities: counts.iter().map(|&c| c as f64 / m).collect(),
            point_estimate,
        })
    }

    /// Share of tree outputs within `delta` of `value`.
    pub fn prob_within(&self, value: f64, delta: f64) -> f64 {
        let hits = self.tree_outputs.iter().filter(|o| (*o - value).abs() <= delta).count();
        hits as f64 / self.tree_outputs.len() as f64
    }

    /// `(bin_left, bin_right, probability)` rows.
    pub fn bins(&self) -> Vec<(f64, f64, f64)> {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(b, p)| (self.bin_edges[b], self.bin_edges[b + 1], *p))
            .collect()
    }
}

impl ForestModel {
    pub fn with_feature_names(mut self, names: &[String]) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: names.len() });
        }
        self.feature_names = names.to_vec();
        Ok(self)
    }

    pub fn tree_outputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        Ok(self.trees.iter().map(|t| t.predict_row(x)).collect())
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        let out = self.tree_outputs(x)?;
        Ok(out.iter().sum::<f64>() / out.len() as f64)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.ensure_cols(self.n_features)?;
        (0..x.rows()).into_par_iter().map(|i| self.predict_row(x.row(i))).collect()
    }

    pub fn predict_distribution(&self, x: &[f64], bins: usize) -> Result<PredictionDistribution> {
        PredictionDistribution::from_outputs(self.tree_outputs(x)?, bins)
    }

    /// Impurity-decrease importance per feature, scaled to sum to 100 and
    /// sorted descending. All zeros when no tree has a split.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let mut raw = vec![0.0; self.n_features];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let Node::Split { feature, decrease, .. } = node {
                    raw[*feature] += decrease;
                }
            }
        }
        let total: f64 = raw.iter().sum();
        let mut scored: Vec<(usize, f64)> = raw
            .iter()
            .enumerate()
            .map(|(j, v)| (j, if total > 0.0 { 100.0 * v / total } else { 0.0 }))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.into_iter().map(|(j, s)| (self.feature_names[j].clone(), s)).collect()
    }
}

/// Features whose importance is at least `cutoff`.
pub fn important_features(ranking: &[(String, f64)], cutoff: f64) -> Vec<String> {
    ranking.iter().filter(|(_, s)| *s >= cutoff && *s > 0.0).map(|(n, _)| n.clone()).collect()
}
