//! Exact greedy decision trees shared by the boosting and forest learners.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;

/// A node in a flat tree. `feature == None` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default)]
    pub left: usize,
    #[serde(default)]
    pub right: usize,
    /// Where a missing (NaN) value goes.
    #[serde(default)]
    pub default_left: bool,
    /// Leaf output; empty on internal nodes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub value: Vec<f64>,
    /// Training weight reaching the node.
    pub cover: f64,
    /// Loss or impurity reduction of the split (0 on leaves).
    #[serde(default)]
    pub gain: f64,
}

impl TreeNode {
    pub fn leaf(value: Vec<f64>, cover: f64) -> Self {
        Self {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            default_left: false,
            value,
            cover,
            gain: 0.0,
        }
    }

    pub fn split(feature: usize, threshold: f64, left: usize, right: usize, cover: f64) -> Self {
        Self {
            feature: Some(feature),
            threshold,
            left,
            right,
            default_left: true,
            value: Vec::new(),
            cover,
            gain: 0.0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }
}

/// Binary tree stored as a node vector with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn constant(value: Vec<f64>, cover: f64) -> Self {
        Self {
            nodes: vec![TreeNode::leaf(value, cover)],
        }
    }

    /// Checks child links and `cover(parent) = cover(left) + cover(right)`.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self, String> {
        if nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let width = nodes.iter().find(|n| n.is_leaf()).map(|n| n.value.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.is_leaf() {
                if Some(n.value.len()) != width || n.value.is_empty() {
                    return Err(format!("leaf {i} has inconsistent output width"));
                }
                continue;
            }
            if n.left <= i
                || n.right <= i
                || n.left >= nodes.len()
                || n.right >= nodes.len()
                || n.left == n.right
            {
                return Err(format!("node {i} has invalid children"));
            }
            let sum = nodes[n.left].cover + nodes[n.right].cover;
            if (sum - n.cover).abs() > 1e-9 * n.cover.abs().max(1.0) {
                return Err(format!("node {i} cover {} != children {}", n.cover, sum));
            }
        }
        Ok(Self { nodes })
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Some(f) = self.nodes[i].feature {
            i = self.next(i, row[f]);
        }
        i
    }

    /// Child taken at internal node `i` for feature value `v`.
    pub fn next(&self, i: usize, v: f64) -> usize {
        let n = &self.nodes[i];
        let left = if v.is_nan() {
            n.default_left
        } else {
            v <= n.threshold
        };
        if left {
            n.left
        } else {
            n.right
        }
    }

    pub fn predict(&self, row: &[f64]) -> &[f64] {
        &self.nodes[self.leaf_index(row)].value
    }

    pub fn n_internal(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            let n = &t.nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + go(t, n.left).max(go(t, n.right))
            }
        }
        go(self, 0)
    }
}

/// Split objective. Per-row statistics are stored flat, `width()` values per row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Criterion {
    /// Second-order boosting: stats `(g, h)`, score `G²/(H+λ)`, leaf `−G/(H+λ)`.
    Newton { lambda: f64 },
    /// Weighted class counts, score `Σc²/n` (Gini), leaf = class frequencies.
    Gini { n_classes: usize },
}

impl Criterion {
    fn width(&self) -> usize {
        match *self {
            Criterion::Newton { .. } => 2,
            Criterion::Gini { n_classes } => n_classes,
        }
    }

    fn score(&self, s: &[f64]) -> f64 {
        match *self {
            Criterion::Newton { lambda } => s[0] * s[0] / (s[1] + lambda),
            Criterion::Gini { .. } => {
                let n: f64 = s.iter().sum();
                if n > 0.0 {
                    s.iter().map(|c| c * c).sum::<f64>() / n
                } else {
                    0.0
                }
            }
        }
    }

    fn leaf(&self, s: &[f64]) -> Vec<f64> {
        match *self {
            Criterion::Newton { lambda } => vec![-s[0] / (s[1] + lambda)],
            Criterion::Gini { n_classes } => {
                let n: f64 = s.iter().sum();
                if n > 0.0 {
                    s.iter().map(|c| c / n).collect()
                } else {
                    vec![1.0 / n_classes as f64; n_classes]
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features examined per node; `None` means all.
    pub max_features: Option<usize>,
}

/// Gains at or below this are treated as no improvement.
const MIN_GAIN: f64 = 1e-12;

struct Grower<'a, R> {
    x: &'a FeatureMatrix,
    stats: &'a [f64],
    weights: &'a [f64],
    crit: Criterion,
    params: GrowParams,
    rng: Option<&'a mut R>,
    nodes: Vec<TreeNode>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    default_left: bool,
    gain: f64,
}

/// Grows a tree on `rows` (duplicates allowed, as in a bootstrap sample).
/// `stats` holds `crit.width()` weighted values per matrix row.
pub(crate) fn grow_tree<R: Rng>(
    x: &FeatureMatrix,
    rows: &[usize],
    stats: &[f64],
    weights: &[f64],
    crit: Criterion,
    params: GrowParams,
    rng: Option<&mut R>,
) -> Tree {
    let mut g = Grower {
        x,
        stats,
        weights,
        crit,
        params,
        rng,
        nodes: Vec::new(),
    };
    g.grow(rows.to_vec(), 0);
    Tree { nodes: g.nodes }
}

impl<R: Rng> Grower<'_, R> {
    fn sum_stats(&self, rows: &[usize]) -> Vec<f64> {
        let w = self.crit.width();
        let mut s = vec![0.0; w];
        for &r in rows {
            for (k, v) in s.iter_mut().enumerate() {
                *v += self.stats[r * w + k];
            }
        }
        s
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let total = self.sum_stats(&rows);
        let cover: f64 = rows.iter().map(|&r| self.weights[r]).sum();
        let idx = self.nodes.len();
        self.nodes
            .push(TreeNode::leaf(self.crit.leaf(&total), cover));
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_samples_leaf.max(1) {
            return idx;
        }
        let Some(c) = self.best_split(&rows, &total) else {
            return idx;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| {
            let v = self.x.get(r, c.feature);
            if v.is_nan() {
                c.default_left
            } else {
                v <= c.threshold
            }
        });
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        let node = &mut self.nodes[idx];
        node.feature = Some(c.feature);
        node.threshold = c.threshold;
        node.left = l;
        node.right = r;
        node.default_left = c.default_left;
        node.value.clear();
        node.gain = c.gain;
        idx
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.n_cols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], total: &[f64]) -> Option<Candidate> {
        let w = self.crit.width();
        let parent = self.crit.score(total);
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<Candidate> = None;
        let mut left = vec![0.0; w];
        let mut right = vec![0.0; w];
        let mut miss = vec![0.0; w];
        for f in self.candidate_features() {
            let mut present: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
            miss.iter_mut().for_each(|v| *v = 0.0);
            let mut n_miss = 0usize;
            for &r in rows {
                let v = self.x.get(r, f);
                if v.is_nan() {
                    n_miss += 1;
                    for k in 0..w {
                        miss[k] += self.stats[r * w + k];
                    }
                } else {
                    present.push((v, r));
                }
            }
            if present.len() < 2 {
                continue;
            }
            present.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut acc = vec![0.0; w];
            for i in 0..present.len() - 1 {
                let r = present[i].1;
                for k in 0..w {
                    acc[k] += self.stats[r * w + k];
                }
                let (a, b) = (present[i].0, present[i + 1].0);
                if a == b {
                    continue;
                }
                let mut thr = a + (b - a) / 2.0;
                if thr >= b {
                    thr = a;
                }
                let n_left = i + 1;
                let n_right = present.len() - n_left;
                // missing-right is tried first so it wins exact ties
                for miss_left in [false, true] {
                    if miss_left && n_miss == 0 {
                        continue;
                    }
                    let (nl, nr) = if miss_left {
                        (n_left + n_miss, n_right)
                    } else {
                        (n_left, n_right + n_miss)
                    };
                    if nl < min_leaf || nr < min_leaf {
                        continue;
                    }
                    for k in 0..w {
                        left[k] = acc[k] + if miss_left { miss[k] } else { 0.0 };
                        right[k] = total[k] - left[k];
                    }
                    let gain = self.crit.score(&left) + self.crit.score(&right) - parent;
                    if gain > MIN_GAIN && best.as_ref().is_none_or(|c| gain > c.gain) {
                        let default_left = if n_miss > 0 { miss_left } else { nl >= nr };
                        best = Some(Candidate {
                            feature: f,
                            threshold: thr,
                            default_left,
                            gain,
                        });
                    }
                }
            }
        }
        best
    }
}
