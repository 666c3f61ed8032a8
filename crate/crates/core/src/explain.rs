//! Exact SHAP values for tree ensembles.
//!
//! Expectations are path-dependent: a feature outside the coalition splits
//! the expectation between both children in proportion to training cover.
//! Attributions are in margin space (log-odds or class logits for boosting,
//! class probability for forests).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::FeatureMatrix;
use crate::models::{sigmoid, ModelArtifact, ModelBody, ModelError, Tree, TreeEnsembleView};

/// Largest feature count the subset-enumeration oracle accepts.
pub const MAX_BRUTE_FORCE_FEATURES: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplainError {
    #[error("tree node {node} has no usable cover ({cover})")]
    MissingCover { node: usize, cover: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0} features exceed the brute-force limit of {MAX_BRUTE_FORCE_FEATURES}")]
    TooManyFeatures(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundPolicy {
    /// Conditional expectations from the trees' own training cover.
    #[default]
    PathDependent,
}

fn check_cover(tree: &Tree) -> Result<(), ExplainError> {
    for (i, n) in tree.nodes.iter().enumerate() {
        let bad = !n.cover.is_finite() || n.cover < 0.0 || (!n.is_leaf() && n.cover <= 0.0);
        if bad {
            return Err(ExplainError::MissingCover {
                node: i,
                cover: n.cover,
            });
        }
    }
    Ok(())
}

/// Cover-weighted mean leaf value.
pub fn expected_value(tree: &Tree, value_index: usize) -> f64 {
    fn go(t: &Tree, i: usize, k: usize) -> f64 {
        let n = &t.nodes[i];
        if n.is_leaf() {
            return n.value[k];
        }
        let (l, r) = (&t.nodes[n.left], &t.nodes[n.right]);
        (l.cover * go(t, n.left, k) + r.cover * go(t, n.right, k)) / n.cover
    }
    go(tree, 0, value_index)
}

#[derive(Debug, Clone, Copy)]
struct PathElem {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: Option<usize>) {
    let l = path.len();
    path.push(PathElem {
        feature,
        zero,
        one,
        weight: if l == 0 { 1.0 } else { 0.0 },
    });
    let lf = (l + 1) as f64;
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / lf;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / lf;
    }
}

fn unwind(path: &mut Vec<PathElem>, idx: usize) {
    let l = path.len() - 1;
    let (one, zero) = (path[idx].one, path[idx].zero);
    let lf = (l + 1) as f64;
    let mut n = path[l].weight;
    for j in (0..l).rev() {
        if one != 0.0 {
            let t = path[j].weight;
            path[j].weight = n * lf / ((j + 1) as f64 * one);
            n = t - path[j].weight * zero * (l - j) as f64 / lf;
        } else {
            path[j].weight = path[j].weight * lf / (zero * (l - j) as f64);
        }
    }
    for j in idx..l {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElem], idx: usize) -> f64 {
    let l = path.len() - 1;
    let (one, zero) = (path[idx].one, path[idx].zero);
    let lf = (l + 1) as f64;
    let mut n = path[l].weight;
    let mut total = 0.0;
    for j in (0..l).rev() {
        if one != 0.0 {
            let t = n * lf / ((j + 1) as f64 * one);
            total += t;
            n = path[j].weight - t * zero * (l - j) as f64 / lf;
        } else {
            total += path[j].weight / zero * lf / (l - j) as f64;
        }
    }
    total
}

struct ShapCtx<'a> {
    tree: &'a Tree,
    row: &'a [f64],
    value_index: usize,
    scale: f64,
}

impl ShapCtx<'_> {
    fn recurse(
        &self,
        node: usize,
        mut path: Vec<PathElem>,
        zero: f64,
        one: f64,
        feature: Option<usize>,
        phi: &mut [f64],
    ) {
        extend(&mut path, zero, one, feature);
        let n = &self.tree.nodes[node];
        let Some(f) = n.feature else {
            let v = self.scale * n.value[self.value_index];
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let e = path[i];
                phi[e.feature.expect("only the root element lacks a feature")] +=
                    w * (e.one - e.zero) * v;
            }
            return;
        };
        let hot = self.tree.next(node, self.row[f]);
        let cold = if hot == n.left { n.right } else { n.left };
        let (mut iz, mut io) = (1.0, 1.0);
        if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(f)) {
            iz = path[k].zero;
            io = path[k].one;
            unwind(&mut path, k);
        }
        let nodes = &self.tree.nodes;
        self.recurse(
            hot,
            path.clone(),
            iz * nodes[hot].cover / n.cover,
            io,
            Some(f),
            phi,
        );
        self.recurse(
            cold,
            path,
            iz * nodes[cold].cover / n.cover,
            0.0,
            Some(f),
            phi,
        );
    }
}

/// Adds one scaled tree's SHAP values for `row` into `phi`.
pub fn tree_shap_single(tree: &Tree, row: &[f64], value_index: usize, scale: f64, phi: &mut [f64]) {
    let ctx = ShapCtx {
        tree,
        row,
        value_index,
        scale,
    };
    ctx.recurse(0, Vec::with_capacity(tree.depth() + 2), 1.0, 1.0, None, phi);
}

/// Base value and per-feature SHAP values of one output for one row.
pub fn shap_row(
    view: &TreeEnsembleView<'_>,
    row: &[f64],
    output: usize,
    n_features: usize,
) -> (f64, Vec<f64>) {
    let mut phi = vec![0.0; n_features];
    let mut base = view.base[output];
    for t in view.terms.iter().filter(|t| t.output == output) {
        base += t.scale * expected_value(t.tree, t.value_index);
        tree_shap_single(t.tree, row, t.value_index, t.scale, &mut phi);
    }
    (base, phi)
}

/// Path-dependent conditional expectation `E[f(x) | x_S]` of one tree.
fn conditional_value(tree: &Tree, row: &[f64], value_index: usize, mask: u32) -> f64 {
    fn go(t: &Tree, i: usize, row: &[f64], k: usize, mask: u32) -> f64 {
        let n = &t.nodes[i];
        let Some(f) = n.feature else {
            return n.value[k];
        };
        if mask & (1 << f) != 0 {
            go(t, t.next(i, row[f]), row, k, mask)
        } else {
            let (l, r) = (&t.nodes[n.left], &t.nodes[n.right]);
            (l.cover * go(t, n.left, row, k, mask) + r.cover * go(t, n.right, row, k, mask))
                / n.cover
        }
    }
    go(tree, 0, row, value_index, mask)
}

/// Exact Shapley values by enumerating all `2^d` coalitions.
pub fn brute_force_shap_view(
    view: &TreeEnsembleView<'_>,
    row: &[f64],
    output: usize,
    n_features: usize,
    _policy: BackgroundPolicy,
) -> Result<(f64, Vec<f64>), ExplainError> {
    if n_features > MAX_BRUTE_FORCE_FEATURES {
        return Err(ExplainError::TooManyFeatures(n_features));
    }
    let d = n_features;
    let value = |mask: u32| -> f64 {
        view.base[output]
            + view
                .terms
                .iter()
                .filter(|t| t.output == output)
                .map(|t| t.scale * conditional_value(t.tree, row, t.value_index, mask))
                .sum::<f64>()
    };
    let v: Vec<f64> = (0..1u32 << d).map(value).collect();
    // |S|!(d−|S|−1)!/d!
    let mut fact = vec![1.0f64; d + 1];
    for i in 1..=d {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for s in 0..1u32 << d {
            if s & bit != 0 {
                continue;
            }
            let k = s.count_ones() as usize;
            let w = fact[k] * fact[d - k - 1] / fact[d];
            *p += w * (v[(s | bit) as usize] - v[s as usize]);
        }
    }
    Ok((v[0], phi))
}

/// Brute-force SHAP values per output for one row of a tree model.
pub fn brute_force_shap(
    model: &ModelArtifact,
    row: &[f64],
    policy: BackgroundPolicy,
) -> Result<Vec<(f64, Vec<f64>)>, ExplainError> {
    let view = model.tree_view()?;
    let d = model.feature_names.len();
    if d > MAX_BRUTE_FORCE_FEATURES {
        return Err(ExplainError::TooManyFeatures(d));
    }
    (0..view.n_outputs)
        .map(|k| brute_force_shap_view(&view, row, k, d, policy))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapAttribution {
    pub feature_names: Vec<String>,
    pub patient_ids: Vec<String>,
    /// Class each output explains (binary boosting has one output, class 1).
    pub output_classes: Vec<usize>,
    /// Expected margin per output.
    pub base_value: Vec<f64>,
    /// Row-major feature values the attributions refer to.
    pub values: Vec<f64>,
    /// `phi[(row · n_outputs + output) · n_features + feature]`.
    pub phi: Vec<f64>,
}

impl ShapAttribution {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_classes.len()
    }

    pub fn n_rows(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn phi_row(&self, row: usize, output: usize) -> &[f64] {
        let d = self.n_features();
        let start = (row * self.n_outputs() + output) * d;
        &self.phi[start..start + d]
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.values[row * self.n_features() + feature]
    }

    /// `base_value + Σ phi`.
    pub fn reconstructed_margin(&self, row: usize, output: usize) -> f64 {
        self.base_value[output] + self.phi_row(row, output).iter().sum::<f64>()
    }

    /// Probability-space attribution for a single logistic output, obtained by
    /// sharing `σ(margin) − σ(base)` in proportion to phi. Approximate.
    pub fn probability_deltas(&self, row: usize) -> Option<Vec<f64>> {
        if self.n_outputs() != 1 {
            return None;
        }
        let phi = self.phi_row(row, 0);
        let total: f64 = phi.iter().sum();
        let dp = sigmoid(self.base_value[0] + total) - sigmoid(self.base_value[0]);
        Some(if total == 0.0 {
            vec![0.0; phi.len()]
        } else {
            phi.iter().map(|p| p / total * dp).collect()
        })
    }
}

/// SHAP values for every row of `x` and every output of a tree model.
pub fn tree_shap(
    model: &ModelArtifact,
    x: &FeatureMatrix,
) -> Result<ShapAttribution, ExplainError> {
    let view = model.tree_view()?;
    for t in &view.terms {
        check_cover(t.tree)?;
    }
    let x = model.align(x)?;
    let d = x.n_cols();
    let n_out = view.n_outputs;
    let per_row: Vec<(Vec<f64>, Vec<f64>)> = (0..x.n_rows())
        .into_par_iter()
        .map(|r| {
            let mut bases = Vec::with_capacity(n_out);
            let mut phis = Vec::with_capacity(n_out * d);
            for k in 0..n_out {
                let (b, p) = shap_row(&view, x.row(r), k, d);
                bases.push(b);
                phis.extend(p);
            }
            (bases, phis)
        })
        .collect();
    let base_value = match per_row.first() {
        Some((b, _)) => b.clone(),
        None => (0..n_out)
            .map(|k| shap_row(&view, &vec![0.0; d], k, d).0)
            .collect(),
    };
    let output_classes = match &model.body {
        ModelBody::Gbdt(g) if g.n_outputs() == 1 => vec![1],
        _ => (0..n_out).collect(),
    };
    Ok(ShapAttribution {
        feature_names: model.feature_names.clone(),
        patient_ids: x.patient_ids().to_vec(),
        output_classes,
        base_value,
        values: x.rows().flat_map(|r| r.to_vec()).collect(),
        phi: per_row.into_iter().flat_map(|(_, p)| p).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRank {
    pub feature: String,
    pub index: usize,
    pub mean_abs_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub row: usize,
    pub feature_value: f64,
    pub phi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

/// Feature value against attribution for one explained class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScatter {
    pub class: usize,
    pub feature: String,
    pub points: Vec<ScatterPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub ranking: Vec<FeatureRank>,
    pub per_class: Vec<ClassScatter>,
}

/// Ranks features by mean over rows of `Σ_outputs |phi|` (ties by index) and
/// collects per-class scatter data.
pub fn shap_summary(attr: &ShapAttribution, labels: Option<&[usize]>) -> ShapSummary {
    let (n, d, k) = (attr.n_rows(), attr.n_features(), attr.n_outputs());
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for o in 0..k {
            for (m, p) in mean.iter_mut().zip(attr.phi_row(r, o)) {
                *m += p.abs();
            }
        }
    }
    if n > 0 {
        mean.iter_mut().for_each(|m| *m /= n as f64);
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]).then(a.cmp(&b)));
    let ranking = order
        .iter()
        .map(|&i| FeatureRank {
            feature: attr.feature_names[i].clone(),
            index: i,
            mean_abs_phi: mean[i],
        })
        .collect();
    let mut per_class = Vec::with_capacity(k * d);
    for o in 0..k {
        for j in 0..d {
            per_class.push(ClassScatter {
                class: attr.output_classes[o],
                feature: attr.feature_names[j].clone(),
                points: (0..n)
                    .map(|r| ScatterPoint {
                        row: r,
                        feature_value: attr.value(r, j),
                        phi: attr.phi_row(r, o)[j],
                        label: labels.map(|l| l[r]),
                    })
                    .collect(),
            });
        }
    }
    ShapSummary { ranking, per_class }
}

pub fn write_shap_csv<W: Write>(attr: &ShapAttribution, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "patient_id",
        "row",
        "class",
        "feature",
        "feature_value",
        "phi",
        "base_value",
    ])?;
    for r in 0..attr.n_rows() {
        for o in 0..attr.n_outputs() {
            for (j, p) in attr.phi_row(r, o).iter().enumerate() {
                w.write_record([
                    attr.patient_ids[r].clone(),
                    r.to_string(),
                    attr.output_classes[o].to_string(),
                    attr.feature_names[j].clone(),
                    attr.value(r, j).to_string(),
                    p.to_string(),
                    attr.base_value[o].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ranking_csv<W: Write>(summary: &ShapSummary, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "feature", "mean_abs_phi"])?;
    for (i, f) in summary.ranking.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            f.feature.clone(),
            f.mean_abs_phi.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
