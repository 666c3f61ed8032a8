//! Second-order gradient boosting on log-loss (binary) or softmax
//! cross-entropy (multiclass).

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Criterion, GrowParams, Tree};
use super::{probabilities_from_margins, ModelError};
use crate::dataset::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_rounds: 200,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            lambda: 1.0,
        }
    }
}

impl GbdtParams {
    /// Named settings that stand in for common boosting libraries.
    pub fn preset(name: &str) -> Option<Self> {
        let base = Self::default();
        match name.to_lowercase().as_str() {
            "gradient_boosting" | "default" => Some(base),
            "lightgbm" => Some(Self {
                n_rounds: 100,
                max_depth: 5,
                min_samples_leaf: 20,
                ..base
            }),
            "catboost" => Some(Self {
                n_rounds: 500,
                max_depth: 6,
                learning_rate: 0.03,
                lambda: 3.0,
                min_samples_leaf: 1,
            }),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidHyperparams(
                "gbdt learning_rate must be positive".into(),
            ));
        }
        if !(self.lambda >= 0.0) {
            return Err(ModelError::InvalidHyperparams(
                "gbdt lambda must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub n_classes: usize,
    /// Prior margin per output: log-odds (binary) or log class frequency.
    pub base_score: Vec<f64>,
    pub learning_rate: f64,
    /// `trees[round][output]`; one output for binary, `K` for multiclass.
    pub trees: Vec<Vec<Tree>>,
}

impl GbdtModel {
    pub fn n_outputs(&self) -> usize {
        self.base_score.len()
    }

    pub fn margins(&self, row: &[f64]) -> Vec<f64> {
        self.margins_after(row, self.trees.len())
    }

    /// Margins using only the first `rounds` boosting rounds.
    pub fn margins_after(&self, row: &[f64], rounds: usize) -> Vec<f64> {
        let mut m = self.base_score.clone();
        for round in &self.trees[..rounds.min(self.trees.len())] {
            for (k, t) in round.iter().enumerate() {
                m[k] += self.learning_rate * t.predict(row)[0];
            }
        }
        m
    }

    /// Mean training log-loss before any tree and after each round.
    pub fn staged_log_loss(&self, x: &FeatureMatrix, y: &[usize]) -> Vec<f64> {
        let n = x.n_rows();
        let k = self.n_outputs();
        let mut margins: Vec<f64> = (0..n).flat_map(|_| self.base_score.clone()).collect();
        let loss = |m: &[f64]| -> f64 {
            (0..n)
                .map(|r| log_loss(&m[r * k..(r + 1) * k], y[r]))
                .sum::<f64>()
                / n as f64
        };
        let mut out = vec![loss(&margins)];
        for round in &self.trees {
            for r in 0..n {
                for (j, t) in round.iter().enumerate() {
                    margins[r * k + j] += self.learning_rate * t.predict(x.row(r))[0];
                }
            }
            out.push(loss(&margins));
        }
        out
    }
}

fn log_loss(margins: &[f64], y: usize) -> f64 {
    let p = probabilities_from_margins(margins);
    -p[y].max(1e-300).ln()
}

pub(crate) fn fit(
    x: &FeatureMatrix,
    y: &[usize],
    weights: &[f64],
    n_classes: usize,
    params: &GbdtParams,
) -> Result<GbdtModel, ModelError> {
    params.validate()?;
    let n = x.n_rows();
    let k = if n_classes == 2 { 1 } else { n_classes };
    let total_w: f64 = weights.iter().sum();
    let mut freq = vec![0.0; n_classes];
    for (&c, &w) in y.iter().zip(weights) {
        freq[c] += w / total_w;
    }
    let base_score = if k == 1 {
        vec![(freq[1] / freq[0]).ln()]
    } else {
        freq.iter().map(|p| p.ln()).collect()
    };
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: None,
    };
    let crit = Criterion::Newton {
        lambda: params.lambda,
    };
    let rows: Vec<usize> = (0..n).collect();
    let mut margins: Vec<f64> = (0..n).flat_map(|_| base_score.clone()).collect();
    let mut trees = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        let probs: Vec<Vec<f64>> = (0..n)
            .map(|r| probabilities_from_margins(&margins[r * k..(r + 1) * k]))
            .collect();
        let round: Vec<Tree> = (0..k)
            .into_par_iter()
            .map(|j| {
                let class = if k == 1 { 1 } else { j };
                let mut stats = Vec::with_capacity(2 * n);
                for r in 0..n {
                    let p = probs[r][class];
                    let target = if y[r] == class { 1.0 } else { 0.0 };
                    stats.push(weights[r] * (p - target));
                    stats.push(weights[r] * (p * (1.0 - p)).max(1e-16));
                }
                grow_tree::<ChaCha8Rng>(x, &rows, &stats, weights, crit, grow, None)
            })
            .collect();
        for r in 0..n {
            for (j, t) in round.iter().enumerate() {
                margins[r * k + j] += params.learning_rate * t.predict(x.row(r))[0];
            }
        }
        trees.push(round);
    }
    Ok(GbdtModel {
        n_classes,
        base_score,
        learning_rate: params.learning_rate,
        trees,
    })
}
