//! Random forest of Gini trees with bootstrap rows and per-node feature
//! subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Criterion, GrowParams, Tree};
use super::{derive_seed, ModelError};
use crate::dataset::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().round() as usize).clamp(1, d.max(1)),
            MaxFeatures::All => d,
            MaxFeatures::Count(m) => m.clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or hit `min_samples_leaf`.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    /// A single deterministic CART tree on all rows and features.
    pub fn single_tree() -> Self {
        Self {
            n_trees: 1,
            max_features: MaxFeatures::All,
            bootstrap: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_classes: usize,
    /// Leaves hold class frequencies.
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Mean of per-tree leaf class frequencies.
    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.predict(row)) {
                *acc += v;
            }
        }
        let n = self.trees.len() as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }
}

pub(crate) fn fit(
    x: &FeatureMatrix,
    y: &[usize],
    weights: &[f64],
    n_classes: usize,
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, ModelError> {
    if params.n_trees == 0 {
        return Err(ModelError::InvalidHyperparams(
            "random forest needs at least one tree".into(),
        ));
    }
    let n = x.n_rows();
    let mut stats = vec![0.0; n * n_classes];
    for r in 0..n {
        stats[r * n_classes + y[r]] = weights[r];
    }
    let grow = GrowParams {
        max_depth: params.max_depth.unwrap_or(usize::MAX),
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(params.max_features.resolve(x.n_cols())),
    };
    let crit = Criterion::Gini { n_classes };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
            let rows: Vec<usize> = if params.bootstrap {
                let mut r: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                r.sort_unstable();
                r
            } else {
                (0..n).collect()
            };
            grow_tree(x, &rows, &stats, weights, crit, grow, Some(&mut rng))
        })
        .collect();
    Ok(ForestModel { n_classes, trees })
}
