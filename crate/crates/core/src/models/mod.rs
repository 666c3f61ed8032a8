//! Supervised learners: gradient-boosted trees, random forest, linear SVM and
//! a two-hidden-layer MLP, with a versioned JSON artifact format.

pub mod forest;
pub mod gbdt;
pub mod mlp;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ColumnKind, ColumnMeta, FeatureMatrix, Imputer};

pub use forest::{ForestModel, ForestParams, MaxFeatures};
pub use gbdt::{GbdtModel, GbdtParams};
pub use mlp::{MlpModel, MlpParams};
pub use svm::{SvmModel, SvmParams};
pub use tree::{Tree, TreeNode};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("labels contain a single class or miss class {0}")]
    DegenerateLabels(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite feature at row {row}, column '{column}'")]
    NonFiniteFeature { row: usize, column: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("{0} is not a tree model")]
    NotATreeModel(ModelKind),
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model payload: {0}")]
    CorruptPayload(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbdt,
    RandomForest,
    LinearSvm,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Gbdt,
        ModelKind::RandomForest,
        ModelKind::LinearSvm,
        ModelKind::Mlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gbdt => "gbdt",
            ModelKind::RandomForest => "random_forest",
            ModelKind::LinearSvm => "linear_svm",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn is_tree(self) -> bool {
        matches!(self, ModelKind::Gbdt | ModelKind::RandomForest)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().replace('-', "_").as_str() {
            "gbdt" | "gradient_boosting" => Ok(ModelKind::Gbdt),
            "random_forest" | "rf" => Ok(ModelKind::RandomForest),
            "linear_svm" | "svm" => Ok(ModelKind::LinearSvm),
            "mlp" => Ok(ModelKind::Mlp),
            _ => Err(format!("unknown model kind '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Task {
    Binary,
    Multiclass { k: usize },
}

impl Task {
    pub fn n_classes(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::Multiclass { k } => k,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Multiclass { .. } => "multiclass",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    /// `binary`, `multiclass` (four classes) or `multiclass:K`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_lowercase();
        match s.split_once(':') {
            None if s == "binary" => Ok(Task::Binary),
            None if s == "multiclass" => Ok(Task::Multiclass { k: 4 }),
            Some(("multiclass", k)) => match k.parse::<usize>() {
                Ok(k) if k >= 2 => Ok(Task::Multiclass { k }),
                _ => Err(format!("bad class count in '{s}'")),
            },
            _ => Err(format!("unknown task '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    #[default]
    None,
    /// Row weight `n / (K · n_class)`.
    InversePrevalence,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub gbdt: GbdtParams,
    pub random_forest: ForestParams,
    pub linear_svm: SvmParams,
    pub mlp: MlpParams,
    pub class_weight: ClassWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub task: Task,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, task: Task) -> Self {
        Self {
            kind,
            task,
            hyperparams: Hyperparams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelBody {
    Gbdt(GbdtModel),
    RandomForest(ForestModel),
    LinearSvm(SvmModel),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub model_kind: ModelKind,
    pub task: Task,
    pub feature_names: Vec<String>,
    /// Metadata of the categorical columns the model was trained on.
    #[serde(default)]
    pub encoders: Vec<ColumnMeta>,
    pub hyperparams: serde_json::Value,
    pub seed: u64,
    /// Medians fitted on the training rows, applied to inputs before prediction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imputer: Option<Imputer>,
    pub body: ModelBody,
}

/// Row-major `n × n_classes` class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities {
    pub n_classes: usize,
    pub values: Vec<f64>,
}

impl Probabilities {
    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_classes..(i + 1) * self.n_classes]
    }

    /// Probability of class 1 per row (the positive class in binary tasks).
    pub fn positive(&self) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row(i)[1]).collect()
    }

    pub fn predicted_classes(&self) -> Vec<usize> {
        (0..self.n_rows())
            .map(|i| crate::metrics::argmax(self.row(i)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature_names: Vec<String>,
    pub gain_fraction: Vec<f64>,
    pub split_count: Vec<usize>,
}

impl FeatureImportance {
    /// Feature indices by descending gain fraction, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.gain_fraction.len()).collect();
        idx.sort_by(|&a, &b| {
            self.gain_fraction[b]
                .total_cmp(&self.gain_fraction[a])
                .then(a.cmp(&b))
        });
        idx
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Class probabilities from raw outputs: one logistic output or `K` softmax outputs.
pub(crate) fn probabilities_from_margins(m: &[f64]) -> Vec<f64> {
    if m.len() == 1 {
        let p = sigmoid(m[0]);
        vec![1.0 - p, p]
    } else {
        softmax(m)
    }
}

/// SplitMix64 finalizer; derives independent sub-seeds from `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-column mean and standard deviation (constant columns get scale 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let n = x.n_rows() as f64;
        let d = x.n_cols();
        let mut mean = vec![0.0; d];
        let mut scale = vec![0.0; d];
        for j in 0..d {
            mean[j] = x.column(j).sum::<f64>() / n;
            let var = x.column(j).map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n;
            scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Self { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

fn class_weights(y: &[usize], k: usize, policy: ClassWeight) -> Vec<f64> {
    match policy {
        ClassWeight::None => vec![1.0; y.len()],
        ClassWeight::InversePrevalence => {
            let mut counts = vec![0usize; k];
            for &c in y {
                counts[c] += 1;
            }
            let n = y.len() as f64;
            y.iter()
                .map(|&c| n / (k as f64 * counts[c] as f64))
                .collect()
        }
    }
}

fn validate_inputs(
    x: &FeatureMatrix,
    y: &[usize],
    task: Task,
    allow_nan: bool,
) -> Result<(), ModelError> {
    if x.n_rows() != y.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    if x.n_rows() < 2 {
        return Err(ModelError::ShapeMismatch(format!(
            "{} rows; at least 2 needed",
            x.n_rows()
        )));
    }
    let k = task.n_classes();
    let mut seen = vec![false; k];
    for &c in y {
        if c >= k {
            return Err(ModelError::ShapeMismatch(format!(
                "label {c} outside 0..{k}"
            )));
        }
        seen[c] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(ModelError::DegenerateLabels(missing));
    }
    for r in 0..x.n_rows() {
        for (j, &v) in x.row(r).iter().enumerate() {
            if v.is_infinite() || (v.is_nan() && !allow_nan) {
                return Err(ModelError::NonFiniteFeature {
                    row: r,
                    column: x.columns()[j].name.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Fits a model. Tree models accept NaN as missing; the linear SVM and MLP
/// require imputed input.
pub fn train(
    spec: &ModelSpec,
    x: &FeatureMatrix,
    y: &[usize],
) -> Result<ModelArtifact, ModelError> {
    validate_inputs(x, y, spec.task, spec.kind.is_tree())?;
    let k = spec.task.n_classes();
    let w = class_weights(y, k, spec.hyperparams.class_weight);
    let hp = &spec.hyperparams;
    let (body, params) = match spec.kind {
        ModelKind::Gbdt => (
            ModelBody::Gbdt(gbdt::fit(x, y, &w, k, &hp.gbdt)?),
            to_json(&hp.gbdt),
        ),
        ModelKind::RandomForest => (
            ModelBody::RandomForest(forest::fit(x, y, &w, k, &hp.random_forest, spec.seed)?),
            to_json(&hp.random_forest),
        ),
        ModelKind::LinearSvm => (
            ModelBody::LinearSvm(svm::fit(x, y, &w, k, &hp.linear_svm)?),
            to_json(&hp.linear_svm),
        ),
        ModelKind::Mlp => (
            ModelBody::Mlp(mlp::fit(x, y, &w, k, &hp.mlp, spec.seed)?),
            to_json(&hp.mlp),
        ),
    };
    let mut hyperparams = serde_json::Map::new();
    hyperparams.insert(spec.kind.as_str().into(), params);
    hyperparams.insert(
        "class_weight".into(),
        serde_json::to_value(hp.class_weight).expect("enum serializes"),
    );
    Ok(ModelArtifact {
        format_version: FORMAT_VERSION,
        model_kind: spec.kind,
        task: spec.task,
        feature_names: x.names(),
        encoders: x
            .columns()
            .iter()
            .filter(|c| c.kind != ColumnKind::Numeric)
            .cloned()
            .collect(),
        hyperparams: serde_json::Value::Object(hyperparams),
        seed: spec.seed,
        imputer: None,
        body,
    })
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("params serialize")
}

impl ModelArtifact {
    /// Reorders `x` to the training column order and fills missing cells
    /// with the stored imputer. Missing or extra columns are a schema mismatch.
    pub fn align(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, ModelError> {
        let names = x.names();
        let mut out = if names == self.feature_names {
            x.clone()
        } else {
            if let Some(extra) = names.iter().find(|n| !self.feature_names.contains(n)) {
                return Err(ModelError::SchemaMismatch(format!(
                    "unexpected column '{extra}'"
                )));
            }
            x.select_columns(&self.feature_names).map_err(|missing| {
                ModelError::SchemaMismatch(format!("missing column '{missing}'"))
            })?
        };
        if let Some(imp) = &self.imputer {
            if imp.fill.len() != out.n_cols() {
                return Err(ModelError::CorruptPayload(format!(
                    "imputer has {} columns, model has {}",
                    imp.fill.len(),
                    out.n_cols()
                )));
            }
            imp.transform(&mut out);
        }
        Ok(out)
    }

    /// Raw per-row outputs: log-odds (binary) or class logits for GBDT, SVM
    /// and MLP; class probabilities for the forest.
    pub fn margins_row(&self, row: &[f64]) -> Vec<f64> {
        match &self.body {
            ModelBody::Gbdt(m) => m.margins(row),
            ModelBody::RandomForest(m) => m.predict_row(row),
            ModelBody::LinearSvm(m) => m.decision(row),
            ModelBody::Mlp(m) => m.forward(row),
        }
    }

    fn probabilities_row(&self, row: &[f64]) -> Vec<f64> {
        match &self.body {
            ModelBody::Gbdt(m) => probabilities_from_margins(&m.margins(row)),
            ModelBody::RandomForest(m) => m.predict_row(row),
            ModelBody::LinearSvm(m) => m.predict_row(row),
            ModelBody::Mlp(m) => probabilities_from_margins(&m.forward(row)),
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Probabilities, ModelError> {
        let x = self.align(x)?;
        if !self.model_kind.is_tree() {
            if let Some(r) = (0..x.n_rows()).find(|&r| x.row(r).iter().any(|v| !v.is_finite())) {
                let j = x.row(r).iter().position(|v| !v.is_finite()).unwrap();
                return Err(ModelError::NonFiniteFeature {
                    row: r,
                    column: self.feature_names[j].clone(),
                });
            }
        }
        let k = self.task.n_classes();
        let mut values = Vec::with_capacity(x.n_rows() * k);
        for r in 0..x.n_rows() {
            values.extend(self.probabilities_row(x.row(r)));
        }
        Ok(Probabilities {
            n_classes: k,
            values,
        })
    }

    pub fn feature_importance(&self) -> Result<FeatureImportance, ModelError> {
        let trees: Vec<&Tree> = match &self.body {
            ModelBody::Gbdt(m) => m.trees.iter().flatten().collect(),
            ModelBody::RandomForest(m) => m.trees.iter().collect(),
            _ => return Err(ModelError::NotATreeModel(self.model_kind)),
        };
        let d = self.feature_names.len();
        let mut gain = vec![0.0; d];
        let mut split_count = vec![0usize; d];
        for t in trees {
            for n in &t.nodes {
                if let Some(f) = n.feature {
                    gain[f] += n.gain;
                    split_count[f] += 1;
                }
            }
        }
        let total: f64 = gain.iter().sum();
        let gain_fraction = if total > 0.0 {
            gain.iter().map(|g| g / total).collect()
        } else {
            vec![0.0; d]
        };
        Ok(FeatureImportance {
            feature_names: self.feature_names.clone(),
            gain_fraction,
            split_count,
        })
    }

    /// The model as a sum of scaled tree outputs per output channel.
    pub fn tree_view(&self) -> Result<TreeEnsembleView<'_>, ModelError> {
        match &self.body {
            ModelBody::Gbdt(m) => {
                let n_out = m.n_outputs();
                let mut terms = Vec::new();
                for round in &m.trees {
                    for (k, t) in round.iter().enumerate() {
                        terms.push(EnsembleTerm {
                            tree: t,
                            output: k,
                            value_index: 0,
                            scale: m.learning_rate,
                        });
                    }
                }
                Ok(TreeEnsembleView {
                    n_outputs: n_out,
                    base: m.base_score.clone(),
                    terms,
                })
            }
            ModelBody::RandomForest(m) => {
                let n_out = m.n_classes;
                let scale = 1.0 / m.trees.len() as f64;
                let terms = m
                    .trees
                    .iter()
                    .flat_map(|t| {
                        (0..n_out).map(move |k| EnsembleTerm {
                            tree: t,
                            output: k,
                            value_index: k,
                            scale,
                        })
                    })
                    .collect();
                Ok(TreeEnsembleView {
                    n_outputs: n_out,
                    base: vec![0.0; n_out],
                    terms,
                })
            }
            _ => Err(ModelError::NotATreeModel(self.model_kind)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    pub fn serialize(&self) -> Vec<u8> {
        self.to_json().into_bytes()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, ModelError> {
        let value: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| ModelError::CorruptPayload(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ModelError::CorruptPayload("missing format_version".into()))?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(ModelError::VersionMismatch {
                found: found.min(u64::from(u32::MAX)) as u32,
                expected: FORMAT_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| ModelError::CorruptPayload(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> std::io::Result<()> {
        std::fs::write(path, self.serialize())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(|e| ModelError::CorruptPayload(e.to_string()))?;
        Self::deserialize(&bytes)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnsembleTerm<'a> {
    pub tree: &'a Tree,
    pub output: usize,
    /// Which entry of the leaf value vector feeds `output`.
    pub value_index: usize,
    pub scale: f64,
}

/// `margin[k](x) = base[k] + Σ_{terms with output k} scale · leaf(x)[value_index]`.
#[derive(Debug, Clone)]
pub struct TreeEnsembleView<'a> {
    pub n_outputs: usize,
    pub base: Vec<f64>,
    pub terms: Vec<EnsembleTerm<'a>>,
}

impl TreeEnsembleView<'_> {
    pub fn margin(&self, row: &[f64], output: usize) -> f64 {
        self.base[output]
            + self
                .terms
                .iter()
                .filter(|t| t.output == output)
                .map(|t| t.scale * t.tree.predict(row)[t.value_index])
                .sum::<f64>()
    }
}
