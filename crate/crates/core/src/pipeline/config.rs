use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::das21::MulticlassPolicy;
use crate::dataset::FeatureSetName;
use crate::models::{Hyperparams, ModelKind};
use crate::splits::SplitScheme;
use crate::wavelet::{BandOptions, MorletParams};

/// Overrides `paths.output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "LDF_DAS_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Participant table.
    pub data: Option<PathBuf>,
    /// Directory of `t_s,perfusion_pu` files named `<patient>_<hand>.csv` or
    /// `<patient>.csv`. When set, band features are recomputed from them.
    pub signals: Option<PathBuf>,
    /// Schema config (aliases, required columns, encoders).
    pub schema: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: None,
            signals: None,
            schema: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveletConfig {
    pub morlet: MorletParams,
    pub bands: BandOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub schemes: Vec<SplitScheme>,
    pub k: usize,
    /// Split and model seeds. Every seed yields a fresh plan for 80:20 and
    /// k-fold; LOPO plans are fixed and the seed only drives the model.
    pub seeds: Vec<u64>,
    /// Keep a patient's rows on one side of the 80:20 split.
    pub patient_wise_8020: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            schemes: vec![SplitScheme::KfoldPatient],
            k: 5,
            seeds: (0..10).collect(),
            patient_wise_8020: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Binary,
    Multiclass,
}

impl TaskName {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskName::Binary => "binary",
            TaskName::Multiclass => "multiclass",
        }
    }
}

impl std::str::FromStr for TaskName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_lowercase().as_str() {
            "binary" => Ok(TaskName::Binary),
            "multiclass" | "multi" => Ok(TaskName::Multiclass),
            _ => Err(format!("unknown task '{s}'")),
        }
    }
}

/// Everything a run depends on. Echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: Paths,
    pub wavelet: WaveletConfig,
    pub feature_sets: Vec<FeatureSetName>,
    pub models: Vec<ModelKind>,
    pub hyperparams: Hyperparams,
    pub split: SplitSpec,
    pub tasks: Vec<TaskName>,
    pub multiclass_policy: MulticlassPolicy,
    /// Mixed into every split and model seed.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paths: Paths::default(),
            wavelet: WaveletConfig::default(),
            feature_sets: vec![FeatureSetName::All],
            models: vec![ModelKind::Gbdt],
            hyperparams: Hyperparams::default(),
            split: SplitSpec::default(),
            tasks: vec![TaskName::Binary],
            multiclass_policy: MulticlassPolicy::Strict,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let empty = |what: &str| Err(PipelineError::Config(format!("{what} list is empty")));
        if self.feature_sets.is_empty() {
            return empty("feature_sets");
        }
        if self.models.is_empty() {
            return empty("models");
        }
        if self.tasks.is_empty() {
            return empty("tasks");
        }
        if self.split.schemes.is_empty() {
            return empty("split.schemes");
        }
        if self.split.seeds.is_empty() {
            return empty("split.seeds");
        }
        if self.split.schemes.contains(&SplitScheme::KfoldPatient) && self.split.k < 2 {
            return Err(PipelineError::Config(format!(
                "split.k must be at least 2, got {}",
                self.split.k
            )));
        }
        Ok(())
    }

    /// Applies [`OUTPUT_DIR_ENV`] if present.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.paths.output_dir = PathBuf::from(dir);
            }
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.models = vec![ModelKind::Gbdt, ModelKind::Mlp];
        cfg.split.seeds = vec![3, 4];
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg: RunConfig = toml::from_str(
            r#"
            models = ["random_forest"]
            feature_sets = ["top10"]
            [split]
            schemes = ["lopo"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.models, vec![ModelKind::RandomForest]);
        assert_eq!(cfg.split.k, 5);
        assert_eq!(cfg.split.seeds.len(), 10);
        assert_eq!(cfg.wavelet.morlet.voices_per_octave, 16);
    }

    #[test]
    fn rejects_empty_grid_axis() {
        let mut cfg = RunConfig::default();
        cfg.models.clear();
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
    }
}
