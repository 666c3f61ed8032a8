//! Column alias map and encoder configuration.
//!
//! ```toml
//! encoding = "ordinal"        # or "onehot"
//! on_invalid = "reject"       # or "skip"
//!
//! [aliases]
//! sigma = ["δ", "σ"]
//!
//! [required]
//! columns = ["patient_id", "age"]
//!
//! [encoders]
//! bp_level = ["low", "normal", "high"]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{canonical_columns, DatasetError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    #[default]
    Ordinal,
    Onehot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidRowPolicy {
    #[default]
    Reject,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RequiredSection {
    #[serde(default)]
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaConfig {
    pub encoding: Encoding,
    pub on_invalid: InvalidRowPolicy,
    pub delimiter: String,
    /// canonical name -> extra header spellings, merged over the defaults
    pub aliases: BTreeMap<String, Vec<String>>,
    pub required: RequiredSection,
    /// canonical categorical column -> categories in code order
    pub encoders: BTreeMap<String, Vec<String>>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        Self {
            encoding: Encoding::Ordinal,
            on_invalid: InvalidRowPolicy::Reject,
            delimiter: ",".into(),
            aliases: BTreeMap::new(),
            required: RequiredSection {
                columns: vec!["patient_id".into()],
            },
            encoders: BTreeMap::new(),
        }
    }
}

const DEFAULT_ALIASES: &[(&str, &[&str])] = &[
    (
        "patient_id",
        &["Patient_ID", "patient id", "patientid", "id", "subject"],
    ),
    ("gender", &["sex"]),
    ("bmi_index", &["BMI", "BMI index"]),
    ("heart_rate", &["Heart Rate", "HR", "pulse"]),
    (
        "bp_level",
        &["Level of BP", "BP level", "blood pressure level"],
    ),
    ("smoking_routine", &["Smoking routine", "smoking"]),
    ("skin_type", &["Type of skins", "Type of skin", "skin type"]),
    ("sleep_state", &["sleep", "sleeping", "sleep state"]),
    ("data_type", &["Type of data", "data type"]),
    ("sigma", &["δ", "σ", "delta"]),
    ("kv100", &["Kv100", "Kv"]),
    ("anadh", &["Anadn", "NADH", "A_NADH"]),
    ("temperature", &["T", "Temp"]),
    ("ae", &["A-E", "A_E", "F_Ae"]),
    ("an", &["A-N", "A_N"]),
    ("am", &["A-M", "A_M"]),
    ("ar", &["A-R", "A_R"]),
    ("ac", &["A-C", "A_C"]),
    ("fe", &["F-E", "F_E"]),
    ("fn", &["F-N", "F_N"]),
    ("fm", &["F-M", "F_M"]),
    ("fr", &["F-R", "F_R"]),
    ("fc", &["F-C", "F_C"]),
];

/// Case-folded header with whitespace, `_` and `-` removed.
fn normalize(h: &str) -> String {
    h.trim()
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '_' && *c != '-')
        .flat_map(char::to_lowercase)
        .collect()
}

impl SchemaConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, DatasetError> {
        let cfg: SchemaConfig =
            toml::from_str(text).map_err(|e| DatasetError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let canon = canonical_columns();
        for key in self
            .aliases
            .keys()
            .chain(&self.required.columns)
            .chain(self.encoders.keys())
        {
            if !canon.iter().any(|c| c == key) {
                return Err(DatasetError::Schema(format!(
                    "'{key}' is not a canonical column"
                )));
            }
        }
        for (col, cats) in &self.encoders {
            let mut seen = std::collections::BTreeSet::new();
            if cats.iter().any(|c| !seen.insert(c)) {
                return Err(DatasetError::Schema(format!(
                    "encoder for '{col}' repeats a category"
                )));
            }
        }
        if self.delimiter.len() != 1 {
            return Err(DatasetError::Schema(
                "delimiter must be a single byte".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn delimiter_byte(&self) -> u8 {
        self.delimiter.as_bytes().first().copied().unwrap_or(b',')
    }

    pub fn required_columns(&self) -> &[String] {
        &self.required.columns
    }

    /// Canonical column for a header, if any. User aliases win over defaults.
    pub fn resolve(&self, header: &str) -> Option<String> {
        let key = normalize(header);
        if key.is_empty() {
            return None;
        }
        for (canon, aliases) in &self.aliases {
            if aliases.iter().any(|a| normalize(a) == key) {
                return Some(canon.clone());
            }
        }
        for (canon, aliases) in DEFAULT_ALIASES {
            if aliases.iter().any(|a| normalize(a) == key) {
                return Some(canon.to_string());
            }
        }
        canonical_columns()
            .into_iter()
            .find(|c| normalize(c) == key)
    }
}
