use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Cell, DatasetError, Encoding, MeasurementRecord, SchemaConfig, Smoking};

pub const CATEGORICAL_COLUMNS: [&str; 8] = [
    "gender",
    "race",
    "bp_level",
    "smoking_routine",
    "skin_type",
    "hand",
    "sleep_state",
    "data_type",
];

/// Device parameters plus measurement-site temperature.
pub const SENSOR_COLUMNS: [&str; 18] = [
    "m",
    "sigma",
    "kv100",
    "a365",
    "a460",
    "anadh",
    "pom",
    "ae",
    "an",
    "am",
    "ar",
    "ac",
    "fe",
    "fn",
    "fm",
    "fr",
    "fc",
    "temperature",
];

pub const TOP10_COLUMNS: [&str; 10] = [
    "bmi_index",
    "heart_rate",
    "age",
    "weight",
    "height",
    "m",
    "temperature",
    "a460",
    "kv100",
    "skin_type",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSetName {
    All,
    SensorOnly,
    Top10,
}

impl FeatureSetName {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSetName::All => "all",
            FeatureSetName::SensorOnly => "sensor_only",
            FeatureSetName::Top10 => "top10",
        }
    }

    /// Source columns in matrix order. `extras` are appended for `All`.
    pub fn source_columns(self, extras: &[String]) -> Vec<String> {
        match self {
            FeatureSetName::All => {
                let mut v: Vec<String> = [
                    "age",
                    "gender",
                    "race",
                    "height",
                    "weight",
                    "bmi_index",
                    "heart_rate",
                ]
                .iter()
                .chain(&[
                    "bp_level",
                    "smoking_routine",
                    "skin_type",
                    "hand",
                    "sleep_state",
                    "data_type",
                ])
                .map(|s| s.to_string())
                .collect();
                v.extend(SENSOR_COLUMNS.iter().map(|s| s.to_string()));
                v.extend(extras.iter().cloned());
                v
            }
            FeatureSetName::SensorOnly => SENSOR_COLUMNS.iter().map(|s| s.to_string()).collect(),
            FeatureSetName::Top10 => TOP10_COLUMNS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for FeatureSetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSetName {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().replace('-', "_").as_str() {
            "all" => Ok(FeatureSetName::All),
            "sensor_only" | "sensor" => Ok(FeatureSetName::SensorOnly),
            "top10" | "top_10" => Ok(FeatureSetName::Top10),
            _ => Err(DatasetError::UnknownFeatureSet(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputePolicy {
    /// Leave missing numerics as NaN; fit an [`Imputer`] per training split.
    #[default]
    Deferred,
    /// Median over all rows of the matrix.
    MedianAllRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Ordinal,
    Onehot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    /// Source column before encoding.
    pub source: String,
    pub kind: ColumnKind,
    /// Categories in code order (ordinal) or the single category this
    /// indicator column stands for (onehot).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

/// Code assigned to a missing categorical cell.
pub const UNKNOWN_CODE: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    columns: Vec<ColumnMeta>,
    data: Vec<f64>,
    n_rows: usize,
    patient_ids: Vec<String>,
}

impl FeatureMatrix {
    /// Builds a numeric matrix from row vectors.
    pub fn from_rows(names: &[&str], rows: &[Vec<f64>], patient_ids: Vec<String>) -> Self {
        assert_eq!(
            rows.len(),
            patient_ids.len(),
            "patient_ids length must equal row count"
        );
        let columns = names
            .iter()
            .map(|n| ColumnMeta {
                name: n.to_string(),
                source: n.to_string(),
                kind: ColumnKind::Numeric,
                categories: Vec::new(),
            })
            .collect();
        let mut data = Vec::with_capacity(rows.len() * names.len());
        for r in rows {
            assert_eq!(r.len(), names.len(), "row width mismatch");
            data.extend_from_slice(r);
        }
        Self {
            columns,
            data,
            n_rows: rows.len(),
            patient_ids,
        }
    }

    /// Numeric matrix with one synthetic patient per row.
    pub fn from_rows_anonymous(names: &[&str], rows: &[Vec<f64>]) -> Self {
        let ids = (0..rows.len()).map(|i| format!("row{i}")).collect();
        Self::from_rows(names, rows, ids)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn patient_ids(&self) -> &[String] {
        &self.patient_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let w = self.n_cols();
        self.data[row * w + col] = v;
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |r| self.get(r, col))
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            columns: self.columns.clone(),
            data,
            n_rows: idx.len(),
            patient_ids: idx.iter().map(|&i| self.patient_ids[i].clone()).collect(),
        }
    }

    /// Reorders/selects columns by name; the error names the first missing one.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix, String> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| n.clone()))
            .collect::<Result<_, _>>()?;
        let mut data = Vec::with_capacity(self.n_rows * idx.len());
        for r in 0..self.n_rows {
            let row = self.row(r);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Ok(FeatureMatrix {
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
            data,
            n_rows: self.n_rows,
            patient_ids: self.patient_ids.clone(),
        })
    }

    /// Appends a numeric column.
    pub fn push_column(&mut self, name: &str, values: &[f64]) {
        assert_eq!(values.len(), self.n_rows);
        let w = self.n_cols();
        let mut data = Vec::with_capacity(self.n_rows * (w + 1));
        for (r, v) in values.iter().enumerate() {
            data.extend_from_slice(&self.data[r * w..(r + 1) * w]);
            data.push(*v);
        }
        self.data = data;
        self.columns.push(ColumnMeta {
            name: name.to_string(),
            source: name.to_string(),
            kind: ColumnKind::Numeric,
            categories: Vec::new(),
        });
    }

    /// Applies `f` to every cell of one column.
    pub fn map_column(&mut self, col: usize, f: impl Fn(f64) -> f64) {
        for r in 0..self.n_rows {
            let v = self.get(r, col);
            self.set(r, col, f(v));
        }
    }
}

/// Per-column medians fitted on a subset of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    /// `None` for categorical columns, which never hold NaN.
    pub fill: Vec<Option<f64>>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

impl Imputer {
    /// Fits medians over `rows`. A column with no observed value in `rows`
    /// is filled with 0.
    pub fn fit(matrix: &FeatureMatrix, rows: &[usize]) -> Self {
        let fill = matrix
            .columns
            .iter()
            .enumerate()
            .map(|(j, meta)| match meta.kind {
                ColumnKind::Numeric => {
                    let observed: Vec<f64> = rows
                        .iter()
                        .map(|&r| matrix.get(r, j))
                        .filter(|v| v.is_finite())
                        .collect();
                    Some(median(observed).unwrap_or(0.0))
                }
                _ => None,
            })
            .collect();
        Self { fill }
    }

    pub fn transform(&self, matrix: &mut FeatureMatrix) {
        for (j, fill) in self.fill.iter().enumerate() {
            if let Some(f) = fill {
                for r in 0..matrix.n_rows {
                    if !matrix.get(r, j).is_finite() {
                        matrix.set(r, j, *f);
                    }
                }
            }
        }
    }
}

fn sort_categories(values: BTreeSet<String>, source: &str) -> Vec<String> {
    let mut v: Vec<String> = values.into_iter().collect();
    if source == "smoking_routine" {
        let rank = |s: &String| {
            s.parse::<Smoking>()
                .map(|x| x as usize)
                .unwrap_or(usize::MAX)
        };
        v.sort_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.cmp(b)));
    } else if v.iter().all(|s| s.parse::<f64>().is_ok()) {
        v.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap()
                .total_cmp(&b.parse::<f64>().unwrap())
        });
    }
    v
}

/// Encodes records into a numeric matrix for the requested feature set.
pub fn assemble_feature_matrix(
    records: &[MeasurementRecord],
    extra_columns: &[String],
    feature_set: FeatureSetName,
    impute: ImputePolicy,
    schema: &SchemaConfig,
) -> Result<FeatureMatrix, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::AllRowsDropped);
    }
    let sources = feature_set.source_columns(extra_columns);
    let mut columns: Vec<ColumnMeta> = Vec::new();
    // For each output column: (source, category for onehot)
    let mut plan: Vec<(String, Option<BTreeMap<String, f64>>, Option<String>)> = Vec::new();

    for src in &sources {
        let is_cat = CATEGORICAL_COLUMNS.contains(&src.as_str());
        if !is_cat {
            columns.push(ColumnMeta {
                name: src.clone(),
                source: src.clone(),
                kind: ColumnKind::Numeric,
                categories: Vec::new(),
            });
            plan.push((src.clone(), None, None));
            continue;
        }
        let categories = match schema.encoders.get(src) {
            Some(fixed) => fixed.clone(),
            None => {
                let observed: BTreeSet<String> = records
                    .iter()
                    .filter_map(|r| match r.cell(src) {
                        Some(Cell::Cat(Some(v))) => Some(v),
                        _ => None,
                    })
                    .collect();
                sort_categories(observed, src)
            }
        };
        match schema.encoding {
            Encoding::Ordinal => {
                let map = categories
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.clone(), i as f64))
                    .collect();
                columns.push(ColumnMeta {
                    name: src.clone(),
                    source: src.clone(),
                    kind: ColumnKind::Ordinal,
                    categories: categories.clone(),
                });
                plan.push((src.clone(), Some(map), None));
            }
            Encoding::Onehot => {
                for c in &categories {
                    columns.push(ColumnMeta {
                        name: format!("{src}={c}"),
                        source: src.clone(),
                        kind: ColumnKind::Onehot,
                        categories: vec![c.clone()],
                    });
                    plan.push((src.clone(), None, Some(c.clone())));
                }
            }
        }
    }

    let mut data = Vec::with_capacity(records.len() * columns.len());
    for (row, r) in records.iter().enumerate() {
        for (src, ordinal, onehot) in &plan {
            let cell = r.cell(src).unwrap_or(Cell::Num(None));
            let v = match (cell, ordinal, onehot) {
                (Cell::Num(v), _, _) => v.unwrap_or(f64::NAN),
                (Cell::Cat(None), Some(_), _) => UNKNOWN_CODE,
                (Cell::Cat(Some(c)), Some(map), _) => match map.get(&c) {
                    Some(code) => *code,
                    None => {
                        return Err(DatasetError::BadValue {
                            row: row + 1,
                            column: src.clone(),
                            reason: format!("category '{c}' not in configured encoder"),
                        })
                    }
                },
                (Cell::Cat(v), None, Some(target)) => {
                    f64::from(u8::from(v.as_deref() == Some(target.as_str())))
                }
                (Cell::Cat(_), None, None) => unreachable!("categorical column without encoder"),
            };
            data.push(v);
        }
    }

    let mut matrix = FeatureMatrix {
        columns,
        data,
        n_rows: records.len(),
        patient_ids: records
            .iter()
            .map(|r| r.participant.patient_id.clone())
            .collect(),
    };
    if impute == ImputePolicy::MedianAllRows {
        let all: Vec<usize> = (0..matrix.n_rows).collect();
        Imputer::fit(&matrix, &all).transform(&mut matrix);
    }
    Ok(matrix)
}
