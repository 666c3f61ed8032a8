//! Participant/measurement data model and tabular ingestion.
//!
//! A participant table has one row per measurement (patient, hand, session).
//! Columns are matched to canonical names through an alias map, so headers
//! such as `Heart Rate`, `δ` or `Anadn` resolve to `heart_rate`, `sigma` and
//! `anadh`. Unknown numeric columns are kept as extra features.

mod matrix;
mod schema;
mod signal;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::das21::{Das21Error, Das21Response, N_ITEMS};
use crate::wavelet::{BandFeatures, BandName};

pub use matrix::{
    assemble_feature_matrix, ColumnKind, ColumnMeta, FeatureMatrix, FeatureSetName, ImputePolicy,
    Imputer, CATEGORICAL_COLUMNS, SENSOR_COLUMNS, TOP10_COLUMNS,
};
pub use schema::{Encoding, InvalidRowPolicy, SchemaConfig};
pub use signal::{
    load_raw_signal, read_raw_signal, write_raw_signal, RawSignal, MAX_JITTER, MIN_DURATION_S,
    NOMINAL_DURATION_S,
};

/// Largest tolerated gap between a recorded BMI and weight/height².
pub const BMI_TOLERANCE: f64 = 0.5;
pub const MIN_AGE: u32 = 18;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing required column '{0}'")]
    MissingColumn(String),
    #[error("row {row}, column '{column}': {reason}")]
    BadValue {
        row: usize,
        column: String,
        reason: String,
    },
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("timestamps not strictly increasing at sample {index}")]
    NonMonotonicTime { index: usize },
    #[error("sample spacing jitter {jitter:.4} exceeds {MAX_JITTER}")]
    NonUniformSampling { jitter: f64 },
    #[error("recording spans {duration:.2} s; at least {min} s required")]
    TooShort { duration: f64, min: f64 },
    #[error("invalid signal: {0}")]
    BadSignal(String),
    #[error("unknown feature set '{0}'")]
    UnknownFeatureSet(String),
    #[error("no rows left to build a feature matrix")]
    AllRowsDropped,
    #[error("invalid schema config: {0}")]
    Schema(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

macro_rules! category_enum {
    ($name:ident { $($variant:ident => $label:literal [$($alias:literal),*]),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $label),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                let key = s.trim().to_lowercase();
                $(
                    if key == $label $(|| key == $alias)* {
                        return Ok($name::$variant);
                    }
                )+
                Err(format!("unrecognised value '{s}'"))
            }
        }
    };
}

category_enum!(Gender {
    Male => "male" ["m", "man"],
    Female => "female" ["f", "woman"],
});

category_enum!(Race {
    Asian => "asian" [],
    White => "white" ["caucasian"],
    African => "african" ["black"],
    Other => "other" [],
});

category_enum!(Smoking {
    Never => "never" ["no", "non-smoker", "nonsmoker"],
    Former => "former" ["ex", "quit", "ex-smoker"],
    Current => "current" ["yes", "smoker"],
});

category_enum!(Hand {
    Left => "left" ["l"],
    Right => "right" ["r"],
});

category_enum!(SleepState {
    Awake => "awake" ["wake", "no"],
    Sleeping => "sleeping" ["asleep", "sleep", "yes"],
});

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub patient_id: String,
    pub age: Option<u32>,
    pub gender: Option<Gender>,
    pub race: Option<Race>,
    /// cm
    pub height: Option<f64>,
    /// kg
    pub weight: Option<f64>,
    /// kg/m²
    pub bmi_index: Option<f64>,
    pub heart_rate: Option<f64>,
    pub bp_level: Option<String>,
    pub smoking_routine: Option<Smoking>,
    pub skin_type: Option<String>,
    pub hand: Option<Hand>,
    pub sleep_state: Option<SleepState>,
    pub data_type: Option<String>,
}

impl ParticipantRecord {
    /// BMI recomputed from height and weight.
    pub fn implied_bmi(&self) -> Option<f64> {
        match (self.height, self.weight) {
            (Some(h), Some(w)) if h > 0.0 => Some(w / (h / 100.0).powi(2)),
            _ => None,
        }
    }

    /// True iff all three of BMI, height and weight are present and disagree
    /// by more than [`BMI_TOLERANCE`].
    pub fn bmi_inconsistent(&self) -> bool {
        match (self.bmi_index, self.implied_bmi()) {
            (Some(b), Some(implied)) => (b - implied).abs() > BMI_TOLERANCE,
            _ => false,
        }
    }
}

/// Device parameters of one measurement. Values are ingested as published;
/// missing cells stay `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorFeatureVector {
    pub m: Option<f64>,
    pub sigma: Option<f64>,
    pub kv100: Option<f64>,
    pub a365: Option<f64>,
    pub a460: Option<f64>,
    pub anadh: Option<f64>,
    pub pom: Option<f64>,
    /// Ae, An, Am, Ar, Ac
    pub band_amplitude: [Option<f64>; 5],
    /// Fe, Fn, Fm, Fr, Fc
    pub band_frequency: [Option<f64>; 5],
    /// °C
    pub temperature: Option<f64>,
}

impl SensorFeatureVector {
    pub fn set_band(&mut self, band: &BandFeatures) {
        for (i, name) in BandName::ALL.iter().enumerate() {
            self.band_amplitude[i] = Some(band.amplitude(*name));
            self.band_frequency[i] = Some(band.frequency(*name));
        }
    }

    pub fn band(&self) -> Option<BandFeatures> {
        let mut amp = [0.0; 5];
        let mut freq = [0.0; 5];
        for i in 0..5 {
            amp[i] = self.band_amplitude[i]?;
            freq[i] = self.band_frequency[i]?;
        }
        Some(BandFeatures::from_parts(amp, freq))
    }
}

/// One row of a participant table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub participant: ParticipantRecord,
    pub sensor: SensorFeatureVector,
    pub das21: Option<Das21Response>,
    /// Unrecognised numeric columns, keyed by their header text.
    pub extras: BTreeMap<String, Option<f64>>,
}

/// A typed cell used when building feature matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(Option<f64>),
    Cat(Option<String>),
}

/// Canonical column names in file order.
pub const NUMERIC_DEMOGRAPHICS: [&str; 5] = ["age", "height", "weight", "bmi_index", "heart_rate"];
pub const BAND_AMPLITUDE_COLUMNS: [&str; 5] = ["ae", "an", "am", "ar", "ac"];
pub const BAND_FREQUENCY_COLUMNS: [&str; 5] = ["fe", "fn", "fm", "fr", "fc"];

pub fn canonical_columns() -> Vec<String> {
    let mut v: Vec<String> = [
        "patient_id",
        "age",
        "gender",
        "race",
        "height",
        "weight",
        "bmi_index",
        "heart_rate",
        "bp_level",
        "smoking_routine",
        "skin_type",
        "hand",
        "sleep_state",
        "data_type",
        "m",
        "sigma",
        "kv100",
        "a365",
        "a460",
        "anadh",
        "pom",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    v.extend(BAND_AMPLITUDE_COLUMNS.iter().map(|s| s.to_string()));
    v.extend(BAND_FREQUENCY_COLUMNS.iter().map(|s| s.to_string()));
    v.push("temperature".into());
    v.extend((1..=N_ITEMS).map(|i| format!("q{i}")));
    v
}

impl MeasurementRecord {
    /// Looks up a canonical feature column or an extra column.
    pub fn cell(&self, column: &str) -> Option<Cell> {
        let p = &self.participant;
        let s = &self.sensor;
        let num = |v: Option<f64>| Some(Cell::Num(v));
        let cat = |v: Option<String>| Some(Cell::Cat(v));
        match column {
            "age" => num(p.age.map(f64::from)),
            "gender" => cat(p.gender.map(|g| g.to_string())),
            "race" => cat(p.race.map(|g| g.to_string())),
            "height" => num(p.height),
            "weight" => num(p.weight),
            "bmi_index" => num(p.bmi_index),
            "heart_rate" => num(p.heart_rate),
            "bp_level" => cat(p.bp_level.clone()),
            "smoking_routine" => cat(p.smoking_routine.map(|g| g.to_string())),
            "skin_type" => cat(p.skin_type.clone()),
            "hand" => cat(p.hand.map(|g| g.to_string())),
            "sleep_state" => cat(p.sleep_state.map(|g| g.to_string())),
            "data_type" => cat(p.data_type.clone()),
            "m" => num(s.m),
            "sigma" => num(s.sigma),
            "kv100" => num(s.kv100),
            "a365" => num(s.a365),
            "a460" => num(s.a460),
            "anadh" => num(s.anadh),
            "pom" => num(s.pom),
            "temperature" => num(s.temperature),
            other => {
                if let Some(i) = BAND_AMPLITUDE_COLUMNS.iter().position(|c| *c == other) {
                    return num(s.band_amplitude[i]);
                }
                if let Some(i) = BAND_FREQUENCY_COLUMNS.iter().position(|c| *c == other) {
                    return num(s.band_frequency[i]);
                }
                self.extras.get(other).map(|v| Cell::Num(*v))
            }
        }
    }
}

/// Result of reading a participant table.
#[derive(Debug, Clone, Default)]
pub struct LoadedTable {
    pub records: Vec<MeasurementRecord>,
    /// Extra column headers in file order.
    pub extra_columns: Vec<String>,
    /// Row-indexed diagnostics for rows skipped under [`InvalidRowPolicy::Skip`].
    pub rejected: Vec<(usize, String)>,
    /// Rows that carry no complete DAS-21 response.
    pub missing_das21: usize,
}

fn bad(row: usize, column: &str, reason: impl Into<String>) -> DatasetError {
    DatasetError::BadValue {
        row,
        column: column.to_string(),
        reason: reason.into(),
    }
}

fn parse_num(raw: &str, row: usize, column: &str) -> Result<Option<f64>, DatasetError> {
    let t = raw.trim();
    if is_missing(t) {
        return Ok(None);
    }
    match t.replace(',', ".").parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(bad(row, column, format!("'{t}' is not a finite number"))),
    }
}

fn parse_cat<T: FromStr<Err = String>>(
    raw: &str,
    row: usize,
    column: &str,
) -> Result<Option<T>, DatasetError> {
    let t = raw.trim();
    if is_missing(t) {
        return Ok(None);
    }
    t.parse::<T>().map(Some).map_err(|e| bad(row, column, e))
}

fn parse_text(raw: &str) -> Option<String> {
    let t = raw.trim();
    if is_missing(t) {
        None
    } else {
        Some(t.to_string())
    }
}

fn is_missing(t: &str) -> bool {
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn check_non_negative(v: Option<f64>, row: usize, column: &str) -> Result<(), DatasetError> {
    match v {
        Some(x) if x < 0.0 => Err(bad(row, column, format!("{x} is negative"))),
        _ => Ok(()),
    }
}

fn check_positive(v: Option<f64>, row: usize, column: &str) -> Result<(), DatasetError> {
    match v {
        Some(x) if x <= 0.0 => Err(bad(row, column, format!("{x} must be positive"))),
        _ => Ok(()),
    }
}

struct ResolvedColumns {
    canonical: BTreeMap<String, usize>,
    extras: Vec<(String, usize)>,
}

fn resolve_columns(
    headers: &csv::StringRecord,
    schema: &SchemaConfig,
) -> Result<ResolvedColumns, DatasetError> {
    let mut canonical = BTreeMap::new();
    let mut extras = Vec::new();
    for (idx, h) in headers.iter().enumerate() {
        match schema.resolve(h) {
            Some(name) => {
                canonical.entry(name).or_insert(idx);
            }
            None => extras.push((h.trim().to_string(), idx)),
        }
    }
    for req in schema.required_columns() {
        if !canonical.contains_key(req.as_str()) {
            return Err(DatasetError::MissingColumn(req.clone()));
        }
    }
    Ok(ResolvedColumns { canonical, extras })
}

fn parse_row(
    rec: &csv::StringRecord,
    row: usize,
    cols: &ResolvedColumns,
    extra_numeric: &[(String, usize)],
) -> Result<MeasurementRecord, DatasetError> {
    let get = |name: &str| {
        cols.canonical
            .get(name)
            .and_then(|&i| rec.get(i))
            .unwrap_or("")
    };
    let num = |name: &str| parse_num(get(name), row, name);

    let age = match num("age")? {
        None => None,
        Some(a) if a.fract() != 0.0 => {
            return Err(bad(row, "age", format!("{a} is not an integer")))
        }
        Some(a) if a < f64::from(MIN_AGE) => {
            return Err(bad(
                row,
                "age",
                format!("{a} is below the minimum age {MIN_AGE}"),
            ))
        }
        Some(a) => Some(a as u32),
    };
    let participant = ParticipantRecord {
        patient_id: get("patient_id").trim().to_string(),
        age,
        gender: parse_cat(get("gender"), row, "gender")?,
        race: parse_cat(get("race"), row, "race")?,
        height: num("height")?,
        weight: num("weight")?,
        bmi_index: num("bmi_index")?,
        heart_rate: num("heart_rate")?,
        bp_level: parse_text(get("bp_level")),
        smoking_routine: parse_cat(get("smoking_routine"), row, "smoking_routine")?,
        skin_type: parse_text(get("skin_type")),
        hand: parse_cat(get("hand"), row, "hand")?,
        sleep_state: parse_cat(get("sleep_state"), row, "sleep_state")?,
        data_type: parse_text(get("data_type")),
    };
    if participant.patient_id.is_empty() {
        return Err(bad(row, "patient_id", "empty patient id"));
    }
    check_positive(participant.height, row, "height")?;
    check_positive(participant.weight, row, "weight")?;
    check_positive(participant.heart_rate, row, "heart_rate")?;
    if participant.bmi_inconsistent() {
        let implied = participant.implied_bmi().unwrap_or(f64::NAN);
        return Err(bad(
            row,
            "bmi_index",
            format!(
                "BMI {} inconsistent with weight/height² = {implied:.2}",
                participant.bmi_index.unwrap_or(f64::NAN)
            ),
        ));
    }

    let mut sensor = SensorFeatureVector {
        m: num("m")?,
        sigma: num("sigma")?,
        kv100: num("kv100")?,
        a365: num("a365")?,
        a460: num("a460")?,
        anadh: num("anadh")?,
        pom: num("pom")?,
        temperature: num("temperature")?,
        ..Default::default()
    };
    for i in 0..5 {
        sensor.band_amplitude[i] = num(BAND_AMPLITUDE_COLUMNS[i])?;
        sensor.band_frequency[i] = num(BAND_FREQUENCY_COLUMNS[i])?;
        check_non_negative(sensor.band_amplitude[i], row, BAND_AMPLITUDE_COLUMNS[i])?;
    }
    for (name, v) in [
        ("m", sensor.m),
        ("sigma", sensor.sigma),
        ("kv100", sensor.kv100),
        ("a365", sensor.a365),
        ("a460", sensor.a460),
        ("pom", sensor.pom),
    ] {
        check_non_negative(v, row, name)?;
    }

    let mut items = Vec::with_capacity(N_ITEMS);
    for i in 1..=N_ITEMS {
        let name = format!("q{i}");
        match num(&name)? {
            Some(v) if v.fract() == 0.0 => items.push(v as i64),
            Some(v) => return Err(bad(row, &name, format!("{v} is not an integer item score"))),
            None => break,
        }
    }
    let das21 = if items.len() == N_ITEMS {
        Some(Das21Response::new(&items).map_err(|e| match e {
            Das21Error::InvalidItemValue { index, value } => {
                bad(row, &format!("q{index}"), format!("{value} outside 0..=3"))
            }
            other => bad(row, "q", other.to_string()),
        })?)
    } else {
        None
    };

    let mut extras = BTreeMap::new();
    for (name, idx) in extra_numeric {
        extras.insert(
            name.clone(),
            parse_num(rec.get(*idx).unwrap_or(""), row, name)?,
        );
    }

    Ok(MeasurementRecord {
        participant,
        sensor,
        das21,
        extras,
    })
}

/// Reads a delimited participant table. Rows are numbered from 1 (first data
/// row) in diagnostics.
pub fn read_participants<R: Read>(
    reader: R,
    schema: &SchemaConfig,
) -> Result<LoadedTable, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte())
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = resolve_columns(&headers, schema)?;
    let raw: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>()?;
    if raw.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    // Extra columns are kept only when every non-missing cell is numeric.
    let extra_numeric: Vec<(String, usize)> = cols
        .extras
        .iter()
        .filter(|(_, idx)| {
            raw.iter().all(|r| {
                let t = r.get(*idx).unwrap_or("").trim();
                is_missing(t) || t.replace(',', ".").parse::<f64>().is_ok()
            })
        })
        .cloned()
        .collect();

    let mut table = LoadedTable {
        extra_columns: extra_numeric.iter().map(|(n, _)| n.clone()).collect(),
        ..Default::default()
    };
    for (i, rec) in raw.iter().enumerate() {
        let row = i + 1;
        match parse_row(rec, row, &cols, &extra_numeric) {
            Ok(r) => {
                if r.das21.is_none() {
                    table.missing_das21 += 1;
                }
                table.records.push(r);
            }
            Err(e) => match schema.on_invalid {
                InvalidRowPolicy::Reject => return Err(e),
                InvalidRowPolicy::Skip => table.rejected.push((row, e.to_string())),
            },
        }
    }
    Ok(table)
}

pub fn load_participants(
    path: impl AsRef<Path>,
    schema: &SchemaConfig,
) -> Result<LoadedTable, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_participants(std::io::BufReader::new(file), schema)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_str<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records with canonical headers; extras follow in the given order.
pub fn write_participants<W: Write>(
    records: &[MeasurementRecord],
    extra_columns: &[String],
    writer: W,
) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = canonical_columns();
    header.extend(extra_columns.iter().cloned());
    w.write_record(&header)?;
    for r in records {
        let p = &r.participant;
        let s = &r.sensor;
        let mut row = vec![
            p.patient_id.clone(),
            opt_str(&p.age),
            opt_str(&p.gender),
            opt_str(&p.race),
            opt_num(p.height),
            opt_num(p.weight),
            opt_num(p.bmi_index),
            opt_num(p.heart_rate),
            opt_str(&p.bp_level),
            opt_str(&p.smoking_routine),
            opt_str(&p.skin_type),
            opt_str(&p.hand),
            opt_str(&p.sleep_state),
            opt_str(&p.data_type),
            opt_num(s.m),
            opt_num(s.sigma),
            opt_num(s.kv100),
            opt_num(s.a365),
            opt_num(s.a460),
            opt_num(s.anadh),
            opt_num(s.pom),
        ];
        row.extend(s.band_amplitude.iter().map(|v| opt_num(*v)));
        row.extend(s.band_frequency.iter().map(|v| opt_num(*v)));
        row.push(opt_num(s.temperature));
        match &r.das21 {
            Some(d) => row.extend(d.items().iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), N_ITEMS)),
        }
        for name in extra_columns {
            row.push(opt_num(r.extras.get(name).copied().flatten()));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| DatasetError::Io {
        path: "<writer>".into(),
        source: e,
    })?;
    Ok(())
}
