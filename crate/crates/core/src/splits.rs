//! Train/test partitions: random 80:20, patient-wise k-fold and
//! leave-one-patient-out.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SplitError {
    #[error("{0} rows; at least 5 needed for an 80:20 split")]
    TooFewRows(usize),
    #[error("{patients} distinct patients cannot fill {k} folds")]
    TooFewPatients { patients: usize, k: usize },
    #[error("leave-one-patient-out needs at least two patients")]
    SinglePatient,
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitScheme {
    Split8020,
    KfoldPatient,
    Lopo,
}

impl SplitScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitScheme::Split8020 => "split8020",
            SplitScheme::KfoldPatient => "kfold",
            SplitScheme::Lopo => "lopo",
        }
    }
}

impl fmt::Display for SplitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().replace(['-', '_', ':'], "").as_str() {
            "split8020" | "8020" | "holdout" => Ok(SplitScheme::Split8020),
            "kfold" | "kfoldpatient" => Ok(SplitScheme::KfoldPatient),
            "lopo" => Ok(SplitScheme::Lopo),
            _ => Err(format!("unknown split scheme '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub scheme: SplitScheme,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Whether rows of a patient are kept on one side (always true for
    /// k-fold and LOPO).
    pub patient_wise: bool,
    pub folds: Vec<FoldAssignment>,
}

impl SplitPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

fn shuffled<T>(mut items: Vec<T>, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
    items
}

fn test_size(n: usize) -> usize {
    (0.2 * n as f64).round() as usize
}

/// Row-wise random 80:20 split.
pub fn split_8020(n_rows: usize, seed: u64) -> Result<SplitPlan, SplitError> {
    if n_rows < 5 {
        return Err(SplitError::TooFewRows(n_rows));
    }
    let perm = shuffled((0..n_rows).collect::<Vec<_>>(), seed);
    let n_test = test_size(n_rows);
    let mut test = perm[..n_test].to_vec();
    let mut train = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(SplitPlan {
        scheme: SplitScheme::Split8020,
        seed,
        k: None,
        patient_wise: false,
        folds: vec![FoldAssignment { train, test }],
    })
}

/// Patient-wise 80:20: whole patients move to the test side, in shuffled
/// order, until it holds at least 20% of the rows.
pub fn split_8020_patientwise(patient_ids: &[String], seed: u64) -> Result<SplitPlan, SplitError> {
    let n = patient_ids.len();
    if n < 5 {
        return Err(SplitError::TooFewRows(n));
    }
    let groups = group_rows(patient_ids);
    if groups.len() < 2 {
        return Err(SplitError::TooFewPatients {
            patients: groups.len(),
            k: 2,
        });
    }
    let order = shuffled(groups.keys().cloned().collect::<Vec<_>>(), seed);
    let target = test_size(n).max(1);
    let mut test = Vec::new();
    for p in &order[..order.len() - 1] {
        if test.len() >= target {
            break;
        }
        test.extend_from_slice(&groups[p]);
    }
    test.sort_unstable();
    let train = complement(n, &test);
    Ok(SplitPlan {
        scheme: SplitScheme::Split8020,
        seed,
        k: None,
        patient_wise: true,
        folds: vec![FoldAssignment { train, test }],
    })
}

/// Row indices per patient, patients in sorted order.
fn group_rows(patient_ids: &[String]) -> BTreeMap<String, Vec<usize>> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, p) in patient_ids.iter().enumerate() {
        groups.entry(p.clone()).or_default().push(i);
    }
    groups
}

fn complement(n: usize, sorted_subset: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n - sorted_subset.len());
    let mut it = sorted_subset.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

/// Patient-wise k-fold. Shuffled patients are cut into `k` contiguous groups
/// whose sizes differ by at most one.
pub fn kfold_patientwise(
    patient_ids: &[String],
    k: usize,
    seed: u64,
) -> Result<SplitPlan, SplitError> {
    if k < 2 {
        return Err(SplitError::InvalidK(k));
    }
    let groups = group_rows(patient_ids);
    let p = groups.len();
    if p < k {
        return Err(SplitError::TooFewPatients { patients: p, k });
    }
    let order = shuffled(groups.keys().cloned().collect::<Vec<_>>(), seed);
    let (base, extra) = (p / k, p % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        let mut test: Vec<usize> = order[start..start + size]
            .iter()
            .flat_map(|pid| groups[pid].iter().copied())
            .collect();
        test.sort_unstable();
        let train = complement(patient_ids.len(), &test);
        folds.push(FoldAssignment { train, test });
        start += size;
    }
    Ok(SplitPlan {
        scheme: SplitScheme::KfoldPatient,
        seed,
        k: Some(k),
        patient_wise: true,
        folds,
    })
}

/// One k-fold plan per seed.
pub fn repeated_kfold(
    patient_ids: &[String],
    k: usize,
    seeds: &[u64],
) -> Result<Vec<SplitPlan>, SplitError> {
    seeds
        .iter()
        .map(|&s| kfold_patientwise(patient_ids, k, s))
        .collect()
}

/// One fold per patient, in sorted patient-id order.
pub fn lopo(patient_ids: &[String]) -> Result<SplitPlan, SplitError> {
    let groups = group_rows(patient_ids);
    if groups.len() < 2 {
        return Err(SplitError::SinglePatient);
    }
    let folds = groups
        .values()
        .map(|rows| FoldAssignment {
            train: complement(patient_ids.len(), rows),
            test: rows.clone(),
        })
        .collect();
    Ok(SplitPlan {
        scheme: SplitScheme::Lopo,
        seed: 0,
        k: None,
        patient_wise: true,
        folds,
    })
}

/// Patient ids of each LOPO fold, matching [`lopo`]'s fold order.
pub fn lopo_patients(patient_ids: &[String]) -> Vec<String> {
    group_rows(patient_ids).into_keys().collect()
}
