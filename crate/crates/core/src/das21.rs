//! DAS-21 questionnaire scoring.
//!
//! The 21 items split into three 7-item subscales. Raw subscale sums are
//! doubled to land on the 42-item DAS scale before the severity cutoffs are
//! applied. Cutoffs are inclusive integer ranges on the doubled score.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_ITEMS: usize = 21;

/// 1-based item numbers per subscale.
pub const STRESS_ITEMS: [usize; 7] = [1, 6, 8, 11, 12, 14, 18];
pub const ANXIETY_ITEMS: [usize; 7] = [2, 4, 7, 9, 15, 19, 20];
pub const DEPRESSION_ITEMS: [usize; 7] = [3, 5, 10, 13, 16, 17, 21];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Das21Error {
    #[error("item {index} has value {value}; expected 0..=3")]
    InvalidItemValue { index: usize, value: i64 },
    #[error("expected {N_ITEMS} items, got {0}")]
    WrongItemCount(usize),
    #[error("unknown severity level '{0}'")]
    UnknownLevel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subscale {
    Depression,
    Anxiety,
    Stress,
}

impl Subscale {
    pub const ALL: [Subscale; 3] = [Subscale::Depression, Subscale::Anxiety, Subscale::Stress];

    pub fn items(self) -> &'static [usize; 7] {
        match self {
            Subscale::Depression => &DEPRESSION_ITEMS,
            Subscale::Anxiety => &ANXIETY_ITEMS,
            Subscale::Stress => &STRESS_ITEMS,
        }
    }

    /// Lower bound (inclusive) of Mild, Moderate, Severe and Extremely Severe.
    pub fn cutoffs(self) -> [u8; 4] {
        match self {
            Subscale::Depression => [10, 14, 21, 28],
            Subscale::Anxiety => [8, 10, 15, 20],
            Subscale::Stress => [15, 19, 26, 34],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subscale::Depression => "depression",
            Subscale::Anxiety => "anxiety",
            Subscale::Stress => "stress",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeverityLevel {
    Normal,
    Mild,
    Moderate,
    Severe,
    ExtremelySevere,
}

impl SeverityLevel {
    pub const ALL: [SeverityLevel; 5] = [
        SeverityLevel::Normal,
        SeverityLevel::Mild,
        SeverityLevel::Moderate,
        SeverityLevel::Severe,
        SeverityLevel::ExtremelySevere,
    ];

    /// Band lookup on a doubled (final) score.
    pub fn classify(subscale: Subscale, final_score: u8) -> SeverityLevel {
        let cut = subscale.cutoffs();
        match cut.iter().rposition(|&lo| final_score >= lo) {
            None => SeverityLevel::Normal,
            Some(i) => SeverityLevel::ALL[i + 1],
        }
    }

    pub fn is_abnormal(self) -> bool {
        self != SeverityLevel::Normal
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeverityLevel::Normal => "normal",
            SeverityLevel::Mild => "mild",
            SeverityLevel::Moderate => "moderate",
            SeverityLevel::Severe => "severe",
            SeverityLevel::ExtremelySevere => "extremely_severe",
        }
    }
}

impl fmt::Display for SeverityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeverityLevel {
    type Err = Das21Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphabetic())
            .collect();
        match norm.as_str() {
            "normal" => Ok(SeverityLevel::Normal),
            "mild" => Ok(SeverityLevel::Mild),
            "moderate" => Ok(SeverityLevel::Moderate),
            "severe" => Ok(SeverityLevel::Severe),
            "extremelysevere" => Ok(SeverityLevel::ExtremelySevere),
            _ => Err(Das21Error::UnknownLevel(s.to_string())),
        }
    }
}

/// Twenty-one Likert responses, each in 0..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Das21Response {
    items: [u8; N_ITEMS],
}

impl Das21Response {
    pub fn new(items: &[i64]) -> Result<Self, Das21Error> {
        if items.len() != N_ITEMS {
            return Err(Das21Error::WrongItemCount(items.len()));
        }
        let mut out = [0u8; N_ITEMS];
        for (i, &v) in items.iter().enumerate() {
            if !(0..=3).contains(&v) {
                return Err(Das21Error::InvalidItemValue {
                    index: i + 1,
                    value: v,
                });
            }
            out[i] = v as u8;
        }
        Ok(Self { items: out })
    }

    /// Item value by 1-based question number.
    pub fn item(&self, number: usize) -> u8 {
        self.items[number - 1]
    }

    pub fn items(&self) -> &[u8; N_ITEMS] {
        &self.items
    }

    fn raw(&self, subscale: Subscale) -> u8 {
        subscale.items().iter().map(|&n| self.item(n)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DasScores {
    pub depression_final: u8,
    pub anxiety_final: u8,
    pub stress_final: u8,
    pub depression_level: SeverityLevel,
    pub anxiety_level: SeverityLevel,
    pub stress_level: SeverityLevel,
}

impl DasScores {
    /// Builds scores from final (doubled) subscale values.
    pub fn from_finals(depression: u8, anxiety: u8, stress: u8) -> Self {
        Self {
            depression_final: depression,
            anxiety_final: anxiety,
            stress_final: stress,
            depression_level: SeverityLevel::classify(Subscale::Depression, depression),
            anxiety_level: SeverityLevel::classify(Subscale::Anxiety, anxiety),
            stress_level: SeverityLevel::classify(Subscale::Stress, stress),
        }
    }

    pub fn level(&self, subscale: Subscale) -> SeverityLevel {
        match subscale {
            Subscale::Depression => self.depression_level,
            Subscale::Anxiety => self.anxiety_level,
            Subscale::Stress => self.stress_level,
        }
    }

    pub fn final_score(&self, subscale: Subscale) -> u8 {
        match subscale {
            Subscale::Depression => self.depression_final,
            Subscale::Anxiety => self.anxiety_final,
            Subscale::Stress => self.stress_final,
        }
    }
}

pub fn score_subscales(resp: &Das21Response) -> DasScores {
    DasScores::from_finals(
        2 * resp.raw(Subscale::Depression),
        2 * resp.raw(Subscale::Anxiety),
        2 * resp.raw(Subscale::Stress),
    )
}

/// Validates raw integers and scores them in one step.
pub fn score_items(items: &[i64]) -> Result<DasScores, Das21Error> {
    Das21Response::new(items).map(|r| score_subscales(&r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryLabel {
    Normal,
    Abnormal,
}

impl BinaryLabel {
    pub fn as_index(self) -> usize {
        match self {
            BinaryLabel::Normal => 0,
            BinaryLabel::Abnormal => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Normal => "normal",
            BinaryLabel::Abnormal => "abnormal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MulticlassLabel {
    Normal,
    Stress,
    StressAnxiety,
    StressAnxietyDepression,
}

impl MulticlassLabel {
    pub const ALL: [MulticlassLabel; 4] = [
        MulticlassLabel::Normal,
        MulticlassLabel::Stress,
        MulticlassLabel::StressAnxiety,
        MulticlassLabel::StressAnxietyDepression,
    ];

    pub fn as_index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MulticlassLabel::Normal => "normal",
            MulticlassLabel::Stress => "stress",
            MulticlassLabel::StressAnxiety => "stress_anxiety",
            MulticlassLabel::StressAnxietyDepression => "stress_anxiety_depression",
        }
    }
}

/// How abnormal-subscale sets outside the canonical chain
/// {}, {S}, {S,A}, {S,A,D} are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MulticlassPolicy {
    /// Leave the multiclass label empty.
    #[default]
    Strict,
    /// Map by the number of abnormal subscales.
    Rank,
}

impl FromStr for MulticlassPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(MulticlassPolicy::Strict),
            "rank" => Ok(MulticlassPolicy::Rank),
            other => Err(format!("unknown multiclass policy '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentalHealthLabel {
    pub binary: BinaryLabel,
    pub multiclass: Option<MulticlassLabel>,
    pub canonical: bool,
}

pub fn derive_labels(scores: &DasScores, policy: MulticlassPolicy) -> MentalHealthLabel {
    let d = scores.depression_level.is_abnormal();
    let a = scores.anxiety_level.is_abnormal();
    let s = scores.stress_level.is_abnormal();
    let binary = if d || a || s {
        BinaryLabel::Abnormal
    } else {
        BinaryLabel::Normal
    };
    let canonical_class = match (s, a, d) {
        (false, false, false) => Some(MulticlassLabel::Normal),
        (true, false, false) => Some(MulticlassLabel::Stress),
        (true, true, false) => Some(MulticlassLabel::StressAnxiety),
        (true, true, true) => Some(MulticlassLabel::StressAnxietyDepression),
        _ => None,
    };
    match canonical_class {
        Some(c) => MentalHealthLabel {
            binary,
            multiclass: Some(c),
            canonical: true,
        },
        None => {
            let multiclass = match policy {
                MulticlassPolicy::Strict => None,
                MulticlassPolicy::Rank => {
                    let n = [s, a, d].iter().filter(|&&x| x).count();
                    Some(MulticlassLabel::ALL[n])
                }
            };
            MentalHealthLabel {
                binary,
                multiclass,
                canonical: false,
            }
        }
    }
}

/// Row of the label output file.
pub fn label_row(patient_id: &str, scores: &DasScores, label: &MentalHealthLabel) -> Vec<String> {
    vec![
        patient_id.to_string(),
        label.binary.as_str().to_string(),
        label
            .multiclass
            .map(|m| m.as_str())
            .unwrap_or("")
            .to_string(),
        scores.depression_final.to_string(),
        scores.anxiety_final.to_string(),
        scores.stress_final.to_string(),
        scores.depression_level.to_string(),
        scores.anxiety_level.to_string(),
        scores.stress_level.to_string(),
    ]
}

pub const LABEL_HEADER: [&str; 9] = [
    "patient_id",
    "binary",
    "multiclass",
    "dep_final",
    "anx_final",
    "str_final",
    "dep_level",
    "anx_level",
    "str_level",
];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn response_with(items: &[(usize, i64)]) -> Das21Response {
        let mut v = vec![0i64; N_ITEMS];
        for &(n, val) in items {
            v[n - 1] = val;
        }
        Das21Response::new(&v).unwrap()
    }

    #[test]
    fn subscales_partition_items() {
        let mut all: Vec<usize> = Subscale::ALL
            .iter()
            .flat_map(|s| s.items().to_vec())
            .collect();
        all.sort_unstable();
        assert_eq!(all, (1..=21).collect::<Vec<_>>());
    }

    #[test]
    fn all_zero_is_normal() {
        let s = score_items(&[0; 21]).unwrap();
        assert_eq!(
            (s.depression_final, s.anxiety_final, s.stress_final),
            (0, 0, 0)
        );
        for sub in Subscale::ALL {
            assert_eq!(s.level(sub), SeverityLevel::Normal);
        }
    }

    #[test]
    fn all_three_is_extremely_severe() {
        let s = score_items(&[3; 21]).unwrap();
        assert_eq!(
            (s.depression_final, s.anxiety_final, s.stress_final),
            (42, 42, 42)
        );
        for sub in Subscale::ALL {
            assert_eq!(s.level(sub), SeverityLevel::ExtremelySevere);
        }
    }

    #[test]
    fn stress_fourteen_is_normal() {
        let items: Vec<(usize, i64)> = STRESS_ITEMS.iter().map(|&n| (n, 1)).collect();
        let s = score_subscales(&response_with(&items));
        assert_eq!(s.stress_final, 14);
        assert_eq!(s.stress_level, SeverityLevel::Normal);
        assert_eq!(s.anxiety_final, 0);
    }

    #[test]
    fn anxiety_raw_four_is_mild() {
        let s = score_subscales(&response_with(&[(2, 2), (4, 1), (7, 1)]));
        assert_eq!(s.anxiety_final, 8);
        assert_eq!(s.anxiety_level, SeverityLevel::Mild);
    }

    #[test]
    fn rejects_out_of_range_items() {
        let mut v = vec![0i64; 21];
        v[4] = 4;
        assert_eq!(
            Das21Response::new(&v),
            Err(Das21Error::InvalidItemValue { index: 5, value: 4 })
        );
        v[4] = -1;
        assert!(Das21Response::new(&v).is_err());
        assert_eq!(
            Das21Response::new(&[0; 20]),
            Err(Das21Error::WrongItemCount(20))
        );
    }

    #[test]
    fn labels_for_canonical_and_noncanonical_sets() {
        let normal = derive_labels(&DasScores::from_finals(0, 0, 0), MulticlassPolicy::Strict);
        assert_eq!(normal.binary, BinaryLabel::Normal);
        assert_eq!(normal.multiclass, Some(MulticlassLabel::Normal));

        // mild depression, moderate anxiety, moderate stress
        let sad = DasScores::from_finals(12, 12, 20);
        assert_eq!(sad.depression_level, SeverityLevel::Mild);
        assert_eq!(sad.anxiety_level, SeverityLevel::Moderate);
        assert_eq!(sad.stress_level, SeverityLevel::Moderate);
        let l = derive_labels(&sad, MulticlassPolicy::Strict);
        assert_eq!(l.binary, BinaryLabel::Abnormal);
        assert_eq!(l.multiclass, Some(MulticlassLabel::StressAnxietyDepression));

        let anx_only = DasScores::from_finals(0, 10, 0);
        let strict = derive_labels(&anx_only, MulticlassPolicy::Strict);
        assert_eq!(strict.binary, BinaryLabel::Abnormal);
        assert_eq!(strict.multiclass, None);
        assert!(!strict.canonical);
        let rank = derive_labels(&anx_only, MulticlassPolicy::Rank);
        assert_eq!(rank.multiclass, Some(MulticlassLabel::Stress));
        assert!(!rank.canonical);

        let dep_anx = derive_labels(&DasScores::from_finals(30, 10, 0), MulticlassPolicy::Rank);
        assert_eq!(dep_anx.multiclass, Some(MulticlassLabel::StressAnxiety));
    }

    #[test]
    fn bands_partition_full_range() {
        for sub in Subscale::ALL {
            let mut prev = SeverityLevel::Normal;
            let mut seen = std::collections::BTreeSet::new();
            for score in 0..=42u8 {
                let lvl = SeverityLevel::classify(sub, score);
                assert!(lvl >= prev);
                assert!(lvl as usize <= prev as usize + 1);
                prev = lvl;
                seen.insert(lvl);
            }
            assert_eq!(seen.len(), 5);
        }
    }

    #[test]
    fn level_parsing() {
        assert_eq!(
            "Extremely Severe".parse::<SeverityLevel>().unwrap(),
            SeverityLevel::ExtremelySevere
        );
        assert_eq!(
            "mild".parse::<SeverityLevel>().unwrap(),
            SeverityLevel::Mild
        );
        assert!("bad".parse::<SeverityLevel>().is_err());
    }

    proptest! {
        #[test]
        fn raising_one_item_never_lowers_scores(
            items in proptest::collection::vec(0i64..=3, 21),
            idx in 0usize..21,
        ) {
            let base = score_items(&items).unwrap();
            let mut up = items.clone();
            up[idx] = (up[idx] + 1).min(3);
            let raised = score_items(&up).unwrap();
            for sub in Subscale::ALL {
                prop_assert!(raised.final_score(sub) >= base.final_score(sub));
                prop_assert!(raised.level(sub) >= base.level(sub));
                prop_assert_eq!(raised.final_score(sub) % 2, 0);
            }
        }

        #[test]
        fn binary_depends_only_on_levels(items in proptest::collection::vec(0i64..=3, 21)) {
            let s = score_items(&items).unwrap();
            let l = derive_labels(&s, MulticlassPolicy::Strict);
            let any = Subscale::ALL.iter().any(|&sub| s.level(sub).is_abnormal());
            prop_assert_eq!(l.binary == BinaryLabel::Abnormal, any);
            prop_assert_eq!(l.multiclass == Some(MulticlassLabel::Normal), !any);
        }
    }
}
