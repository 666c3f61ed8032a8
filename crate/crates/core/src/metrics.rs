//! Ranking and classification metrics.
//!
//! ROC AUC counts ties as half-concordant, which equals the trapezoidal area
//! under the threshold-swept curve. PR AUC is average precision (step form).
//! Multiclass one-vs-one AUC follows Hand & Till.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("roc auc needs both classes; got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
    #[error("no positive labels")]
    NoPositives,
    #[error("degenerate classes: {0}")]
    DegenerateClasses(String),
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("non-finite score at row {0}")]
    NonFinite(usize),
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch(scores.len(), labels.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite(i));
    }
    Ok(())
}

/// Indices sorted by descending score.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// `P(score⁺ > score⁻) + ½·P(tie)` via midranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    check(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::SingleClass {
            positives: pos,
            negatives: neg,
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

/// `(fpr, tpr)` points from a descending threshold sweep, anchored at
/// (0,0) and (1,1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<CurvePoint>,
    pub auc: f64,
}

pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve, MetricError> {
    let auc = roc_auc(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    let idx = descending(scores);
    let mut points = vec![CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let thr = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == thr {
            if labels[idx[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push(CurvePoint {
            threshold: thr,
            x: fp / neg,
            y: tp / pos,
        });
    }
    Ok(RocCurve { points, auc })
}

/// Trapezoidal area under curve points (x ascending).
pub fn trapezoid_area(points: &[CurvePoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].x - w[0].x) * (w[0].y + w[1].y) / 2.0)
        .sum()
}

/// Precision-recall points `(recall, precision)` per unique threshold.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<CurvePoint>, MetricError> {
    check(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 {
        return Err(MetricError::NoPositives);
    }
    let idx = descending(scores);
    let mut out = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let thr = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == thr {
            tp += usize::from(labels[idx[i]]);
            seen += 1;
            i += 1;
        }
        out.push(CurvePoint {
            threshold: thr,
            x: tp as f64 / pos as f64,
            y: tp as f64 / seen as f64,
        });
    }
    Ok(out)
}

/// Average precision `Σ (Rₙ − Rₙ₋₁)·Pₙ`.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    let pts = pr_curve(scores, labels)?;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for p in &pts {
        ap += (p.x - prev_recall) * p.y;
        prev_recall = p.x;
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MulticlassMode {
    Ovr,
    Ovo,
}

/// Macro AUC and the classes/pairs that were skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroAuc {
    pub value: f64,
    pub skipped_pairs: Vec<(usize, usize)>,
}

/// `probs` is row-major `n × k`.
pub fn macro_multiclass_auc(
    probs: &[f64],
    labels: &[usize],
    k: usize,
    mode: MulticlassMode,
) -> Result<f64, MetricError> {
    macro_multiclass_auc_detail(probs, labels, k, mode).map(|m| m.value)
}

pub fn macro_multiclass_auc_detail(
    probs: &[f64],
    labels: &[usize],
    k: usize,
    mode: MulticlassMode,
) -> Result<MacroAuc, MetricError> {
    if probs.len() != labels.len() * k {
        return Err(MetricError::LengthMismatch(
            probs.len() / k.max(1),
            labels.len(),
        ));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(MetricError::DegenerateClasses(format!(
            "label {bad} outside 0..{k}"
        )));
    }
    let col = |c: usize| -> Vec<f64> { (0..labels.len()).map(|r| probs[r * k + c]).collect() };
    let present: Vec<bool> = (0..k).map(|c| labels.contains(&c)).collect();
    match mode {
        MulticlassMode::Ovr => {
            if let Some(missing) = present.iter().position(|p| !p) {
                return Err(MetricError::DegenerateClasses(format!(
                    "class {missing} absent"
                )));
            }
            let mut sum = 0.0;
            for c in 0..k {
                let is_c: Vec<bool> = labels.iter().map(|&l| l == c).collect();
                sum += roc_auc(&col(c), &is_c)?;
            }
            Ok(MacroAuc {
                value: sum / k as f64,
                skipped_pairs: Vec::new(),
            })
        }
        MulticlassMode::Ovo => {
            if present.iter().filter(|&&p| p).count() < 2 {
                return Err(MetricError::DegenerateClasses(
                    "fewer than two classes present".into(),
                ));
            }
            let mut sum = 0.0;
            let mut used = 0usize;
            let mut skipped = Vec::new();
            for i in 0..k {
                for j in i + 1..k {
                    if !present[i] || !present[j] {
                        skipped.push((i, j));
                        continue;
                    }
                    let rows: Vec<usize> = (0..labels.len())
                        .filter(|&r| labels[r] == i || labels[r] == j)
                        .collect();
                    let a_ij = {
                        let s: Vec<f64> = rows.iter().map(|&r| probs[r * k + i]).collect();
                        let l: Vec<bool> = rows.iter().map(|&r| labels[r] == i).collect();
                        roc_auc(&s, &l)?
                    };
                    let a_ji = {
                        let s: Vec<f64> = rows.iter().map(|&r| probs[r * k + j]).collect();
                        let l: Vec<bool> = rows.iter().map(|&r| labels[r] == j).collect();
                        roc_auc(&s, &l)?
                    };
                    sum += 0.5 * (a_ij + a_ji);
                    used += 1;
                }
            }
            Ok(MacroAuc {
                value: sum / used as f64,
                skipped_pairs: skipped,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassPrf>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Unweighted class means; 0/0 counts as 0.
pub fn macro_prf(predicted: &[usize], truth: &[usize], k: usize) -> MacroPrf {
    assert_eq!(
        predicted.len(),
        truth.len(),
        "prediction/label length mismatch"
    );
    let mut conf = vec![vec![0usize; k]; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        conf[t][p] += 1;
    }
    let per_class: Vec<ClassPrf> = (0..k)
        .map(|c| {
            let tp = conf[c][c];
            let pred_c: usize = (0..k).map(|t| conf[t][c]).sum();
            let true_c: usize = conf[c].iter().sum();
            let precision = ratio(tp, pred_c);
            let recall = ratio(tp, true_c);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassPrf {
                precision,
                recall,
                f1,
                support: true_c,
            }
        })
        .collect();
    let mean = |f: fn(&ClassPrf) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    MacroPrf {
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
        per_class,
    }
}

/// Class decision with the lowest index winning ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Metrics for one evaluation (a fold, or pooled out-of-fold predictions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricReport {
    pub fold_id: Option<usize>,
    pub seed: Option<u64>,
    pub n_test: usize,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub macro_ovr_auc: Option<f64>,
    pub macro_ovo_auc: Option<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassPrf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Evaluates `n × k` probabilities. For `k == 2` the binary ROC/PR AUC use the
/// class-1 column; undefined metrics are left `None` with a note.
pub fn evaluate(probs: &[f64], labels: &[usize], k: usize) -> MetricReport {
    let n = labels.len();
    let predicted: Vec<usize> = (0..n).map(|r| argmax(&probs[r * k..(r + 1) * k])).collect();
    let prf = macro_prf(&predicted, labels, k);
    let mut report = MetricReport {
        n_test: n,
        macro_precision: prf.precision,
        macro_recall: prf.recall,
        macro_f1: prf.f1,
        per_class: prf.per_class,
        ..Default::default()
    };
    let note =
        |r: &mut MetricReport, what: &str, e: MetricError| r.notes.push(format!("{what}: {e}"));
    if k == 2 {
        let s: Vec<f64> = (0..n).map(|r| probs[r * 2 + 1]).collect();
        let l: Vec<bool> = labels.iter().map(|&c| c == 1).collect();
        match roc_auc(&s, &l) {
            Ok(v) => report.roc_auc = Some(v),
            Err(e) => note(&mut report, "roc_auc", e),
        }
        match pr_auc(&s, &l) {
            Ok(v) => report.pr_auc = Some(v),
            Err(e) => note(&mut report, "pr_auc", e),
        }
    } else {
        match macro_multiclass_auc(probs, labels, k, MulticlassMode::Ovr) {
            Ok(v) => report.macro_ovr_auc = Some(v),
            Err(e) => note(&mut report, "macro_ovr_auc", e),
        }
        match macro_multiclass_auc_detail(probs, labels, k, MulticlassMode::Ovo) {
            Ok(v) => {
                if !v.skipped_pairs.is_empty() {
                    report
                        .notes
                        .push(format!("macro_ovo_auc skipped pairs {:?}", v.skipped_pairs));
                }
                report.macro_ovo_auc = Some(v.value);
            }
            Err(e) => note(&mut report, "macro_ovo_auc", e),
        }
    }
    report
}

pub fn write_roc_points<W: Write>(curve: &RocCurve, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "fpr", "tpr"])?;
    for p in &curve.points {
        w.write_record([p.threshold.to_string(), p.x.to_string(), p.y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pr_points<W: Write>(points: &[CurvePoint], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "recall", "precision"])?;
    for p in points {
        w.write_record([p.threshold.to_string(), p.x.to_string(), p.y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_auc(s: &[f64], l: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..s.len() {
            for j in 0..s.len() {
                if l[i] && !l[j] {
                    den += 1.0;
                    if s[i] > s[j] {
                        num += 1.0;
                    } else if s[i] == s[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn roc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
        assert_eq!(
            roc_auc(&[0.8, 0.6, 0.4, 0.2], &[true, false, true, false]).unwrap(),
            0.75
        );
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[true, true]),
            Err(MetricError::SingleClass { .. })
        ));
    }

    #[test]
    fn pr_examples() {
        assert_eq!(
            pr_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(),
            1.0
        );
        let ap = pr_auc(&[0.8, 0.6, 0.4, 0.2], &[true, false, true, false]).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(
            pr_auc(&[0.1, 0.2], &[false, false]),
            Err(MetricError::NoPositives)
        );
    }

    #[test]
    fn curve_anchors() {
        let c = roc_curve(&[0.3, 0.3, 0.9, 0.1], &[true, false, true, false]).unwrap();
        assert_eq!((c.points[0].x, c.points[0].y), (0.0, 0.0));
        let last = c.points.last().unwrap();
        assert_eq!((last.x, last.y), (1.0, 1.0));
        assert!((trapezoid_area(&c.points) - c.auc).abs() < 1e-12);
    }

    #[test]
    fn binary_as_multiclass() {
        let p1 = [0.8, 0.3, 0.6, 0.1, 0.55];
        let labels = [1, 0, 1, 0, 0];
        let probs: Vec<f64> = p1.iter().flat_map(|&p| [1.0 - p, p]).collect();
        let ovr = macro_multiclass_auc(&probs, &labels, 2, MulticlassMode::Ovr).unwrap();
        let bin = roc_auc(&p1, &labels.map(|l| l == 1)).unwrap();
        assert!((ovr - bin).abs() < 1e-15);
    }

    #[test]
    fn perfect_three_class() {
        let probs = [
            0.8, 0.1, 0.1, 0.7, 0.2, 0.1, 0.1, 0.8, 0.1, 0.2, 0.6, 0.2, 0.1, 0.1, 0.8, 0.0, 0.3,
            0.7,
        ];
        let labels = [0, 0, 1, 1, 2, 2];
        for mode in [MulticlassMode::Ovr, MulticlassMode::Ovo] {
            assert_eq!(macro_multiclass_auc(&probs, &labels, 3, mode).unwrap(), 1.0);
        }
    }

    /// Hand & Till by explicit row-pair loops.
    fn ovo_oracle(probs: &[f64], labels: &[usize], k: usize) -> f64 {
        let mut sum = 0.0;
        let mut pairs = 0.0;
        for i in 0..k {
            for j in i + 1..k {
                let a = |c: usize, other: usize| {
                    let (mut num, mut den) = (0.0, 0.0);
                    for r in 0..labels.len() {
                        for s in 0..labels.len() {
                            if labels[r] == c && labels[s] == other {
                                den += 1.0;
                                let (x, y) = (probs[r * k + c], probs[s * k + c]);
                                num += if x > y {
                                    1.0
                                } else if x == y {
                                    0.5
                                } else {
                                    0.0
                                };
                            }
                        }
                    }
                    num / den
                };
                sum += 0.5 * (a(i, j) + a(j, i));
                pairs += 1.0;
            }
        }
        sum / pairs
    }

    #[test]
    fn ovo_one_misranked_row() {
        // row 1 (class 0) looks like class 1
        let probs = [
            0.7, 0.2, 0.1, //
            0.3, 0.6, 0.1, //
            0.2, 0.7, 0.1, //
            0.1, 0.5, 0.4, //
            0.1, 0.2, 0.7, //
            0.2, 0.1, 0.7,
        ];
        let labels = [0, 0, 1, 1, 2, 2];
        let v = macro_multiclass_auc(&probs, &labels, 3, MulticlassMode::Ovo).unwrap();
        assert!((v - ovo_oracle(&probs, &labels, 3)).abs() < 1e-15);
        assert!(v < 1.0);
    }

    #[test]
    fn ovo_skips_absent_pairs() {
        let probs = [0.7, 0.2, 0.1, 0.2, 0.7, 0.1, 0.6, 0.3, 0.1];
        let labels = [0, 1, 0];
        let d = macro_multiclass_auc_detail(&probs, &labels, 3, MulticlassMode::Ovo).unwrap();
        assert_eq!(d.skipped_pairs, vec![(0, 2), (1, 2)]);
        assert_eq!(d.value, 1.0);
        assert!(macro_multiclass_auc(&probs, &labels, 3, MulticlassMode::Ovr).is_err());
        assert!(macro_multiclass_auc(&probs, &[0, 0, 0], 3, MulticlassMode::Ovo).is_err());
    }

    #[test]
    fn prf_conventions() {
        let perfect = macro_prf(&[0, 1, 2, 3], &[0, 1, 2, 3], 4);
        assert_eq!(
            (perfect.precision, perfect.recall, perfect.f1),
            (1.0, 1.0, 1.0)
        );
        let never2 = macro_prf(&[0, 1, 0, 1], &[0, 1, 2, 1], 3);
        assert_eq!(never2.per_class[2].precision, 0.0);
        assert_eq!(never2.per_class[2].recall, 0.0);
        assert!(never2.precision < 1.0);
    }

    #[test]
    fn prf_hand_computed() {
        // truth/pred confusion (rows = truth):
        //   [2 1 0]
        //   [0 1 1]
        //   [1 0 2]
        let truth = [0, 0, 0, 1, 1, 2, 2, 2];
        let pred = [0, 0, 1, 1, 2, 0, 2, 2];
        let m = macro_prf(&pred, &truth, 3);
        let p = [2.0 / 3.0, 1.0 / 2.0, 2.0 / 3.0];
        let r = [2.0 / 3.0, 1.0 / 2.0, 2.0 / 3.0];
        let f: Vec<f64> = (0..3).map(|i| 2.0 * p[i] * r[i] / (p[i] + r[i])).collect();
        assert!((m.precision - p.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        assert!((m.recall - r.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        assert!((m.f1 - f.iter().sum::<f64>() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn argmax_tie_goes_low() {
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
    }

    #[test]
    fn evaluate_notes_single_class_fold() {
        let r = evaluate(&[0.3, 0.7, 0.6, 0.4], &[1, 1], 2);
        assert!(r.roc_auc.is_none());
        assert_eq!(r.pr_auc, Some(1.0));
        assert_eq!(r.notes.len(), 1);
    }

    proptest! {
        #[test]
        fn matches_pair_counting(data in proptest::collection::vec((0u8..20, any::<bool>()), 2..200)) {
            let s: Vec<f64> = data.iter().map(|d| d.0 as f64 / 7.0).collect();
            let l: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(l.iter().any(|&x| x) && l.iter().any(|&x| !x));
            let a = roc_auc(&s, &l).unwrap();
            prop_assert!((a - brute_auc(&s, &l)).abs() < 1e-12);
            let c = roc_curve(&s, &l).unwrap();
            prop_assert!((trapezoid_area(&c.points) - a).abs() < 1e-12);
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp()).collect();
            prop_assert_eq!(roc_auc(&t, &l).unwrap(), a);
        }

        #[test]
        fn negation_complements(mut s in proptest::collection::vec(-1e3f64..1e3, 2..80), seed in any::<u64>()) {
            s.sort_by(f64::total_cmp);
            s.dedup();
            prop_assume!(s.len() >= 2);
            let l: Vec<bool> = (0..s.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            prop_assume!(l.iter().any(|&x| x) && l.iter().any(|&x| !x));
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            prop_assert!((roc_auc(&neg, &l).unwrap() - (1.0 - roc_auc(&s, &l).unwrap())).abs() < 1e-12);
        }

        #[test]
        fn macro_metrics_permutation_invariant(rows in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0usize..3), 6..40), rot in 1usize..5) {
            let labels: Vec<usize> = rows.iter().map(|r| r.3).collect();
            prop_assume!((0..3).all(|c| labels.contains(&c)));
            let probs: Vec<f64> = rows.iter().flat_map(|r| { let s = r.0 + r.1 + r.2 + 1e-9; [r.0 / s, r.1 / s, r.2 / s] }).collect();
            let mut rrows = rows.clone();
            rrows.rotate_left(rot % rows.len());
            let rl: Vec<usize> = rrows.iter().map(|r| r.3).collect();
            let rp: Vec<f64> = rrows.iter().flat_map(|r| { let s = r.0 + r.1 + r.2 + 1e-9; [r.0 / s, r.1 / s, r.2 / s] }).collect();
            for mode in [MulticlassMode::Ovr, MulticlassMode::Ovo] {
                let a = macro_multiclass_auc(&probs, &labels, 3, mode).unwrap();
                let b = macro_multiclass_auc(&rp, &rl, 3, mode).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
            let ea = evaluate(&probs, &labels, 3);
            let eb = evaluate(&rp, &rl, 3);
            prop_assert!((ea.macro_f1 - eb.macro_f1).abs() < 1e-12);
        }
    }
}
