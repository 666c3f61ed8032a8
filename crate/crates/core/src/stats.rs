//! Mann-Whitney U comparisons, group summaries with central 95% intervals,
//! and questionnaire prevalence.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::das21::{score_subscales, DasScores, SeverityLevel, Subscale};
use crate::dataset::{Cell, MeasurementRecord};

/// Exact p-values are used up to this combined sample size (tie-free only).
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("empty group")]
    EmptyGroup,
    #[error("{values} values but {labels} group labels")]
    LengthMismatch { values: usize, labels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    pub n_a: usize,
    pub n_b: usize,
    /// U of the first sample.
    pub u_a: f64,
    pub u_b: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: PValueMethod,
}

/// Midranks (1-based) of the pooled sample and the tie-group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Null distribution of U as counts over all `C(m+n, m)` arrangements.
fn u_distribution(m: usize, n: usize) -> Vec<f64> {
    // f[i][j] is the distribution for sizes (i, j); built row by row.
    let mut prev: Vec<Vec<f64>> = (0..=n).map(|_| vec![1.0]).collect();
    for i in 1..=m {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        cur.push(vec![1.0]);
        for j in 1..=n {
            // largest element from the first sample adds j to U; otherwise 0
            let mut d = vec![0.0; i * j + 1];
            for (u, c) in prev[j].iter().enumerate() {
                d[u + j] += c;
            }
            for (u, c) in cur[j - 1].iter().enumerate() {
                d[u] += c;
            }
            cur.push(d);
        }
        prev = cur;
    }
    prev.swap_remove(n)
}

fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    mann_whitney_u_with(a, b, None)
}

/// Like [`mann_whitney_u`] but with the p-value method forced. A forced exact
/// p-value on tied data falls back to the normal approximation.
pub fn mann_whitney_u_with(
    a: &[f64],
    b: &[f64],
    method: Option<PValueMethod>,
) -> Result<MannWhitney, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let (n_a, n_b) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r_a: f64 = ranks[..n_a].iter().sum();
    let r_b: f64 = ranks[n_a..].iter().sum();
    let u_a = r_a - (n_a * (n_a + 1)) as f64 / 2.0;
    let u_b = r_b - (n_b * (n_b + 1)) as f64 / 2.0;
    let n = n_a + n_b;
    let exact = match method {
        Some(PValueMethod::Exact) => ties.is_empty(),
        Some(PValueMethod::Normal) => false,
        None => n <= EXACT_MAX_N && ties.is_empty(),
    };
    let (p_value, method) = if exact {
        let dist = u_distribution(n_a, n_b);
        let total: f64 = dist.iter().sum();
        let u = u_a.round() as usize;
        let lower: f64 = dist[..=u].iter().sum::<f64>() / total;
        let upper: f64 = dist[u..].iter().sum::<f64>() / total;
        ((2.0 * lower.min(upper)).min(1.0), PValueMethod::Exact)
    } else {
        let (fa, fb, fnn) = (n_a as f64, n_b as f64, n as f64);
        let tie_term: f64 =
            ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (fnn * (fnn - 1.0));
        let var = fa * fb / 12.0 * ((fnn + 1.0) - tie_term);
        let p = if var > 0.0 {
            let z = ((u_a - fa * fb / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
            (2.0 * normal_sf(z)).min(1.0)
        } else {
            1.0
        };
        (p, PValueMethod::Normal)
    };
    Ok(MannWhitney {
        n_a,
        n_b,
        u_a,
        u_b,
        p_value,
        method,
    })
}

/// Type-7 percentile (linear interpolation between order statistics) of
/// sorted data, `q ∈ [0, 1]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    /// 2.5th percentile.
    pub lo: f64,
    /// 97.5th percentile.
    pub hi: f64,
}

pub fn summarize(values: &[f64]) -> Result<GroupStats, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyGroup);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(GroupStats {
        n: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        lo: percentile_sorted(&sorted, 0.025),
        hi: percentile_sorted(&sorted, 0.975),
    })
}

/// Mean and central 95% interval per group label.
pub fn group_summary<G: Ord + Clone>(
    values: &[f64],
    groups: &[G],
) -> Result<BTreeMap<G, GroupStats>, StatsError> {
    if values.len() != groups.len() {
        return Err(StatsError::LengthMismatch {
            values: values.len(),
            labels: groups.len(),
        });
    }
    let mut by: BTreeMap<G, Vec<f64>> = BTreeMap::new();
    for (v, g) in values.iter().zip(groups) {
        by.entry(g.clone()).or_default().push(*v);
    }
    by.into_iter()
        .map(|(g, v)| Ok((g, summarize(&v)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub feature: String,
    pub group_a: GroupStats,
    pub group_b: GroupStats,
    pub u_statistic: f64,
    pub p_value: f64,
    pub method: PValueMethod,
}

pub fn compare_groups(feature: &str, a: &[f64], b: &[f64]) -> Result<GroupComparison, StatsError> {
    let mw = mann_whitney_u(a, b)?;
    Ok(GroupComparison {
        feature: feature.to_string(),
        group_a: summarize(a)?,
        group_b: summarize(b)?,
        u_statistic: mw.u_a,
        p_value: mw.p_value,
        method: mw.method,
    })
}

/// Wellbeing (all subscales Normal, group a) against non-wellbeing (group b)
/// for each numeric column. Rows without questionnaire data or without a
/// value are skipped; columns leaving a group empty are omitted.
pub fn wellbeing_comparisons(
    records: &[MeasurementRecord],
    columns: &[&str],
) -> Vec<GroupComparison> {
    let mut out = Vec::new();
    for &col in columns {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for r in records {
            let (Some(resp), Some(Cell::Num(Some(v)))) = (&r.das21, r.cell(col)) else {
                continue;
            };
            let s = score_subscales(resp);
            if Subscale::ALL.iter().all(|&sub| !s.level(sub).is_abnormal()) {
                a.push(v);
            } else {
                b.push(v);
            }
        }
        if let Ok(c) = compare_groups(col, &a, &b) {
            out.push(c);
        }
    }
    out
}

pub fn write_stats_csv<W: Write>(rows: &[GroupComparison], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "feature",
        "group_a_mean",
        "group_a_lo",
        "group_a_hi",
        "group_b_mean",
        "group_b_lo",
        "group_b_hi",
        "U",
        "p",
    ])?;
    for c in rows {
        w.write_record([
            c.feature.clone(),
            c.group_a.mean.to_string(),
            c.group_a.lo.to_string(),
            c.group_a.hi.to_string(),
            c.group_b.mean.to_string(),
            c.group_b.lo.to_string(),
            c.group_b.hi.to_string(),
            c.u_statistic.to_string(),
            c.p_value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionPrevalence {
    /// Share of participants above Normal.
    pub fraction: f64,
    /// Share per severity level, Normal first.
    pub by_level: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceReport {
    pub n_participants: usize,
    pub depression: ConditionPrevalence,
    pub anxiety: ConditionPrevalence,
    pub stress: ConditionPrevalence,
    /// Share with at least one subscale above Normal.
    pub any_condition: f64,
    /// Participants whose rows disagree on questionnaire scores; the first
    /// row was used.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inconsistent: Vec<String>,
}

impl PrevalenceReport {
    pub fn condition(&self, s: Subscale) -> &ConditionPrevalence {
        match s {
            Subscale::Depression => &self.depression,
            Subscale::Anxiety => &self.anxiety,
            Subscale::Stress => &self.stress,
        }
    }
}

/// Participant-level prevalence from `(patient_id, scores)` rows. Repeated
/// rows of one participant count once.
pub fn prevalence_report(rows: &[(String, DasScores)]) -> PrevalenceReport {
    let mut first: BTreeMap<&str, DasScores> = BTreeMap::new();
    let mut inconsistent = Vec::new();
    for (pid, s) in rows {
        match first.get(pid.as_str()) {
            None => {
                first.insert(pid, *s);
            }
            Some(prev) if prev != s && !inconsistent.contains(pid) => {
                inconsistent.push(pid.clone())
            }
            _ => {}
        }
    }
    let n = first.len();
    let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    let condition = |sub: Subscale| {
        let mut by_level = [0.0; 5];
        for (i, level) in SeverityLevel::ALL.iter().enumerate() {
            by_level[i] = frac(first.values().filter(|s| s.level(sub) == *level).count());
        }
        ConditionPrevalence {
            fraction: frac(
                first
                    .values()
                    .filter(|s| s.level(sub).is_abnormal())
                    .count(),
            ),
            by_level,
        }
    };
    PrevalenceReport {
        n_participants: n,
        depression: condition(Subscale::Depression),
        anxiety: condition(Subscale::Anxiety),
        stress: condition(Subscale::Stress),
        any_condition: frac(
            first
                .values()
                .filter(|s| Subscale::ALL.iter().any(|&sub| s.level(sub).is_abnormal()))
                .count(),
        ),
        inconsistent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binom(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// p-value by listing every assignment of ranks 1..=N to the first sample.
    fn enumerated_p(n_a: usize, n_b: usize, u_obs: f64) -> f64 {
        let n = n_a + n_b;
        let (mut le, mut ge, mut total) = (0.0, 0.0, 0.0);
        for mask in 0u32..1 << n {
            if mask.count_ones() as usize != n_a {
                continue;
            }
            let r: usize = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).sum();
            let u = (r - n_a * (n_a + 1) / 2) as f64;
            total += 1.0;
            if u <= u_obs {
                le += 1.0;
            }
            if u >= u_obs {
                ge += 1.0;
            }
        }
        assert_eq!(total, binom(n, n_a));
        (2.0 * (le / total).min(ge / total)).min(1.0)
    }

    #[test]
    fn two_by_two() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u_a, 0.0);
        assert_eq!(r.method, PValueMethod::Exact);
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_samples() {
        let a = [3.0, 1.0, 4.0, 1.5];
        let r = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(r.u_a, 8.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn empty_sample() {
        assert_eq!(mann_whitney_u(&[], &[1.0]), Err(StatsError::EmptySample));
    }

    #[test]
    fn exact_matches_enumeration_exhaustively() {
        for n in 2..=10usize {
            for n_a in 1..n {
                let n_b = n - n_a;
                let dist = u_distribution(n_a, n_b);
                assert_eq!(dist.iter().sum::<f64>(), binom(n, n_a));
                // every achievable U, via a representative arrangement
                for u in 0..=n_a * n_b {
                    let (a, b) = arrangement(n_a, n_b, u);
                    let r = mann_whitney_u(&a, &b).unwrap();
                    assert_eq!(r.u_a, u as f64);
                    assert!((r.p_value - enumerated_p(n_a, n_b, u as f64)).abs() < 1e-12);
                }
            }
        }
    }

    /// Two tie-free samples whose first-sample U equals `u`.
    fn arrangement(n_a: usize, n_b: usize, mut u: usize) -> (Vec<f64>, Vec<f64>) {
        // place sample-a items greedily from the top of the b ranking
        let mut above = vec![0usize; n_a];
        for slot in above.iter_mut() {
            let take = u.min(n_b);
            *slot = take;
            u -= take;
        }
        let a: Vec<f64> = above
            .iter()
            .enumerate()
            .map(|(i, &k)| k as f64 + 0.5 + i as f64 * 1e-3)
            .collect();
        let b: Vec<f64> = (0..n_b).map(|j| j as f64 + 1.0).collect();
        (a, b)
    }

    #[test]
    fn percentile_convention() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = summarize(&v).unwrap();
        assert!((s.lo - 3.475).abs() < 1e-12);
        assert!((s.hi - 97.525).abs() < 1e-12);
        assert_eq!(
            summarize(&[5.0, 5.0, 5.0]).unwrap(),
            GroupStats {
                n: 3,
                mean: 5.0,
                lo: 5.0,
                hi: 5.0
            }
        );
        assert_eq!(summarize(&[]), Err(StatsError::EmptyGroup));
    }

    #[test]
    fn group_summary_splits() {
        let g = group_summary(&[1.0, 2.0, 10.0, 20.0], &["x", "x", "y", "y"]).unwrap();
        assert_eq!(g["x"].mean, 1.5);
        assert_eq!(g["y"].mean, 15.0);
    }

    #[test]
    fn prevalence() {
        let normal = DasScores::from_finals(0, 0, 0);
        let stressed = DasScores::from_finals(0, 0, 20);
        let rows: Vec<(String, DasScores)> = vec![
            ("a".into(), normal),
            ("b".into(), normal),
            ("c".into(), normal),
            ("d".into(), stressed),
            ("d".into(), stressed),
        ];
        let r = prevalence_report(&rows);
        assert_eq!(r.n_participants, 4);
        assert_eq!(r.stress.fraction, 0.25);
        assert_eq!(r.stress.by_level[2], 0.25);
        assert_eq!(r.anxiety.fraction, 0.0);
        assert_eq!(r.any_condition, 0.25);
        let all_normal = prevalence_report(&rows[..3]);
        assert_eq!(
            all_normal.depression.fraction
                + all_normal.anxiety.fraction
                + all_normal.stress.fraction,
            0.0
        );
    }

    #[test]
    fn normal_approximation_in_the_tails() {
        // all tie-free configurations with 12 <= N <= 20 and both samples >= 3
        let mut worst_tail: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for n in 12..=20usize {
            for n_a in 3..=n - 3 {
                let n_b = n - n_a;
                for u in 0..=n_a * n_b {
                    let (a, b) = arrangement(n_a, n_b, u);
                    let exact = mann_whitney_u_with(&a, &b, Some(PValueMethod::Exact))
                        .unwrap()
                        .p_value;
                    let approx = mann_whitney_u_with(&a, &b, Some(PValueMethod::Normal))
                        .unwrap()
                        .p_value;
                    let err = (exact - approx).abs();
                    worst = worst.max(err);
                    if exact <= 0.1 {
                        worst_tail = worst_tail.max(err);
                    }
                }
            }
        }
        assert!(worst_tail < 0.01, "tail error {worst_tail}");
        assert!(worst < 0.025, "error {worst}");
    }

    proptest! {
        #[test]
        fn u_sum_and_swap(a in proptest::collection::vec(0u8..30, 1..25), b in proptest::collection::vec(0u8..30, 1..25)) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let r = mann_whitney_u(&a, &b).unwrap();
            prop_assert_eq!(r.u_a + r.u_b, (a.len() * b.len()) as f64);
            let s = mann_whitney_u(&b, &a).unwrap();
            prop_assert_eq!(s.u_a, r.u_b);
            prop_assert!((s.p_value - r.p_value).abs() < 1e-12);
            prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
        }

        #[test]
        fn summary_mean(v in proptest::collection::vec(-1e3f64..1e3, 1..50)) {
            let s = summarize(&v).unwrap();
            let direct = v.iter().sum::<f64>() / v.len() as f64;
            prop_assert!((s.mean - direct).abs() < 1e-12);
            prop_assert!(s.lo <= s.hi);
        }
    }
}
