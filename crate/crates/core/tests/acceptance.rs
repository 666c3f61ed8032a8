//! One test per acceptance criterion. Each prints a single
//! `PASS`/`FAIL`/`SKIP` line with its runtime and budget.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ldf_das::das21::{SeverityLevel, Subscale};
use ldf_das::dataset::{FeatureMatrix, RawSignal};
use ldf_das::explain::{brute_force_shap, tree_shap, BackgroundPolicy};
use ldf_das::metrics::{
    macro_multiclass_auc, pr_auc, roc_auc, roc_curve, trapezoid_area, MulticlassMode,
};
use ldf_das::models::{
    derive_seed, train, GbdtParams, ModelArtifact, ModelBody, ModelKind, ModelSpec, Task, Tree,
};
use ldf_das::splits::{kfold_patientwise, lopo, split_8020, split_8020_patientwise, SplitPlan};
use ldf_das::stats::{mann_whitney_u, mann_whitney_u_with, PValueMethod};
use ldf_das::wavelet::{
    extract_features, frequency_grid, synthesize_signal, BandName, BandOptions, MorletParams,
    SynthSpec, ToneComponent,
};

/// Writes past the test harness's output capture so result lines always show.
fn report_line(line: String) {
    use std::io::Write as _;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn criterion(
    id: u32,
    name: &str,
    budget: Duration,
    check: impl FnOnce() -> Result<String, String>,
) {
    let start = Instant::now();
    let outcome = check();
    let took = start.elapsed();
    let outcome = match outcome {
        Ok(detail) if took > budget => Err(format!("{detail}; over budget")),
        other => other,
    };
    match outcome {
        Ok(detail) => report_line(format!(
            "PASS criterion {id}: {name} ({detail}) [{:.2}s / {}s]",
            took.as_secs_f64(),
            budget.as_secs()
        )),
        Err(why) => {
            report_line(format!(
                "FAIL criterion {id}: {name} ({why}) [{:.2}s / {}s]",
                took.as_secs_f64(),
                budget.as_secs()
            ));
            panic!("criterion {id} failed: {why}");
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// 1. DAS-21 severity boundaries

#[test]
fn c01_das21_boundaries() {
    criterion(
        1,
        "DAS-21 severity boundaries",
        Duration::from_secs(1),
        || {
            use SeverityLevel::*;
            // inclusive ranges of the doubled score, Normal..Extremely severe
            let table: [(Subscale, [(u8, u8); 5]); 3] = [
                (
                    Subscale::Depression,
                    [(0, 9), (10, 13), (14, 20), (21, 27), (28, 42)],
                ),
                (
                    Subscale::Anxiety,
                    [(0, 7), (8, 9), (10, 14), (15, 19), (20, 42)],
                ),
                (
                    Subscale::Stress,
                    [(0, 14), (15, 18), (19, 25), (26, 33), (34, 42)],
                ),
            ];
            let levels = [Normal, Mild, Moderate, Severe, ExtremelySevere];
            let mut cases = 0;
            for (sub, ranges) in table {
                for (level, (lo, hi)) in levels.iter().zip(ranges) {
                    for score in [lo, hi] {
                        let got = SeverityLevel::classify(sub, score);
                        ensure(got == *level, || {
                            format!("{} {score}: got {got}, want {level}", sub.name())
                        })?;
                        cases += 1;
                    }
                }
            }
            ensure(cases == 30, || format!("{cases} cases"))?;
            Ok(format!("{cases} boundary cases"))
        },
    );
}

// ---------------------------------------------------------------------------
// 2. Wavelet tone recovery against direct numeric integration

/// Band amplitude and ridge frequency by direct time-domain integration of
/// the calibrated Morlet transform, averaging the modulus over every
/// `stride`-th sample inside the cone of influence.
fn oracle_band(
    signal: &RawSignal,
    params: &MorletParams,
    band: BandName,
    stride: usize,
) -> (f64, f64) {
    let x = signal.perfusion();
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let xc: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let dt = 1.0 / signal.sample_rate();
    let def = band.definition();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for f in frequency_grid(params)
        .into_iter()
        .filter(|&f| def.contains(f))
    {
        let s = params.omega0 / (2.0 * PI * f);
        // 2/(s√(2π)) · e^{iω₀τ/s} · e^{-τ²/2s²}
        let norm = 2.0 / (s * (2.0 * PI).sqrt());
        let half = ((s * 9.0) / dt).ceil() as usize;
        let kernel: Vec<(f64, f64)> = (0..=2 * half)
            .map(|k| {
                let tau = (k as f64 - half as f64) * dt;
                let env = norm * (-tau * tau / (2.0 * s * s)).exp();
                let ph = params.omega0 * tau / s;
                (env * ph.cos(), env * ph.sin())
            })
            .collect();
        let coi = (std::f64::consts::SQRT_2 * s / dt).ceil() as usize;
        if 2 * coi >= n {
            continue;
        }
        let (mut sum, mut count) = (0.0, 0usize);
        let mut i = coi;
        while i + coi < n {
            let (mut re, mut im) = (0.0, 0.0);
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            for j in lo..=hi {
                let (kr, ki) = kernel[i + half - j];
                re += xc[j] * kr;
                im += xc[j] * ki;
            }
            sum += (re * re + im * im).sqrt() * dt;
            count += 1;
            i += stride;
        }
        let avg = sum / count as f64;
        if avg > best.0 {
            best = (avg, f);
        }
    }
    best
}

#[test]
fn c02_wavelet_tone_recovery() {
    criterion(
        2,
        "wavelet tone recovery vs numeric CWT",
        Duration::from_secs(60),
        || {
            let params = MorletParams::default();
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let mut checked = 0;
            let mut worst = (0.0f64, 0.0f64);
            for trial in 0..20 {
                let n_tones = if trial % 2 == 0 { 1 } else { 2 };
                let tones: Vec<(BandName, ToneComponent)> = loop {
                    let mut bands = BandName::ALL.to_vec();
                    bands.shuffle(&mut rng);
                    let picked: Vec<(BandName, ToneComponent)> = bands[..n_tones]
                        .iter()
                        .map(|&b| {
                            let d = b.definition();
                            let u: f64 = rng.gen_range(0.15..0.85);
                            let f = d.f_lo * (d.f_hi / d.f_lo).powf(u);
                            let c = ToneComponent {
                                frequency: f,
                                amplitude: rng.gen_range(0.5..5.0),
                                phase: rng.gen_range(0.0..2.0 * PI),
                            };
                            (b, c)
                        })
                        .collect();
                    let ok = picked.len() < 2 || {
                        let (a, b) = (picked[0].1.frequency, picked[1].1.frequency);
                        a.max(b) / a.min(b) >= 1.6
                    };
                    if ok {
                        break picked;
                    }
                };
                let spec = SynthSpec {
                    components: tones.iter().map(|t| t.1).collect(),
                    ..SynthSpec::default()
                };
                let signal = synthesize_signal(&spec).map_err(|e| e.to_string())?;
                let feats = extract_features(&signal, &params, BandOptions::default())
                    .map_err(|e| e.to_string())?;
                for (band, tone) in &tones {
                    let (oa, of) = oracle_band(&signal, &params, *band, 10);
                    let (a, f) = (feats.band.amplitude(*band), feats.band.frequency(*band));
                    let ea = (a - oa).abs() / oa;
                    let ef = (f - of).abs() / of;
                    worst = (worst.0.max(ea), worst.1.max(ef));
                    ensure(ea <= 0.10 && ef <= 0.05, || {
                        format!("trial {trial} {band}: amp {a} vs oracle {oa}, freq {f} vs {of}")
                    })?;
                    // the oracle itself should find the tone
                    ensure(
                        (oa - tone.amplitude).abs() / tone.amplitude <= 0.10
                            && (of - tone.frequency).abs() / tone.frequency <= 0.05,
                        || format!("trial {trial} {band}: oracle {oa}@{of} vs tone {tone:?}"),
                    )?;
                    checked += 1;
                }
            }
            Ok(format!(
                "{checked} tones, worst amplitude err {:.4}, worst frequency err {:.4}",
                worst.0, worst.1
            ))
        },
    );
}

// ---------------------------------------------------------------------------
// 3. Splitter invariants

fn random_patients(rng: &mut ChaCha8Rng) -> Vec<String> {
    let p = rng.gen_range(2..60);
    let mut ids: Vec<String> = (0..p)
        .flat_map(|i| std::iter::repeat_n(format!("p{i:02}"), rng.gen_range(1..=3)))
        .collect();
    ids.shuffle(rng);
    ids
}

fn check_partition(plan: &SplitPlan, n: usize) -> Result<(), String> {
    for (i, fold) in plan.folds.iter().enumerate() {
        let train: BTreeSet<usize> = fold.train.iter().copied().collect();
        let test: BTreeSet<usize> = fold.test.iter().copied().collect();
        ensure(
            train.len() == fold.train.len() && test.len() == fold.test.len(),
            || format!("fold {i}: duplicate rows"),
        )?;
        ensure(train.is_disjoint(&test), || {
            format!("fold {i}: train/test overlap")
        })?;
        ensure(train.len() + test.len() == n, || {
            format!("fold {i}: rows missing")
        })?;
        ensure(!test.is_empty(), || format!("fold {i}: empty test set"))?;
    }
    Ok(())
}

fn check_patient_disjoint(plan: &SplitPlan, ids: &[String]) -> Result<(), String> {
    for (i, fold) in plan.folds.iter().enumerate() {
        let tr: BTreeSet<&str> = fold.train.iter().map(|&r| ids[r].as_str()).collect();
        let te: BTreeSet<&str> = fold.test.iter().map(|&r| ids[r].as_str()).collect();
        ensure(tr.is_disjoint(&te), || {
            format!("fold {i}: patient on both sides")
        })?;
    }
    Ok(())
}

#[test]
fn c03_split_invariants() {
    criterion(
        3,
        "splitter partition and patient disjointness",
        Duration::from_secs(10),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let trials = 1000;
            for t in 0..trials {
                let ids = random_patients(&mut rng);
                let n = ids.len();
                let patients: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
                let p = patients.len();
                let seed = rng.gen();

                // k-fold: tests partition the rows, folds balanced by patient count
                let k = rng.gen_range(2..=p.min(10));
                let plan = kfold_patientwise(&ids, k, seed).map_err(|e| e.to_string())?;
                ensure(plan.folds.len() == k, || {
                    format!("trial {t}: {} folds", plan.folds.len())
                })?;
                check_partition(&plan, n)?;
                check_patient_disjoint(&plan, &ids)?;
                let mut all_test: Vec<usize> =
                    plan.folds.iter().flat_map(|f| f.test.clone()).collect();
                all_test.sort_unstable();
                ensure(all_test == (0..n).collect::<Vec<_>>(), || {
                    format!("trial {t}: tests not a partition")
                })?;
                let counts: Vec<usize> = plan
                    .folds
                    .iter()
                    .map(|f| {
                        f.test
                            .iter()
                            .map(|&r| ids[r].as_str())
                            .collect::<BTreeSet<_>>()
                            .len()
                    })
                    .collect();
                let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
                ensure(spread <= 1, || {
                    format!("trial {t}: fold patient counts {counts:?}")
                })?;
                ensure(plan == kfold_patientwise(&ids, k, seed).unwrap(), || {
                    "k-fold not deterministic".into()
                })?;

                // LOPO: one fold per patient holding exactly that patient's rows
                let plan = lopo(&ids).map_err(|e| e.to_string())?;
                ensure(plan.folds.len() == p, || {
                    format!(
                        "trial {t}: {} LOPO folds for {p} patients",
                        plan.folds.len()
                    )
                })?;
                check_partition(&plan, n)?;
                check_patient_disjoint(&plan, &ids)?;
                for fold in &plan.folds {
                    let pid = &ids[fold.test[0]];
                    let want: Vec<usize> = (0..n).filter(|&r| &ids[r] == pid).collect();
                    let mut got = fold.test.clone();
                    got.sort_unstable();
                    ensure(got == want, || {
                        format!("trial {t}: LOPO fold for {pid} incomplete")
                    })?;
                }

                // 80:20 row-wise and patient-wise
                if n >= 5 {
                    let plan = split_8020(n, seed).map_err(|e| e.to_string())?;
                    ensure(plan.folds.len() == 1, || "80:20 has one fold".into())?;
                    check_partition(&plan, n)?;
                }
                if n >= 5 && p >= 2 {
                    let plan = split_8020_patientwise(&ids, seed).map_err(|e| e.to_string())?;
                    check_partition(&plan, n)?;
                    check_patient_disjoint(&plan, &ids)?;
                }
            }
            Ok(format!("{trials} trials per scheme"))
        },
    );
}

// ---------------------------------------------------------------------------
// 4. Metric oracles

fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            den += 1.0;
            num += if si > sj {
                1.0
            } else if si == sj {
                0.5
            } else {
                0.0
            };
        }
    }
    num / den
}

#[test]
fn c04_metric_oracles() {
    criterion(
        4,
        "ROC/PR/OvO metric oracles",
        Duration::from_secs(30),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let mut worst = 0.0f64;
            for t in 0..500 {
                let n = rng.gen_range(2..=200);
                let discrete = rng.gen_bool(0.5);
                let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
                labels[0] = true;
                labels[1] = false;
                let scores: Vec<f64> = (0..n)
                    .map(|_| {
                        if discrete {
                            rng.gen_range(0..6) as f64 / 5.0
                        } else {
                            rng.gen::<f64>()
                        }
                    })
                    .collect();
                let auc = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
                let oracle = pair_count_auc(&scores, &labels);
                worst = worst.max((auc - oracle).abs());
                ensure((auc - oracle).abs() <= 1e-12, || {
                    format!("trial {t}: {auc} vs {oracle}")
                })?;
                let curve = roc_curve(&scores, &labels).map_err(|e| e.to_string())?;
                let area = trapezoid_area(&curve.points);
                ensure((area - auc).abs() <= 1e-12, || {
                    format!("trial {t}: curve area {area} vs {auc}")
                })?;
            }

            // precision 1 at recall 0.5, precision 2/3 at recall 1
            let ap = pr_auc(&[0.8, 0.6, 0.4, 0.2], &[true, false, true, false])
                .map_err(|e| e.to_string())?;
            ensure((ap - 5.0 / 6.0).abs() <= 1e-12, || {
                format!("PR fixture {ap}")
            })?;

            for t in 0..20 {
                let n = rng.gen_range(9..40);
                let labels: Vec<usize> = (0..n)
                    .map(|i| if i < 3 { i } else { rng.gen_range(0..3) })
                    .collect();
                let probs: Vec<f64> = (0..n)
                    .flat_map(|_| {
                        let raw: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
                        let s: f64 = raw.iter().sum();
                        raw.into_iter().map(move |v| v / s)
                    })
                    .collect();
                let got = macro_multiclass_auc(&probs, &labels, 3, MulticlassMode::Ovo)
                    .map_err(|e| e.to_string())?;
                let mut sum = 0.0;
                for i in 0..3 {
                    for j in i + 1..3 {
                        let a = |c: usize, pos: usize, neg: usize| {
                            let s: Vec<f64> = (0..n)
                                .filter(|&r| labels[r] == pos || labels[r] == neg)
                                .map(|r| probs[r * 3 + c])
                                .collect();
                            let l: Vec<bool> = (0..n)
                                .filter(|&r| labels[r] == pos || labels[r] == neg)
                                .map(|r| labels[r] == pos)
                                .collect();
                            pair_count_auc(&s, &l)
                        };
                        sum += 0.5 * (a(i, i, j) + a(j, j, i));
                    }
                }
                let want = sum / 3.0;
                ensure((got - want).abs() <= 1e-12, || {
                    format!("OvO fixture {t}: {got} vs {want}")
                })?;
            }
            Ok(format!(
                "500 ROC trials (max err {worst:.1e}), PR fixture 0.8333, 20 OvO fixtures"
            ))
        },
    );
}

// ---------------------------------------------------------------------------
// 5. TreeSHAP

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| (rng.gen_range(0..8) as f64) / 2.0).collect())
        .collect();
    FeatureMatrix::from_rows_anonymous(&refs, &rows)
}

/// Cover-weighted conditional expectation of one tree given the features in `mask`.
fn conditional(tree: &Tree, node: usize, row: &[f64], value_index: usize, mask: u32) -> f64 {
    let nd = &tree.nodes[node];
    match nd.feature {
        None => nd.value[value_index],
        Some(f) if mask & (1 << f) != 0 => {
            let next = if row[f] <= nd.threshold {
                nd.left
            } else {
                nd.right
            };
            conditional(tree, next, row, value_index, mask)
        }
        Some(_) => {
            let (l, r) = (&tree.nodes[nd.left], &tree.nodes[nd.right]);
            (l.cover * conditional(tree, nd.left, row, value_index, mask)
                + r.cover * conditional(tree, nd.right, row, value_index, mask))
                / (l.cover + r.cover)
        }
    }
}

/// Exact Shapley values of every output by subset enumeration.
fn oracle_shap(model: &ModelArtifact, row: &[f64], d: usize) -> Vec<Vec<f64>> {
    let view = model.tree_view().unwrap();
    (0..view.n_outputs)
        .map(|k| {
            let v = |mask: u32| -> f64 {
                view.base[k]
                    + view
                        .terms
                        .iter()
                        .filter(|t| t.output == k)
                        .map(|t| t.scale * conditional(t.tree, 0, row, t.value_index, mask))
                        .sum::<f64>()
            };
            let fact = |m: usize| (1..=m).product::<usize>() as f64;
            (0..d)
                .map(|i| {
                    (0..1u32 << d)
                        .filter(|s| s & (1 << i) == 0)
                        .map(|s| {
                            let z = s.count_ones() as usize;
                            fact(z) * fact(d - z - 1) / fact(d) * (v(s | 1 << i) - v(s))
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

fn small_ensemble(rng: &mut ChaCha8Rng) -> (ModelArtifact, FeatureMatrix) {
    let d = rng.gen_range(2..=6);
    let n = rng.gen_range(20..60);
    let x = random_matrix(rng, n, d);
    let multiclass = rng.gen_bool(0.3);
    let k = if multiclass { 3 } else { 2 };
    let y: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { rng.gen_range(0..k) })
        .collect();
    let task = if multiclass {
        Task::Multiclass { k }
    } else {
        Task::Binary
    };
    let kind = if rng.gen_bool(0.5) {
        ModelKind::Gbdt
    } else {
        ModelKind::RandomForest
    };
    let mut spec = ModelSpec::new(kind, task);
    spec.seed = rng.gen();
    spec.hyperparams.gbdt.n_rounds = rng.gen_range(1..=4);
    spec.hyperparams.gbdt.max_depth = rng.gen_range(1..=3);
    spec.hyperparams.gbdt.min_samples_leaf = 1;
    spec.hyperparams.random_forest.n_trees = rng.gen_range(1..=4);
    spec.hyperparams.random_forest.max_depth = Some(rng.gen_range(1..=3));
    (train(&spec, &x, &y).unwrap(), x)
}

#[test]
fn c05_tree_shap() {
    criterion(5, "TreeSHAP exactness", Duration::from_secs(120), || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);

        // local accuracy on 1000 rows of a full-size model with a dummy column
        let d = 8;
        let mut x = random_matrix(&mut rng, 1000, d);
        x.push_column("dummy", &vec![1.0; 1000]);
        let y: Vec<usize> = (0..1000)
            .map(|r| usize::from(x.get(r, 0) + x.get(r, 3) * 0.5 + rng.gen_range(-1.0..1.0) > 2.5))
            .collect();
        let mut worst_local = 0.0f64;
        for kind in [ModelKind::Gbdt, ModelKind::RandomForest] {
            let mut spec = ModelSpec::new(kind, Task::Binary);
            spec.hyperparams.random_forest.n_trees = 50;
            let model = train(&spec, &x, &y).map_err(|e| e.to_string())?;
            let attr = tree_shap(&model, &x).map_err(|e| e.to_string())?;
            let view = model.tree_view().unwrap();
            for r in 0..1000 {
                for k in 0..attr.n_outputs() {
                    let err = (attr.reconstructed_margin(r, k) - view.margin(x.row(r), k)).abs();
                    worst_local = worst_local.max(err);
                    ensure(err <= 1e-9, || {
                        format!("{kind} row {r}: local accuracy error {err}")
                    })?;
                    ensure(attr.phi_row(r, k)[d] == 0.0, || {
                        format!("{kind} row {r}: dummy phi nonzero")
                    })?;
                }
            }
        }

        // agreement with subset enumeration on small ensembles
        let mut worst = 0.0f64;
        for t in 0..1000 {
            let (model, x) = small_ensemble(&mut rng);
            let r = rng.gen_range(0..x.n_rows());
            let single = x.select_rows(&[r]);
            let attr = tree_shap(&model, &single).map_err(|e| e.to_string())?;
            let want = oracle_shap(&model, x.row(r), x.n_cols());
            let lib = brute_force_shap(&model, x.row(r), BackgroundPolicy::default())
                .map_err(|e| e.to_string())?;
            for (k, phi) in want.iter().enumerate() {
                for (j, &p) in phi.iter().enumerate() {
                    let got = attr.phi_row(0, k)[j];
                    let err = (got - p).abs().max((lib[k].1[j] - p).abs());
                    worst = worst.max(err);
                    ensure(err <= 1e-9, || {
                        format!("ensemble {t} output {k} feature {j}: {got} vs {p}")
                    })?;
                }
            }
        }
        Ok(format!(
            "local accuracy max err {worst_local:.1e}, 1000 ensembles max err {worst:.1e}, dummy phi 0"
        ))
    });
}

// ---------------------------------------------------------------------------
// 6. Model sanity

fn fd_gradient_error(model: &ldf_das::models::MlpModel, rows: &[Vec<f64>], y: &[usize]) -> f64 {
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let (_, g) = model.loss_and_gradient(&refs, y);
    let mut m = model.clone();
    let h = 1e-6;
    let fd: Vec<f64> = (0..g.len())
        .map(|i| {
            let orig = m.params[i];
            m.params[i] = orig + h;
            let up = m.loss_and_gradient(&refs, y).0;
            m.params[i] = orig - h;
            let down = m.loss_and_gradient(&refs, y).0;
            m.params[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect();
    let diff = g
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / (norm(&g) + norm(&fd))
}

#[test]
fn c06_model_sanity() {
    criterion(6, "model sanity", Duration::from_secs(120), || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);

        // separable toys
        for t in 0..10 {
            let d = rng.gen_range(2..5);
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut rows = Vec::new();
            let mut y = Vec::new();
            while rows.len() < 120 {
                let r: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let s: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
                if s.abs() > 0.1 {
                    y.push(usize::from(s > 0.0));
                    rows.push(r);
                }
            }
            let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let x = FeatureMatrix::from_rows_anonymous(&refs, &rows);
            let model = train(&ModelSpec::new(ModelKind::Gbdt, Task::Binary), &x, &y)
                .map_err(|e| e.to_string())?;
            let pred = model
                .predict(&x)
                .map_err(|e| e.to_string())?
                .predicted_classes();
            let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
            ensure(acc == 1.0, || format!("toy {t}: training accuracy {acc}"))?;
        }

        // staged training loss never increases
        for t in 0..50 {
            let n = rng.gen_range(20..80);
            let d = rng.gen_range(1..6);
            let x = random_matrix(&mut rng, n, d);
            let k = if t % 3 == 0 { 3 } else { 2 };
            let y: Vec<usize> = (0..n)
                .map(|i| if i < k { i } else { rng.gen_range(0..k) })
                .collect();
            let task = if k == 2 {
                Task::Binary
            } else {
                Task::Multiclass { k }
            };
            let mut spec = ModelSpec::new(ModelKind::Gbdt, task);
            spec.hyperparams.gbdt = GbdtParams {
                n_rounds: 50,
                ..GbdtParams::default()
            };
            let model = train(&spec, &x, &y).map_err(|e| e.to_string())?;
            let ModelBody::Gbdt(g) = &model.body else {
                unreachable!()
            };
            let losses = g.staged_log_loss(&x, &y);
            for (i, w) in losses.windows(2).enumerate() {
                ensure(w[1] <= w[0] + 1e-12, || {
                    format!(
                        "dataset {t}: loss rose at round {}: {} -> {}",
                        i + 1,
                        w[0],
                        w[1]
                    )
                })?;
            }
        }

        // MLP gradients
        let mut worst_grad = 0.0f64;
        for t in 0..10 {
            let k = 2 + t % 3;
            let params = ldf_das::models::MlpParams {
                hidden: vec![6, 4],
                ..Default::default()
            };
            let model = ldf_das::models::MlpModel::init(4, k, &params, t as u64);
            let rows: Vec<Vec<f64>> = (0..8)
                .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let y: Vec<usize> = (0..8).map(|i| i % k).collect();
            let err = fd_gradient_error(&model, &rows, &y);
            worst_grad = worst_grad.max(err);
            ensure(err < 1e-4, || format!("MLP gradient relative error {err}"))?;
        }

        // monotone affine feature transforms leave tree predictions unchanged
        for t in 0..10 {
            let n = 60;
            // continuous values: no row sits exactly on a bootstrap midpoint
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect())
                .collect();
            let x = FeatureMatrix::from_rows_anonymous(&["a", "b", "c", "d"], &rows);
            let y: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let mut xt = x.clone();
            for c in 0..4 {
                let (a, b) = (rng.gen_range(0.5..5.0), rng.gen_range(-10.0..10.0));
                xt.map_column(c, |v| a * v + b);
            }
            for kind in [ModelKind::Gbdt, ModelKind::RandomForest] {
                let mut spec = ModelSpec::new(kind, Task::Binary);
                spec.seed = 11;
                let p0 = train(&spec, &x, &y).unwrap().predict(&x).unwrap();
                let p1 = train(&spec, &xt, &y).unwrap().predict(&xt).unwrap();
                ensure(p0.predicted_classes() == p1.predicted_classes(), || {
                    format!("{kind} toy {t}: labels changed")
                })?;
                let drift = p0
                    .values
                    .iter()
                    .zip(&p1.values)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                ensure(drift <= 1e-12, || {
                    format!("{kind} toy {t}: probabilities moved by {drift}")
                })?;
            }
        }

        // seed determinism
        let x = random_matrix(&mut rng, 80, 5);
        let y: Vec<usize> = (0..80).map(|i| i % 2).collect();
        for kind in [
            ModelKind::Gbdt,
            ModelKind::RandomForest,
            ModelKind::LinearSvm,
            ModelKind::Mlp,
        ] {
            let mut spec = ModelSpec::new(kind, Task::Binary);
            spec.seed = derive_seed(6, 1);
            let a = train(&spec, &x, &y).unwrap();
            let b = train(&spec, &x, &y).unwrap();
            ensure(a.serialize() == b.serialize(), || {
                format!("{kind}: artifacts differ")
            })?;
            let pa = a.predict(&x).unwrap().values;
            let pb = b.predict(&x).unwrap().values;
            ensure(
                pa.iter().zip(&pb).all(|(u, v)| u.to_bits() == v.to_bits()),
                || format!("{kind}: predictions differ"),
            )?;
        }
        Ok(format!("10 separable toys, 50 loss curves, MLP grad err {worst_grad:.1e}, affine invariance, byte-exact seeds"))
    });
}

// ---------------------------------------------------------------------------
// 7. Mann-Whitney

/// Two-sided exact p of a tie-free arrangement by listing every assignment of
/// ranks to the first sample.
fn enumerated_p(n_a: usize, n_b: usize, u_obs: f64) -> f64 {
    let n = n_a + n_b;
    let mut us = Vec::new();
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize != n_a {
            continue;
        }
        let rank_sum: usize = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).sum();
        us.push(rank_sum as f64 - (n_a * (n_a + 1)) as f64 / 2.0);
    }
    let total = us.len() as f64;
    let lo = us.iter().filter(|&&u| u <= u_obs).count() as f64 / total;
    let hi = us.iter().filter(|&&u| u >= u_obs).count() as f64 / total;
    (2.0 * lo.min(hi)).min(1.0)
}

#[test]
fn c07_mann_whitney() {
    criterion(
        7,
        "Mann-Whitney exact p and U identity",
        Duration::from_secs(20),
        || {
            let mut cases = 0;
            for n in 2..=10usize {
                for n_a in 1..n {
                    let n_b = n - n_a;
                    for mask in 0u32..1 << n {
                        if mask.count_ones() as usize != n_a {
                            continue;
                        }
                        let a: Vec<f64> = (0..n)
                            .filter(|i| mask & (1 << i) != 0)
                            .map(|i| i as f64)
                            .collect();
                        let b: Vec<f64> = (0..n)
                            .filter(|i| mask & (1 << i) == 0)
                            .map(|i| i as f64)
                            .collect();
                        let mw = mann_whitney_u_with(&a, &b, Some(PValueMethod::Exact))
                            .map_err(|e| e.to_string())?;
                        ensure(mw.method == PValueMethod::Exact, || {
                            "exact method not used".into()
                        })?;
                        let want = enumerated_p(n_a, n_b, mw.u_a);
                        ensure((mw.p_value - want).abs() <= 1e-12, || {
                            format!("a={a:?} b={b:?}: p {} vs {want}", mw.p_value)
                        })?;
                        cases += 1;
                    }
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for t in 0..1000 {
                let (n_a, n_b) = (rng.gen_range(1..40), rng.gen_range(1..40));
                let mut draw = |m: usize| -> Vec<f64> {
                    (0..m).map(|_| rng.gen_range(0..15) as f64).collect()
                };
                let (a, b) = (draw(n_a), draw(n_b));
                let mw = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
                let want = (n_a * n_b) as f64;
                ensure((mw.u_a + mw.u_b - want).abs() <= 1e-9, || {
                    format!("input {t}: U1+U2 = {}", mw.u_a + mw.u_b)
                })?;
            }
            Ok(format!("{cases} tie-free arrangements, 1000 U identities"))
        },
    );
}

// ---------------------------------------------------------------------------
// 8. End-to-end synthetic pipeline through the command line

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ldf-das"))
        .args(args)
        .env_remove("LDF_DAS_OUTPUT_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "ldf-das {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn c08_end_to_end_synthetic() {
    criterion(
        8,
        "synthetic synth -> wavelet -> train -> explain -> report",
        Duration::from_secs(300),
        || {
            let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
            let dir = tmp.path();
            let cohort = dir.join("cohort");
            let table = dir.join("table.csv");
            let out = dir.join("out");
            let explained = dir.join("explain");
            cli(&[
                "synth",
                "--out",
                p(&cohort),
                "--patients",
                "60",
                "--seed",
                "8",
            ])?;
            cli(&[
                "wavelet",
                p(&cohort.join("signals")),
                "--out",
                p(&dir.join("wavelet.json")),
                "--merge",
                p(&cohort.join("participants.csv")),
                "--merged-out",
                p(&table),
            ])?;
            cli(&[
                "--output-dir",
                p(&out),
                "train",
                "--data",
                p(&table),
                "--model",
                "gbdt",
                "--split",
                "kfold",
                "--k",
                "5",
                "--seeds",
                "10",
                "--task",
                "binary",
            ])?;
            let cell = out.join("all__kfold__binary__gbdt");
            let report: serde_json::Value = serde_json::from_str(
                &std::fs::read_to_string(cell.join("report.json")).map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?;
            let folds = report["folds"].as_array().map_or(0, Vec::len);
            ensure(folds == 50, || format!("{folds} fold evaluations"))?;
            let roc = report["aggregate"]["roc_auc"]["mean"]
                .as_f64()
                .ok_or("no ROC AUC")?;
            cli(&[
                "--output-dir",
                p(&explained),
                "explain",
                "--model",
                p(&cell.join("model.json")),
                "--data",
                p(&table),
            ])?;
            let ranking = std::fs::read_to_string(explained.join("shap_ranking.csv"))
                .map_err(|e| e.to_string())?;
            let top = ranking
                .lines()
                .nth(1)
                .and_then(|l| l.split(',').nth(1))
                .unwrap_or("")
                .to_string();
            let summary = cli(&["--output-dir", p(&out), "report"])?;
            ensure(summary.contains("| all | kfold | binary | gbdt |"), || {
                "summary row missing".into()
            })?;
            ensure(roc >= 0.85, || format!("mean ROC AUC {roc:.4} < 0.85"))?;
            ensure(top == "am", || {
                format!("top SHAP feature {top}, planted am")
            })?;
            Ok(format!(
                "mean ROC AUC {roc:.4} over {folds} folds, top SHAP feature {top}"
            ))
        },
    );
}

// ---------------------------------------------------------------------------
// 9-11. Published dataset (set LDF_DAS_DATASET, optionally LDF_DAS_SIGNALS)

fn dataset() -> Option<(PathBuf, Option<PathBuf>)> {
    let data = std::env::var_os("LDF_DAS_DATASET")?;
    Some((
        data.into(),
        std::env::var_os("LDF_DAS_SIGNALS").map(PathBuf::from),
    ))
}

fn dataset_config(out: &Path) -> Option<ldf_das::pipeline::RunConfig> {
    let (data, signals) = dataset()?;
    let mut cfg = ldf_das::pipeline::RunConfig::default();
    cfg.paths.data = Some(data);
    cfg.paths.signals = signals;
    cfg.paths.output_dir = out.to_path_buf();
    Some(cfg)
}

fn skip(id: u32, name: &str) {
    report_line(format!(
        "SKIP criterion {id}: {name} (LDF_DAS_DATASET not set)"
    ));
}

#[test]
#[ignore = "needs the published dataset"]
fn c09_prevalence() {
    let tmp = tempfile::tempdir().unwrap();
    let Some(cfg) = dataset_config(tmp.path()) else {
        return skip(9, "participant prevalence");
    };
    criterion(9, "participant prevalence", Duration::from_secs(60), || {
        let stats = ldf_das::pipeline::stats(&cfg, &[]).map_err(|e| e.to_string())?;
        let pr = &stats.prevalence;
        let want = [
            (Subscale::Stress, 0.245),
            (Subscale::Anxiety, 0.22),
            (Subscale::Depression, 0.182),
        ];
        let mut got = BTreeMap::new();
        for (sub, w) in want {
            let f = pr.condition(sub).fraction;
            got.insert(sub.name(), f);
            ensure((f - w).abs() <= 0.01, || {
                format!("{} {:.3} vs {w}", sub.name(), f)
            })?;
        }
        Ok(format!("{got:?} over {} participants", pr.n_participants))
    });
}

#[test]
#[ignore = "needs the published dataset"]
fn c10_group_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    let Some(cfg) = dataset_config(tmp.path()) else {
        return skip(10, "wellbeing Mann-Whitney on M");
    };
    criterion(
        10,
        "wellbeing Mann-Whitney on M",
        Duration::from_secs(60),
        || {
            let stats =
                ldf_das::pipeline::stats(&cfg, &["m".to_string()]).map_err(|e| e.to_string())?;
            let c = stats.comparisons.first().ok_or("no comparison for m")?;
            let (a, b) = (c.group_a.mean, c.group_b.mean);
            ensure(c.p_value < 0.05, || format!("p {:.4}", c.p_value))?;
            ensure((a - 21.02).abs() <= 0.5 && (b - 26.49).abs() <= 0.5, || {
                format!("means {a:.2} / {b:.2}")
            })?;
            Ok(format!("p {:.4}, means {a:.2} / {b:.2}", c.p_value))
        },
    );
}

#[test]
#[ignore = "needs the published dataset"]
fn c11_model_quality_band() {
    let tmp = tempfile::tempdir().unwrap();
    let Some(mut cfg) = dataset_config(tmp.path()) else {
        return skip(11, "GBDT top-10 k-fold quality band");
    };
    criterion(
        11,
        "GBDT top-10 k-fold quality band",
        Duration::from_secs(600),
        || {
            cfg.feature_sets = vec![ldf_das::dataset::FeatureSetName::Top10];
            cfg.models = vec![ModelKind::Gbdt];
            cfg.split.k = 5;
            cfg.split.seeds = (0..10).collect();
            let outcome = ldf_das::pipeline::train_grid(&cfg, false).map_err(|e| e.to_string())?;
            let report = &outcome.cells[0].report;
            let roc = report
                .headline("roc_auc")
                .and_then(|s| s.mean)
                .ok_or("no ROC AUC")?;
            let pr = report
                .headline("pr_auc")
                .and_then(|s| s.mean)
                .ok_or("no PR AUC")?;
            ensure((0.62..=0.80).contains(&roc), || format!("ROC AUC {roc:.4}"))?;
            ensure((0.82..=0.93).contains(&pr), || format!("PR AUC {pr:.4}"))?;
            Ok(format!("ROC AUC {roc:.4}, PR AUC {pr:.4}"))
        },
    );
}
