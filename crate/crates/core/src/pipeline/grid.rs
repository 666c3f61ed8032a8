//! The training/evaluation grid: every (feature set, split, task, model) cell
//! is run over all configured seeds and summarized in a [`RunReport`].

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{RunConfig, TaskName};
use super::data::{task_labels, PreparedData};
use super::report::{
    aggregate, render_markdown, write_summary_csv, CellSpec, CellStatus, RunReport,
};
use super::{io_err, PipelineError};
use crate::dataset::{assemble_feature_matrix, FeatureMatrix, ImputePolicy, Imputer};
use crate::explain::{shap_summary, tree_shap, write_ranking_csv, write_shap_csv, ShapAttribution};
use crate::metrics::{
    evaluate, pr_curve, roc_curve, write_pr_points, write_roc_points, MetricReport,
};
use crate::models::{derive_seed, train, ModelArtifact, ModelSpec, Task, FORMAT_VERSION};
use crate::splits::{
    kfold_patientwise, lopo, split_8020, split_8020_patientwise, SplitPlan, SplitScheme,
};

/// Number of multiclass labels.
pub const MULTICLASS_K: usize = 4;

pub fn task_of(name: TaskName) -> Task {
    match name {
        TaskName::Binary => Task::Binary,
        TaskName::Multiclass => Task::Multiclass { k: MULTICLASS_K },
    }
}

/// Grid cells in config order: feature set, split, task, model.
pub fn cells(cfg: &RunConfig) -> Vec<CellSpec> {
    let mut out = Vec::new();
    for &feature_set in &cfg.feature_sets {
        for &split in &cfg.split.schemes {
            for &task in &cfg.tasks {
                for &model in &cfg.models {
                    out.push(CellSpec {
                        feature_set,
                        split,
                        task,
                        model,
                    });
                }
            }
        }
    }
    out
}

/// Out-of-fold class probabilities of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct OutOfFold {
    pub seed: u64,
    pub n_classes: usize,
    pub probs: Vec<f64>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub report: RunReport,
    /// Refitted on every labelled row.
    pub model: Option<ModelArtifact>,
    pub out_of_fold: Vec<OutOfFold>,
    pub shap: Option<ShapAttribution>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub cells: Vec<CellOutput>,
}

impl GridOutcome {
    pub fn reports(&self) -> Vec<RunReport> {
        self.cells.iter().map(|c| c.report.clone()).collect()
    }

    pub fn n_failed(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c.report.status, CellStatus::Failed { .. }))
            .count()
    }
}

/// FNV-1a; stable across platforms and toolchains.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn run_id(config: &serde_json::Value, cell: &CellSpec) -> String {
    let text = format!("{config}|{}", cell.id());
    format!("{}-{:016x}", cell.id(), fnv1a(text.as_bytes()))
}

fn plans(
    cfg: &RunConfig,
    scheme: SplitScheme,
    patient_ids: &[String],
) -> Result<Vec<SplitPlan>, PipelineError> {
    let err = |e: crate::splits::SplitError| PipelineError::data("split", e);
    cfg.split
        .seeds
        .iter()
        .map(|&s| {
            let seed = derive_seed(cfg.seed, s);
            match scheme {
                SplitScheme::Split8020 if cfg.split.patient_wise_8020 => {
                    split_8020_patientwise(patient_ids, seed)
                }
                SplitScheme::Split8020 => split_8020(patient_ids.len(), seed),
                SplitScheme::KfoldPatient => kfold_patientwise(patient_ids, cfg.split.k, seed),
                SplitScheme::Lopo => lopo(patient_ids),
            }
            .map_err(err)
        })
        .collect()
}

/// Imputes with medians of `train` rows, fits, and predicts `test` rows.
fn fit_fold(
    x: &FeatureMatrix,
    y: &[usize],
    train_rows: &[usize],
    test_rows: &[usize],
    spec: &ModelSpec,
) -> Result<(ModelArtifact, Vec<f64>), PipelineError> {
    let imputer = Imputer::fit(x, train_rows);
    let mut xtr = x.select_rows(train_rows);
    imputer.transform(&mut xtr);
    let ytr: Vec<usize> = train_rows.iter().map(|&r| y[r]).collect();
    let mut model = train(spec, &xtr, &ytr).map_err(|e| PipelineError::data("train", e))?;
    model.imputer = Some(imputer);
    let probs = model
        .predict(&x.select_rows(test_rows))
        .map_err(|e| PipelineError::data("predict", e))?
        .values;
    Ok((model, probs))
}

struct CellData {
    x: FeatureMatrix,
    y: Vec<usize>,
    warnings: Vec<String>,
}

fn cell_data(
    cfg: &RunConfig,
    data: &PreparedData,
    cell: &CellSpec,
) -> Result<CellData, PipelineError> {
    let table = &data.table;
    let x = assemble_feature_matrix(
        &table.records,
        &table.extra_columns,
        cell.feature_set,
        ImputePolicy::Deferred,
        &data.schema,
    )
    .map_err(|e| PipelineError::data("features", e))?;
    let labels = task_labels(&table.records, cell.task, cfg.multiclass_policy);
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    let mut warnings = data.warnings.clone();
    let dropped = labels.len() - keep.len();
    if dropped > 0 {
        warnings.push(format!(
            "{dropped} rows without a {} label excluded from training",
            cell.task.as_str()
        ));
    }
    if keep.is_empty() {
        return Err(PipelineError::data("labels", "no labelled rows"));
    }
    Ok(CellData {
        x: x.select_rows(&keep),
        y: keep.iter().map(|&i| labels[i].unwrap()).collect(),
        warnings,
    })
}

struct FoldResult {
    report: MetricReport,
    test: Vec<usize>,
    probs: Vec<f64>,
}

fn run_cell_inner(
    cfg: &RunConfig,
    cell: &CellSpec,
    d: &CellData,
    report: &mut RunReport,
) -> Result<
    (
        Option<ModelArtifact>,
        Vec<OutOfFold>,
        Option<ShapAttribution>,
    ),
    PipelineError,
> {
    let task = task_of(cell.task);
    let k = task.n_classes();
    let mut spec = ModelSpec::new(cell.model, task);
    spec.hyperparams = cfg.hyperparams.clone();
    let pids = d.x.patient_ids().to_vec();
    let plans = plans(cfg, cell.split, &pids)?;

    let jobs: Vec<(usize, usize)> = plans
        .iter()
        .enumerate()
        .flat_map(|(p, plan)| (0..plan.folds.len()).map(move |f| (p, f)))
        .collect();
    let results: Vec<Result<FoldResult, PipelineError>> = jobs
        .par_iter()
        .map(|&(p, f)| {
            let fold = &plans[p].folds[f];
            let mut spec = spec.clone();
            spec.seed = derive_seed(plans[p].seed, f as u64);
            let (_, probs) = fit_fold(&d.x, &d.y, &fold.train, &fold.test, &spec)
                .map_err(|e| e.context(format!("seed {} fold {f}", cfg.split.seeds[p])))?;
            let labels: Vec<usize> = fold.test.iter().map(|&r| d.y[r]).collect();
            let mut m = evaluate(&probs, &labels, k);
            m.fold_id = Some(f);
            m.seed = Some(cfg.split.seeds[p]);
            Ok(FoldResult {
                report: m,
                test: fold.test.clone(),
                probs,
            })
        })
        .collect();
    let results: Vec<FoldResult> = results.into_iter().collect::<Result<_, _>>()?;

    let mut out_of_fold = Vec::new();
    let mut at = 0;
    for (p, plan) in plans.iter().enumerate() {
        let seed = cfg.split.seeds[p];
        let mut probs = Vec::new();
        let mut labels = Vec::new();
        for r in &results[at..at + plan.folds.len()] {
            probs.extend_from_slice(&r.probs);
            labels.extend(r.test.iter().map(|&i| d.y[i]));
        }
        at += plan.folds.len();
        let mut pooled = evaluate(&probs, &labels, k);
        pooled.seed = Some(seed);
        report.pooled.push(pooled);
        out_of_fold.push(OutOfFold {
            seed,
            n_classes: k,
            probs,
            labels,
        });
    }
    report.folds = results.into_iter().map(|r| r.report).collect();
    report.aggregate = aggregate(&report.folds);
    report.pooled_aggregate = aggregate(&report.pooled);

    let all: Vec<usize> = (0..d.y.len()).collect();
    spec.seed = derive_seed(cfg.seed, cfg.split.seeds[0]);
    let (model, _) =
        fit_fold(&d.x, &d.y, &all, &[], &spec).map_err(|e| e.context("final model".into()))?;
    let mut shap = None;
    if cell.model.is_tree() {
        report.feature_importance = model.feature_importance().ok();
        let attr = tree_shap(&model, &d.x).map_err(|e| PipelineError::data("explain", e))?;
        report.shap_ranking = Some(shap_summary(&attr, Some(&d.y)).ranking);
        shap = Some(attr);
    }
    Ok((Some(model), out_of_fold, shap))
}

pub fn run_cell(cfg: &RunConfig, data: &PreparedData, cell: CellSpec) -> CellOutput {
    let start = Instant::now();
    let config = cfg.to_json_value();
    let mut report = RunReport {
        run_id: run_id(&config, &cell),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        model_format_version: FORMAT_VERSION,
        config,
        cell,
        status: CellStatus::Ok,
        n_rows: 0,
        n_patients: 0,
        class_counts: Vec::new(),
        feature_names: Vec::new(),
        folds: Vec::new(),
        pooled: Vec::new(),
        aggregate: aggregate(&[]),
        pooled_aggregate: aggregate(&[]),
        feature_importance: None,
        shap_ranking: None,
        warnings: Vec::new(),
    };
    let outcome = cell_data(cfg, data, &cell).and_then(|d| {
        report.n_rows = d.y.len();
        report.n_patients = d.x.patient_ids().iter().collect::<BTreeSet<_>>().len();
        report.class_counts = (0..task_of(cell.task).n_classes())
            .map(|c| d.y.iter().filter(|&&v| v == c).count())
            .collect();
        report.feature_names = d.x.names();
        report.warnings = d.warnings.clone();
        run_cell_inner(cfg, &cell, &d, &mut report)
    });
    let (model, out_of_fold, shap) = match outcome {
        Ok(v) => v,
        Err(e) => {
            report.status = CellStatus::Failed {
                error: e.to_string(),
            };
            report.folds.clear();
            report.pooled.clear();
            report.aggregate = aggregate(&[]);
            report.pooled_aggregate = aggregate(&[]);
            (None, Vec::new(), None)
        }
    };
    CellOutput {
        report,
        model,
        out_of_fold,
        shap,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs every cell in parallel; results keep config order.
pub fn run_grid(cfg: &RunConfig, data: &PreparedData) -> GridOutcome {
    let cells = cells(cfg)
        .into_par_iter()
        .map(|cell| run_cell(cfg, data, cell))
        .collect();
    GridOutcome { cells }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, PipelineError> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| io_err(path, e))
}

/// ROC and PR point files for pooled predictions: class 1 for binary tasks,
/// one-vs-rest per class otherwise.
pub fn write_curves(
    dir: &Path,
    probs: &[f64],
    labels: &[usize],
    k: usize,
) -> Result<(), PipelineError> {
    let classes: Vec<usize> = if k == 2 { vec![1] } else { (0..k).collect() };
    for c in classes {
        let scores: Vec<f64> = (0..labels.len()).map(|r| probs[r * k + c]).collect();
        let truth: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        let suffix = if k == 2 {
            String::new()
        } else {
            format!("_class{c}")
        };
        let (Ok(roc), Ok(pr)) = (roc_curve(&scores, &truth), pr_curve(&scores, &truth)) else {
            continue;
        };
        let csv_err = |e: csv::Error| PipelineError::Io(e.to_string());
        write_roc_points(&roc, create(&dir.join(format!("roc_points{suffix}.csv")))?)
            .map_err(csv_err)?;
        write_pr_points(&pr, create(&dir.join(format!("pr_points{suffix}.csv")))?)
            .map_err(csv_err)?;
    }
    Ok(())
}

/// Writes `<cell>/report.json`, `<cell>/model.json`, the summary tables and
/// `timings.json` (kept apart from reports so they stay reproducible).
pub fn write_outcome(
    outcome: &GridOutcome,
    dir: &Path,
    emit_plots: bool,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut timings = serde_json::Map::new();
    for c in &outcome.cells {
        let cell_dir = dir.join(c.report.cell.id());
        std::fs::create_dir_all(&cell_dir).map_err(|e| io_err(&cell_dir, e))?;
        write_file(&cell_dir.join("report.json"), c.report.to_json().as_bytes())?;
        if let Some(m) = &c.model {
            write_file(&cell_dir.join("model.json"), &m.serialize())?;
        }
        if emit_plots {
            if let Some(oof) = c.out_of_fold.first() {
                write_curves(&cell_dir, &oof.probs, &oof.labels, oof.n_classes)?;
            }
            if let Some(attr) = &c.shap {
                let csv_err = |e: csv::Error| PipelineError::Io(e.to_string());
                write_shap_csv(attr, create(&cell_dir.join("shap.csv"))?).map_err(csv_err)?;
                write_ranking_csv(
                    &shap_summary(attr, None),
                    create(&cell_dir.join("shap_ranking.csv"))?,
                )
                .map_err(csv_err)?;
            }
        }
        timings.insert(c.report.cell.id(), serde_json::json!(c.seconds));
    }
    let reports = outcome.reports();
    write_file(
        &dir.join("summary.md"),
        render_markdown(&reports).as_bytes(),
    )?;
    write_summary_csv(&reports, create(&dir.join("summary.csv"))?)
        .map_err(|e| PipelineError::Io(e.to_string()))?;
    let timings = serde_json::to_string_pretty(&serde_json::Value::Object(timings)).expect("json");
    write_file(&dir.join("timings.json"), timings.as_bytes())
}

/// Reads every `*/report.json` below `dir`, sorted by cell directory name.
pub fn read_reports(dir: &Path) -> Result<Vec<RunReport>, PipelineError> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path().join("report.json")))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str(&text)
                .map_err(|e| PipelineError::data(&p.display().to_string(), e))
        })
        .collect()
}
