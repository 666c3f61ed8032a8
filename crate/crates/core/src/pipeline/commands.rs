//! One function per command-line subcommand. Each reads and writes files and
//! returns a small summary for the caller to print.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, TaskName, WaveletConfig};
use super::data::{
    extract_signal_files, load_schema, merge_signal_features, prepare, signal_files,
    signal_warnings, task_labels, PreparedData,
};
use super::grid::{read_reports, run_grid, write_curves, write_outcome, GridOutcome};
use super::report::{render_markdown, write_summary_csv};
use super::{io_err, PipelineError};
use crate::das21::{derive_labels, score_items, MulticlassPolicy, LABEL_HEADER, N_ITEMS};
use crate::dataset::{
    assemble_feature_matrix, load_participants, write_participants, ColumnKind, Encoding,
    FeatureMatrix, FeatureSetName, ImputePolicy,
};
use crate::explain::{shap_summary, tree_shap, write_ranking_csv, write_shap_csv, ShapSummary};
use crate::metrics::{evaluate, MetricReport};
use crate::models::{ModelArtifact, Task};
use crate::stats::{
    prevalence_report, wellbeing_comparisons, write_stats_csv, GroupComparison, PrevalenceReport,
};
use crate::wavelet::{cwt_morlet, write_scalogram, SynthSpec};

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| io_err(path, e))
}

fn csv_err(e: csv::Error) -> PipelineError {
    PipelineError::Io(e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("json");
    text.push('\n');
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub rows: usize,
    pub patients: usize,
    pub extra_columns: Vec<String>,
    pub rejected: Vec<(usize, String)>,
    pub missing_das21: usize,
}

/// Validates a participant table and optionally rewrites it with canonical headers.
pub fn ingest(
    data: &Path,
    schema: Option<&Path>,
    out: Option<&Path>,
) -> Result<IngestSummary, PipelineError> {
    let schema = load_schema(schema)?;
    let table = load_participants(data, &schema)
        .map_err(|e| PipelineError::data(&data.display().to_string(), e))?;
    if let Some(out) = out {
        write_participants(&table.records, &table.extra_columns, create(out)?)
            .map_err(|e| PipelineError::data("write", e))?;
    }
    let mut pids: Vec<&str> = table
        .records
        .iter()
        .map(|r| r.participant.patient_id.as_str())
        .collect();
    pids.sort_unstable();
    pids.dedup();
    Ok(IngestSummary {
        rows: table.records.len(),
        patients: pids.len(),
        extra_columns: table.extra_columns.clone(),
        rejected: table.rejected.clone(),
        missing_das21: table.missing_das21,
    })
}

/// Input files, with directories expanded to their `*.csv` files.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            files.extend(signal_files(p)?);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

#[derive(Debug, Clone, Default)]
pub struct WaveletJob {
    pub inputs: Vec<PathBuf>,
    pub config: WaveletConfig,
    /// `.json` gives an array of objects, anything else a CSV table.
    pub out: PathBuf,
    /// `(participant table, output table)`: write the table with M, σ, Kv and
    /// band columns replaced by the computed values.
    pub merge: Option<(PathBuf, PathBuf)>,
    pub schema: Option<PathBuf>,
    /// Dense `frequency × time` modulus dumps, one per signal.
    pub scalogram_dir: Option<PathBuf>,
    pub scalogram_stride: usize,
}

/// Feature keys in output column order.
const WAVELET_KEYS: [&str; 13] = [
    "Ae", "An", "Am", "Ar", "Ac", "Fe", "Fn", "Fm", "Fr", "Fc", "M", "sigma", "Kv100",
];

/// Returns the number of signals processed and any warnings.
pub fn wavelet(job: &WaveletJob) -> Result<(usize, Vec<String>), PipelineError> {
    let files = expand_inputs(&job.inputs)?;
    if files.is_empty() {
        return Err(PipelineError::data("wavelet", "no signal files"));
    }
    let features = extract_signal_files(&files, &job.config)?;
    if job.out.extension().is_some_and(|e| e == "json") {
        let rows: Vec<BTreeMap<String, serde_json::Value>> = features
            .iter()
            .map(|f| {
                let mut m: BTreeMap<String, serde_json::Value> = f
                    .features
                    .to_map()
                    .into_iter()
                    .map(|(k, v)| (k, serde_json::json!(v)))
                    .collect();
                m.insert("signal".into(), serde_json::json!(f.key));
                m
            })
            .collect();
        write_json(&job.out, &rows)?;
    } else {
        let mut w = csv::Writer::from_writer(create(&job.out)?);
        let mut header = vec!["signal"];
        header.extend(WAVELET_KEYS);
        w.write_record(&header).map_err(csv_err)?;
        for f in &features {
            let map = f.features.to_map();
            let mut row = vec![f.key.clone()];
            row.extend(WAVELET_KEYS.iter().map(|k| map[*k].to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| io_err(&job.out, e))?;
    }
    if let Some((data, out)) = &job.merge {
        let schema = load_schema(job.schema.as_deref())?;
        let mut table =
            load_participants(data, &schema).map_err(|e| PipelineError::data("participants", e))?;
        merge_signal_features(&mut table.records, &features);
        write_participants(&table.records, &table.extra_columns, create(out)?)
            .map_err(|e| PipelineError::data("write", e))?;
    }
    if let Some(dir) = &job.scalogram_dir {
        for path in &files {
            let signal = crate::dataset::load_raw_signal(path)
                .map_err(|e| PipelineError::data("signal", e))?;
            let s = cwt_morlet(&signal, &job.config.morlet)
                .map_err(|e| PipelineError::data("wavelet", e))?;
            let name = path
                .file_name()
                .map(|n| n.to_os_string())
                .unwrap_or_default();
            write_scalogram(&s, job.scalogram_stride.max(1), create(&dir.join(name))?)
                .map_err(csv_err)?;
        }
    }
    Ok((features.len(), signal_warnings(&features, &job.config)))
}

/// Writes one synthetic signal as `t_s,perfusion_pu`.
pub fn synth_signal(spec: &SynthSpec, out: &Path) -> Result<usize, PipelineError> {
    let signal =
        crate::wavelet::synthesize_signal(spec).map_err(|e| PipelineError::data("synth", e))?;
    crate::dataset::write_raw_signal(&signal, create(out)?)
        .map_err(|e| PipelineError::data("write", e))?;
    Ok(signal.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LabelCounts {
    pub rows: usize,
    pub abnormal: usize,
    /// Rows with no multiclass label under the policy.
    pub unlabelled_multiclass: usize,
}

/// Scores a `patient_id,q1..q21` response file into the label table.
pub fn score_das21(
    input: &Path,
    policy: MulticlassPolicy,
    out: &Path,
) -> Result<LabelCounts, PipelineError> {
    let ctx = input.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(input)
        .map_err(|e| PipelineError::data(&ctx, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| PipelineError::data(&ctx, e))?
        .iter()
        .map(|h| h.to_lowercase())
        .collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PipelineError::data(&ctx, format!("missing column '{name}'")))
    };
    let pid_col = find("patient_id")?;
    let item_cols: Vec<usize> = (1..=N_ITEMS)
        .map(|i| find(&format!("q{i}")))
        .collect::<Result<_, _>>()?;
    let mut w = csv::Writer::from_writer(create(out)?);
    w.write_record(LABEL_HEADER).map_err(csv_err)?;
    let mut counts = LabelCounts::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| PipelineError::data(&ctx, e))?;
        let items: Vec<i64> = item_cols
            .iter()
            .map(|&c| {
                rec.get(c).unwrap_or("").parse::<i64>().map_err(|_| {
                    PipelineError::data(&ctx, format!("row {}: item is not an integer", i + 1))
                })
            })
            .collect::<Result<_, _>>()?;
        let scores = score_items(&items)
            .map_err(|e| PipelineError::data(&ctx, format!("row {}: {e}", i + 1)))?;
        let label = derive_labels(&scores, policy);
        counts.rows += 1;
        counts.abnormal += label.binary.as_index();
        counts.unlabelled_multiclass += usize::from(label.multiclass.is_none());
        w.write_record(crate::das21::label_row(
            rec.get(pid_col).unwrap_or(""),
            &scores,
            &label,
        ))
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(out, e))?;
    Ok(counts)
}

/// Loads data, runs the grid and writes all outputs to `cfg.paths.output_dir`.
/// Failed cells are marked in their reports; the caller decides whether
/// that is an error.
pub fn train_grid(cfg: &RunConfig, emit_plots: bool) -> Result<GridOutcome, PipelineError> {
    cfg.validate()?;
    let data = prepare(cfg)?;
    let outcome = run_grid(cfg, &data);
    write_outcome(&outcome, &cfg.paths.output_dir, emit_plots)?;
    Ok(outcome)
}

/// The model's feature columns built from prepared data, encoded with the
/// model's stored category maps.
pub fn model_matrix(
    model: &ModelArtifact,
    data: &PreparedData,
) -> Result<FeatureMatrix, PipelineError> {
    let mut schema = data.schema.clone();
    for meta in &model.encoders {
        match meta.kind {
            ColumnKind::Ordinal => {
                schema
                    .encoders
                    .insert(meta.source.clone(), meta.categories.clone());
            }
            ColumnKind::Onehot => {
                schema.encoding = Encoding::Onehot;
                schema
                    .encoders
                    .entry(meta.source.clone())
                    .or_default()
                    .extend(meta.categories.iter().cloned());
            }
            ColumnKind::Numeric => {}
        }
    }
    let table = &data.table;
    let x = assemble_feature_matrix(
        &table.records,
        &table.extra_columns,
        FeatureSetName::All,
        ImputePolicy::Deferred,
        &schema,
    )
    .map_err(|e| PipelineError::data("features", e))?;
    x.select_columns(&model.feature_names).map_err(|missing| {
        PipelineError::data("features", format!("model column '{missing}' not in data"))
    })
}

fn task_name(task: Task) -> TaskName {
    match task {
        Task::Binary => TaskName::Binary,
        Task::Multiclass { .. } => TaskName::Multiclass,
    }
}

fn load_model(path: &Path) -> Result<ModelArtifact, PipelineError> {
    ModelArtifact::load(path).map_err(|e| PipelineError::data(&path.display().to_string(), e))
}

/// Labelled rows of the model's matrix.
fn labelled(
    model: &ModelArtifact,
    cfg: &RunConfig,
) -> Result<(FeatureMatrix, Vec<usize>), PipelineError> {
    let data = prepare(cfg)?;
    let x = model_matrix(model, &data)?;
    let labels = task_labels(
        &data.table.records,
        task_name(model.task),
        cfg.multiclass_policy,
    );
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    if keep.is_empty() {
        return Err(PipelineError::data("labels", "no labelled rows"));
    }
    Ok((
        x.select_rows(&keep),
        keep.iter().map(|&i| labels[i].unwrap()).collect(),
    ))
}

/// Scores a saved model on the configured data; writes `metrics.json` and,
/// with `emit_plots`, the ROC/PR point files.
pub fn evaluate_model(
    model_path: &Path,
    cfg: &RunConfig,
    emit_plots: bool,
) -> Result<MetricReport, PipelineError> {
    let model = load_model(model_path)?;
    let (x, y) = labelled(&model, cfg)?;
    let probs = model
        .predict(&x)
        .map_err(|e| PipelineError::data("predict", e))?;
    let report = evaluate(&probs.values, &y, probs.n_classes);
    let dir = &cfg.paths.output_dir;
    write_json(&dir.join("metrics.json"), &report)?;
    if emit_plots {
        write_curves(dir, &probs.values, &y, probs.n_classes)?;
    }
    Ok(report)
}

/// TreeSHAP over the configured data; writes `shap.csv`, `shap_ranking.csv`
/// and `shap_summary.json`. With `probability_deltas`, models with a single
/// logistic output also get `shap_probability.csv` (approximate).
pub fn explain_model(
    model_path: &Path,
    cfg: &RunConfig,
    probability_deltas: bool,
) -> Result<ShapSummary, PipelineError> {
    let model = load_model(model_path)?;
    let (x, y) = labelled(&model, cfg)?;
    let attr = tree_shap(&model, &x).map_err(|e| PipelineError::data("explain", e))?;
    let summary = shap_summary(&attr, Some(&y));
    let dir = &cfg.paths.output_dir;
    write_shap_csv(&attr, create(&dir.join("shap.csv"))?).map_err(csv_err)?;
    if probability_deltas && attr.n_outputs() == 1 {
        let path = dir.join("shap_probability.csv");
        let mut w = csv::Writer::from_writer(create(&path)?);
        w.write_record(["patient_id", "row", "feature", "delta_probability"])
            .map_err(csv_err)?;
        for r in 0..attr.n_rows() {
            let deltas = attr.probability_deltas(r).expect("single output");
            for (j, d) in deltas.iter().enumerate() {
                w.write_record([
                    attr.patient_ids[r].clone(),
                    r.to_string(),
                    attr.feature_names[j].clone(),
                    d.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| io_err(&path, e))?;
    }
    write_ranking_csv(&summary, create(&dir.join("shap_ranking.csv"))?).map_err(csv_err)?;
    write_json(&dir.join("shap_summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsOutput {
    pub comparisons: Vec<GroupComparison>,
    pub prevalence: PrevalenceReport,
}

/// Numeric columns compared between wellbeing groups by default.
pub const STATS_COLUMNS: [&str; 23] = [
    "age",
    "height",
    "weight",
    "bmi_index",
    "heart_rate",
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

/// Wellbeing-group comparisons (`stats.csv`) and prevalence (`prevalence.json`).
pub fn stats(cfg: &RunConfig, columns: &[String]) -> Result<StatsOutput, PipelineError> {
    let data = prepare(cfg)?;
    let cols: Vec<&str> = if columns.is_empty() {
        STATS_COLUMNS.to_vec()
    } else {
        columns.iter().map(String::as_str).collect()
    };
    let comparisons = wellbeing_comparisons(&data.table.records, &cols);
    let scored: Vec<(String, crate::das21::DasScores)> = data
        .table
        .records
        .iter()
        .filter_map(|r| {
            Some((
                r.participant.patient_id.clone(),
                crate::das21::score_subscales(r.das21.as_ref()?),
            ))
        })
        .collect();
    let prevalence = prevalence_report(&scored);
    let dir = &cfg.paths.output_dir;
    write_stats_csv(&comparisons, create(&dir.join("stats.csv"))?).map_err(csv_err)?;
    write_json(&dir.join("prevalence.json"), &prevalence)?;
    Ok(StatsOutput {
        comparisons,
        prevalence,
    })
}

/// Renders `summary.md` and `summary.csv` from the reports under `dir`.
pub fn report(dir: &Path) -> Result<String, PipelineError> {
    let reports = read_reports(dir)?;
    if reports.is_empty() {
        return Err(PipelineError::data(
            &dir.display().to_string(),
            "no report.json files found",
        ));
    }
    let md = render_markdown(&reports);
    std::fs::write(dir.join("summary.md"), &md).map_err(|e| io_err(dir, e))?;
    write_summary_csv(&reports, create(&dir.join("summary.csv"))?).map_err(csv_err)?;
    Ok(md)
}
