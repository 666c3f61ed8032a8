use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ldf_das::das21::MulticlassPolicy;
use ldf_das::dataset::FeatureSetName;
use ldf_das::models::{ClassWeight, GbdtParams, ModelKind};
use ldf_das::pipeline::{self, CohortSpec, PipelineError, RunConfig, TaskName, WaveletJob};
use ldf_das::splits::SplitScheme;
use ldf_das::wavelet::{BandName, SynthSpec, ToneComponent};

#[derive(Parser)]
#[command(
    name = "ldf-das",
    version,
    about = "LDF/FS signal features, DAS-21 labels and classifier experiments"
)]
struct Cli {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config and LDF_DAS_OUTPUT_DIR.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Directory of raw signal files to recompute band features from.
    #[arg(long)]
    signals: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    policy: Option<MulticlassPolicy>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a participant table; optionally rewrite it with canonical headers.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Band amplitudes/frequencies and LDF summaries from signal files.
    Wavelet {
        /// Signal files or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Participant table to merge the features into.
        #[arg(long, requires = "merged_out")]
        merge: Option<PathBuf>,
        #[arg(long)]
        merged_out: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        scalogram_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        scalogram_stride: usize,
        #[arg(long)]
        omega0: Option<f64>,
        #[arg(long)]
        voices: Option<u32>,
    },
    /// Synthetic signal (with --tone) or synthetic cohort.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// `frequency:amplitude[:phase]`; repeatable. Writes a single signal.
        #[arg(long)]
        tone: Vec<String>,
        #[arg(long, default_value_t = 20.0)]
        baseline: f64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 480.0)]
        duration: f64,
        #[arg(long, default_value_t = 20.0)]
        sample_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        patients: usize,
        #[arg(long, default_value_t = 2)]
        hands: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 0.6)]
        effect: f64,
        #[arg(long, default_value = "myogenic")]
        band: String,
    },
    /// Score a `patient_id,q1..q21` file into labels.
    #[command(name = "score-das21")]
    ScoreDas21 {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "strict")]
        policy: MulticlassPolicy,
    },
    /// Run the feature set × split × task × model grid.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',')]
        model: Vec<ModelKind>,
        #[arg(long, value_delimiter = ',')]
        split: Vec<SplitScheme>,
        #[arg(long)]
        k: Option<usize>,
        /// Number of seeds, 0..N.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        feature_set: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        task: Vec<TaskName>,
        #[arg(long)]
        seed: Option<u64>,
        /// Split 80:20 by patient instead of by row.
        #[arg(long)]
        patient_wise: bool,
        #[arg(long)]
        inverse_prevalence_weights: bool,
        /// gradient_boosting, lightgbm or catboost.
        #[arg(long)]
        gbdt_preset: Option<String>,
        #[arg(long)]
        emit_plots: bool,
    },
    /// Score a saved model on a participant table.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        emit_plots: bool,
    },
    /// TreeSHAP attributions of a saved tree model.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Also write approximate probability-space attributions.
        #[arg(long)]
        probability_deltas: bool,
    },
    /// Wellbeing-group Mann-Whitney comparisons and prevalence.
    Stats {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',')]
        columns: Vec<String>,
    },
    /// Summary table from the reports in the output directory.
    Report {
        #[arg(long)]
        dir: Option<PathBuf>,
    },
}

fn parse_tone(s: &str) -> Result<ToneComponent, PipelineError> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| PipelineError::Config(format!("bad tone '{s}'")))?;
    match parts.as_slice() {
        [f, a] => Ok(ToneComponent {
            frequency: *f,
            amplitude: *a,
            phase: 0.0,
        }),
        [f, a, p] => Ok(ToneComponent {
            frequency: *f,
            amplitude: *a,
            phase: *p,
        }),
        _ => Err(PipelineError::Config(format!(
            "bad tone '{s}', expected f:a[:phase]"
        ))),
    }
}

fn base_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env();
    if let Some(dir) = &cli.output_dir {
        cfg.paths.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn apply_data(cfg: &mut RunConfig, d: &DataArgs) {
    if let Some(p) = &d.data {
        cfg.paths.data = Some(p.clone());
    }
    if let Some(p) = &d.signals {
        cfg.paths.signals = Some(p.clone());
    }
    if let Some(p) = &d.schema {
        cfg.paths.schema = Some(p.clone());
    }
    if let Some(p) = d.policy {
        cfg.multiclass_policy = p;
    }
}

fn print<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("json"));
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = base_config(&cli)?;
    match cli.command {
        Command::Ingest { data, schema, out } => {
            print(&pipeline::ingest(&data, schema.as_deref(), out.as_deref())?)
        }
        Command::Wavelet {
            inputs,
            out,
            merge,
            merged_out,
            schema,
            scalogram_dir,
            scalogram_stride,
            omega0,
            voices,
        } => {
            let mut config = cfg.wavelet.clone();
            if let Some(w) = omega0 {
                config.morlet.omega0 = w;
            }
            if let Some(v) = voices {
                config.morlet.voices_per_octave = v;
            }
            let job = WaveletJob {
                inputs,
                config,
                out,
                merge: merge.zip(merged_out),
                schema: schema.or(cfg.paths.schema.clone()),
                scalogram_dir,
                scalogram_stride,
            };
            let (n, warnings) = pipeline::wavelet(&job)?;
            print(&serde_json::json!({ "signals": n, "warnings": warnings }));
        }
        Command::Synth {
            out,
            tone,
            baseline,
            noise,
            duration,
            sample_rate,
            seed,
            patients,
            hands,
            classes,
            effect,
            band,
        } => {
            if tone.is_empty() {
                let planted_band = BandName::ALL
                    .into_iter()
                    .find(|b| b.as_str() == band.to_lowercase())
                    .ok_or_else(|| PipelineError::Config(format!("unknown band '{band}'")))?;
                let spec = CohortSpec {
                    n_patients: patients,
                    hands,
                    classes,
                    planted_band,
                    effect,
                    noise_sigma: noise.max(CohortSpec::default().noise_sigma),
                    duration,
                    sample_rate,
                    seed,
                    ..Default::default()
                };
                let cohort = pipeline::generate_cohort(&spec)?;
                pipeline::write_cohort(&cohort, &out)?;
                print(&serde_json::json!({ "records": cohort.records.len(), "dir": out }));
            } else {
                let spec = SynthSpec {
                    components: tone
                        .iter()
                        .map(|t| parse_tone(t))
                        .collect::<Result<_, _>>()?,
                    baseline,
                    noise_sigma: noise,
                    duration,
                    sample_rate,
                    seed,
                };
                let n = pipeline::synth_signal(&spec, &out)?;
                print(&serde_json::json!({ "samples": n, "file": out }));
            }
        }
        Command::ScoreDas21 { input, out, policy } => {
            print(&pipeline::score_das21(&input, policy, &out)?)
        }
        Command::Train {
            data,
            model,
            split,
            k,
            seeds,
            feature_set,
            task,
            seed,
            patient_wise,
            inverse_prevalence_weights,
            gbdt_preset,
            emit_plots,
        } => {
            apply_data(&mut cfg, &data);
            if patient_wise {
                cfg.split.patient_wise_8020 = true;
            }
            if inverse_prevalence_weights {
                cfg.hyperparams.class_weight = ClassWeight::InversePrevalence;
            }
            if let Some(name) = gbdt_preset {
                cfg.hyperparams.gbdt = GbdtParams::preset(&name).ok_or_else(|| {
                    PipelineError::Config(format!("unknown gbdt preset {name:?}"))
                })?;
            }
            if !model.is_empty() {
                cfg.models = model;
            }
            if !split.is_empty() {
                cfg.split.schemes = split;
            }
            if let Some(k) = k {
                cfg.split.k = k;
            }
            if let Some(n) = seeds {
                cfg.split.seeds = (0..n).collect();
            }
            if !feature_set.is_empty() {
                cfg.feature_sets = feature_set
                    .iter()
                    .map(|s| s.parse::<FeatureSetName>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| PipelineError::Config(e.to_string()))?;
            }
            if !task.is_empty() {
                cfg.tasks = task;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let outcome = pipeline::train_grid(&cfg, emit_plots)?;
            println!("{}", pipeline::render_markdown(&outcome.reports()));
            let failed = outcome.n_failed();
            if failed > 0 {
                return Err(PipelineError::PartialGridFailure {
                    failed,
                    total: outcome.cells.len(),
                });
            }
        }
        Command::Evaluate {
            model,
            data,
            emit_plots,
        } => {
            apply_data(&mut cfg, &data);
            print(&pipeline::evaluate_model(&model, &cfg, emit_plots)?);
        }
        Command::Explain {
            model,
            data,
            probability_deltas,
        } => {
            apply_data(&mut cfg, &data);
            let summary = pipeline::explain_model(&model, &cfg, probability_deltas)?;
            print(&summary.ranking);
        }
        Command::Stats { data, columns } => {
            apply_data(&mut cfg, &data);
            let out = pipeline::stats(&cfg, &columns)?;
            print(&out.prevalence);
        }
        Command::Report { dir } => {
            let dir = dir.unwrap_or(cfg.paths.output_dir);
            println!("{}", pipeline::report(&dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match &e {
                PipelineError::Config(_) => "ConfigError",
                PipelineError::Data { .. } => "DataError",
                PipelineError::PartialGridFailure { .. } => "PartialGridFailure",
                PipelineError::Io(_) => "IoError",
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": kind, "message": e.to_string() })
            );
            ExitCode::from(match &e {
                PipelineError::Config(_) => 2,
                PipelineError::Data { .. } => 3,
                PipelineError::PartialGridFailure { .. } => 4,
                PipelineError::Io(_) => 5,
            })
        }
    }
}
