// Trains each classifier on one patient-wise fold of a synthetic cohort's
// sensor features and scores it on the held-out patients.

use ldf_das::das21::MulticlassPolicy;
use ldf_das::dataset::{
    assemble_feature_matrix, FeatureSetName, ImputePolicy, Imputer, SchemaConfig,
};
use ldf_das::metrics::{evaluate, roc_curve};
use ldf_das::models::{train, ModelArtifact, ModelKind, ModelSpec, Task};
use ldf_das::pipeline::{
    extract_signal_files, generate_cohort, merge_signal_features, signal_files, task_labels,
    write_cohort, CohortSpec, TaskName, WaveletConfig,
};
use ldf_das::splits::kfold_patientwise;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut cohort = generate_cohort(&CohortSpec {
        n_patients: 40,
        seed: 3,
        ..CohortSpec::default()
    })?;
    write_cohort(&cohort, dir.path())?;
    let files = signal_files(&dir.path().join("signals"))?;
    let features = extract_signal_files(&files, &WaveletConfig::default())?;
    merge_signal_features(&mut cohort.records, &features);

    let schema = SchemaConfig::default();
    let mut x = assemble_feature_matrix(
        &cohort.records,
        &[],
        FeatureSetName::SensorOnly,
        ImputePolicy::Deferred,
        &schema,
    )?;
    let y: Vec<usize> = task_labels(&cohort.records, TaskName::Binary, MulticlassPolicy::Strict)
        .into_iter()
        .map(|l| l.expect("synthetic rows are labelled"))
        .collect();

    let fold = &kfold_patientwise(x.patient_ids(), 5, 1)?.folds[0];
    Imputer::fit(&x, &fold.train).transform(&mut x);
    let (xtr, xte) = (x.select_rows(&fold.train), x.select_rows(&fold.test));
    let ytr: Vec<usize> = fold.train.iter().map(|&r| y[r]).collect();
    let yte: Vec<usize> = fold.test.iter().map(|&r| y[r]).collect();

    for kind in [
        ModelKind::Gbdt,
        ModelKind::RandomForest,
        ModelKind::LinearSvm,
        ModelKind::Mlp,
    ] {
        let model = train(&ModelSpec::new(kind, Task::Binary), &xtr, &ytr)?;
        let probs = model.predict(&xte)?;
        let m = evaluate(&probs.values, &yte, 2);
        println!(
            "{:<14} ROC AUC {:.3}  PR AUC {:.3}  macro F1 {:.3}",
            kind.as_str(),
            m.roc_auc.unwrap_or(f64::NAN),
            m.pr_auc.unwrap_or(f64::NAN),
            m.macro_f1
        );
        if kind == ModelKind::Gbdt {
            let labels: Vec<bool> = yte.iter().map(|&c| c == 1).collect();
            println!(
                "  {} ROC points",
                roc_curve(&probs.positive(), &labels)?.points.len()
            );
            // artifacts round-trip byte for byte
            let bytes = model.serialize();
            assert_eq!(ModelArtifact::deserialize(&bytes)?.serialize(), bytes);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
