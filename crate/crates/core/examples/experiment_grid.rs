// A small feature set × split × model grid over a synthetic cohort, written
// to a directory of per-cell reports and summarized as a Markdown table.

use ldf_das::dataset::FeatureSetName;
use ldf_das::models::ModelKind;
use ldf_das::pipeline::{
    generate_cohort, read_reports, render_markdown, train_grid, write_cohort, CohortSpec, RunConfig,
};
use ldf_das::splits::SplitScheme;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let data_dir = dir.path().join("cohort");
    let cohort = generate_cohort(&CohortSpec {
        n_patients: 30,
        seed: 5,
        ..CohortSpec::default()
    })?;
    write_cohort(&cohort, &data_dir)?;

    let mut cfg = RunConfig::default();
    cfg.paths.data = Some(data_dir.join("participants.csv"));
    cfg.paths.signals = Some(data_dir.join("signals"));
    cfg.paths.output_dir = dir.path().join("out");
    cfg.feature_sets = vec![FeatureSetName::All, FeatureSetName::SensorOnly];
    cfg.split.schemes = vec![SplitScheme::KfoldPatient, SplitScheme::Lopo];
    cfg.split.seeds = vec![0, 1];
    cfg.models = vec![ModelKind::Gbdt, ModelKind::LinearSvm];

    let outcome = train_grid(&cfg, true)?;
    println!(
        "{} cells, {} failed",
        outcome.cells.len(),
        outcome.n_failed()
    );

    let reports = read_reports(&cfg.paths.output_dir)?;
    print!("{}", render_markdown(&reports));
    assert_eq!(reports.len(), 8);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
