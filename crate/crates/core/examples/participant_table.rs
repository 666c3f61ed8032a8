// Writes a synthetic participant table, reads it back through the schema
// layer and encodes the top-10 feature matrix with train-only imputation.

use ldf_das::dataset::{
    assemble_feature_matrix, read_participants, write_participants, FeatureSetName, ImputePolicy,
    Imputer, SchemaConfig,
};
use ldf_das::pipeline::{generate_cohort, CohortSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cohort = generate_cohort(&CohortSpec {
        n_patients: 12,
        ..CohortSpec::default()
    })?;
    let mut records = cohort.records;
    // a missing heart rate, to be filled from training rows only
    records[0].participant.heart_rate = None;

    let mut csv = Vec::new();
    write_participants(&records, &[], &mut csv)?;
    let schema = SchemaConfig::default();
    let table = read_participants(csv.as_slice(), &schema)?;
    println!(
        "{} rows read, {} rejected",
        table.records.len(),
        table.rejected.len()
    );

    let mut x = assemble_feature_matrix(
        &table.records,
        &table.extra_columns,
        FeatureSetName::Top10,
        ImputePolicy::Deferred,
        &schema,
    )?;
    println!("columns: {}", x.names().join(", "));

    let train: Vec<usize> = (0..x.n_rows()).filter(|r| r % 5 != 0).collect();
    let imputer = Imputer::fit(&x, &train);
    imputer.transform(&mut x);
    assert!(x.is_finite());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
