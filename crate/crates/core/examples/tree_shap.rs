// Exact TreeSHAP on a boosted model where only two of four features carry
// signal, checked against subset enumeration.

use ldf_das::dataset::FeatureMatrix;
use ldf_das::explain::{brute_force_shap, shap_summary, tree_shap, BackgroundPolicy};
use ldf_das::models::{train, ModelKind, ModelSpec, Task};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let y: Vec<usize> = rows
        .iter()
        .map(|r| usize::from(2.0 * r[0] - r[2] + rng.gen_range(-0.3..0.3) > 0.0))
        .collect();
    let x =
        FeatureMatrix::from_rows_anonymous(&["signal_a", "noise_a", "signal_b", "noise_b"], &rows);
    let model = train(&ModelSpec::new(ModelKind::Gbdt, Task::Binary), &x, &y)?;

    let attr = tree_shap(&model, &x)?;
    let summary = shap_summary(&attr, Some(&y));
    for r in &summary.ranking {
        println!("{:<9} mean |phi| {:.4}", r.feature, r.mean_abs_phi);
    }
    assert_eq!(summary.ranking[0].feature, "signal_a");

    // local accuracy and agreement with the exponential-time definition
    let row = x.row(0);
    let margin = model.margins_row(row)[0];
    println!(
        "row 0: base {:.4} + sum(phi) = {:.4}, margin {:.4}",
        attr.base_value[0],
        attr.reconstructed_margin(0, 0),
        margin
    );
    let exact = brute_force_shap(&model, row, BackgroundPolicy::PathDependent)?;
    let worst = exact[0]
        .1
        .iter()
        .zip(attr.phi_row(0, 0))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max |tree_shap - enumeration| = {worst:.2e}");
    assert!(worst < 1e-9);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
