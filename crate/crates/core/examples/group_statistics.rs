// Wellbeing versus non-wellbeing comparison of mean perfusion with the
// Mann-Whitney U test, plus participant-level prevalence.

use ldf_das::das21::score_subscales;
use ldf_das::pipeline::{
    extract_signal_files, generate_cohort, merge_signal_features, signal_files, write_cohort,
    CohortSpec, WaveletConfig,
};
use ldf_das::stats::{compare_groups, prevalence_report, wellbeing_comparisons};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut cohort = generate_cohort(&CohortSpec {
        n_patients: 50,
        seed: 4,
        ..CohortSpec::default()
    })?;
    write_cohort(&cohort, dir.path())?;
    let features = extract_signal_files(
        &signal_files(&dir.path().join("signals"))?,
        &WaveletConfig::default(),
    )?;
    merge_signal_features(&mut cohort.records, &features);

    for c in wellbeing_comparisons(&cohort.records, &["m", "am", "age"]) {
        println!(
            "{:<4} wellbeing {:.3} [{:.3}, {:.3}]  non-wellbeing {:.3} [{:.3}, {:.3}]  U {:.1}  p {:.4}",
            c.feature, c.group_a.mean, c.group_a.lo, c.group_a.hi, c.group_b.mean, c.group_b.lo, c.group_b.hi,
            c.u_statistic, c.p_value
        );
    }

    let rows: Vec<(String, _)> = cohort
        .records
        .iter()
        .filter_map(|r| {
            Some((
                r.participant.patient_id.clone(),
                score_subscales(r.das21.as_ref()?),
            ))
        })
        .collect();
    let prev = prevalence_report(&rows);
    println!(
        "{} participants: stress {:.1}%, anxiety {:.1}%, depression {:.1}%",
        prev.n_participants,
        100.0 * prev.stress.fraction,
        100.0 * prev.anxiety.fraction,
        100.0 * prev.depression.fraction
    );

    // small tie-free samples use the exact null distribution
    let exact = compare_groups("toy", &[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0])?;
    println!(
        "toy: U {} p {:.4} ({:?})",
        exact.u_statistic, exact.p_value, exact.method
    );
    assert!((exact.p_value - 0.1).abs() < 1e-12);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
