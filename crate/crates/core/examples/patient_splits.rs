// Patient-wise k-fold, leave-one-patient-out and the two 80:20 variants on a
// table where most patients contribute both hands.

use std::collections::BTreeSet;

use ldf_das::splits::{kfold_patientwise, lopo, split_8020, split_8020_patientwise};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ids: Vec<String> = (0..11)
        .flat_map(|p| {
            let hands = if p % 4 == 0 { 1 } else { 2 };
            std::iter::repeat_n(format!("P{p:02}"), hands)
        })
        .collect();

    let plan = kfold_patientwise(&ids, 5, 42)?;
    for (i, fold) in plan.folds.iter().enumerate() {
        let test: BTreeSet<&str> = fold.test.iter().map(|&r| ids[r].as_str()).collect();
        println!("fold {i}: {} test rows from {:?}", fold.test.len(), test);
    }
    println!("LOPO folds: {}", lopo(&ids)?.folds.len());

    let rows = split_8020(ids.len(), 42)?;
    let patients = split_8020_patientwise(&ids, 42)?;
    let leaked = |test: &[usize], train: &[usize]| {
        let t: BTreeSet<&str> = test.iter().map(|&r| ids[r].as_str()).collect();
        train
            .iter()
            .filter(|&&r| t.contains(ids[r].as_str()))
            .count()
    };
    let (r, p) = (&rows.folds[0], &patients.folds[0]);
    println!(
        "80:20 row-wise: {} train rows share a patient with test",
        leaked(&r.test, &r.train)
    );
    println!(
        "80:20 patient-wise: {} train rows share a patient with test",
        leaked(&p.test, &p.train)
    );
    assert_eq!(leaked(&p.test, &p.train), 0);
    println!(
        "{}",
        plan.to_json()
            .lines()
            .take(6)
            .collect::<Vec<_>>()
            .join("\n")
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
