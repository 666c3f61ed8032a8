// Scores three DAS-21 questionnaires and derives the binary and
// multiclass labels under both multiclass policies.

use ldf_das::das21::{
    derive_labels, score_items, MulticlassPolicy, Subscale, ANXIETY_ITEMS, STRESS_ITEMS,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let calm = [0i64; 21];
    let mut stressed = [0i64; 21];
    for i in STRESS_ITEMS {
        stressed[i - 1] = 2;
    }
    // anxiety without stress has no canonical multiclass label
    let mut anxious = [0i64; 21];
    for i in ANXIETY_ITEMS {
        anxious[i - 1] = 2;
    }

    for (name, items) in [("calm", calm), ("stressed", stressed), ("anxious", anxious)] {
        let scores = score_items(&items)?;
        let strict = derive_labels(&scores, MulticlassPolicy::Strict);
        let rank = derive_labels(&scores, MulticlassPolicy::Rank);
        println!(
            "{name:>9}: D {:>2} {:<9} A {:>2} {:<9} S {:>2} {:<9} binary={} strict={} rank={}",
            scores.final_score(Subscale::Depression),
            scores.depression_level.to_string(),
            scores.final_score(Subscale::Anxiety),
            scores.anxiety_level.to_string(),
            scores.final_score(Subscale::Stress),
            scores.stress_level.to_string(),
            strict.binary.as_str(),
            strict.multiclass.map_or("excluded", |m| m.as_str()),
            rank.multiclass.map_or("excluded", |m| m.as_str()),
        );
        if name == "calm" {
            assert_eq!(strict.binary.as_index(), 0);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
