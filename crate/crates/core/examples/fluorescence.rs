// Relative NADH from the 460/365 nm amplitudes. Ingested values win; the
// computed ratio is flagged as experimental.

use ldf_das::fluoro::{FluoroReading, NadhFormula};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let ingested = FluoroReading::new(1.8, 1.2, Some(1.01), Some(0.9))?;
    let raw = FluoroReading::new(1.8, 1.2, None, None)?;
    for (name, r) in [("ingested", ingested), ("computed", raw)] {
        let nadh = r.nadh(NadhFormula::Ratio)?;
        println!(
            "{name}: NADH {:.3} (experimental: {})",
            nadh.value, nadh.experimental
        );
    }
    // scaling both channels leaves the ratio unchanged
    let scaled = FluoroReading::new(3.6, 2.4, None, None)?.nadh(NadhFormula::Ratio)?;
    assert_eq!(scaled.value, raw.nadh(NadhFormula::Ratio)?.value);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
