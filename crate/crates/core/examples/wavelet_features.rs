// Synthesizes an eight-minute perfusion trace with a myogenic and a cardiac
// tone and recovers both from the Morlet scalogram.

use ldf_das::wavelet::{
    extract_features, synthesize_signal, BandName, BandOptions, MorletParams, SynthSpec,
    ToneComponent,
};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec {
        components: vec![
            ToneComponent {
                frequency: 0.1,
                amplitude: 2.0,
                phase: 0.0,
            },
            ToneComponent {
                frequency: 1.0,
                amplitude: 0.8,
                phase: 1.0,
            },
        ],
        noise_sigma: 0.1,
        seed: 7,
        ..SynthSpec::default()
    };
    let signal = synthesize_signal(&spec)?;
    let features = extract_features(&signal, &MorletParams::default(), BandOptions::default())?;

    println!("{:<12} {:>9} {:>9}", "band", "amp (PU)", "freq (Hz)");
    for band in BandName::ALL {
        println!(
            "{:<12} {:>9.3} {:>9.4}",
            band.as_str(),
            features.band.amplitude(band),
            features.band.frequency(band)
        );
    }
    let s = features.summary;
    println!("M {:.2} PU, sigma {:.3}, Kv {:.2}%", s.m, s.sigma, s.kv100);

    let am = features.band.amplitude(BandName::Myogenic);
    assert!((am - 2.0).abs() < 0.2, "myogenic amplitude {am}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
