use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::WaveletError;
use crate::dataset::RawSignal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToneComponent {
    /// Hz
    pub frequency: f64,
    /// PU
    pub amplitude: f64,
    /// rad
    pub phase: f64,
}

/// `x(t) = baseline + Σ aᵢ·sin(2πfᵢt + φᵢ) + N(0, noise_sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub components: Vec<ToneComponent>,
    pub baseline: f64,
    pub noise_sigma: f64,
    pub duration: f64,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            components: Vec::new(),
            baseline: 20.0,
            noise_sigma: 0.0,
            duration: 480.0,
            sample_rate: 20.0,
            seed: 0,
        }
    }
}

pub fn synthesize_signal(spec: &SynthSpec) -> Result<RawSignal, WaveletError> {
    if !(spec.sample_rate > 0.0 && spec.duration > 0.0) {
        return Err(WaveletError::InvalidParams(
            "duration and sample_rate must be positive".into(),
        ));
    }
    if !(spec.noise_sigma >= 0.0) {
        return Err(WaveletError::InvalidParams(
            "noise_sigma must be non-negative".into(),
        ));
    }
    let nyquist = spec.sample_rate / 2.0;
    if let Some(c) = spec.components.iter().find(|c| !(c.frequency < nyquist)) {
        return Err(WaveletError::AliasedComponent(c.frequency));
    }
    let n = (spec.duration * spec.sample_rate).round() as usize;
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / spec.sample_rate;
            spec.baseline
                + spec
                    .components
                    .iter()
                    .map(|c| c.amplitude * (2.0 * PI * c.frequency * t + c.phase).sin())
                    .sum::<f64>()
        })
        .collect();
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma checked above");
        for v in &mut x {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(RawSignal::from_uniform(x, spec.sample_rate)?)
}
