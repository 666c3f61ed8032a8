//! Complex Morlet wavelet analysis of perfusion signals.
//!
//! The scalogram is calibrated in signal units: a real sinusoid of amplitude
//! `a` at a grid frequency reads `a` on its ridge. Band features are taken
//! from the time-averaged modulus inside the cone of influence.

mod cwt;
mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, RawSignal};

pub use cwt::{cwt_morlet, frequency_grid, write_scalogram, MorletParams, Scalogram};
pub use synth::{synthesize_signal, SynthSpec, ToneComponent};

#[derive(Debug, Error)]
pub enum WaveletError {
    #[error(
        "sample rate {sample_rate} Hz too low for f_max {f_max} Hz (need >= {required:.3} Hz)"
    )]
    NyquistViolation {
        sample_rate: f64,
        f_max: f64,
        required: f64,
    },
    #[error("recording of {duration:.1} s too short for the {band} band (lowest frequency {f_min} Hz needs >= {required:.1} s)")]
    DurationTooShortForBand {
        band: String,
        f_min: f64,
        duration: f64,
        required: f64,
    },
    #[error("scalogram does not cover the {0} band")]
    BandNotCovered(BandName),
    #[error("cone of influence masks every sample in the {0} band")]
    EmptyCoi(BandName),
    #[error("mean perfusion is not positive; Kv undefined")]
    ZeroMeanPerfusion,
    #[error("component at {0} Hz is at or above the Nyquist frequency")]
    AliasedComponent(f64),
    #[error("invalid wavelet parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Signal(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandName {
    Endothelial,
    Neurogenic,
    Myogenic,
    Respiratory,
    Cardiac,
}

impl BandName {
    pub const ALL: [BandName; 5] = [
        BandName::Endothelial,
        BandName::Neurogenic,
        BandName::Myogenic,
        BandName::Respiratory,
        BandName::Cardiac,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BandName::Endothelial => "endothelial",
            BandName::Neurogenic => "neurogenic",
            BandName::Myogenic => "myogenic",
            BandName::Respiratory => "respiratory",
            BandName::Cardiac => "cardiac",
        }
    }

    /// Single-letter suffix used in the amplitude/frequency column names.
    pub fn suffix(self) -> char {
        match self {
            BandName::Endothelial => 'e',
            BandName::Neurogenic => 'n',
            BandName::Myogenic => 'm',
            BandName::Respiratory => 'r',
            BandName::Cardiac => 'c',
        }
    }

    pub fn definition(self) -> BandDefinition {
        CANONICAL_BANDS[self as usize]
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BandName::ALL
            .into_iter()
            .find(|b| b.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown band '{s}'"))
    }
}

/// Half-open frequency interval `[f_lo, f_hi)` in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub name: BandName,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl BandDefinition {
    pub fn contains(&self, f: f64) -> bool {
        f >= self.f_lo && f < self.f_hi
    }
}

pub const CANONICAL_BANDS: [BandDefinition; 5] = [
    BandDefinition {
        name: BandName::Endothelial,
        f_lo: 0.0095,
        f_hi: 0.02,
    },
    BandDefinition {
        name: BandName::Neurogenic,
        f_lo: 0.02,
        f_hi: 0.06,
    },
    BandDefinition {
        name: BandName::Myogenic,
        f_lo: 0.06,
        f_hi: 0.16,
    },
    BandDefinition {
        name: BandName::Respiratory,
        f_lo: 0.16,
        f_hi: 0.4,
    },
    BandDefinition {
        name: BandName::Cardiac,
        f_lo: 0.4,
        f_hi: 1.6,
    },
];

/// The canonical band containing `f`, if any.
pub fn band_of(f: f64) -> Option<BandName> {
    CANONICAL_BANDS
        .iter()
        .find(|b| b.contains(f))
        .map(|b| b.name)
}

/// Amplitude (PU) and dominant frequency (Hz) per canonical band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandFeatures {
    amplitude: [f64; 5],
    frequency: [f64; 5],
}

impl BandFeatures {
    pub fn from_parts(amplitude: [f64; 5], frequency: [f64; 5]) -> Self {
        Self {
            amplitude,
            frequency,
        }
    }

    pub fn amplitude(&self, band: BandName) -> f64 {
        self.amplitude[band as usize]
    }

    pub fn frequency(&self, band: BandName) -> f64 {
        self.frequency[band as usize]
    }

    pub fn amplitudes(&self) -> &[f64; 5] {
        &self.amplitude
    }

    pub fn frequencies(&self) -> &[f64; 5] {
        &self.frequency
    }
}

/// How the per-band amplitude is reduced from the scalogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeReduction {
    /// Max over band frequencies of the time-averaged modulus.
    #[default]
    MaxOfTimeAverage,
    /// Time average of the per-instant max over band frequencies.
    TimeAverageOfMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BandOptions {
    pub reduction: AmplitudeReduction,
    /// Average over every sample instead of the cone of influence.
    pub ignore_coi: bool,
}

/// Extracts per-band amplitude and frequency. Requested bands not in the
/// canonical five keep amplitude 0 in the returned vector.
pub fn band_features(
    scalogram: &Scalogram,
    bands: &[BandDefinition],
) -> Result<BandFeatures, WaveletError> {
    band_features_with(scalogram, bands, BandOptions::default())
}

pub fn band_features_with(
    scalogram: &Scalogram,
    bands: &[BandDefinition],
    opts: BandOptions,
) -> Result<BandFeatures, WaveletError> {
    let freqs = scalogram.frequencies();
    let mut amplitude = [0.0; 5];
    let mut frequency = [0.0; 5];
    for band in bands {
        let lo_ok = freqs
            .first()
            .is_some_and(|&f| f <= band.f_lo * (1.0 + 1e-12));
        let hi_ok = freqs
            .last()
            .is_some_and(|&f| f >= band.f_hi * (1.0 - 1e-12));
        let rows: Vec<usize> = (0..freqs.len())
            .filter(|&i| band.contains(freqs[i]))
            .collect();
        if !lo_ok || !hi_ok || rows.is_empty() {
            return Err(WaveletError::BandNotCovered(band.name));
        }
        let in_coi = |i: usize, t: usize| opts.ignore_coi || scalogram.in_coi(i, t);

        // Time-averaged spectrum over the band's frequencies.
        let mut best: Option<(f64, f64)> = None;
        for &i in &rows {
            let (sum, count) = (0..scalogram.n_times())
                .filter(|&t| in_coi(i, t))
                .fold((0.0, 0usize), |(s, c), t| {
                    (s + scalogram.modulus(i, t), c + 1)
                });
            if count == 0 {
                continue;
            }
            let avg = sum / count as f64;
            // strict > keeps the lowest frequency on ties
            if best.is_none_or(|(a, _)| avg > a) {
                best = Some((avg, freqs[i]));
            }
        }
        let (avg_max, f_at) = best.ok_or(WaveletError::EmptyCoi(band.name))?;
        let amp = match opts.reduction {
            AmplitudeReduction::MaxOfTimeAverage => avg_max,
            AmplitudeReduction::TimeAverageOfMax => {
                // instants inside the COI of the band's lowest frequency
                let lowest = rows[0];
                let ts: Vec<usize> = (0..scalogram.n_times())
                    .filter(|&t| in_coi(lowest, t))
                    .collect();
                if ts.is_empty() {
                    return Err(WaveletError::EmptyCoi(band.name));
                }
                ts.iter()
                    .map(|&t| {
                        rows.iter()
                            .map(|&i| scalogram.modulus(i, t))
                            .fold(0.0, f64::max)
                    })
                    .sum::<f64>()
                    / ts.len() as f64
            }
        };
        amplitude[band.name as usize] = amp;
        frequency[band.name as usize] = f_at;
    }
    Ok(BandFeatures {
        amplitude,
        frequency,
    })
}

/// Mean perfusion, population standard deviation and 100·σ/M.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdfSummary {
    pub m: f64,
    pub sigma: f64,
    pub kv100: f64,
}

pub fn ldf_summary(signal: &RawSignal) -> Result<LdfSummary, WaveletError> {
    let x = signal.perfusion();
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if !(m > 0.0) {
        return Err(WaveletError::ZeroMeanPerfusion);
    }
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    Ok(LdfSummary {
        m,
        sigma,
        kv100: 100.0 * sigma / m,
    })
}

/// Band features plus LDF summary for one recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveletFeatures {
    pub band: BandFeatures,
    pub summary: LdfSummary,
}

impl WaveletFeatures {
    /// Keyed as `Ae..Ac, Fe..Fc, M, sigma, Kv100`.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for b in BandName::ALL {
            out.insert(format!("A{}", b.suffix()), self.band.amplitude(b));
            out.insert(format!("F{}", b.suffix()), self.band.frequency(b));
        }
        out.insert("M".into(), self.summary.m);
        out.insert("sigma".into(), self.summary.sigma);
        out.insert("Kv100".into(), self.summary.kv100);
        out
    }
}

/// Runs the transform over the canonical bands and summarizes the signal.
pub fn extract_features(
    signal: &RawSignal,
    params: &MorletParams,
    opts: BandOptions,
) -> Result<WaveletFeatures, WaveletError> {
    let scalogram = cwt_morlet(signal, params)?;
    let band = band_features_with(&scalogram, &CANONICAL_BANDS, opts)?;
    let summary = ldf_summary(signal)?;
    Ok(WaveletFeatures { band, summary })
}
