use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{band_of, WaveletError, CANONICAL_BANDS};
use crate::dataset::RawSignal;

/// Morlet transform settings. `anchors` are frequencies that must sit on the
/// grid exactly; between consecutive anchors the grid is log-spaced at
/// `voices_per_octave`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorletParams {
    pub omega0: f64,
    pub voices_per_octave: u32,
    pub f_min: f64,
    pub f_max: f64,
    #[serde(default)]
    pub anchors: Vec<f64>,
}

impl Default for MorletParams {
    fn default() -> Self {
        let mut anchors: Vec<f64> = CANONICAL_BANDS.iter().map(|b| b.f_lo).collect();
        anchors.push(CANONICAL_BANDS[4].f_hi);
        Self {
            omega0: 6.0,
            voices_per_octave: 16,
            f_min: CANONICAL_BANDS[0].f_lo,
            f_max: CANONICAL_BANDS[4].f_hi,
            anchors,
        }
    }
}

impl MorletParams {
    /// Plain log grid over `[f_min, f_max]` without band anchors.
    pub fn plain(omega0: f64, voices_per_octave: u32, f_min: f64, f_max: f64) -> Self {
        Self {
            omega0,
            voices_per_octave,
            f_min,
            f_max,
            anchors: Vec::new(),
        }
    }

    pub fn scale_for(&self, f: f64) -> f64 {
        self.omega0 / (2.0 * PI * f)
    }

    fn validate(&self) -> Result<(), WaveletError> {
        if !(self.omega0 > 0.0) || self.voices_per_octave == 0 {
            return Err(WaveletError::InvalidParams(
                "omega0 and voices_per_octave must be positive".into(),
            ));
        }
        if !(self.f_min > 0.0 && self.f_max > self.f_min) {
            return Err(WaveletError::InvalidParams(format!(
                "need 0 < f_min < f_max, got {} and {}",
                self.f_min, self.f_max
            )));
        }
        Ok(())
    }
}

/// Strictly increasing analysis frequencies in Hz.
pub fn frequency_grid(params: &MorletParams) -> Vec<f64> {
    let mut knots = vec![params.f_min];
    let mut anchors: Vec<f64> = params
        .anchors
        .iter()
        .copied()
        .filter(|&a| a > params.f_min && a < params.f_max)
        .collect();
    anchors.sort_by(f64::total_cmp);
    anchors.dedup();
    knots.extend(anchors);
    knots.push(params.f_max);

    let step = 2f64.powf(1.0 / f64::from(params.voices_per_octave));
    let mut grid = Vec::new();
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut j = 0;
        loop {
            let f = a * step.powi(j);
            if f >= b * (1.0 - 1e-12) {
                break;
            }
            grid.push(f);
            j += 1;
        }
    }
    grid.push(params.f_max);
    grid
}

/// Calibrated modulus `|W(f, t)|` on a frequency × time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scalogram {
    frequencies: Vec<f64>,
    scales: Vec<f64>,
    times: Vec<f64>,
    /// frequency-major, `n_freqs × n_times`
    modulus: Vec<f64>,
    /// e-folding half-width of the cone of influence per frequency, seconds
    coi_width: Vec<f64>,
}

impl Scalogram {
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn modulus(&self, freq: usize, t: usize) -> f64 {
        self.modulus[freq * self.times.len() + t]
    }

    pub fn modulus_row(&self, freq: usize) -> &[f64] {
        let n = self.times.len();
        &self.modulus[freq * n..(freq + 1) * n]
    }

    /// True when sample `t` lies at least `√2·scale` from both signal edges.
    pub fn in_coi(&self, freq: usize, t: usize) -> bool {
        let w = self.coi_width[freq];
        let t0 = self.times[0];
        let t1 = self.times[self.times.len() - 1];
        self.times[t] - t0 >= w && t1 - self.times[t] >= w
    }

    pub fn coi_mask(&self) -> Vec<Vec<bool>> {
        (0..self.frequencies.len())
            .map(|i| (0..self.times.len()).map(|t| self.in_coi(i, t)).collect())
            .collect()
    }
}

/// Continuous wavelet transform with the analytic Morlet
/// `ψ(t) = π^(-1/4) e^{iω₀t} e^{-t²/2}`, evaluated by FFT convolution.
pub fn cwt_morlet(signal: &RawSignal, params: &MorletParams) -> Result<Scalogram, WaveletError> {
    params.validate()?;
    let fs = signal.sample_rate();
    let required = 2.0 * params.f_max * 1.1;
    if fs < required * (1.0 - 1e-12) {
        return Err(WaveletError::NyquistViolation {
            sample_rate: fs,
            f_max: params.f_max,
            required,
        });
    }
    let duration = signal.duration();
    let min_f = 2.0 / duration;
    if params.f_min < min_f {
        let band = band_of(params.f_min)
            .map(|b| b.to_string())
            .unwrap_or_else(|| format!("{} Hz", params.f_min));
        return Err(WaveletError::DurationTooShortForBand {
            band,
            f_min: params.f_min,
            duration,
            required: 2.0 / params.f_min,
        });
    }

    let frequencies = frequency_grid(params);
    let scales: Vec<f64> = frequencies.iter().map(|&f| params.scale_for(f)).collect();
    let x = signal.perfusion();
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let nfft = (2 * n).next_power_of_two();

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(nfft);
    let inverse = planner.plan_fft_inverse(nfft);
    let mut spectrum: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat_n(Complex::new(0.0, 0.0), nfft - n))
        .collect();
    forward.process(&mut spectrum);

    let dt = 1.0 / fs;
    let omega: Vec<f64> = (0..nfft)
        .map(|k| {
            let kk = if k <= nfft / 2 {
                k as f64
            } else {
                k as f64 - nfft as f64
            };
            2.0 * PI * kk / (nfft as f64 * dt)
        })
        .collect();

    // ψ̂(w) = π^(-1/4) √(2π) exp(-(w-ω₀)²/2); the calibration constant
    // 2 / (π^(-1/4) √(2π)) makes a unit sinusoid read 1 on its ridge.
    let omega0 = params.omega0;
    let rows: Vec<Vec<f64>> = scales
        .par_iter()
        .map(|&s| {
            let mut buf: Vec<Complex<f64>> = spectrum
                .iter()
                .zip(&omega)
                .map(|(xk, &w)| {
                    let d = s * w - omega0;
                    xk * (2.0 * (-0.5 * d * d).exp())
                })
                .collect();
            inverse.process(&mut buf);
            buf[..n].iter().map(|c| c.norm() / nfft as f64).collect()
        })
        .collect();

    Ok(Scalogram {
        coi_width: scales
            .iter()
            .map(|s| std::f64::consts::SQRT_2 * s)
            .collect(),
        frequencies,
        scales,
        times: signal.timestamps().to_vec(),
        modulus: rows.concat(),
    })
}

/// Dense dump: one row per frequency, columns `frequency_hz,scale_s` then
/// every `time_stride`-th time sample.
pub fn write_scalogram<W: Write>(
    s: &Scalogram,
    time_stride: usize,
    writer: W,
) -> Result<(), csv::Error> {
    let stride = time_stride.max(1);
    let ts: Vec<usize> = (0..s.n_times()).step_by(stride).collect();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["frequency_hz".to_string(), "scale_s".to_string()];
    header.extend(ts.iter().map(|&t| s.times[t].to_string()));
    w.write_record(&header)?;
    for (i, f) in s.frequencies.iter().enumerate() {
        let mut row = vec![f.to_string(), s.scales[i].to_string()];
        row.extend(ts.iter().map(|&t| s.modulus(i, t).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
