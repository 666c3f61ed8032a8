//! Uniformly sampled perfusion recordings.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// Nominal recording length in seconds (eight minutes).
pub const NOMINAL_DURATION_S: f64 = 480.0;
/// Recordings shorter than this are rejected outright.
pub const MIN_DURATION_S: f64 = 60.0;
/// Maximum relative deviation of any sample interval from the mean interval.
pub const MAX_JITTER: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSignal {
    timestamps: Vec<f64>,
    perfusion: Vec<f64>,
    sample_rate: f64,
    /// Set when the recording is shorter than the nominal eight minutes.
    pub short_recording: bool,
}

impl RawSignal {
    /// Validates monotonicity, uniformity and minimum duration.
    pub fn new(timestamps: Vec<f64>, perfusion: Vec<f64>) -> Result<Self, DatasetError> {
        if timestamps.len() != perfusion.len() {
            return Err(DatasetError::BadSignal(format!(
                "{} timestamps but {} perfusion samples",
                timestamps.len(),
                perfusion.len()
            )));
        }
        if timestamps.len() < 2 {
            return Err(DatasetError::TooShort {
                duration: 0.0,
                min: MIN_DURATION_S,
            });
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(DatasetError::NonMonotonicTime { index: i + 1 });
        }
        if let Some(i) = perfusion.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::BadSignal(format!(
                "non-finite perfusion at sample {i}"
            )));
        }
        let n = timestamps.len();
        let duration = timestamps[n - 1] - timestamps[0];
        let mean_dt = duration / (n - 1) as f64;
        let worst = timestamps
            .windows(2)
            .map(|w| ((w[1] - w[0]) - mean_dt).abs() / mean_dt)
            .fold(0.0f64, f64::max);
        if worst > MAX_JITTER {
            return Err(DatasetError::NonUniformSampling { jitter: worst });
        }
        if duration < MIN_DURATION_S {
            return Err(DatasetError::TooShort {
                duration,
                min: MIN_DURATION_S,
            });
        }
        Ok(Self {
            sample_rate: 1.0 / mean_dt,
            short_recording: duration + mean_dt < NOMINAL_DURATION_S * 0.99,
            timestamps,
            perfusion,
        })
    }

    /// Builds a signal on the uniform grid `t_i = i / sample_rate`.
    pub fn from_uniform(perfusion: Vec<f64>, sample_rate: f64) -> Result<Self, DatasetError> {
        let t = (0..perfusion.len())
            .map(|i| i as f64 / sample_rate)
            .collect();
        Self::new(t, perfusion)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn perfusion(&self) -> &[f64] {
        &self.perfusion
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.perfusion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perfusion.is_empty()
    }

    /// `t_last - t_first`.
    pub fn duration(&self) -> f64 {
        self.timestamps[self.timestamps.len() - 1] - self.timestamps[0]
    }

    /// Span covered by the samples including the last sample interval.
    pub fn span(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }
}

pub fn read_raw_signal<R: Read>(reader: R) -> Result<RawSignal, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let ti = col("t_s").ok_or_else(|| DatasetError::MissingColumn("t_s".into()))?;
    let pi =
        col("perfusion_pu").ok_or_else(|| DatasetError::MissingColumn("perfusion_pu".into()))?;
    let mut t = Vec::new();
    let mut p = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |idx: usize, name: &str| -> Result<f64, DatasetError> {
            let raw = rec.get(idx).unwrap_or("");
            raw.parse::<f64>().map_err(|_| DatasetError::BadValue {
                row: row + 1,
                column: name.to_string(),
                reason: format!("'{raw}' is not a number"),
            })
        };
        t.push(parse(ti, "t_s")?);
        p.push(parse(pi, "perfusion_pu")?);
    }
    if t.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    RawSignal::new(t, p)
}

pub fn load_raw_signal(path: impl AsRef<Path>) -> Result<RawSignal, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_raw_signal(std::io::BufReader::new(file))
}

pub fn write_raw_signal<W: Write>(signal: &RawSignal, writer: W) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t_s", "perfusion_pu"])?;
    for (t, p) in signal.timestamps.iter().zip(&signal.perfusion) {
        w.write_record([t.to_string(), p.to_string()])?;
    }
    w.flush().map_err(|e| DatasetError::Io {
        path: "<writer>".into(),
        source: e,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_rate_from_span() {
        let sig = RawSignal::from_uniform(vec![1.0; 9600], 20.0).unwrap();
        assert!((sig.duration() - 479.95).abs() < 1e-9);
        assert!((sig.sample_rate() - 9599.0 / 479.95).abs() < 1e-9);
        assert!((sig.sample_rate() - 20.0).abs() < 1e-9);
        assert!(!sig.short_recording);
    }

    #[test]
    fn single_sample_too_short() {
        assert!(matches!(
            RawSignal::new(vec![0.0], vec![1.0]),
            Err(DatasetError::TooShort { .. })
        ));
    }

    #[test]
    fn non_monotonic_time() {
        let err = RawSignal::new(vec![0.0, 1.0, 0.5], vec![1.0; 3]).unwrap_err();
        assert!(matches!(err, DatasetError::NonMonotonicTime { index: 2 }));
    }

    #[test]
    fn jitter_rejected() {
        let mut t: Vec<f64> = (0..2000).map(|i| i as f64 * 0.05).collect();
        t[1000] += 0.002;
        assert!(matches!(
            RawSignal::new(t, vec![1.0; 2000]),
            Err(DatasetError::NonUniformSampling { .. })
        ));
    }

    #[test]
    fn short_recording_flagged() {
        let sig = RawSignal::from_uniform(vec![1.0; 2400], 20.0).unwrap();
        assert!(sig.short_recording);
        assert!(matches!(
            RawSignal::from_uniform(vec![1.0; 1000], 20.0),
            Err(DatasetError::TooShort { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let vals: Vec<f64> = (0..1400)
            .map(|i| 20.0 + (i as f64 * 0.37).sin() / 3.0)
            .collect();
        let sig = RawSignal::from_uniform(vals, 20.0).unwrap();
        let mut buf = Vec::new();
        write_raw_signal(&sig, &mut buf).unwrap();
        let back = read_raw_signal(buf.as_slice()).unwrap();
        assert_eq!(back, sig);
    }

    #[test]
    fn empty_file() {
        let err = read_raw_signal("t_s,perfusion_pu\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::EmptyFile));
    }
}
