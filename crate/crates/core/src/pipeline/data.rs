//! Loading a participant table, attaching wavelet features computed from raw
//! signals, and turning questionnaire responses into training labels.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, TaskName, WaveletConfig};
use super::PipelineError;
use crate::das21::{derive_labels, score_subscales, MulticlassPolicy};
use crate::dataset::{
    load_participants, load_raw_signal, LoadedTable, MeasurementRecord, SchemaConfig,
};
use crate::wavelet::{extract_features, WaveletFeatures};

/// Features of one signal file, keyed by file stem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFeatures {
    pub key: String,
    pub features: WaveletFeatures,
    /// Shorter than the nominal eight minutes.
    #[serde(default)]
    pub short_recording: bool,
}

pub fn load_schema(path: Option<&Path>) -> Result<SchemaConfig, PipelineError> {
    match path {
        Some(p) => SchemaConfig::load(p).map_err(|e| PipelineError::data("schema", e)),
        None => Ok(SchemaConfig::default()),
    }
}

/// Signal files (`*.csv`) of a directory, sorted by name.
pub fn signal_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| PipelineError::data("signals", format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Runs the wavelet stage over each file in parallel; output follows input order.
pub fn extract_signal_files(
    files: &[PathBuf],
    cfg: &WaveletConfig,
) -> Result<Vec<SignalFeatures>, PipelineError> {
    files
        .par_iter()
        .map(|path| {
            let ctx = path.display().to_string();
            let signal = load_raw_signal(path).map_err(|e| PipelineError::data(&ctx, e))?;
            let features = extract_features(&signal, &cfg.morlet, cfg.bands)
                .map_err(|e| PipelineError::data(&ctx, e))?;
            let key = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(SignalFeatures {
                key,
                features,
                short_recording: signal.short_recording,
            })
        })
        .collect()
}

pub fn signal_warnings(features: &[SignalFeatures], cfg: &WaveletConfig) -> Vec<String> {
    let mut out = Vec::new();
    let short: Vec<&str> = features
        .iter()
        .filter(|f| f.short_recording)
        .map(|f| f.key.as_str())
        .collect();
    if !short.is_empty() {
        out.push(format!(
            "{} recordings shorter than 480 s: {}",
            short.len(),
            short.join(", ")
        ));
    }
    if cfg.bands.ignore_coi {
        out.push("band amplitudes averaged over the full signal, cone of influence ignored".into());
    }
    out
}

/// Signal key candidates for a record: `<patient>_<hand>` then `<patient>`.
fn signal_keys(r: &MeasurementRecord) -> Vec<String> {
    let pid = &r.participant.patient_id;
    let mut keys = Vec::with_capacity(2);
    if let Some(h) = r.participant.hand {
        keys.push(format!("{pid}_{h}"));
    }
    keys.push(pid.clone());
    keys
}

/// Overwrites M, σ, Kv and the band columns of matching records. Returns the
/// number of records without a matching signal.
pub fn merge_signal_features(
    records: &mut [MeasurementRecord],
    features: &[SignalFeatures],
) -> usize {
    let by_key: BTreeMap<&str, &WaveletFeatures> = features
        .iter()
        .map(|f| (f.key.as_str(), &f.features))
        .collect();
    let mut unmatched = 0;
    for r in records.iter_mut() {
        match signal_keys(r).iter().find_map(|k| by_key.get(k.as_str())) {
            Some(f) => {
                r.sensor.m = Some(f.summary.m);
                r.sensor.sigma = Some(f.summary.sigma);
                r.sensor.kv100 = Some(f.summary.kv100);
                r.sensor.set_band(&f.band);
            }
            None => unmatched += 1,
        }
    }
    unmatched
}

/// Participant table with signal features merged in, plus load warnings.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub table: LoadedTable,
    pub schema: SchemaConfig,
    pub warnings: Vec<String>,
}

pub fn prepare(cfg: &RunConfig) -> Result<PreparedData, PipelineError> {
    let data = cfg
        .paths
        .data
        .as_ref()
        .ok_or_else(|| PipelineError::Config("paths.data is not set".into()))?;
    let schema = load_schema(cfg.paths.schema.as_deref())?;
    let mut table =
        load_participants(data, &schema).map_err(|e| PipelineError::data("participants", e))?;
    let mut warnings = Vec::new();
    for (row, reason) in &table.rejected {
        warnings.push(format!("row {row} rejected: {reason}"));
    }
    if let Some(dir) = &cfg.paths.signals {
        let files = signal_files(dir)?;
        let features = extract_signal_files(&files, &cfg.wavelet)?;
        warnings.extend(signal_warnings(&features, &cfg.wavelet));
        let unmatched = merge_signal_features(&mut table.records, &features);
        if unmatched > 0 {
            warnings.push(format!(
                "{unmatched} records have no signal file; table values kept"
            ));
        }
    }
    Ok(PreparedData {
        table,
        schema,
        warnings,
    })
}

/// Class label of every record for a task; `None` when the record has no
/// questionnaire or no class under the multiclass policy.
pub fn task_labels(
    records: &[MeasurementRecord],
    task: TaskName,
    policy: MulticlassPolicy,
) -> Vec<Option<usize>> {
    records
        .iter()
        .map(|r| {
            let scores = score_subscales(r.das21.as_ref()?);
            let label = derive_labels(&scores, policy);
            match task {
                TaskName::Binary => Some(label.binary.as_index()),
                TaskName::Multiclass => label.multiclass.map(|m| m.as_index()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::das21::Das21Response;
    use crate::dataset::Hand;
    use crate::wavelet::{BandFeatures, LdfSummary};

    fn record(pid: &str, hand: Option<Hand>) -> MeasurementRecord {
        let mut r = MeasurementRecord::default();
        r.participant.patient_id = pid.into();
        r.participant.hand = hand;
        r
    }

    fn features(key: &str, m: f64) -> SignalFeatures {
        SignalFeatures {
            key: key.into(),
            features: WaveletFeatures {
                band: BandFeatures::from_parts([1.0; 5], [0.01, 0.03, 0.1, 0.3, 1.0]),
                summary: LdfSummary {
                    m,
                    sigma: 1.0,
                    kv100: 100.0 / m,
                },
            },
            short_recording: false,
        }
    }

    #[test]
    fn merge_prefers_hand_specific_file() {
        let mut recs = vec![
            record("p1", Some(Hand::Left)),
            record("p1", Some(Hand::Right)),
            record("p2", None),
        ];
        let feats = vec![features("p1_left", 10.0), features("p1", 20.0)];
        assert_eq!(merge_signal_features(&mut recs, &feats), 1);
        assert_eq!(recs[0].sensor.m, Some(10.0));
        assert_eq!(recs[1].sensor.m, Some(20.0));
        assert_eq!(recs[2].sensor.m, None);
        assert_eq!(recs[0].sensor.band_frequency[2], Some(0.1));
    }

    #[test]
    fn labels_follow_policy() {
        let mut a = record("a", None);
        a.das21 = Some(Das21Response::new(&[0; 21]).unwrap());
        let mut b = record("b", None);
        // depression only: abnormal but not a canonical class
        let mut items = [0i64; 21];
        for i in crate::das21::DEPRESSION_ITEMS {
            items[i - 1] = 3;
        }
        b.das21 = Some(Das21Response::new(&items).unwrap());
        let c = record("c", None);
        let recs = [a, b, c];
        assert_eq!(
            task_labels(&recs, TaskName::Binary, MulticlassPolicy::Strict),
            vec![Some(0), Some(1), None]
        );
        assert_eq!(
            task_labels(&recs, TaskName::Multiclass, MulticlassPolicy::Strict),
            vec![Some(0), None, None]
        );
        assert_eq!(
            task_labels(&recs, TaskName::Multiclass, MulticlassPolicy::Rank),
            vec![Some(0), Some(1), None]
        );
    }
}
