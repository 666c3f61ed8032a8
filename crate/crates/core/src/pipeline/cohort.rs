//! Synthetic cohorts: demographics, questionnaire responses and raw perfusion
//! signals where one oscillation band's amplitude tracks the class.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::das21::{Das21Response, Subscale, N_ITEMS};
use crate::dataset::{
    write_participants, write_raw_signal, Gender, Hand, MeasurementRecord, ParticipantRecord, Race,
    RawSignal, SensorFeatureVector, SleepState, Smoking,
};
use crate::models::derive_seed;
use crate::wavelet::{synthesize_signal, BandName, SynthSpec, ToneComponent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_patients: usize,
    /// 1 (right hand) or 2 (left and right).
    pub hands: usize,
    /// 2: amplitude follows normal/abnormal. 4: it follows the multiclass
    /// index (normal, stress, stress+anxiety, all three).
    pub classes: usize,
    /// Share of patients that are not all-Normal.
    pub abnormal_fraction: f64,
    pub planted_band: BandName,
    /// PU amplitude of the planted band for class 0.
    pub base_amplitude: f64,
    /// Relative amplitude increase per class step.
    pub effect: f64,
    /// Log-normal spread of per-recording amplitudes.
    pub amplitude_jitter: f64,
    pub noise_sigma: f64,
    pub duration: f64,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            n_patients: 60,
            hands: 2,
            classes: 2,
            abnormal_fraction: 0.5,
            planted_band: BandName::Myogenic,
            base_amplitude: 1.0,
            effect: 0.6,
            amplitude_jitter: 0.2,
            noise_sigma: 0.5,
            duration: 480.0,
            sample_rate: 20.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub records: Vec<MeasurementRecord>,
    /// `(file stem, signal)` parallel to `records`.
    pub signals: Vec<(String, RawSignal)>,
    /// Multiclass index per patient record (0..4), before any policy.
    pub classes: Vec<usize>,
}

/// Frequency range and amplitude range of the background tone in each band.
const BACKGROUND: [(f64, f64, f64, f64); 5] = [
    (0.011, 0.018, 0.6, 1.4),
    (0.025, 0.050, 0.6, 1.4),
    (0.070, 0.140, 0.6, 1.4),
    (0.200, 0.350, 0.3, 0.8),
    (0.900, 1.300, 0.5, 1.2),
];

/// Fills `n` item slots (each 0..=3) summing to `total`.
fn spread(rng: &mut ChaCha8Rng, n: usize, total: usize) -> Vec<i64> {
    let mut v = vec![0i64; n];
    let mut left = total.min(3 * n);
    while left > 0 {
        let i = rng.gen_range(0..n);
        if v[i] < 3 {
            v[i] += 1;
            left -= 1;
        }
    }
    v
}

/// Items whose abnormal subscales are the first `chain` of stress, anxiety,
/// depression.
fn responses(rng: &mut ChaCha8Rng, chain: usize) -> Das21Response {
    let mut items = [0i64; N_ITEMS];
    for (pos, sub) in [Subscale::Stress, Subscale::Anxiety, Subscale::Depression]
        .iter()
        .enumerate()
    {
        // raw sums of 0..=3 stay Normal on every subscale; 10..=21 are above
        // Normal on every subscale
        let total = if pos < chain {
            rng.gen_range(10..=21)
        } else {
            rng.gen_range(0..=3)
        };
        for (slot, v) in sub.items().iter().zip(spread(rng, 7, total)) {
            items[slot - 1] = v;
        }
    }
    Das21Response::new(&items).expect("items in range")
}

fn participant(rng: &mut ChaCha8Rng, pid: String, hand: Hand) -> ParticipantRecord {
    let height: f64 = Normal::new(170.0, 9.0).unwrap().sample(rng);
    let weight: f64 = Normal::new(70.0, 11.0).unwrap().sample(rng);
    let bmi = (weight / (height / 100.0).powi(2) * 10.0).round() / 10.0;
    ParticipantRecord {
        patient_id: pid,
        age: Some(rng.gen_range(18..=70)),
        gender: Some(*Gender::ALL.choose(rng).unwrap()),
        race: Some(*Race::ALL.choose(rng).unwrap()),
        height: Some((height * 10.0).round() / 10.0),
        weight: Some((weight * 10.0).round() / 10.0),
        bmi_index: Some(bmi),
        heart_rate: Some(Normal::<f64>::new(72.0, 8.0).unwrap().sample(rng).round()),
        bp_level: Some(["low", "normal", "high"].choose(rng).unwrap().to_string()),
        smoking_routine: Some(*Smoking::ALL.choose(rng).unwrap()),
        skin_type: Some(rng.gen_range(1..=4).to_string()),
        hand: Some(hand),
        sleep_state: Some(SleepState::Awake),
        data_type: Some("ldf".into()),
    }
}

pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort, PipelineError> {
    if spec.n_patients < 2
        || !(1..=2).contains(&spec.hands)
        || !(spec.classes == 2 || spec.classes == 4)
    {
        return Err(PipelineError::Config(
            "cohort needs at least 2 patients, 1 or 2 hands and 2 or 4 classes".into(),
        ));
    }
    let hands: &[Hand] = if spec.hands == 2 {
        &[Hand::Left, Hand::Right]
    } else {
        &[Hand::Right]
    };
    let per_patient: Vec<
        Result<Vec<(MeasurementRecord, String, RawSignal, usize)>, PipelineError>,
    > = (0..spec.n_patients)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, i as u64));
            let pid = format!("P{:03}", i + 1);
            let chain = if rng.gen_bool(spec.abnormal_fraction.clamp(0.0, 1.0)) {
                rng.gen_range(1..=3)
            } else {
                0
            };
            let level = if spec.classes == 2 {
                usize::from(chain > 0)
            } else {
                chain
            };
            let das = responses(&mut rng, chain);
            let a365: f64 = rng.gen_range(2.0..5.0);
            let a460: f64 = rng.gen_range(0.5..2.0);
            let sensor = SensorFeatureVector {
                a365: Some(a365),
                a460: Some(a460),
                anadh: Some(a460 / a365),
                pom: Some(rng.gen_range(0.5..2.0)),
                temperature: Some(Normal::new(31.0, 1.5).unwrap().sample(&mut rng)),
                ..Default::default()
            };
            let jitter = Normal::new(0.0, spec.amplitude_jitter.max(0.0)).unwrap();
            hands
                .iter()
                .map(|&hand| {
                    let mut components = Vec::with_capacity(5);
                    for (b, &(f_lo, f_hi, a_lo, a_hi)) in BACKGROUND.iter().enumerate() {
                        let frequency = rng.gen_range(f_lo..f_hi);
                        let mut amplitude = rng.gen_range(a_lo..a_hi);
                        if b == spec.planted_band as usize {
                            amplitude = spec.base_amplitude
                                * (1.0 + spec.effect * level as f64)
                                * jitter.sample(&mut rng).exp();
                        }
                        components.push(ToneComponent {
                            frequency,
                            amplitude,
                            phase: rng.gen_range(0.0..std::f64::consts::TAU),
                        });
                    }
                    let synth = SynthSpec {
                        components,
                        baseline: rng.gen_range(12.0..30.0),
                        noise_sigma: spec.noise_sigma,
                        duration: spec.duration,
                        sample_rate: spec.sample_rate,
                        seed: rng.gen(),
                    };
                    let signal =
                        synthesize_signal(&synth).map_err(|e| PipelineError::data("synth", e))?;
                    let record = MeasurementRecord {
                        participant: participant(&mut rng, pid.clone(), hand),
                        sensor: sensor.clone(),
                        das21: Some(das),
                        extras: Default::default(),
                    };
                    Ok((record, format!("{pid}_{hand}"), signal, chain))
                })
                .collect()
        })
        .collect();

    let mut cohort = Cohort {
        records: Vec::new(),
        signals: Vec::new(),
        classes: Vec::new(),
    };
    for rows in per_patient {
        for (record, key, signal, chain) in rows? {
            cohort.records.push(record);
            cohort.signals.push((key, signal));
            cohort.classes.push(chain);
        }
    }
    Ok(cohort)
}

/// Writes `participants.csv` and `signals/<key>.csv` under `dir`.
pub fn write_cohort(cohort: &Cohort, dir: &Path) -> Result<(), PipelineError> {
    let io = |e: std::io::Error| PipelineError::Io(format!("{}: {e}", dir.display()));
    let sig_dir = dir.join("signals");
    std::fs::create_dir_all(&sig_dir).map_err(io)?;
    let file = std::fs::File::create(dir.join("participants.csv")).map_err(io)?;
    write_participants(&cohort.records, &[], std::io::BufWriter::new(file))
        .map_err(|e| PipelineError::data("participants", e))?;
    cohort.signals.par_iter().try_for_each(|(key, signal)| {
        let path = sig_dir.join(format!("{key}.csv"));
        let file = std::fs::File::create(&path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        write_raw_signal(signal, std::io::BufWriter::new(file))
            .map_err(|e| PipelineError::data(&path.display().to_string(), e))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::das21::{derive_labels, score_subscales, MulticlassLabel, MulticlassPolicy};

    #[test]
    fn questionnaire_matches_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for chain in 0..4 {
            for _ in 0..50 {
                let label = derive_labels(
                    &score_subscales(&responses(&mut rng, chain)),
                    MulticlassPolicy::Strict,
                );
                assert_eq!(label.multiclass, Some(MulticlassLabel::ALL[chain]));
            }
        }
    }

    #[test]
    fn cohort_is_seeded_and_consistent() {
        let spec = CohortSpec {
            n_patients: 6,
            duration: 120.0,
            ..Default::default()
        };
        let a = generate_cohort(&spec).unwrap();
        let b = generate_cohort(&spec).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records.len(), 12);
        assert_eq!(a.signals[3].1.perfusion(), b.signals[3].1.perfusion());
        assert!(a.records.iter().all(|r| !r.participant.bmi_inconsistent()));
        assert_eq!(
            a.records[0].participant.patient_id,
            a.records[1].participant.patient_id
        );
        assert_eq!(a.signals[0].0, "P001_left");
    }
}
