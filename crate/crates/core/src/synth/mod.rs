//! Deterministic synthetic datasets that follow the acquisition protocol
//! (five sessions per subject, 250 Hz, 30 electrodes, 4-5 s trials) and
//! carry a subject-specific spectral-spatial signature.
//!
//! # Randomness
//!
//! Every random stream is a ChaCha8 generator (`rand_chacha`) seeded with a
//! SplitMix64 mix of `(master seed, stream tag, subject, session)`. Each
//! `(subject, session)` pair owns its stream, so parallel and serial
//! generation produce the same bytes.

mod config;
mod inject;
mod signature;

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{
    canonical_channel_names, default_labels, save_manifest, session_file_name, write_session,
    DatasetManifest, RecordingMeta, Session, SessionEntry, SubjectEntry, Trial, N_LABELS,
};
use crate::error::{Error, Result};
use crate::rng::stream;

pub use config::{SignalModel, SynthConfig, TrialTiming};
pub use inject::{inject_bad_channel, inject_line_noise, BadChannelMode};
pub use signature::{separability_check, SeparabilityReport, SubjectSignature, BANDS};

/// Participant table of the reference cohort: (gender, age).
const COHORT: [(&str, u32); 11] = [
    ("male", 23),
    ("male", 24),
    ("male", 22),
    ("male", 24),
    ("male", 21),
    ("male", 21),
    ("male", 24),
    ("female", 27),
    ("female", 28),
    ("female", 21),
    ("female", 27),
];

const TAG_SIGNATURE: u64 = 1;
const TAG_SESSION: u64 = 2;

pub fn subject_id(index: usize) -> String {
    format!("Sub-{:02}", index + 1)
}

/// Generates one session of one subject in memory.
pub fn synth_session(
    config: &SynthConfig,
    signature: &SubjectSignature,
    subject: usize,
    session_index: u8,
) -> Result<Session> {
    config.validate()?;
    let k = session_index as usize;
    let n_trials = *config
        .trials_per_session
        .get(k.wrapping_sub(1))
        .ok_or_else(|| Error::Config(format!("session {session_index} not configured")))?;
    let mut rng = stream(config.seed, TAG_SESSION, subject as u64, k as u64);
    let fs = config.fs;
    let n_ch = config.n_channels;
    let drift = config.signal.session_gain_drift;
    let gains: Vec<f64> = (0..n_ch).map(|_| 1.0 + rng.random_range(-drift..=drift)).collect();
    let mut trials = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let pre_s = rng.random_range(config.timing.pre_fixation_min_s..=config.timing.pre_fixation_max_s);
        let n_samples = (pre_s * fs).round() as usize
            + ((config.timing.imagery_s + config.timing.end_fixation_s) * fs).round() as usize;
        let label_id = rng.random_range(0..N_LABELS as u16);
        let bad = rng.random_bool(config.bad_trial_probability);
        let mut samples = signature.generate(n_samples, &mut rng);
        for (mut row, g) in samples.rows_mut().into_iter().zip(&gains) {
            row *= *g;
        }
        add_sensor_and_line_noise(&mut samples, config, &mut rng);
        // stored precision
        samples.mapv_inplace(|v| v as f32 as f64);
        trials.push(Trial {
            label_id,
            bad,
            samples,
        });
    }
    Ok(Session {
        subject_id: subject_id(subject),
        session_index,
        meta: RecordingMeta::new(fs, canonical_channel_names()[..n_ch].to_vec())?,
        trials,
    })
}

fn add_sensor_and_line_noise(samples: &mut Array2<f64>, config: &SynthConfig, rng: &mut ChaCha8Rng) {
    let sensor = config.signal.sensor_noise_uv;
    let amp = config.line_noise_amplitude_uv;
    let w = 2.0 * std::f64::consts::PI * 50.0 / config.fs;
    for mut row in samples.rows_mut() {
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        for (t, v) in row.iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            *v += sensor * noise + amp * (w * t as f64 + phase).sin();
        }
    }
}

/// Writes one CEEG file per (subject, session) and `manifest.json` into `out_dir`.
pub fn synth_dataset(config: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let signatures: Vec<SubjectSignature> = (0..config.n_subjects)
        .map(|s| SubjectSignature::generate_for(config, s))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u8)> = (0..config.n_subjects)
        .flat_map(|s| (1..=config.trials_per_session.len() as u8).map(move |k| (s, k)))
        .collect();
    let entries: Vec<(usize, SessionEntry)> = jobs
        .par_iter()
        .map(|&(subject, k)| {
            let session = synth_session(config, &signatures[subject], subject, k)?;
            let file = session_file_name(&session.subject_id, k);
            write_session(&session, out_dir.join(&file))?;
            Ok((
                subject,
                SessionEntry {
                    index: k,
                    path: PathBuf::from(file),
                    n_trials: session.trials.len(),
                },
            ))
        })
        .collect::<Result<_>>()?;
    let subjects = (0..config.n_subjects)
        .map(|s| {
            let (gender, age) = COHORT
                .get(s)
                .map(|&(g, a)| (g.to_string(), Some(a)))
                .unwrap_or_else(|| ("unspecified".to_string(), None));
            SubjectEntry {
                id: subject_id(s),
                gender,
                age,
                sessions: entries
                    .iter()
                    .filter(|(subj, _)| *subj == s)
                    .map(|(_, e)| e.clone())
                    .collect(),
            }
        })
        .collect();
    let manifest = DatasetManifest {
        sampling_rate_hz: config.fs,
        labels: default_labels(),
        subjects,
        preprocessing: None,
    };
    save_manifest(&manifest, out_dir.join("manifest.json"))?;
    Ok(manifest)
}
