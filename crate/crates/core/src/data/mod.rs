//! Domain types for recordings, the CEEG v1 session file, the JSON dataset
//! manifest, the electrode montage and the plain-text importer.

mod ceeg;
pub mod import;
mod manifest;
mod montage;

use std::collections::HashSet;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use ceeg::{encoded_len, read_recording, read_session, read_session_as, session_file_name, write_session};
pub use manifest::{
    default_labels, load_manifest, save_manifest, session_paths, DatasetManifest, LabelEntry, PreprocessingNote,
    SessionEntry, SubjectEntry,
};
pub use montage::{builtin_montage, canonical_channel_names, Montage, MONTAGE_VERSION};

/// Number of words in the imagery vocabulary.
pub const N_LABELS: usize = 5;

/// Sampling rate of the reference acquisition setup.
pub const DEFAULT_SAMPLING_RATE_HZ: f64 = 250.0;

/// Imagery phase duration in seconds.
pub const IMAGERY_S: f64 = 2.0;
/// Fixation after the imagery phase, in seconds.
pub const END_FIXATION_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RecordingMeta {
    pub sampling_rate_hz: f64,
    pub channel_names: Vec<String>,
}

impl RecordingMeta {
    pub fn new(sampling_rate_hz: f64, channel_names: Vec<String>) -> Result<Self> {
        let meta = RecordingMeta {
            sampling_rate_hz,
            channel_names,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(Error::Invariant(format!(
                "sampling rate must be positive, got {}",
                self.sampling_rate_hz
            )));
        }
        if self.channel_names.is_empty() {
            return Err(Error::Invariant("recording has 0 channels".into()));
        }
        if self.channel_names.len() > u16::MAX as usize {
            return Err(Error::Invariant("too many channels".into()));
        }
        let mut seen = HashSet::new();
        for name in &self.channel_names {
            if name.is_empty() || name.len() > u8::MAX as usize {
                return Err(Error::Invariant(format!(
                    "channel name {name:?} must be 1..=255 bytes"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Invariant(format!("duplicate channel name {name:?}")));
            }
        }
        Ok(())
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|c| c == name)
    }
}

/// One trial: a channel-major sample matrix (rows = channels, microvolts).
///
/// Amplitudes are held as `f64` in memory and stored as `f32` on disk, so
/// writing rounds values that are not representable in single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub label_id: u16,
    pub bad: bool,
    pub samples: Array2<f64>,
}

impl Trial {
    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    /// Sample index at which the imagery phase starts.
    ///
    /// Trials are end-aligned: the last `(imagery + end fixation) * fs`
    /// samples are the imagery window followed by the end fixation, and
    /// whatever precedes them is the variable pre-fixation.
    pub fn imagery_onset(&self, sampling_rate_hz: f64) -> Option<usize> {
        let tail = ((IMAGERY_S + END_FIXATION_S) * sampling_rate_hz).round() as usize;
        self.n_samples().checked_sub(tail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub subject_id: String,
    pub session_index: u8,
    pub meta: RecordingMeta,
    pub trials: Vec<Trial>,
}

impl Session {
    pub fn validate(&self) -> Result<()> {
        self.meta.validate()?;
        if self.subject_id.is_empty() {
            return Err(Error::Invariant("empty subject id".into()));
        }
        if !(1..=5).contains(&self.session_index) {
            return Err(Error::Invariant(format!(
                "session index {} outside 1..=5",
                self.session_index
            )));
        }
        let n_ch = self.meta.n_channels();
        for (i, trial) in self.trials.iter().enumerate() {
            if trial.label_id as usize >= N_LABELS {
                return Err(Error::Invariant(format!(
                    "trial {i}: label {} outside 0..{N_LABELS}",
                    trial.label_id
                )));
            }
            if trial.n_channels() != n_ch {
                return Err(Error::Invariant(format!(
                    "trial {i}: {} rows but {n_ch} channels",
                    trial.n_channels()
                )));
            }
            if trial.n_samples() == 0 {
                return Err(Error::Invariant(format!("trial {i}: no samples")));
            }
            if let Some(((ch, s), _)) = trial.samples.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFiniteAmplitude {
                    trial: i,
                    channel: ch,
                    sample: s,
                });
            }
        }
        Ok(())
    }

    pub fn n_bad_trials(&self) -> usize {
        self.trials.iter().filter(|t| t.bad).count()
    }
}

/// Keeps only the trials not flagged bad, preserving order.
pub fn drop_bad_trials(session: Session) -> Session {
    let Session {
        subject_id,
        session_index,
        meta,
        trials,
    } = session;
    Session {
        subject_id,
        session_index,
        meta,
        trials: trials.into_iter().filter(|t| !t.bad).collect(),
    }
}
