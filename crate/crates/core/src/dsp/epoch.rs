use ndarray::{s, Array2};

use crate::data::Session;
use crate::error::{Error, Result};

/// A fixed-length `channels x samples` window of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub label_id: u16,
    pub samples: Array2<f64>,
}

impl Epoch {
    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }
}

/// Cuts `window_s` seconds starting `offset_s` after imagery onset from every trial.
pub fn epoch_trials(session: &Session, window_s: f64, offset_s: f64) -> Result<Vec<Epoch>> {
    let fs = session.meta.sampling_rate_hz;
    let len = (window_s * fs).round();
    let offset = (offset_s * fs).round();
    if !(len >= 1.0) || !(offset >= 0.0) {
        return Err(Error::Config(format!(
            "epoch window {window_s} s / offset {offset_s} s gives no samples"
        )));
    }
    let (len, offset) = (len as usize, offset as usize);
    session
        .trials
        .iter()
        .enumerate()
        .map(|(i, trial)| {
            let onset = trial.imagery_onset(fs).ok_or(Error::TrialTooShort {
                trial: i,
                needed: ((crate::data::IMAGERY_S + crate::data::END_FIXATION_S) * fs).round() as usize,
                available: trial.n_samples(),
            })?;
            let start = onset + offset;
            if start + len > trial.n_samples() {
                return Err(Error::TrialTooShort {
                    trial: i,
                    needed: start + len,
                    available: trial.n_samples(),
                });
            }
            Ok(Epoch {
                label_id: trial.label_id,
                samples: trial.samples.slice(s![.., start..start + len]).to_owned(),
            })
        })
        .collect()
}
