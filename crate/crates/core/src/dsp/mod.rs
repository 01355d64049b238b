//! Preprocessing: notch, bandpass, bad-channel detection and interpolation,
//! common average reference, then epoching around the imagery phase.

mod bad_channels;
mod epoch;
mod fir;
mod overlap_add;
mod reference;
mod spline;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Montage, Session};
use crate::error::Result;

pub use bad_channels::{correlation_report, find_bad_by_correlation, BadChannelConfig, CorrelationReport};
pub use epoch::{epoch_trials, Epoch};
pub use fir::{design_bandpass, design_notch, BandpassSpec, FilterDesign, FirKernel, NotchSpec};
pub use overlap_add::{overlap_add_filter, OverlapAdd};
pub use reference::common_average_reference;
pub use spline::{interpolate_bads, spline_g, SplineConfig, SplineInterpolator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub notch_base_hz: f64,
    pub notch_width_hz: f64,
    pub bandpass_low_hz: f64,
    pub bandpass_high_hz: f64,
    pub bandpass_transition_hz: f64,
    pub bad_channels: BadChannelConfig,
    pub spline: SplineConfig,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            notch_base_hz: 50.0,
            notch_width_hz: 1.0,
            bandpass_low_hz: 3.0,
            bandpass_high_hz: 45.0,
            bandpass_transition_hz: 2.0,
            bad_channels: BadChannelConfig::default(),
            spline: SplineConfig::default(),
        }
    }
}

impl PreprocessConfig {
    pub fn notch_spec(&self, fs: f64) -> NotchSpec {
        NotchSpec {
            base_hz: self.notch_base_hz,
            notch_width_hz: self.notch_width_hz,
            fs,
        }
    }

    pub fn bandpass_spec(&self, fs: f64) -> BandpassSpec {
        BandpassSpec {
            low_hz: self.bandpass_low_hz,
            high_hz: self.bandpass_high_hz,
            transition_hz: self.bandpass_transition_hz,
            fs,
        }
    }
}

/// What preprocessing did to one session. Stored as a JSON sidecar next to
/// preprocessed session files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceNote {
    pub subject_id: String,
    pub session_index: u8,
    pub n_trials: usize,
    pub notch_taps: usize,
    pub bandpass_taps: usize,
    pub n_windows: usize,
    pub interpolated_channels: Vec<String>,
    pub bad_window_fraction: Vec<f64>,
}

/// Filter kernels designed once for a sampling rate and reused across sessions.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    config: PreprocessConfig,
    fs: f64,
    notch: FirKernel,
    bandpass: FirKernel,
    notch_ola: OverlapAdd,
    bandpass_ola: OverlapAdd,
}

impl Preprocessor {
    pub fn new(config: PreprocessConfig, fs: f64) -> Result<Self> {
        let notch = design_notch(&config.notch_spec(fs))?;
        let bandpass = design_bandpass(&config.bandpass_spec(fs))?;
        Ok(Preprocessor {
            config,
            fs,
            notch_ola: OverlapAdd::new(&notch),
            bandpass_ola: OverlapAdd::new(&bandpass),
            notch,
            bandpass,
        })
    }

    pub fn notch(&self) -> &FirKernel {
        &self.notch
    }

    pub fn bandpass(&self) -> &FirKernel {
        &self.bandpass
    }

    /// Notch then bandpass on every trial.
    pub fn filter(&self, session: &Session) -> Session {
        let mut out = session.clone();
        out.trials.par_iter_mut().for_each(|trial| {
            let notched = self.notch_ola.filter_rows(&trial.samples);
            trial.samples = self.bandpass_ola.filter_rows(&notched);
        });
        out
    }

    /// Runs notch, bandpass, bad-channel detection + spline interpolation and
    /// common average reference, in that order.
    pub fn run(&self, session: &Session, montage: &Montage) -> Result<(Session, ProvenanceNote)> {
        session.validate()?;
        if session.meta.sampling_rate_hz != self.fs {
            return Err(crate::Error::Config(format!(
                "preprocessor built for {} Hz, session recorded at {} Hz",
                self.fs, session.meta.sampling_rate_hz
            )));
        }
        let filtered = self.filter(session);
        let report = correlation_report(&filtered, &self.config.bad_channels)?;
        let mut cleaned = interpolate_bads(&filtered, montage, &report.bad_channels, &self.config.spline)?;
        cleaned
            .trials
            .par_iter_mut()
            .try_for_each(|t| -> Result<()> {
                *t = common_average_reference(t)?;
                Ok(())
            })?;
        let note = ProvenanceNote {
            subject_id: session.subject_id.clone(),
            session_index: session.session_index,
            n_trials: session.trials.len(),
            notch_taps: self.notch.len(),
            bandpass_taps: self.bandpass.len(),
            n_windows: report.n_windows,
            interpolated_channels: report
                .bad_channels
                .iter()
                .map(|&c| session.meta.channel_names[c].clone())
                .collect(),
            bad_window_fraction: report.bad_window_fraction,
        };
        Ok((cleaned, note))
    }
}

/// One-shot convenience around [`Preprocessor`].
pub fn preprocess_session(
    session: &Session,
    montage: &Montage,
    config: &PreprocessConfig,
) -> Result<(Session, ProvenanceNote)> {
    Preprocessor::new(*config, session.meta.sampling_rate_hz)?.run(session, montage)
}
