use serde::{Deserialize, Serialize};

use crate::data::{canonical_channel_names, END_FIXATION_S, IMAGERY_S, DEFAULT_SAMPLING_RATE_HZ};
use crate::error::{Error, Result};
use crate::kv::{join_list, KeyValues};

/// Phase durations of one trial, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialTiming {
    pub pre_fixation_min_s: f64,
    pub pre_fixation_max_s: f64,
    pub imagery_s: f64,
    pub end_fixation_s: f64,
}

impl Default for TrialTiming {
    fn default() -> Self {
        TrialTiming {
            pre_fixation_min_s: 1.0,
            pre_fixation_max_s: 2.0,
            imagery_s: IMAGERY_S,
            end_fixation_s: END_FIXATION_S,
        }
    }
}

/// Knobs of the synthetic signal model. Amplitudes are in microvolts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    /// RMS amplitude of the subject signal per channel.
    pub amplitude_uv: f64,
    /// Log-normal spread of each subject's per-band weights.
    pub band_weight_spread: f64,
    /// Strength of each band's spatial focus relative to its uniform floor.
    pub spatial_focus_gain: f64,
    /// Share of source power in a subject-independent broadband background.
    pub background_fraction: f64,
    /// White sensor noise added after mixing.
    pub sensor_noise_uv: f64,
    /// Half-width of the uniform per-session, per-channel gain perturbation.
    pub session_gain_drift: f64,
}

impl Default for SignalModel {
    fn default() -> Self {
        SignalModel {
            amplitude_uv: 15.0,
            band_weight_spread: 0.35,
            spatial_focus_gain: 1.0,
            background_fraction: 0.3,
            sensor_noise_uv: 1.5,
            session_gain_drift: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub trials_per_session: Vec<usize>,
    pub fs: f64,
    pub n_channels: usize,
    pub bad_trial_probability: f64,
    pub line_noise_amplitude_uv: f64,
    pub seed: u64,
    pub timing: TrialTiming,
    pub signal: SignalModel,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 11,
            trials_per_session: vec![100, 100, 100, 50, 50],
            fs: DEFAULT_SAMPLING_RATE_HZ,
            n_channels: 30,
            bad_trial_probability: 0.01,
            line_noise_amplitude_uv: 5.0,
            seed: 42,
            timing: TrialTiming::default(),
            signal: SignalModel::default(),
        }
    }
}

const KEYS: &[&str] = &[
    "n_subjects",
    "trials_per_session",
    "fs",
    "n_channels",
    "bad_trial_probability",
    "line_noise_amplitude_uv",
    "seed",
    "pre_fixation_min_s",
    "pre_fixation_max_s",
    "amplitude_uv",
    "band_weight_spread",
    "spatial_focus_gain",
    "background_fraction",
    "sensor_noise_uv",
    "session_gain_drift",
];

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_subjects == 0 {
            return fail("n_subjects must be positive".into());
        }
        if self.trials_per_session.is_empty()
            || self.trials_per_session.len() > 5
            || self.trials_per_session.contains(&0)
        {
            return fail("trials_per_session needs 1..=5 positive counts".into());
        }
        let max_ch = canonical_channel_names().len();
        if self.n_channels < 2 || self.n_channels > max_ch {
            return fail(format!("n_channels must be in 2..={max_ch}"));
        }
        if !(self.fs > 100.0) {
            return fail("fs must exceed 100 Hz so 50 Hz line noise is representable".into());
        }
        if !(0.0..=1.0).contains(&self.bad_trial_probability) {
            return fail("bad_trial_probability must lie in [0, 1]".into());
        }
        let t = &self.timing;
        if !(t.pre_fixation_min_s >= 0.0 && t.pre_fixation_min_s <= t.pre_fixation_max_s) {
            return fail("pre-fixation range is empty".into());
        }
        let s = &self.signal;
        let non_neg = [
            s.amplitude_uv,
            s.band_weight_spread,
            s.spatial_focus_gain,
            s.sensor_noise_uv,
            s.session_gain_drift,
            self.line_noise_amplitude_uv,
        ];
        if non_neg.iter().any(|v| !(*v >= 0.0)) || !(0.0..1.0).contains(&s.background_fraction) {
            return fail("signal model parameters out of range".into());
        }
        Ok(())
    }

    pub fn total_trials(&self) -> usize {
        self.n_subjects * self.trials_per_session.iter().sum::<usize>()
    }

    pub fn apply_key_values(&mut self, kv: &KeyValues) -> Result<()> {
        kv.reject_unknown(KEYS)?;
        kv.set("n_subjects", &mut self.n_subjects)?;
        kv.set_list("trials_per_session", &mut self.trials_per_session)?;
        kv.set("fs", &mut self.fs)?;
        kv.set("n_channels", &mut self.n_channels)?;
        kv.set("bad_trial_probability", &mut self.bad_trial_probability)?;
        kv.set("line_noise_amplitude_uv", &mut self.line_noise_amplitude_uv)?;
        kv.set("seed", &mut self.seed)?;
        kv.set("pre_fixation_min_s", &mut self.timing.pre_fixation_min_s)?;
        kv.set("pre_fixation_max_s", &mut self.timing.pre_fixation_max_s)?;
        kv.set("amplitude_uv", &mut self.signal.amplitude_uv)?;
        kv.set("band_weight_spread", &mut self.signal.band_weight_spread)?;
        kv.set("spatial_focus_gain", &mut self.signal.spatial_focus_gain)?;
        kv.set("background_fraction", &mut self.signal.background_fraction)?;
        kv.set("sensor_noise_uv", &mut self.signal.sensor_noise_uv)?;
        kv.set("session_gain_drift", &mut self.signal.session_gain_drift)?;
        self.validate()
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.insert("n_subjects", self.n_subjects);
        kv.insert("trials_per_session", join_list(&self.trials_per_session));
        kv.insert("fs", self.fs);
        kv.insert("n_channels", self.n_channels);
        kv.insert("bad_trial_probability", self.bad_trial_probability);
        kv.insert("line_noise_amplitude_uv", self.line_noise_amplitude_uv);
        kv.insert("seed", self.seed);
        kv.insert("pre_fixation_min_s", self.timing.pre_fixation_min_s);
        kv.insert("pre_fixation_max_s", self.timing.pre_fixation_max_s);
        kv.insert("amplitude_uv", self.signal.amplitude_uv);
        kv.insert("band_weight_spread", self.signal.band_weight_spread);
        kv.insert("spatial_focus_gain", self.signal.spatial_focus_gain);
        kv.insert("background_fraction", self.signal.background_fraction);
        kv.insert("sensor_noise_uv", self.signal.sensor_noise_uv);
        kv.insert("session_gain_drift", self.signal.session_gain_drift);
        kv
    }
}
