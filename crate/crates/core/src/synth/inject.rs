use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::stream;
use crate::data::{Session, Trial};
use crate::error::{Error, Result};

const TAG_LINE: u64 = 3;
const TAG_BAD: u64 = 4;

/// Replacement signal for a faulty electrode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BadChannelMode {
    /// Independent Gaussian noise with the given standard deviation.
    WhiteNoise { std_uv: f64 },
    /// A constant value.
    Flatline { value_uv: f64 },
}

/// Adds `amplitude_uv * sin(2π f t + φ_c)` to every channel, with one
/// seeded random phase per channel.
pub fn inject_line_noise(trial: &Trial, fs: f64, freq_hz: f64, amplitude_uv: f64, seed: u64) -> Result<Trial> {
    if !(freq_hz < fs / 2.0) {
        return Err(Error::AboveNyquist {
            freq_hz,
            nyquist_hz: fs / 2.0,
        });
    }
    let mut rng = stream(seed, TAG_LINE, 0, 0);
    let w = TAU * freq_hz / fs;
    let mut out = trial.clone();
    for mut row in out.samples.rows_mut() {
        let phase = rng.random_range(0.0..TAU);
        for (t, v) in row.iter_mut().enumerate() {
            *v += amplitude_uv * (w * t as f64 + phase).sin();
        }
    }
    Ok(out)
}

/// Overwrites `channel` in every trial; other channels are left untouched.
pub fn inject_bad_channel(session: &Session, channel: usize, mode: BadChannelMode, seed: u64) -> Result<Session> {
    let n_channels = session.meta.n_channels();
    if channel >= n_channels {
        return Err(Error::ChannelIndex {
            index: channel,
            n_channels,
        });
    }
    let mut rng = stream(seed, TAG_BAD, channel as u64, session.session_index as u64);
    let mut out = session.clone();
    for trial in &mut out.trials {
        let mut row = trial.samples.row_mut(channel);
        match mode {
            BadChannelMode::WhiteNoise { std_uv } => {
                row.iter_mut().for_each(|v| *v = std_uv * rng.sample::<f64, _>(StandardNormal));
            }
            BadChannelMode::Flatline { value_uv } => row.fill(value_uv),
        }
    }
    Ok(out)
}
