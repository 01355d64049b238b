use std::collections::BTreeSet;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::data::Session;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadChannelConfig {
    pub window_s: f64,
    pub correlation_threshold: f64,
    pub bad_fraction_threshold: f64,
}

impl Default for BadChannelConfig {
    fn default() -> Self {
        BadChannelConfig {
            window_s: 1.0,
            correlation_threshold: 0.4,
            bad_fraction_threshold: 0.02,
        }
    }
}

impl BadChannelConfig {
    fn window_len(&self, fs: f64) -> Result<usize> {
        for (name, v) in [
            ("correlation_threshold", self.correlation_threshold),
            ("bad_fraction_threshold", self.bad_fraction_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        let len = self.window_s * fs;
        if !(len >= 1.0) || (len - len.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "window of {} s at {fs} Hz is not a whole number of samples",
                self.window_s
            )));
        }
        Ok(len.round() as usize)
    }
}

/// Per-channel outcome of the correlation criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n_windows: usize,
    pub bad_window_fraction: Vec<f64>,
    pub bad_channels: BTreeSet<usize>,
}

/// Largest absolute Pearson correlation of each row with any other row.
/// Rows with zero variance get 0 and contribute 0 to their partners.
fn max_abs_correlation(window: ndarray::ArrayView2<f64>) -> Vec<f64> {
    let n_ch = window.nrows();
    let len = window.ncols() as f64;
    let mut centered = window.to_owned();
    let mut norms = vec![0.0; n_ch];
    for (c, mut row) in centered.rows_mut().into_iter().enumerate() {
        let mean = row.sum() / len;
        row.mapv_inplace(|v| v - mean);
        norms[c] = row.dot(&row).sqrt();
    }
    let mut best = vec![0.0f64; n_ch];
    for a in 0..n_ch {
        if norms[a] == 0.0 {
            continue;
        }
        let ra = centered.row(a);
        for b in a + 1..n_ch {
            if norms[b] == 0.0 {
                continue;
            }
            let r = (ra.dot(&centered.row(b)) / (norms[a] * norms[b])).abs();
            best[a] = best[a].max(r);
            best[b] = best[b].max(r);
        }
    }
    best
}

/// Concatenates a session's trials channel-wise.
fn concatenate(session: &Session) -> Array2<f64> {
    let total: usize = session.trials.iter().map(|t| t.n_samples()).sum();
    let mut out = Array2::zeros((session.meta.n_channels(), total));
    let mut at = 0;
    for t in &session.trials {
        out.slice_mut(s![.., at..at + t.n_samples()]).assign(&t.samples);
        at += t.n_samples();
    }
    out
}

pub fn correlation_report(session: &Session, config: &BadChannelConfig) -> Result<CorrelationReport> {
    let n_ch = session.meta.n_channels();
    if n_ch < 2 {
        return Err(Error::TooFewChannels {
            required: 2,
            found: n_ch,
        });
    }
    if session.trials.is_empty() {
        return Err(Error::Empty("session has no trials".into()));
    }
    let win = config.window_len(session.meta.sampling_rate_hz)?;
    if let Some((i, t)) = session.trials.iter().enumerate().find(|(_, t)| t.n_samples() < win) {
        return Err(Error::TrialTooShort {
            trial: i,
            needed: win,
            available: t.n_samples(),
        });
    }
    let data = concatenate(session);
    let n_windows = data.ncols() / win;
    let mut bad_counts = vec![0usize; n_ch];
    for w in 0..n_windows {
        let best = max_abs_correlation(data.slice(s![.., w * win..(w + 1) * win]));
        for (count, r) in bad_counts.iter_mut().zip(best) {
            if r < config.correlation_threshold {
                *count += 1;
            }
        }
    }
    let bad_window_fraction: Vec<f64> = bad_counts.iter().map(|&c| c as f64 / n_windows as f64).collect();
    let bad_channels = bad_window_fraction
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > config.bad_fraction_threshold)
        .map(|(c, _)| c)
        .collect();
    Ok(CorrelationReport {
        n_windows,
        bad_window_fraction,
        bad_channels,
    })
}

/// Channels whose fraction of poorly correlated 1 s windows exceeds the threshold.
pub fn find_bad_by_correlation(session: &Session, config: &BadChannelConfig) -> Result<BTreeSet<usize>> {
    Ok(correlation_report(session, config)?.bad_channels)
}
