use crate::dsp::Epoch;
use crate::error::{Error, Result};

/// Population moments of one channel: (mean, variance, skewness, excess kurtosis).
/// A zero-variance channel reports skewness and kurtosis 0.
pub fn channel_moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    // constant input can leave round-off residue around the mean
    if m2 <= (4.0 * f64::EPSILON * mean.abs()).powi(2) {
        return (mean, 0.0, 0.0, 0.0);
    }
    (mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Means of all channels, then variances, skewnesses and kurtoses.
pub fn statistical_features(epoch: &Epoch) -> Result<Vec<f64>> {
    let n_ch = epoch.n_channels();
    if n_ch == 0 || epoch.n_samples() < 2 {
        return Err(Error::Empty("epoch needs at least 2 samples per channel".into()));
    }
    let mut out = vec![0.0; 4 * n_ch];
    for (c, row) in epoch.samples.rows().into_iter().enumerate() {
        let row = row.to_vec();
        let (m, v, s, k) = channel_moments(&row);
        out[c] = m;
        out[n_ch + c] = v;
        out[2 * n_ch + c] = s;
        out[3 * n_ch + c] = k;
    }
    Ok(out)
}

pub fn statistical_feature_names(channels: &[String]) -> Vec<String> {
    ["mean", "var", "skew", "kurt"]
        .iter()
        .flat_map(|m| channels.iter().map(move |c| format!("{m}_{c}")))
        .collect()
}
