use std::f64::consts::TAU;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use super::{SynthConfig, TAG_SIGNATURE};
use crate::rng::stream;
use crate::data::{builtin_montage, canonical_channel_names};
use crate::error::{Error, Result};

/// Rhythm bands carried by the signature: (name, low Hz, high Hz).
pub const BANDS: [(&str, f64, f64); 3] = [("theta", 4.0, 8.0), ("alpha", 8.0, 13.0), ("beta", 13.0, 30.0)];

const MAX_POLE_RADIUS: f64 = 0.975;
const BACKGROUND_COEF: f64 = 0.9;
const BURN_IN: usize = 256;
const FOCUS_WIDTH_RAD: f64 = 0.7;
const FOCUS_FLOOR: f64 = 0.3;

/// One AR(2) resonator `x_t = a1 x_{t-1} + a2 x_{t-2} + s e_t` scaled to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonator {
    pub a1: f64,
    pub a2: f64,
    pub innovation_std: f64,
}

impl Resonator {
    pub fn new(center_hz: f64, radius: f64, fs: f64) -> Self {
        let a1 = 2.0 * radius * (TAU * center_hz / fs).cos();
        let a2 = -radius * radius;
        let var = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2).powi(2) - a1 * a1));
        Resonator {
            a1,
            a2,
            innovation_std: var.sqrt().recip(),
        }
    }

    /// Largest root magnitude of `z^2 - a1 z - a2`.
    pub fn pole_magnitude(&self) -> f64 {
        let disc = self.a1 * self.a1 + 4.0 * self.a2;
        if disc < 0.0 {
            (-self.a2).sqrt()
        } else {
            let s = disc.sqrt();
            ((self.a1 + s) / 2.0).abs().max(((self.a1 - s) / 2.0).abs())
        }
    }
}

/// Spectral-spatial fingerprint of one subject.
///
/// Each source channel runs one resonator per band. Band amplitudes follow a
/// subject-specific weight and a spatial focus on the scalp; a shared AR(1)
/// background adds broadband power; a smooth mixing matrix spreads sources
/// across electrodes.
#[derive(Debug, Clone)]
pub struct SubjectSignature {
    /// `resonators[channel][band]`
    pub resonators: Vec<Vec<Resonator>>,
    /// `band_amplitude[channel][band]`
    pub band_amplitude: Vec<Vec<f64>>,
    pub background_amplitude: f64,
    pub mixing: Array2<f64>,
}

fn angle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0).acos()
}

fn random_upper_direction(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 && v[2] > 0.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

impl SubjectSignature {
    pub fn generate_for(config: &SynthConfig, subject: usize) -> Result<Self> {
        config.validate()?;
        let names = canonical_channel_names()[..config.n_channels].to_vec();
        let positions = builtin_montage().positions_for(&names)?;
        let mut rng = stream(config.seed, TAG_SIGNATURE, subject as u64, 0);
        let model = &config.signal;
        let n = positions.len();

        let mut resonators = vec![Vec::with_capacity(BANDS.len()); n];
        let mut band_amplitude = vec![Vec::with_capacity(BANDS.len()); n];
        for &(_, lo, hi) in &BANDS {
            let width = hi - lo;
            let center = rng.random_range(lo + 0.2 * width..=hi - 0.2 * width);
            let radius: f64 = rng.random_range(0.90..0.96);
            let weight = (model.band_weight_spread * rng.sample::<f64, _>(StandardNormal)).exp();
            let focus = random_upper_direction(&mut rng);
            for (c, &p) in positions.iter().enumerate() {
                let f = (center + rng.random_range(-0.1..=0.1) * width).clamp(lo, hi);
                let r = (radius + rng.random_range(-0.01..=0.01f64)).min(MAX_POLE_RADIUS);
                resonators[c].push(Resonator::new(f, r, config.fs));
                let d = angle(p, focus);
                let spatial = FOCUS_FLOOR + model.spatial_focus_gain * (-d * d / (2.0 * FOCUS_WIDTH_RAD.powi(2))).exp();
                band_amplitude[c].push(weight * spatial);
            }
        }

        let width = rng.random_range(0.5..0.65);
        let mut mixing = Array2::from_shape_fn((n, n), |(i, j)| {
            let d = angle(positions[i], positions[j]);
            (-d * d / (2.0 * width * width)).exp()
        });
        for mut row in mixing.rows_mut() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row /= norm;
        }

        let mean_band_power =
            band_amplitude.iter().map(|a| a.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n as f64;
        let bf = model.background_fraction;
        let mut sig = SubjectSignature {
            resonators,
            band_amplitude,
            background_amplitude: (bf / (1.0 - bf) * mean_band_power).sqrt(),
            mixing,
        };
        // rescale so the mean per-electrode RMS equals the configured amplitude
        let source_var: Vec<f64> = (0..n)
            .map(|j| sig.band_amplitude[j].iter().map(|v| v * v).sum::<f64>() + sig.background_amplitude.powi(2))
            .collect();
        let mean_var = sig
            .mixing
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&source_var).map(|(m, v)| m * m * v).sum::<f64>())
            .sum::<f64>()
            / n as f64;
        let scale = model.amplitude_uv / mean_var.sqrt();
        for a in sig.band_amplitude.iter_mut().flatten() {
            *a *= scale;
        }
        sig.background_amplitude *= scale;
        Ok(sig)
    }

    pub fn n_channels(&self) -> usize {
        self.resonators.len()
    }

    pub fn max_pole_magnitude(&self) -> f64 {
        self.resonators
            .iter()
            .flatten()
            .map(Resonator::pole_magnitude)
            .fold(BACKGROUND_COEF, f64::max)
    }

    /// Draws `n_samples` of stationary signal, channel-major.
    pub fn generate(&self, n_samples: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let n = self.n_channels();
        let total = n_samples + BURN_IN;
        let bg_std = self.background_amplitude * (1.0 - BACKGROUND_COEF * BACKGROUND_COEF).sqrt();
        let mut sources = Array2::<f64>::zeros((n, n_samples));
        let mut buf = vec![0.0; total];
        for j in 0..n {
            let mut row = sources.row_mut(j);
            for (res, &amp) in self.resonators[j].iter().zip(&self.band_amplitude[j]) {
                let (mut x1, mut x2) = (0.0, 0.0);
                for v in buf.iter_mut() {
                    let e: f64 = rng.sample(StandardNormal);
                    let x = res.a1 * x1 + res.a2 * x2 + res.innovation_std * e;
                    x2 = x1;
                    x1 = x;
                    *v = x;
                }
                row.iter_mut().zip(&buf[BURN_IN..]).for_each(|(r, x)| *r += amp * x);
            }
            let mut x1 = 0.0;
            for v in buf.iter_mut() {
                let e: f64 = rng.sample(StandardNormal);
                x1 = BACKGROUND_COEF * x1 + bg_std * e;
                *v = x1;
            }
            row.iter_mut().zip(&buf[BURN_IN..]).for_each(|(r, x)| *r += x);
        }
        self.mixing.dot(&sources)
    }
}

/// Outcome of the pairwise separability self-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparabilityReport {
    /// Smallest `‖μ_a − μ_b‖ / σ_within` over subject pairs.
    pub min_ratio: f64,
    pub worst_pair: (usize, usize),
    pub threshold: f64,
}

impl SeparabilityReport {
    pub fn passed(&self) -> bool {
        self.min_ratio >= self.threshold
    }
}

/// Log band power per channel and band, from a periodogram.
fn band_power_vector(x: &Array2<f64>, fs: f64, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = x.ncols();
    let fft = planner.plan_fft_forward(n);
    let mut out = Vec::with_capacity(x.nrows() * BANDS.len());
    for row in x.rows() {
        let mut buf: Vec<Complex<f64>> = row.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft.process(&mut buf);
        for &(_, lo, hi) in &BANDS {
            let p: f64 = (1..n / 2)
                .filter(|&k| {
                    let f = k as f64 * fs / n as f64;
                    f >= lo && f < hi
                })
                .map(|k| buf[k].norm_sqr())
                .sum();
            out.push((p / n as f64).max(f64::MIN_POSITIVE).ln());
        }
    }
    out
}

/// Checks that every pair of subject signatures is separated in mean log
/// band-power by at least `threshold` times the pooled within-subject
/// standard deviation (root mean square over dimensions).
pub fn separability_check(
    config: &SynthConfig,
    n_trials: usize,
    epoch_s: f64,
    threshold: f64,
) -> Result<SeparabilityReport> {
    if config.n_subjects < 2 || n_trials < 2 {
        return Err(Error::Config("separability needs two subjects and two trials".into()));
    }
    let n_samples = (epoch_s * config.fs).round() as usize;
    let mut planner = FftPlanner::new();
    let mut means = Vec::new();
    let mut within = 0.0;
    let mut dims = 0;
    for s in 0..config.n_subjects {
        let sig = SubjectSignature::generate_for(config, s)?;
        let mut rng = stream(config.seed, TAG_SIGNATURE, s as u64, u64::MAX);
        let vecs: Vec<Vec<f64>> = (0..n_trials)
            .map(|_| band_power_vector(&sig.generate(n_samples, &mut rng), config.fs, &mut planner))
            .collect();
        dims = vecs[0].len();
        let mu: Vec<f64> = (0..dims).map(|d| vecs.iter().map(|v| v[d]).sum::<f64>() / n_trials as f64).collect();
        within += vecs
            .iter()
            .map(|v| v.iter().zip(&mu).map(|(a, m)| (a - m).powi(2)).sum::<f64>())
            .sum::<f64>()
            / (n_trials - 1) as f64;
        means.push(mu);
    }
    let sigma = (within / (config.n_subjects * dims) as f64).sqrt();
    let mut best = (f64::INFINITY, (0, 0));
    for a in 0..means.len() {
        for b in a + 1..means.len() {
            let d = means[a].iter().zip(&means[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            if d / sigma < best.0 {
                best = (d / sigma, (a, b));
            }
        }
    }
    Ok(SeparabilityReport {
        min_ratio: best.0,
        worst_pair: best.1,
        threshold,
    })
}
