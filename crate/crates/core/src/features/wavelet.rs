use serde::{Deserialize, Serialize};

use crate::dsp::Epoch;
use crate::error::{Error, Result};

const DB4_DEC_LO: [f64; 8] = [
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859854,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wavelet {
    Haar,
    Db4,
}

impl Wavelet {
    pub fn dec_lo(self) -> Vec<f64> {
        match self {
            Wavelet::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
            Wavelet::Db4 => DB4_DEC_LO.to_vec(),
        }
    }

    /// Quadrature mirror of the lowpass: `g[k] = (-1)^k h[L-1-k]`.
    pub fn dec_hi(self) -> Vec<f64> {
        let h = self.dec_lo();
        let l = h.len();
        (0..l).map(|k| if k % 2 == 0 { h[l - 1 - k] } else { -h[l - 1 - k] }).collect()
    }
}

/// Multilevel transform with periodized extension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveletConfig {
    pub wavelet: Wavelet,
    pub levels: usize,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        WaveletConfig {
            wavelet: Wavelet::Db4,
            levels: 5,
        }
    }
}

impl WaveletConfig {
    pub fn block(&self) -> usize {
        1 << self.levels
    }

    /// Smallest multiple of `2^levels` holding `n` samples.
    pub fn padded_len(&self, n: usize) -> usize {
        n.div_ceil(self.block()).max(1) * self.block()
    }

    pub fn band_names(&self) -> Vec<String> {
        (1..=self.levels)
            .map(|l| format!("D{l}"))
            .chain(std::iter::once(format!("A{}", self.levels)))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.levels > 20 {
            return Err(Error::Config(format!("wavelet levels must be in 1..=20, got {}", self.levels)));
        }
        Ok(())
    }
}

/// Detail bands `D1..DL` (finest first) and the final approximation `AL`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    pub details: Vec<Vec<f64>>,
    pub approx: Vec<f64>,
}

impl WaveletPyramid {
    pub fn energy(&self) -> f64 {
        self.details.iter().chain(std::iter::once(&self.approx)).flatten().map(|v| v * v).sum()
    }
}

fn analysis_step(x: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        let (mut sa, mut sd) = (0.0, 0.0);
        for (m, (hm, gm)) in h.iter().zip(g).enumerate() {
            let v = x[(2 * k + m) % n];
            sa += hm * v;
            sd += gm * v;
        }
        a[k] = sa;
        d[k] = sd;
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = 2 * a.len();
    let mut x = vec![0.0; n];
    for k in 0..a.len() {
        for (m, (hm, gm)) in h.iter().zip(g).enumerate() {
            x[(2 * k + m) % n] += hm * a[k] + gm * d[k];
        }
    }
    x
}

pub fn dwt(signal: &[f64], config: &WaveletConfig) -> Result<WaveletPyramid> {
    config.validate()?;
    let n = signal.len();
    if n < config.block() || !n.is_multiple_of(config.block()) {
        return Err(Error::Config(format!(
            "signal of {n} samples is not a positive multiple of 2^{}",
            config.levels
        )));
    }
    let (h, g) = (config.wavelet.dec_lo(), config.wavelet.dec_hi());
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(config.levels);
    for _ in 0..config.levels {
        let (a, d) = analysis_step(&approx, &h, &g);
        details.push(d);
        approx = a;
    }
    Ok(WaveletPyramid { details, approx })
}

pub fn idwt(pyramid: &WaveletPyramid, wavelet: Wavelet) -> Result<Vec<f64>> {
    let (h, g) = (wavelet.dec_lo(), wavelet.dec_hi());
    let mut x = pyramid.approx.clone();
    for d in pyramid.details.iter().rev() {
        if d.len() != x.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                found: d.len(),
            });
        }
        x = synthesis_step(&x, d, &h, &g);
    }
    Ok(x)
}

/// Per channel, the energy of each band `D1..DL, AL` after zero padding
/// to a multiple of `2^levels`. Channel-major, band-minor.
pub fn wavelet_energy_features(epoch: &Epoch, config: &WaveletConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if epoch.n_channels() == 0 || epoch.n_samples() == 0 {
        return Err(Error::Empty("epoch has no samples".into()));
    }
    let padded_len = config.padded_len(epoch.n_samples());
    let mut out = Vec::with_capacity(epoch.n_channels() * (config.levels + 1));
    let mut buf = vec![0.0; padded_len];
    for row in epoch.samples.rows() {
        buf.iter_mut().for_each(|v| *v = 0.0);
        buf.iter_mut().zip(row).for_each(|(b, v)| *b = *v);
        let p = dwt(&buf, config)?;
        for band in p.details.iter().chain(std::iter::once(&p.approx)) {
            out.push(band.iter().map(|v| v * v).sum());
        }
    }
    Ok(out)
}

pub fn wavelet_feature_names(channels: &[String], config: &WaveletConfig) -> Vec<String> {
    let bands = config.band_names();
    channels
        .iter()
        .flat_map(|c| bands.iter().map(move |b| format!("energy_{c}_{b}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    const HAAR1: WaveletConfig = WaveletConfig {
        wavelet: Wavelet::Haar,
        levels: 1,
    };

    #[test]
    fn haar_hand_example() {
        let p = dwt(&[1.0, 1.0, 1.0, 1.0], &HAAR1).unwrap();
        assert_eq!(p.details, vec![vec![0.0, 0.0]]);
        for a in &p.approx {
            assert!((a - 2f64.sqrt()).abs() < 1e-15);
        }
        let e = wavelet_energy_features(
            &Epoch {
                label_id: 0,
                samples: Array2::ones((1, 4)),
            },
            &HAAR1,
        )
        .unwrap();
        assert_eq!(e[0], 0.0);
        assert!((e[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn db4_filters_are_orthonormal() {
        let h = Wavelet::Db4.dec_lo();
        let g = Wavelet::Db4.dec_hi();
        for shift in (0..8).step_by(2) {
            let hh: f64 = (shift..8).map(|k| h[k] * h[k - shift]).sum();
            let gh: f64 = (shift..8).map(|k| g[k] * h[k - shift]).sum();
            assert!((hh - if shift == 0 { 1.0 } else { 0.0 }).abs() < 1e-12);
            assert!(gh.abs() < 1e-12);
        }
        assert!((h.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn random_signals_reconstruct_and_conserve_energy() {
        let cfg = WaveletConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: Vec<f64> = (0..512).map(|_| rng.random_range(-50.0..50.0)).collect();
            let p = dwt(&x, &cfg).unwrap();
            let energy: f64 = x.iter().map(|v| v * v).sum();
            assert!((p.energy() - energy).abs() <= 1e-6 * energy);
            let back = idwt(&p, cfg.wavelet).unwrap();
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn pyramid_shape_and_padding() {
        let cfg = WaveletConfig::default();
        let p = dwt(&vec![0.5; 512], &cfg).unwrap();
        let lens: Vec<_> = p.details.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![256, 128, 64, 32, 16]);
        assert_eq!(p.approx.len(), 16);
        assert_eq!(cfg.padded_len(500), 512);
        assert!(dwt(&vec![0.0; 500], &cfg).is_err());
        assert!(dwt(&[0.0; 16], &cfg).is_err());
    }

    #[test]
    fn energy_features_shape_zero_and_homogeneity() {
        let cfg = WaveletConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let samples = Array2::from_shape_fn((30, 500), |_| rng.random_range(-1.0..1.0));
        let e = Epoch { label_id: 0, samples };
        let f = wavelet_energy_features(&e, &cfg).unwrap();
        assert_eq!(f.len(), 180);
        let scaled = Epoch {
            label_id: 0,
            samples: &e.samples * 3.0,
        };
        for (a, b) in wavelet_energy_features(&scaled, &cfg).unwrap().iter().zip(&f) {
            assert!((a - 9.0 * b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        // energy per channel equals the padded signal energy
        for (c, row) in e.samples.rows().into_iter().enumerate() {
            let total: f64 = f[6 * c..6 * c + 6].iter().sum();
            let energy: f64 = row.iter().map(|v| v * v).sum();
            assert!((total - energy).abs() <= 1e-6 * energy);
        }
        let zero = Epoch {
            label_id: 0,
            samples: Array2::zeros((30, 500)),
        };
        assert!(wavelet_energy_features(&zero, &cfg).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(wavelet_feature_names(&["Cz".into()], &cfg)[5], "energy_Cz_A5");
    }

    proptest! {
        #[test]
        fn haar_and_db4_round_trip(x in proptest::collection::vec(-1e3f64..1e3, 32..=32), haar in any::<bool>()) {
            let wavelet = if haar { Wavelet::Haar } else { Wavelet::Db4 };
            let cfg = WaveletConfig { wavelet, levels: 3 };
            let back = idwt(&dwt(&x, &cfg).unwrap(), wavelet).unwrap();
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-8);
            }
        }
    }
}
