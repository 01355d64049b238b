//! Spherical-spline interpolation of scalp potentials (Perrin et al.).
//!
//! With `g(x) = 1/(4 pi) sum_{n=1}^{N} (2n+1) / (n^m (n+1)^m) P_n(x)` and
//! `G[i][j] = g(cos theta_ij)` over the good electrodes, the coefficients solve
//!
//! ```text
//! [ G + lambda I   1 ] [ c  ]   [ v ]
//! [ 1^T            0 ] [ c0 ] = [ 0 ]
//! ```
//!
//! and the potential at position `e` is `c0 + sum_j c_j g(cos theta_ej)`.
//! The map from good-channel values to interpolated values is linear, so it
//! is computed once as a matrix and applied to every sample.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{Montage, Session};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineConfig {
    pub stiffness_m: u32,
    pub n_legendre_terms: usize,
    pub regularization: f64,
}

impl Default for SplineConfig {
    fn default() -> Self {
        SplineConfig {
            stiffness_m: 4,
            n_legendre_terms: 50,
            regularization: 1e-5,
        }
    }
}

impl SplineConfig {
    fn validate(&self) -> Result<()> {
        if self.stiffness_m < 2 || self.n_legendre_terms < 7 || !(self.regularization >= 0.0) {
            return Err(Error::Config(format!(
                "spline needs m >= 2, terms >= 7 and regularization >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// The spline kernel `g(x)` evaluated by the Legendre three-term recurrence.
pub fn spline_g(x: f64, config: &SplineConfig) -> f64 {
    let m = config.stiffness_m as i32;
    let (mut p_prev, mut p) = (1.0, x);
    let mut sum = 0.0;
    for n in 1..=config.n_legendre_terms {
        let nf = n as f64;
        sum += (2.0 * nf + 1.0) / (nf.powi(m) * (nf + 1.0).powi(m)) * p;
        let p_next = ((2.0 * nf + 1.0) * x * p - nf * p_prev) / (nf + 1.0);
        p_prev = p;
        p = p_next;
    }
    sum / (4.0 * PI)
}

fn cos_angle(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0)
}

/// Linear map from good-electrode values to values at target positions.
#[derive(Debug, Clone)]
pub struct SplineInterpolator {
    /// `n_targets x n_sources`
    weights: Array2<f64>,
}

impl SplineInterpolator {
    pub fn new(sources: &[[f64; 3]], targets: &[[f64; 3]], config: &SplineConfig) -> Result<Self> {
        config.validate()?;
        let n = sources.len();
        if n < 4 {
            return Err(Error::TooFewGoodChannels { good: n, required: 4 });
        }
        let mut system = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                system[(i, j)] = spline_g(cos_angle(sources[i], sources[j]), config);
            }
            system[(i, i)] += config.regularization;
            system[(i, n)] = 1.0;
            system[(n, i)] = 1.0;
        }
        let inverse = system
            .try_inverse()
            .ok_or_else(|| Error::Invariant("singular spline system".into()))?;
        let mut weights = Array2::zeros((targets.len(), n));
        for (t, &target) in targets.iter().enumerate() {
            let basis: Vec<f64> = sources
                .iter()
                .map(|&s| spline_g(cos_angle(target, s), config))
                .chain(std::iter::once(1.0))
                .collect();
            for j in 0..n {
                weights[[t, j]] = (0..=n).map(|k| basis[k] * inverse[(k, j)]).sum();
            }
        }
        Ok(SplineInterpolator { weights })
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    /// `values` is `n_sources x n_samples`; returns `n_targets x n_samples`.
    pub fn apply(&self, values: &Array2<f64>) -> Array2<f64> {
        self.weights.dot(values)
    }
}

/// Replaces the `bads` channels of every trial by their spline estimate from
/// the remaining channels. Good channels are left untouched.
pub fn interpolate_bads(
    session: &Session,
    montage: &Montage,
    bads: &BTreeSet<usize>,
    config: &SplineConfig,
) -> Result<Session> {
    let n_ch = session.meta.n_channels();
    if let Some(&c) = bads.iter().find(|&&c| c >= n_ch) {
        return Err(Error::ChannelIndex {
            index: c,
            n_channels: n_ch,
        });
    }
    if bads.is_empty() {
        return Ok(session.clone());
    }
    let good: Vec<usize> = (0..n_ch).filter(|c| !bads.contains(c)).collect();
    if good.len() < 4 {
        return Err(Error::TooFewGoodChannels {
            good: good.len(),
            required: 4,
        });
    }
    let positions = montage.positions_for(&session.meta.channel_names)?;
    let sources: Vec<[f64; 3]> = good.iter().map(|&c| positions[c]).collect();
    let bad_list: Vec<usize> = bads.iter().copied().collect();
    let targets: Vec<[f64; 3]> = bad_list.iter().map(|&c| positions[c]).collect();
    let interp = SplineInterpolator::new(&sources, &targets, config)?;

    let mut out = session.clone();
    for trial in &mut out.trials {
        let good_rows = trial.samples.select(ndarray::Axis(0), &good);
        let estimate = interp.apply(&good_rows);
        for (row, &c) in bad_list.iter().enumerate() {
            trial.samples.row_mut(c).assign(&estimate.row(row));
        }
    }
    Ok(out)
}
