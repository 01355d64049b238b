//! Soft-margin kernel SVM solved in the dual by sequential minimal
//! optimization with second-order working-set selection.
//!
//! The dual is `min ½ αᵀQα − Σα` subject to `0 ≤ α ≤ C` and `yᵀα = 0`, with
//! `Q_ij = y_i y_j K(x_i, x_j)`. The decision function is
//! `f(x) = Σ α_i y_i K(x_i, x) − b`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::kernel::{rbf_from_distance, rbf_matrix, squared_distance, squared_distances};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmHyperparams {
    pub c: f64,
    pub sigma: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    /// Iteration cap, in multiples of the training-set size.
    pub max_passes: usize,
}

impl Default for SvmHyperparams {
    fn default() -> Self {
        SvmHyperparams {
            c: 1.0,
            sigma: 1.0,
            tol: 1e-3,
            max_passes: 200,
        }
    }
}

impl SvmHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.sigma > 0.0 && self.tol > 0.0) || self.max_passes == 0 {
            return Err(Error::Config(format!("invalid SVM hyperparameters {self:?}")));
        }
        Ok(())
    }
}

/// Dual solution of one binary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `½ αᵀQα − Σα` for a kernel matrix and ±1 labels.
pub fn dual_objective(kernel: ArrayView2<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel[[i, j]];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Solves the dual on a precomputed kernel matrix.
pub fn smo_solve(kernel: ArrayView2<f64>, y: &[f64], hp: &SvmHyperparams) -> Result<SmoSolution> {
    hp.validate()?;
    let n = y.len();
    if kernel.nrows() != n || kernel.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            found: kernel.nrows(),
        });
    }
    if !y.iter().any(|&v| v > 0.0) || !y.iter().any(|&v| v < 0.0) {
        return Err(Error::SingleClass);
    }
    let c = hp.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = hp.max_passes.saturating_mul(n.max(100));
    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // i maximizes -y G over the up set
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        if i != usize::MAX {
            for t in 0..n {
                if !low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let a = (kernel[[i, i]] + kernel[[t, t]] - 2.0 * kernel[[i, t]]).max(TAU);
                    let score = -b * b / a;
                    if score < best {
                        best = score;
                        j = t;
                    }
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < hp.tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let kij = kernel[[i, j]];
        let quad = (kernel[[i, i]] + kernel[[j, j]] - 2.0 * kij).max(TAU);
        let (mut ai, mut aj) = (ai_old, aj_old);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - ai_old, aj - aj_old);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * kernel[[t, i]] * di + y[j] * kernel[[t, j]] * dj);
        }
    }
    if !converged {
        log::warn!("SMO stopped at the iteration cap ({max_iter}) before reaching tolerance");
    }
    Ok(SmoSolution {
        bias: bias_from_gradient(&alpha, y, &grad, c),
        alpha,
        iterations,
        converged,
    })
}

/// Average of `y G` over free multipliers, or the midpoint of the feasible
/// interval when every multiplier sits at a bound.
fn bias_from_gradient(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut n_free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum += yg;
        }
    }
    if n_free > 0 {
        sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Binary RBF SVM keeping only the multipliers with `α > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub sigma: f64,
    pub c: f64,
}

impl BinarySvmModel {
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        let dim = self.support_vectors.first().map_or(x.len(), Vec::len);
        if x.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: x.len(),
            });
        }
        let xv = ndarray::ArrayView1::from(x);
        let s: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * rbf_from_distance(squared_distance(ndarray::ArrayView1::from(sv), xv), self.sigma))
            .sum();
        Ok(s - self.bias)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(if self.decision(x)? >= 0.0 { 1.0 } else { -1.0 })
    }
}

pub(crate) fn check_features(x: ArrayView2<f64>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::Empty("no training rows".into()));
    }
    match x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        Some(((row, col), _)) => Err(Error::NonFiniteFeature { row, col }),
        None => Ok(()),
    }
}

/// Trains on rows of `x` with labels in {−1, +1}.
pub fn svm_train_binary(x: &Array2<f64>, y: &[f64], hp: &SvmHyperparams) -> Result<BinarySvmModel> {
    hp.validate()?;
    check_features(x.view())?;
    if y.len() != x.nrows() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Invariant("binary labels must be -1 or +1".into()));
    }
    let kernel = rbf_matrix(&squared_distances(x.view(), x.view()), hp.sigma);
    let sol = smo_solve(kernel.view(), y, hp)?;
    let keep: Vec<usize> = (0..y.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
    Ok(BinarySvmModel {
        support_vectors: keep.iter().map(|&i| x.row(i).to_vec()).collect(),
        dual_coef: keep.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
        bias: sol.bias,
        sigma: hp.sigma,
        c: hp.c,
    })
}
