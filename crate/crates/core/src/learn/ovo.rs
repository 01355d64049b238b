use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{rbf_from_distance, squared_distance, squared_distances};
use super::svm::{check_features, smo_solve, SvmHyperparams};
use crate::error::{Error, Result};

/// Binary machine for classes `positive` (+1) and `negative` (−1). Support
/// vectors are indices into the parent's shared pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    pub positive: usize,
    pub negative: usize,
    pub support: Vec<usize>,
    /// `α_i y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
}

/// One-vs-one ensemble over every unordered class pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoSvmModel {
    pub classes: Vec<usize>,
    pub hyperparams: SvmHyperparams,
    pub support_vectors: Vec<Vec<f64>>,
    pub pairs: Vec<PairModel>,
    /// Training row of each pooled support vector, kept for fast in-memory scoring.
    #[serde(skip)]
    pub(crate) pool_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OvoPrediction {
    pub class: usize,
    /// Wins per entry of `classes`.
    pub votes: Vec<usize>,
}

fn sorted_classes(labels: &[usize]) -> Vec<usize> {
    let mut c = labels.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

/// Trains all pairs from a precomputed training distance matrix.
pub fn ovo_train_with_distances(
    x: &Array2<f64>,
    labels: &[usize],
    train_d2: &Array2<f64>,
    hp: &SvmHyperparams,
) -> Result<OvoSvmModel> {
    hp.validate()?;
    check_features(x.view())?;
    if labels.len() != x.nrows() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            found: labels.len(),
        });
    }
    let classes = sorted_classes(labels);
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let pair_ids: Vec<(usize, usize)> = (0..classes.len())
        .flat_map(|a| (a + 1..classes.len()).map(move |b| (a, b)))
        .collect();
    let solved: Vec<(usize, usize, Vec<usize>, Vec<f64>, f64)> = pair_ids
        .par_iter()
        .map(|&(a, b)| {
            let (pos, neg) = (classes[a], classes[b]);
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == pos || labels[i] == neg).collect();
            let y: Vec<f64> = rows.iter().map(|&i| if labels[i] == pos { 1.0 } else { -1.0 }).collect();
            let kernel = Array2::from_shape_fn((rows.len(), rows.len()), |(i, j)| {
                rbf_from_distance(train_d2[[rows[i], rows[j]]], hp.sigma)
            });
            let sol = smo_solve(kernel.view(), &y, hp)?;
            let keep: Vec<usize> = (0..rows.len()).filter(|&k| sol.alpha[k] > 0.0).collect();
            Ok((
                pos,
                neg,
                keep.iter().map(|&k| rows[k]).collect(),
                keep.iter().map(|&k| sol.alpha[k] * y[k]).collect(),
                sol.bias,
            ))
        })
        .collect::<Result<_>>()?;

    let mut pool_rows: Vec<usize> = solved.iter().flat_map(|s| s.2.iter().copied()).collect();
    pool_rows.sort_unstable();
    pool_rows.dedup();
    let pool_index = |row: usize| pool_rows.binary_search(&row).expect("pooled row");
    let pairs = solved
        .iter()
        .map(|(pos, neg, rows, coef, bias)| PairModel {
            positive: *pos,
            negative: *neg,
            support: rows.iter().map(|&r| pool_index(r)).collect(),
            dual_coef: coef.clone(),
            bias: *bias,
        })
        .collect();
    Ok(OvoSvmModel {
        support_vectors: pool_rows.iter().map(|&r| x.row(r).to_vec()).collect(),
        classes,
        hyperparams: *hp,
        pairs,
        pool_rows,
    })
}

pub fn ovo_train(x: &Array2<f64>, labels: &[usize], hp: &SvmHyperparams) -> Result<OvoSvmModel> {
    let d2 = squared_distances(x.view(), x.view());
    ovo_train_with_distances(x, labels, &d2, hp)
}

impl OvoSvmModel {
    pub fn n_features(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    fn vote(&self, kernel_row: &[f64]) -> OvoPrediction {
        let k = self.classes.len();
        let mut votes = vec![0usize; k];
        let mut margin = vec![0.0f64; k];
        let index = |c: usize| self.classes.binary_search(&c).expect("known class");
        for p in &self.pairs {
            let d: f64 = p
                .support
                .iter()
                .zip(&p.dual_coef)
                .map(|(&s, a)| a * kernel_row[s])
                .sum::<f64>()
                - p.bias;
            let winner = if d >= 0.0 { p.positive } else { p.negative };
            let w = index(winner);
            votes[w] += 1;
            margin[w] += d.abs();
        }
        let mut best = 0;
        for c in 1..k {
            if votes[c] > votes[best] || (votes[c] == votes[best] && margin[c] > margin[best]) {
                best = c;
            }
        }
        OvoPrediction {
            class: self.classes[best],
            votes,
        }
    }

    /// Decision value of every pair, in `pairs` order.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let row = self.kernel_row(x)?;
        Ok(self
            .pairs
            .iter()
            .map(|p| p.support.iter().zip(&p.dual_coef).map(|(&s, a)| a * row[s]).sum::<f64>() - p.bias)
            .collect())
    }

    fn kernel_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        let xv = ArrayView1::from(x);
        Ok(self
            .support_vectors
            .iter()
            .map(|sv| rbf_from_distance(squared_distance(ArrayView1::from(sv), xv), self.hyperparams.sigma))
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<OvoPrediction> {
        Ok(self.vote(&self.kernel_row(x)?))
    }

    pub fn predict_batch(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        (0..x.nrows())
            .into_par_iter()
            .map(|i| Ok(self.predict(&x.row(i).to_vec())?.class))
            .collect()
    }

    /// Predicts rows whose squared distances to every training row are known.
    pub(crate) fn predict_from_train_distances(&self, d2: &Array2<f64>) -> Vec<usize> {
        (0..d2.nrows())
            .into_par_iter()
            .map(|i| {
                let row: Vec<f64> = self
                    .pool_rows
                    .iter()
                    .map(|&r| rbf_from_distance(d2[[i, r]], self.hyperparams.sigma))
                    .collect();
                self.vote(&row).class
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn blobs() -> (Array2<f64>, Vec<usize>) {
        let x = array![
            [0.0, 0.0],
            [0.2, 0.1],
            [-0.1, 0.2],
            [3.0, 0.0],
            [3.1, 0.3],
            [2.8, -0.2],
            [0.0, 3.0],
            [0.2, 3.1],
            [-0.3, 2.9]
        ];
        (x, vec![4, 4, 4, 7, 7, 7, 9, 9, 9])
    }

    #[test]
    fn three_classes_vote_correctly() {
        let (x, y) = blobs();
        let hp = SvmHyperparams {
            c: 10.0,
            sigma: 1.0,
            ..SvmHyperparams::default()
        };
        let m = ovo_train(&x, &y, &hp).unwrap();
        assert_eq!(m.pairs.len(), 3);
        assert_eq!(m.classes, vec![4, 7, 9]);
        for (i, &label) in y.iter().enumerate() {
            let p = m.predict(&x.row(i).to_vec()).unwrap();
            assert_eq!(p.class, label);
            assert_eq!(p.votes.iter().sum::<usize>(), 3);
        }
        assert_eq!(m.predict_batch(&x).unwrap(), y);
        let d2 = squared_distances(x.view(), x.view());
        assert_eq!(m.predict_from_train_distances(&d2), y);
    }

    #[test]
    fn tie_breaks_on_margin_then_lowest_id() {
        // three classes in a cycle: each wins once
        let m = OvoSvmModel {
            classes: vec![0, 1, 2],
            hyperparams: SvmHyperparams::default(),
            support_vectors: vec![vec![0.0]],
            pairs: vec![
                PairModel { positive: 0, negative: 1, support: vec![0], dual_coef: vec![0.0], bias: -0.5 },
                PairModel { positive: 0, negative: 2, support: vec![0], dual_coef: vec![0.0], bias: 2.0 },
                PairModel { positive: 1, negative: 2, support: vec![0], dual_coef: vec![0.0], bias: -0.25 },
            ],
            pool_rows: vec![0],
        };
        // votes 1/1/1, margins 0.5 / 0.25 / 2.0
        assert_eq!(m.predict(&[0.0]).unwrap().class, 2);
        let mut even = m.clone();
        even.pairs[1].bias = 0.5;
        even.pairs[2].bias = -0.5;
        assert_eq!(even.predict(&[0.0]).unwrap().class, 0);
    }

    #[test]
    fn single_class_rejected() {
        let (x, _) = blobs();
        assert!(matches!(ovo_train(&x, &[1; 9], &SvmHyperparams::default()), Err(Error::SingleClass)));
    }
}
