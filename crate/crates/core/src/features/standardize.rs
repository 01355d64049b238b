use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Column statistics fitted on training rows. Columns with zero spread are
/// dropped and recorded in `keep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
    pub keep: Vec<bool>,
}

impl Standardizer {
    pub fn fit(train: &FeatureMatrix) -> Result<Self> {
        let x = &train.values;
        let n = x.nrows();
        if n < 2 {
            return Err(Error::Empty(format!("standardizer needs at least 2 rows, got {n}")));
        }
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / n as f64;
            let v = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
            mean.push(m);
            std.push(v.sqrt());
        }
        let keep: Vec<bool> = mean
            .iter()
            .zip(&std)
            .map(|(m, s)| *s > 1e-12 * m.abs().max(f64::MIN_POSITIVE))
            .collect();
        if !keep.iter().any(|&k| k) {
            return Err(Error::DegenerateFeatures);
        }
        Ok(Standardizer { mean, std, keep })
    }

    pub fn n_inputs(&self) -> usize {
        self.keep.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn dropped(&self) -> Vec<usize> {
        self.keep.iter().enumerate().filter(|(_, &k)| !k).map(|(i, _)| i).collect()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_inputs() {
            return Err(Error::Dimension {
                expected: self.n_inputs(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .enumerate()
            .filter(|(j, _)| self.keep[*j])
            .map(|(j, v)| (v - self.mean[j]) / self.std[j])
            .collect())
    }

    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        if m.n_features() != self.n_inputs() {
            return Err(Error::Dimension {
                expected: self.n_inputs(),
                found: m.n_features(),
            });
        }
        let cols: Vec<usize> = (0..self.n_inputs()).filter(|&j| self.keep[j]).collect();
        let values = ndarray::Array2::from_shape_fn((m.n_rows(), cols.len()), |(i, k)| {
            let j = cols[k];
            (m.values[[i, j]] - self.mean[j]) / self.std[j]
        });
        Ok(FeatureMatrix {
            values,
            feature_names: cols.iter().map(|&j| m.feature_names[j].clone()).collect(),
            ..m.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::tests::matrix;
    use ndarray::array;

    #[test]
    fn two_row_hand_example() {
        let m = matrix(array![[1.0], [3.0]]);
        let s = Standardizer::fit(&m).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (2.0, 1.0));
        assert_eq!(s.apply(&m).unwrap().values, array![[-1.0], [1.0]]);
    }

    #[test]
    fn constant_columns_are_dropped() {
        let m = matrix(array![[1.0, 5.0, 0.0], [2.0, 5.0, 4.0], [6.0, 5.0, 1.0]]);
        let s = Standardizer::fit(&m).unwrap();
        assert_eq!(s.dropped(), vec![1]);
        let t = s.apply(&m).unwrap();
        assert_eq!(t.n_features(), 2);
        assert_eq!(t.feature_names, vec!["f0".to_string(), "f2".to_string()]);
        for col in t.values.columns() {
            let mean = col.sum() / 3.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-9 && (var.sqrt() - 1.0).abs() < 1e-9);
        }
        assert_eq!(s.transform_row(&[1.0, 99.0, 0.0]).unwrap(), t.values.row(0).to_vec());
    }

    #[test]
    fn degenerate_and_tiny_inputs_rejected() {
        assert!(matches!(
            Standardizer::fit(&matrix(array![[2.0, 0.1], [2.0, 0.1]])),
            Err(Error::DegenerateFeatures)
        ));
        assert!(Standardizer::fit(&matrix(array![[2.0]])).is_err());
        let s = Standardizer::fit(&matrix(array![[1.0], [2.0]])).unwrap();
        assert!(s.apply(&matrix(array![[1.0, 2.0]])).is_err());
    }
}
