use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `exp(-‖x - x'‖² / (2σ²))`.
pub fn rbf_kernel(x: &[f64], x2: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            found: x2.len(),
        });
    }
    let d = squared_distance(ArrayView1::from(x), ArrayView1::from(x2));
    Ok(rbf_from_distance(d, sigma))
}

#[inline]
pub fn rbf_from_distance(d2: f64, sigma: f64) -> f64 {
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Pairwise squared distances between the rows of `a` and `b`. Every entry
/// is summed in feature order, so it depends only on its two rows.
pub fn squared_distances(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let cols = b.nrows();
    let mut flat = vec![0.0; a.nrows() * cols];
    if cols > 0 {
        flat.par_chunks_mut(cols).enumerate().for_each(|(i, row)| {
            let ai = a.row(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = squared_distance(ai, b.row(j));
            }
        });
    }
    Array2::from_shape_vec((a.nrows(), cols), flat).expect("shape matches buffer")
}

pub fn rbf_matrix(d2: &Array2<f64>, sigma: f64) -> Array2<f64> {
    d2.mapv(|d| rbf_from_distance(d, sigma))
}
