use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores derived from a confusion matrix (rows = true, columns = predicted).
///
/// Per-class values are listed for every class. Macro means average over
/// the classes that occur in the truth; a class with true rows but no
/// predictions has undefined precision, which is reported as 0 and warned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    pub support: Vec<u64>,
    pub warnings: Vec<String>,
}

impl Metrics {
    pub fn from_confusion(confusion: &[Vec<u64>], class_names: &[String]) -> Result<Metrics> {
        let k = confusion.len();
        if k == 0 || confusion.iter().any(|r| r.len() != k) || class_names.len() != k {
            return Err(Error::Dimension {
                expected: k,
                found: class_names.len(),
            });
        }
        let n: u64 = confusion.iter().flatten().sum();
        if n == 0 {
            return Err(Error::Empty("confusion matrix is empty".into()));
        }
        let support: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
        let predicted: Vec<u64> = (0..k).map(|c| confusion.iter().map(|r| r[c]).sum()).collect();
        let trace: u64 = (0..k).map(|c| confusion[c][c]).sum();
        let mut warnings = Vec::new();
        let mut precision = vec![0.0; k];
        let mut recall = vec![0.0; k];
        for c in 0..k {
            let tp = confusion[c][c] as f64;
            if predicted[c] > 0 {
                precision[c] = tp / predicted[c] as f64;
            } else if support[c] > 0 {
                warnings.push(format!("precision of {} is undefined (never predicted); using 0", class_names[c]));
            }
            if support[c] > 0 {
                recall[c] = tp / support[c] as f64;
            }
        }
        let present: Vec<usize> = (0..k).filter(|&c| support[c] > 0).collect();
        let mean = |v: &[f64]| present.iter().map(|&c| v[c]).sum::<f64>() / present.len() as f64;
        Ok(Metrics {
            n,
            accuracy: trace as f64 / n as f64,
            macro_precision: mean(&precision),
            macro_recall: mean(&recall),
            per_class_precision: precision,
            per_class_recall: recall,
            support,
            warnings,
        })
    }
}
