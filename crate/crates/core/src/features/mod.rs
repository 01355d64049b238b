//! Per-epoch feature vectors and the labelled feature matrix.
//!
//! Two families are provided: population moments per channel and wavelet
//! band energies per channel. A [`FeatureMatrix`] stores one row per trial
//! with its subject class, session and trial index, and round-trips through
//! a CSV file plus a JSON sidecar.

mod moments;
mod standardize;
mod wavelet;

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::Epoch;
use crate::error::{Error, Result};

pub use moments::{channel_moments, statistical_feature_names, statistical_features};
pub use standardize::Standardizer;
pub use wavelet::{
    dwt, idwt, wavelet_energy_features, wavelet_feature_names, Wavelet, WaveletConfig, WaveletPyramid,
};

pub const FEATURE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Statistical,
    Wavelet,
    Both,
}

impl std::str::FromStr for FeatureSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statistical" => Ok(FeatureSet::Statistical),
            "wavelet" => Ok(FeatureSet::Wavelet),
            "both" => Ok(FeatureSet::Both),
            other => Err(Error::Config(format!("unknown feature set {other:?}"))),
        }
    }
}

impl std::fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureSet::Statistical => "statistical",
            FeatureSet::Wavelet => "wavelet",
            FeatureSet::Both => "both",
        })
    }
}

pub fn feature_names(set: FeatureSet, channels: &[String], wavelet: &WaveletConfig) -> Vec<String> {
    let mut names = Vec::new();
    if set != FeatureSet::Wavelet {
        names.extend(statistical_feature_names(channels));
    }
    if set != FeatureSet::Statistical {
        names.extend(wavelet_feature_names(channels, wavelet));
    }
    names
}

pub fn epoch_features(epoch: &Epoch, set: FeatureSet, wavelet: &WaveletConfig) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    if set != FeatureSet::Wavelet {
        v.extend(statistical_features(epoch)?);
    }
    if set != FeatureSet::Statistical {
        v.extend(wavelet_energy_features(epoch, wavelet)?);
    }
    Ok(v)
}

/// Feature rows for a batch of epochs, computed in parallel.
pub fn extract_features(epochs: &[Epoch], set: FeatureSet, wavelet: &WaveletConfig) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = epochs
        .par_iter()
        .map(|e| epoch_features(e, set, wavelet))
        .collect::<Result<_>>()?;
    let width = rows.first().map_or(0, Vec::len);
    let mut out = Array2::zeros((rows.len(), width));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::Dimension {
                expected: width,
                found: r.len(),
            });
        }
        out.row_mut(i).assign(&ndarray::ArrayView1::from(r));
    }
    Ok(out)
}

/// Provenance carried next to the matrix in the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMeta {
    pub format_version: u32,
    pub feature_set: FeatureSet,
    /// Class names; `subject_labels` index into this list.
    pub subject_names: Vec<String>,
    pub wavelet: WaveletConfig,
    pub epoch_samples: usize,
    /// Epoch length after zero padding for the wavelet transform.
    pub padded_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardizer: Option<Standardizer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub subject_labels: Vec<usize>,
    pub session_indices: Vec<u8>,
    pub trial_indices: Vec<usize>,
    pub word_labels: Vec<u16>,
    pub feature_names: Vec<String>,
    pub meta: FeatureMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    feature_names: Vec<String>,
    #[serde(flatten)]
    meta: FeatureMeta,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.meta.subject_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_rows();
        for len in [
            self.subject_labels.len(),
            self.session_indices.len(),
            self.trial_indices.len(),
            self.word_labels.len(),
        ] {
            if len != n {
                return Err(Error::Dimension { expected: n, found: len });
            }
        }
        if self.feature_names.len() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                found: self.feature_names.len(),
            });
        }
        if let Some(&bad) = self.subject_labels.iter().find(|&&s| s >= self.n_classes()) {
            return Err(Error::Invariant(format!("subject label {bad} has no name")));
        }
        if let Some(((row, col), _)) = self.values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { row, col });
        }
        Ok(())
    }

    /// Rows at `rows`, in that order.
    pub fn select(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select(ndarray::Axis(0), rows),
            subject_labels: rows.iter().map(|&i| self.subject_labels[i]).collect(),
            session_indices: rows.iter().map(|&i| self.session_indices[i]).collect(),
            trial_indices: rows.iter().map(|&i| self.trial_indices[i]).collect(),
            word_labels: rows.iter().map(|&i| self.word_labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            meta: self.meta.clone(),
        }
    }

    /// Stacks matrices sharing the same columns and metadata.
    pub fn concat(parts: &[FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts.first().ok_or_else(|| Error::Empty("no feature blocks to stack".into()))?;
        if let Some(p) = parts.iter().find(|p| p.feature_names != first.feature_names || p.meta != first.meta) {
            return Err(Error::Dimension {
                expected: first.n_features(),
                found: p.n_features(),
            });
        }
        let views: Vec<_> = parts.iter().map(|p| p.values.view()).collect();
        let values = ndarray::concatenate(ndarray::Axis(0), &views)
            .map_err(|e| Error::Invariant(format!("cannot stack feature blocks: {e}")))?;
        Ok(FeatureMatrix {
            values,
            subject_labels: parts.iter().flat_map(|p| p.subject_labels.iter().copied()).collect(),
            session_indices: parts.iter().flat_map(|p| p.session_indices.iter().copied()).collect(),
            trial_indices: parts.iter().flat_map(|p| p.trial_indices.iter().copied()).collect(),
            word_labels: parts.iter().flat_map(|p| p.word_labels.iter().copied()).collect(),
            feature_names: first.feature_names.clone(),
            meta: first.meta.clone(),
        })
    }

    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("json")
    }

    /// Writes `path` (CSV) and its `.json` sidecar.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["subject".to_string(), "session".into(), "trial".into(), "label".into()];
        header.extend((0..self.n_features()).map(|j| format!("f_{j}")));
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for i in 0..self.n_rows() {
            let mut rec = vec![
                self.subject_labels[i].to_string(),
                self.session_indices[i].to_string(),
                self.trial_indices[i].to_string(),
                self.word_labels[i].to_string(),
            ];
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        let sidecar = Sidecar {
            feature_names: self.feature_names.clone(),
            meta: self.meta.clone(),
        };
        let side = Self::sidecar_path(path);
        let mut text = serde_json::to_string_pretty(&sidecar)?;
        text.push('\n');
        fs::write(&side, text).map_err(|e| Error::io(&side, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
        let path = path.as_ref();
        let side = Self::sidecar_path(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        if sidecar.meta.format_version != FEATURE_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "feature format version {} is not supported",
                sidecar.meta.format_version
            )));
        }
        let n_f = sidecar.feature_names.len();
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let (mut subj, mut sess, mut trial, mut word, mut flat) = (vec![], vec![], vec![], vec![], vec![]);
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            if rec.len() != 4 + n_f {
                return Err(Error::Parse(format!(
                    "{}: row {} has {} fields, expected {}",
                    path.display(),
                    line + 1,
                    rec.len(),
                    4 + n_f
                )));
            }
            let field = |i: usize| -> Result<&str> { Ok(&rec[i]) };
            let bad = |i: usize| Error::Parse(format!("{}: row {} field {} is not numeric", path.display(), line + 1, i));
            subj.push(field(0)?.parse().map_err(|_| bad(0))?);
            sess.push(field(1)?.parse().map_err(|_| bad(1))?);
            trial.push(field(2)?.parse().map_err(|_| bad(2))?);
            word.push(field(3)?.parse().map_err(|_| bad(3))?);
            for j in 0..n_f {
                flat.push(rec[4 + j].parse::<f64>().map_err(|_| bad(4 + j))?);
            }
        }
        let m = FeatureMatrix {
            values: Array2::from_shape_vec((subj.len(), n_f), flat)
                .map_err(|e| Error::Invariant(e.to_string()))?,
            subject_labels: subj,
            session_indices: sess,
            trial_indices: trial,
            word_labels: word,
            feature_names: sidecar.feature_names,
            meta: sidecar.meta,
        };
        m.validate()?;
        Ok(m)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}
