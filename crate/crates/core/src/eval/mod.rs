//! Session-based splits, evaluation reports and the end-to-end pipeline.

mod config;
mod metrics;
mod pipeline;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureSet, WaveletConfig};
use crate::learn::{ModelParams, TrainedModel};

pub use config::PipelineConfig;
pub use metrics::Metrics;
pub use pipeline::{
    build_features, evaluate_on_split, preprocess_dataset, run_pipeline, train_on_split, tune_on_split, FeatureOptions,
    RunLog, SessionLog, CONFIG_FILE, FEATURES_FILE, MODEL_FILE, PREPROCESS_FILE, REPORT_FILE, RUN_LOG_FILE,
    TUNE_FILE, TUNE_TRACE_FILE,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_sessions: BTreeSet<u8>,
    pub val_sessions: BTreeSet<u8>,
    pub test_sessions: BTreeSet<u8>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_sessions: BTreeSet::from([1, 2, 3]),
            val_sessions: BTreeSet::from([4]),
            test_sessions: BTreeSet::from([5]),
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let sets = [&self.train_sessions, &self.val_sessions, &self.test_sessions];
        if sets.iter().any(|s| s.is_empty()) {
            return Err(Error::Config("train, validation and test session sets must be nonempty".into()));
        }
        for (i, a) in sets.iter().enumerate() {
            for b in &sets[i + 1..] {
                if let Some(s) = a.intersection(b).next() {
                    return Err(Error::Config(format!("session {s} is assigned to two splits")));
                }
            }
        }
        Ok(())
    }

    pub fn all_sessions(&self) -> BTreeSet<u8> {
        let mut all = self.train_sessions.clone();
        all.extend(&self.val_sessions);
        all.extend(&self.test_sessions);
        all
    }
}

/// Partitions rows by session, preserving row order within each part.
pub fn session_split(
    features: &FeatureMatrix,
    spec: &SplitSpec,
) -> Result<(FeatureMatrix, FeatureMatrix, FeatureMatrix)> {
    spec.validate()?;
    let (mut train, mut val, mut test) = (vec![], vec![], vec![]);
    for (i, &s) in features.session_indices.iter().enumerate() {
        if spec.train_sessions.contains(&s) {
            train.push(i);
        } else if spec.val_sessions.contains(&s) {
            val.push(i);
        } else if spec.test_sessions.contains(&s) {
            test.push(i);
        } else {
            let subject = features
                .meta
                .subject_names
                .get(features.subject_labels[i])
                .cloned()
                .unwrap_or_default();
            return Err(Error::UnassignedSession { subject, session: s });
        }
    }
    Ok((features.select(&train), features.select(&val), features.select(&test)))
}

/// What produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub feature_set: FeatureSet,
    pub wavelet: WaveletConfig,
    pub n_features: usize,
    pub dropped_features: Vec<String>,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    pub n_test: u64,
    /// Test classes the model never saw in training; their rows count as errors.
    pub unseen_classes: Vec<String>,
    pub warnings: Vec<String>,
    pub provenance: ReportProvenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

/// Scores `model` on `test`.
pub fn evaluate(model: &TrainedModel, test: &FeatureMatrix) -> Result<EvalReport> {
    test.validate()?;
    if test.n_rows() == 0 {
        return Err(Error::Empty("test split has no rows".into()));
    }
    if test.meta.subject_names != model.class_names {
        return Err(Error::Config("test classes are named differently from the model's".into()));
    }
    let predictions = model.predict(test)?;
    let k = model.class_names.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (&t, &p) in test.subject_labels.iter().zip(&predictions) {
        confusion[t][p] += 1;
    }
    let trained: BTreeSet<usize> = model.trained_classes.iter().copied().collect();
    let unseen: BTreeSet<usize> = test.subject_labels.iter().copied().filter(|c| !trained.contains(c)).collect();
    let metrics = Metrics::from_confusion(&confusion, &model.class_names)?;
    let mut warnings = metrics.warnings.clone();
    for w in &warnings {
        log::warn!("{w}");
    }
    if !unseen.is_empty() {
        let w = format!("{} test classes were absent from training", unseen.len());
        log::warn!("{w}");
        warnings.push(w);
    }
    let dropped = model
        .standardizer
        .dropped()
        .into_iter()
        .map(|j| model.feature_names[j].clone())
        .collect();
    Ok(EvalReport {
        class_names: model.class_names.clone(),
        confusion,
        accuracy: metrics.accuracy,
        macro_precision: metrics.macro_precision,
        macro_recall: metrics.macro_recall,
        per_class_precision: metrics.per_class_precision,
        per_class_recall: metrics.per_class_recall,
        n_test: metrics.n,
        unseen_classes: unseen.iter().map(|&c| model.class_names[c].clone()).collect(),
        warnings,
        provenance: ReportProvenance {
            feature_set: model.feature_set,
            wavelet: test.meta.wavelet,
            n_features: model.standardizer.n_outputs(),
            dropped_features: dropped,
            params: model.params,
        },
        split: None,
        seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_spec_rules() {
        SplitSpec::default().validate().unwrap();
        let overlap = SplitSpec {
            val_sessions: BTreeSet::from([3]),
            ..SplitSpec::default()
        };
        assert!(overlap.validate().is_err());
        let empty = SplitSpec {
            test_sessions: BTreeSet::new(),
            ..SplitSpec::default()
        };
        assert!(empty.validate().is_err());
        assert_eq!(SplitSpec::default().all_sessions().len(), 5);
    }
}
