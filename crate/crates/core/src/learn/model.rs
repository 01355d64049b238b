use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gbt::{gbt_train, GbtModel};
use super::ovo::{ovo_train, OvoSvmModel};
use super::tune::ModelParams;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureSet, Standardizer};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Classifier {
    Svm(OvoSvmModel),
    Gbt(GbtModel),
}

/// A classifier together with the standardizer and column layout it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedModel {
    pub format_version: u32,
    pub feature_set: FeatureSet,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    /// Class ids present in the training rows.
    pub trained_classes: Vec<usize>,
    pub params: ModelParams,
    pub standardizer: Standardizer,
    pub classifier: Classifier,
}

/// Fits the standardizer on `train` and trains the classifier on the result.
pub fn train_model(params: &ModelParams, train: &FeatureMatrix) -> Result<TrainedModel> {
    train.validate()?;
    let standardizer = Standardizer::fit(train)?;
    let z = standardizer.apply(train)?;
    let classifier = match params {
        ModelParams::Svm(hp) => Classifier::Svm(ovo_train(&z.values, &z.subject_labels, hp)?),
        ModelParams::Gbt(cfg) => {
            let cfg = super::GbtConfig {
                n_classes: train.n_classes(),
                ..*cfg
            };
            Classifier::Gbt(gbt_train(&z.values, &z.subject_labels, &cfg)?)
        }
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        feature_set: train.meta.feature_set,
        feature_names: train.feature_names.clone(),
        class_names: train.meta.subject_names.clone(),
        trained_classes: {
            let mut c = train.subject_labels.clone();
            c.sort_unstable();
            c.dedup();
            c
        },
        params: *params,
        standardizer,
        classifier,
    })
}

impl TrainedModel {
    /// Predicted class ids for raw (unstandardized) feature rows.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<usize>> {
        if features.feature_names != self.feature_names {
            return Err(Error::Config(
                "feature columns differ from the ones the model was trained on".into(),
            ));
        }
        let z = self.standardizer.apply(features)?;
        match &self.classifier {
            Classifier::Svm(m) => m.predict_batch(&z.values),
            Classifier::Gbt(m) => m.predict_batch(&z.values),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: TrainedModel = serde_json::from_str(&text)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!("model format version {} is not supported", m.format_version)));
        }
        Ok(m)
    }
}
