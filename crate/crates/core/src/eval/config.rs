use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SplitSpec;
use crate::dsp::PreprocessConfig;
use crate::error::{Error, Result};
use crate::features::{FeatureSet, Wavelet, WaveletConfig};
use crate::kv::{join_list, KeyValues};
use crate::learn::{GbtConfig, ModelKind, SvmHyperparams};

/// Every setting of an end-to-end run. Serialized as flat `key=value` text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub feature_set: FeatureSet,
    pub model: ModelKind,
    pub tune_budget: usize,
    /// Retrain on training + validation sessions after tuning.
    pub train_includes_validation: bool,
    pub split: SplitSpec,
    pub epoch_window_s: f64,
    pub epoch_offset_s: f64,
    pub preprocess: PreprocessConfig,
    pub wavelet: WaveletConfig,
    pub svm_tol: f64,
    pub svm_max_passes: usize,
    pub gbt_min_child_weight: f64,
    pub gbt_gamma: f64,
    /// Also write the preprocessed CEEG sessions under the output directory.
    pub write_preprocessed: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let svm = SvmHyperparams::default();
        let gbt = GbtConfig::default();
        PipelineConfig {
            seed: 42,
            feature_set: FeatureSet::Wavelet,
            model: ModelKind::Svm,
            tune_budget: 50,
            train_includes_validation: false,
            split: SplitSpec::default(),
            epoch_window_s: 2.0,
            epoch_offset_s: 0.0,
            preprocess: PreprocessConfig::default(),
            wavelet: WaveletConfig::default(),
            svm_tol: svm.tol,
            svm_max_passes: svm.max_passes,
            gbt_min_child_weight: gbt.min_child_weight,
            gbt_gamma: gbt.gamma,
            write_preprocessed: false,
        }
    }
}

const KEYS: &[&str] = &[
    "seed",
    "feature_set",
    "model",
    "tune_budget",
    "train_includes_validation",
    "train_sessions",
    "val_sessions",
    "test_sessions",
    "epoch_window_s",
    "epoch_offset_s",
    "notch_base_hz",
    "notch_width_hz",
    "bandpass_low_hz",
    "bandpass_high_hz",
    "bandpass_transition_hz",
    "bad_window_s",
    "bad_correlation_threshold",
    "bad_fraction_threshold",
    "spline_stiffness",
    "spline_terms",
    "spline_regularization",
    "wavelet",
    "wavelet_levels",
    "svm_tol",
    "svm_max_passes",
    "gbt_min_child_weight",
    "gbt_gamma",
    "write_preprocessed",
];

fn set_sessions(kv: &KeyValues, key: &str, target: &mut BTreeSet<u8>) -> Result<()> {
    let mut list: Vec<u8> = target.iter().copied().collect();
    kv.set_list(key, &mut list)?;
    *target = list.into_iter().collect();
    Ok(())
}

impl PipelineConfig {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        kv.reject_unknown(KEYS)?;
        let mut c = PipelineConfig::default();
        kv.set("seed", &mut c.seed)?;
        let mut s = c.feature_set.to_string();
        kv.set("feature_set", &mut s)?;
        c.feature_set = s.parse()?;
        let mut s = c.model.to_string();
        kv.set("model", &mut s)?;
        c.model = s.parse()?;
        kv.set("tune_budget", &mut c.tune_budget)?;
        kv.set("train_includes_validation", &mut c.train_includes_validation)?;
        set_sessions(kv, "train_sessions", &mut c.split.train_sessions)?;
        set_sessions(kv, "val_sessions", &mut c.split.val_sessions)?;
        set_sessions(kv, "test_sessions", &mut c.split.test_sessions)?;
        kv.set("epoch_window_s", &mut c.epoch_window_s)?;
        kv.set("epoch_offset_s", &mut c.epoch_offset_s)?;
        let p = &mut c.preprocess;
        kv.set("notch_base_hz", &mut p.notch_base_hz)?;
        kv.set("notch_width_hz", &mut p.notch_width_hz)?;
        kv.set("bandpass_low_hz", &mut p.bandpass_low_hz)?;
        kv.set("bandpass_high_hz", &mut p.bandpass_high_hz)?;
        kv.set("bandpass_transition_hz", &mut p.bandpass_transition_hz)?;
        kv.set("bad_window_s", &mut p.bad_channels.window_s)?;
        kv.set("bad_correlation_threshold", &mut p.bad_channels.correlation_threshold)?;
        kv.set("bad_fraction_threshold", &mut p.bad_channels.bad_fraction_threshold)?;
        kv.set("spline_stiffness", &mut p.spline.stiffness_m)?;
        kv.set("spline_terms", &mut p.spline.n_legendre_terms)?;
        kv.set("spline_regularization", &mut p.spline.regularization)?;
        let mut w = wavelet_name(c.wavelet.wavelet).to_string();
        kv.set("wavelet", &mut w)?;
        c.wavelet.wavelet = match w.as_str() {
            "db4" => Wavelet::Db4,
            "haar" => Wavelet::Haar,
            other => return Err(Error::Config(format!("unknown wavelet {other:?}"))),
        };
        kv.set("wavelet_levels", &mut c.wavelet.levels)?;
        kv.set("svm_tol", &mut c.svm_tol)?;
        kv.set("svm_max_passes", &mut c.svm_max_passes)?;
        kv.set("gbt_min_child_weight", &mut c.gbt_min_child_weight)?;
        kv.set("gbt_gamma", &mut c.gbt_gamma)?;
        kv.set("write_preprocessed", &mut c.write_preprocessed)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_key_values(&KeyValues::load(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if self.tune_budget == 0 {
            return Err(Error::Config("tune_budget must be at least 1".into()));
        }
        if !(self.epoch_window_s > 0.0 && self.epoch_offset_s >= 0.0) {
            return Err(Error::Config("epoch window must be positive and offset non-negative".into()));
        }
        if !(self.svm_tol > 0.0) || self.svm_max_passes == 0 {
            return Err(Error::Config("svm_tol and svm_max_passes must be positive".into()));
        }
        if !(self.gbt_min_child_weight >= 0.0 && self.gbt_gamma >= 0.0) {
            return Err(Error::Config("boosting penalties must be non-negative".into()));
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        let list = |s: &BTreeSet<u8>| join_list(&s.iter().copied().collect::<Vec<_>>());
        let p = &self.preprocess;
        kv.insert("seed", self.seed);
        kv.insert("feature_set", self.feature_set);
        kv.insert("model", self.model);
        kv.insert("tune_budget", self.tune_budget);
        kv.insert("train_includes_validation", self.train_includes_validation);
        kv.insert("train_sessions", list(&self.split.train_sessions));
        kv.insert("val_sessions", list(&self.split.val_sessions));
        kv.insert("test_sessions", list(&self.split.test_sessions));
        kv.insert("epoch_window_s", self.epoch_window_s);
        kv.insert("epoch_offset_s", self.epoch_offset_s);
        kv.insert("notch_base_hz", p.notch_base_hz);
        kv.insert("notch_width_hz", p.notch_width_hz);
        kv.insert("bandpass_low_hz", p.bandpass_low_hz);
        kv.insert("bandpass_high_hz", p.bandpass_high_hz);
        kv.insert("bandpass_transition_hz", p.bandpass_transition_hz);
        kv.insert("bad_window_s", p.bad_channels.window_s);
        kv.insert("bad_correlation_threshold", p.bad_channels.correlation_threshold);
        kv.insert("bad_fraction_threshold", p.bad_channels.bad_fraction_threshold);
        kv.insert("spline_stiffness", p.spline.stiffness_m);
        kv.insert("spline_terms", p.spline.n_legendre_terms);
        kv.insert("spline_regularization", p.spline.regularization);
        kv.insert("wavelet", wavelet_name(self.wavelet.wavelet));
        kv.insert("wavelet_levels", self.wavelet.levels);
        kv.insert("svm_tol", self.svm_tol);
        kv.insert("svm_max_passes", self.svm_max_passes);
        kv.insert("gbt_min_child_weight", self.gbt_min_child_weight);
        kv.insert("gbt_gamma", self.gbt_gamma);
        kv.insert("write_preprocessed", self.write_preprocessed);
        kv
    }
}

fn wavelet_name(w: Wavelet) -> &'static str {
    match w {
        Wavelet::Db4 => "db4",
        Wavelet::Haar => "haar",
    }
}
