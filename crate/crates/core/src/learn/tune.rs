use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gbt::{gbt_train, GbtConfig};
use super::kernel::squared_distances;
use super::ovo::ovo_train_with_distances;
use super::svm::SvmHyperparams;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svm,
    Gbt,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(ModelKind::Svm),
            "gbt" => Ok(ModelKind::Gbt),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Svm => "svm",
            ModelKind::Gbt => "gbt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelParams {
    Svm(SvmHyperparams),
    Gbt(GbtConfig),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Svm(_) => ModelKind::Svm,
            ModelParams::Gbt(_) => ModelKind::Gbt,
        }
    }
}

/// Search ranges. Log-uniform draws for scale parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub svm_c: (f64, f64),
    pub svm_sigma: (f64, f64),
    pub gbt_learning_rate: (f64, f64),
    pub gbt_depth: (usize, usize),
    pub gbt_rounds: (usize, usize),
    pub gbt_lambda: (f64, f64),
    /// Settings held fixed during the search.
    pub svm_tol: f64,
    pub svm_max_passes: usize,
    pub gbt_min_child_weight: f64,
    pub gbt_gamma: f64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            svm_c: (1e-2, 1e3),
            svm_sigma: (1e-1, 1e2),
            gbt_learning_rate: (0.01, 0.3),
            gbt_depth: (2, 6),
            gbt_rounds: (50, 400),
            gbt_lambda: (1e-2, 10.0),
            svm_tol: SvmHyperparams::default().tol,
            svm_max_passes: SvmHyperparams::default().max_passes,
            gbt_min_child_weight: GbtConfig::default().min_child_weight,
            gbt_gamma: GbtConfig::default().gamma,
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo.ln()..=hi.ln()).exp()
}

impl SearchSpace {
    pub fn sample(&self, kind: ModelKind, n_classes: usize, rng: &mut ChaCha8Rng) -> ModelParams {
        match kind {
            ModelKind::Svm => ModelParams::Svm(SvmHyperparams {
                c: log_uniform(rng, self.svm_c),
                sigma: log_uniform(rng, self.svm_sigma),
                tol: self.svm_tol,
                max_passes: self.svm_max_passes,
            }),
            ModelKind::Gbt => ModelParams::Gbt(GbtConfig {
                learning_rate: rng.random_range(self.gbt_learning_rate.0..=self.gbt_learning_rate.1),
                max_depth: rng.random_range(self.gbt_depth.0..=self.gbt_depth.1),
                n_rounds: rng.random_range(self.gbt_rounds.0..=self.gbt_rounds.1),
                lambda: log_uniform(rng, self.gbt_lambda),
                n_classes,
                min_child_weight: self.gbt_min_child_weight,
                gamma: self.gbt_gamma,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub params: ModelParams,
    pub val_accuracy: f64,
    /// Boosting only: whether the training loss never increased.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone_loss: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub kind: ModelKind,
    pub seed: u64,
    pub budget: usize,
    pub best: ModelParams,
    pub best_trial: usize,
    pub best_val_accuracy: f64,
    pub trace: Vec<TrialRecord>,
}

impl TuneResult {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TuneResult> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// One row per trial: trial, model, every hyperparameter, val_accuracy.
    pub fn write_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let wrap = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse(format!("{other:?}")),
        };
        let mut w = csv::Writer::from_path(path).map_err(wrap)?;
        w.write_record([
            "trial",
            "model",
            "c",
            "sigma",
            "learning_rate",
            "max_depth",
            "n_rounds",
            "lambda",
            "val_accuracy",
        ])
        .map_err(wrap)?;
        for t in &self.trace {
            let mut rec = vec![t.trial.to_string(), t.params.kind().to_string()];
            match t.params {
                ModelParams::Svm(p) => rec.extend([p.c.to_string(), p.sigma.to_string(), "".into(), "".into(), "".into(), "".into()]),
                ModelParams::Gbt(p) => rec.extend([
                    "".into(),
                    "".into(),
                    p.learning_rate.to_string(),
                    p.max_depth.to_string(),
                    p.n_rounds.to_string(),
                    p.lambda.to_string(),
                ]),
            }
            rec.push(t.val_accuracy.to_string());
            w.write_record(&rec).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Seeded random search. Returns the first draw reaching the highest
/// validation accuracy. Inputs are expected to be standardized already.
pub fn random_search_tune(
    kind: ModelKind,
    space: &SearchSpace,
    train: &FeatureMatrix,
    val: &FeatureMatrix,
    budget: usize,
    seed: u64,
) -> Result<TuneResult> {
    if budget == 0 {
        return Err(Error::Config("tuning budget must be at least 1".into()));
    }
    if train.n_rows() == 0 || val.n_rows() == 0 {
        return Err(Error::Empty("tuning needs nonempty training and validation splits".into()));
    }
    if train.n_features() != val.n_features() {
        return Err(Error::Dimension {
            expected: train.n_features(),
            found: val.n_features(),
        });
    }
    let mut rng = crate::rng::stream(seed, 0x7475_6e65, 0, 0);
    let n_classes = train.n_classes();
    let draws: Vec<ModelParams> = (0..budget).map(|_| space.sample(kind, n_classes, &mut rng)).collect();
    let mut trace = Vec::with_capacity(budget);
    match kind {
        ModelKind::Svm => {
            let d_train = squared_distances(train.values.view(), train.values.view());
            let d_val = squared_distances(val.values.view(), train.values.view());
            for (trial, params) in draws.into_iter().enumerate() {
                let ModelParams::Svm(hp) = params else { unreachable!() };
                let model = ovo_train_with_distances(&train.values, &train.subject_labels, &d_train, &hp)?;
                let acc = accuracy(&model.predict_from_train_distances(&d_val), &val.subject_labels);
                log::info!("tune svm trial {trial}: C={:.4} sigma={:.4} val_acc={acc:.4}", hp.c, hp.sigma);
                trace.push(TrialRecord {
                    trial,
                    params,
                    val_accuracy: acc,
                    monotone_loss: None,
                });
            }
        }
        ModelKind::Gbt => {
            for (trial, params) in draws.into_iter().enumerate() {
                let ModelParams::Gbt(cfg) = params else { unreachable!() };
                let model = gbt_train(&train.values, &train.subject_labels, &cfg)?;
                let acc = accuracy(&model.predict_batch(&val.values)?, &val.subject_labels);
                log::info!(
                    "tune gbt trial {trial}: eta={:.4} depth={} rounds={} lambda={:.4} val_acc={acc:.4}",
                    cfg.learning_rate,
                    cfg.max_depth,
                    cfg.n_rounds,
                    cfg.lambda
                );
                trace.push(TrialRecord {
                    trial,
                    params,
                    val_accuracy: acc,
                    monotone_loss: Some(model.loss_is_monotone()),
                });
            }
        }
    }
    let mut best = 0;
    for (i, t) in trace.iter().enumerate() {
        if t.val_accuracy > trace[best].val_accuracy {
            best = i;
        }
    }
    Ok(TuneResult {
        kind,
        seed,
        budget,
        best: trace[best].params,
        best_trial: best,
        best_val_accuracy: trace[best].val_accuracy,
        trace,
    })
}

/// Reads hyperparameters from either a tuning result (its best trial) or a
/// bare parameter object.
pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(t) = serde_json::from_str::<TuneResult>(&text) {
        return Ok(t.best);
    }
    Ok(serde_json::from_str(&text)?)
}
