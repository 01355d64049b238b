//! Classifiers and hyperparameter search.

mod gbt;
mod kernel;
mod model;
mod ovo;
mod svm;
mod tune;

pub use gbt::{gbt_train, GbtConfig, GbtModel, Node, Tree};
pub use kernel::{rbf_kernel, rbf_matrix, squared_distances};
pub use model::{train_model, Classifier, TrainedModel, MODEL_FORMAT_VERSION};
pub use ovo::{ovo_train, ovo_train_with_distances, OvoPrediction, OvoSvmModel, PairModel};
pub use svm::{dual_objective, smo_solve, svm_train_binary, BinarySvmModel, SmoSolution, SvmHyperparams};
pub use tune::{load_params, random_search_tune, ModelKind, ModelParams, SearchSpace, TrialRecord, TuneResult};
