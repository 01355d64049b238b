//! Subject identification from multi-session imagined-speech EEG.
//!
//! The crate is organised along the processing chain:
//!
//! - [`data`]: recordings, the CEEG v1 session file, the dataset manifest and the montage
//! - [`synth`]: a deterministic synthetic dataset generator and fault injectors
//! - [`dsp`]: FIR notch / bandpass filtering, bad-channel detection,
//!   spherical-spline interpolation, common average reference and epoching
//! - [`features`]: statistical moments, wavelet band energies and standardization
//! - [`learn`]: RBF SVM trained by SMO with one-vs-one voting, softmax gradient
//!   boosted trees, and seeded random-search tuning
//! - [`eval`]: session-based splits, metrics, reports and the end-to-end pipeline

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod kv;
pub mod learn;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
