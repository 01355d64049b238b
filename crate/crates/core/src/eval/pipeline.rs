use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{evaluate, session_split, EvalReport, PipelineConfig};
use crate::data::{
    builtin_montage, load_manifest, read_session_as, save_manifest, session_file_name, write_session,
    DatasetManifest, PreprocessingNote, Session, SessionEntry, MONTAGE_VERSION,
};
use crate::dsp::{epoch_trials, PreprocessConfig, Preprocessor};
use crate::error::{Error, Result};
use crate::features::{
    extract_features, feature_names, FeatureMatrix, FeatureMeta, FeatureSet, Standardizer, WaveletConfig,
    FEATURE_FORMAT_VERSION,
};
use crate::learn::{random_search_tune, train_model, ModelParams, SearchSpace, TrainedModel, TrialRecord, TuneResult};

pub const CONFIG_FILE: &str = "config.txt";
pub const PREPROCESS_FILE: &str = "preprocess.json";
pub const FEATURES_FILE: &str = "features.csv";
pub const TUNE_FILE: &str = "tune.json";
pub const TUNE_TRACE_FILE: &str = "tune_trace.csv";
pub const MODEL_FILE: &str = "model.json";
pub const REPORT_FILE: &str = "report.json";
pub const RUN_LOG_FILE: &str = "run_log.json";

/// How epochs are cut and described.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureOptions {
    pub set: FeatureSet,
    pub wavelet: WaveletConfig,
    pub window_s: f64,
    pub offset_s: f64,
}

impl FeatureOptions {
    pub fn from_config(c: &PipelineConfig) -> Self {
        FeatureOptions {
            set: c.feature_set,
            wavelet: c.wavelet,
            window_s: c.epoch_window_s,
            offset_s: c.epoch_offset_s,
        }
    }
}

/// Per-session bookkeeping of the preprocessing and feature stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub subject: String,
    pub session: u8,
    pub n_trials: usize,
    pub n_bad_dropped: usize,
    pub interpolated_channels: Vec<String>,
    pub n_correlation_windows: usize,
}

fn preprocess_settings(c: &PreprocessConfig) -> PreprocessingNote {
    let b = &c.bad_channels;
    let s = &c.spline;
    let pairs: [(&str, String); 12] = [
        ("notch_base_hz", c.notch_base_hz.to_string()),
        ("notch_width_hz", c.notch_width_hz.to_string()),
        ("bandpass_low_hz", c.bandpass_low_hz.to_string()),
        ("bandpass_high_hz", c.bandpass_high_hz.to_string()),
        ("bandpass_transition_hz", c.bandpass_transition_hz.to_string()),
        ("bad_window_s", b.window_s.to_string()),
        ("bad_correlation_threshold", b.correlation_threshold.to_string()),
        ("bad_fraction_threshold", b.bad_fraction_threshold.to_string()),
        ("spline_stiffness", s.stiffness_m.to_string()),
        ("spline_terms", s.n_legendre_terms.to_string()),
        ("spline_regularization", s.regularization.to_string()),
        ("montage", MONTAGE_VERSION.to_string()),
    ];
    PreprocessingNote {
        settings: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
    }
}

/// Reads every session of a manifest in order, drops bad trials and, unless
/// the manifest is already preprocessed, runs the preprocessing chain.
/// `sink` receives `(subject class, session, original trial indices)`.
fn for_each_session(
    manifest_path: &Path,
    preprocess: &PreprocessConfig,
    mut sink: impl FnMut(usize, &Session, &[usize]) -> Result<()>,
) -> Result<(DatasetManifest, Vec<SessionLog>)> {
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let already = manifest.preprocessing.is_some();
    if already {
        log::info!("manifest is already preprocessed; skipping filtering and re-referencing");
    }
    let preprocessor = Preprocessor::new(*preprocess, manifest.sampling_rate_hz).map_err(|e| e.at_stage("preprocess"))?;
    let montage = builtin_montage();
    let mut logs = Vec::new();
    for (label, subject) in manifest.subjects.iter().enumerate() {
        for entry in &subject.sessions {
            let path = if entry.path.is_absolute() {
                entry.path.clone()
            } else {
                base.join(&entry.path)
            };
            let mut session = read_session_as(&path, &subject.id, entry.index).map_err(|e| e.at_stage("read"))?;
            let n_trials = session.trials.len();
            let kept: Vec<usize> = (0..n_trials).filter(|&i| !session.trials[i].bad).collect();
            session.trials.retain(|t| !t.bad);
            let mut log_entry = SessionLog {
                subject: subject.id.clone(),
                session: entry.index,
                n_trials,
                n_bad_dropped: n_trials - kept.len(),
                interpolated_channels: vec![],
                n_correlation_windows: 0,
            };
            if session.trials.is_empty() {
                log::warn!("{} session {} has no usable trials", subject.id, entry.index);
                logs.push(log_entry);
                continue;
            }
            if !already {
                let (clean, note) = preprocessor
                    .run(&session, &montage)
                    .map_err(|e| e.at_stage(format!("preprocess {} session {}", subject.id, entry.index)))?;
                log_entry.interpolated_channels = note.interpolated_channels;
                log_entry.n_correlation_windows = note.n_windows;
                session = clean;
            }
            log::info!(
                "{} session {}: {} trials kept, {} channels interpolated",
                subject.id,
                entry.index,
                kept.len(),
                log_entry.interpolated_channels.len()
            );
            sink(label, &session, &kept)?;
            logs.push(log_entry);
        }
    }
    Ok((manifest, logs))
}

/// Writes cleaned sessions (bad trials removed) plus a manifest recording the settings.
pub fn preprocess_dataset(
    manifest_path: impl AsRef<Path>,
    config: &PreprocessConfig,
    out_dir: impl AsRef<Path>,
) -> Result<(DatasetManifest, Vec<SessionLog>)> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut entries: BTreeMap<String, Vec<SessionEntry>> = BTreeMap::new();
    let (manifest, logs) = for_each_session(manifest_path.as_ref(), config, |_, session, kept| {
        let file = session_file_name(&session.subject_id, session.session_index);
        write_session(session, out_dir.join(&file))?;
        entries.entry(session.subject_id.clone()).or_default().push(SessionEntry {
            index: session.session_index,
            path: PathBuf::from(file),
            n_trials: kept.len(),
        });
        Ok(())
    })?;
    let mut out = manifest;
    for s in &mut out.subjects {
        s.sessions = entries.remove(&s.id).unwrap_or_default();
    }
    if out.preprocessing.is_none() {
        out.preprocessing = Some(preprocess_settings(config));
    }
    save_manifest(&out, out_dir.join("manifest.json"))?;
    Ok((out, logs))
}

/// Feature rows of every usable trial in a manifest.
pub fn build_features(
    manifest_path: impl AsRef<Path>,
    preprocess: &PreprocessConfig,
    options: &FeatureOptions,
) -> Result<(FeatureMatrix, Vec<SessionLog>)> {
    let manifest_path = manifest_path.as_ref();
    let mut blocks = Vec::new();
    let mut subject_names = Vec::new();
    let (manifest, logs) = for_each_session(manifest_path, preprocess, |label, session, kept| {
        let epochs = epoch_trials(session, options.window_s, options.offset_s).map_err(|e| e.at_stage("epoch"))?;
        let values = extract_features(&epochs, options.set, &options.wavelet).map_err(|e| e.at_stage("features"))?;
        let epoch_samples = epochs[0].n_samples();
        blocks.push(FeatureMatrix {
            values,
            subject_labels: vec![label; kept.len()],
            session_indices: vec![session.session_index; kept.len()],
            trial_indices: kept.to_vec(),
            word_labels: epochs.iter().map(|e| e.label_id).collect(),
            feature_names: feature_names(options.set, &session.meta.channel_names, &options.wavelet),
            meta: FeatureMeta {
                format_version: FEATURE_FORMAT_VERSION,
                feature_set: options.set,
                subject_names: vec![],
                wavelet: options.wavelet,
                epoch_samples,
                padded_samples: options.wavelet.padded_len(epoch_samples),
                standardizer: None,
            },
        });
        Ok(())
    })?;
    subject_names.extend(manifest.subject_ids());
    for b in &mut blocks {
        b.meta.subject_names = subject_names.clone();
    }
    let matrix = FeatureMatrix::concat(&blocks).map_err(|e| e.at_stage("features"))?;
    matrix.validate()?;
    Ok((matrix, logs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub conventions: BTreeMap<String, String>,
    pub sessions: Vec<SessionLog>,
    pub rows: BTreeMap<String, usize>,
    pub final_training_sessions: Vec<u8>,
    pub tuning_best_trial: usize,
    pub tuning_best_val_accuracy: f64,
    /// Boosting only: trials whose training loss ever increased.
    pub non_monotone_trials: Vec<usize>,
    pub final_loss_monotone: Option<bool>,
    pub artifacts: Vec<String>,
}

fn conventions() -> BTreeMap<String, String> {
    [
        ("bandpass_cutoffs", "-6 dB points at low - transition/2 and high + transition/2"),
        ("notch", "windowed-sinc band-stop at every harmonic below Nyquist"),
        ("bad_channels", "max |correlation| per 1 s window over the concatenated session"),
        ("reference", "common average after interpolation"),
        ("epoch", "imagery window measured from trial end minus imagery and end fixation"),
        ("moments", "population estimators"),
        ("wavelet_padding", "zero padding to a multiple of 2^levels"),
        ("standardization", "fit on the training sessions only"),
        ("metrics", "macro means over classes present in the test truth"),
        ("svm", "soft margin, SMO with second-order working-set selection"),
        ("random_streams", "ChaCha8 seeded by SplitMix64(seed, tag, a, b)"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn nonempty_split(features: &FeatureMatrix, config: &PipelineConfig) -> Result<(FeatureMatrix, FeatureMatrix, FeatureMatrix)> {
    let (train, val, test) = session_split(features, &config.split).map_err(|e| e.at_stage("split"))?;
    for (name, part) in [("train", &train), ("validation", &val), ("test", &test)] {
        if part.n_rows() == 0 {
            return Err(Error::Empty(format!("{name} split has no rows")).at_stage("split"));
        }
    }
    Ok((train, val, test))
}

/// Random search on the training sessions, scored on the validation sessions.
/// Standardization statistics come from the training rows only.
pub fn tune_on_split(features: &FeatureMatrix, config: &PipelineConfig) -> Result<TuneResult> {
    let (train, val, _) = nonempty_split(features, config)?;
    let standardizer = Standardizer::fit(&train).map_err(|e| e.at_stage("standardize"))?;
    let (z_train, z_val) = (standardizer.apply(&train)?, standardizer.apply(&val)?);
    let space = SearchSpace {
        svm_tol: config.svm_tol,
        svm_max_passes: config.svm_max_passes,
        gbt_min_child_weight: config.gbt_min_child_weight,
        gbt_gamma: config.gbt_gamma,
        ..SearchSpace::default()
    };
    random_search_tune(config.model, &space, &z_train, &z_val, config.tune_budget, config.seed)
        .map_err(|e| e.at_stage("tune"))
}

/// Final model on the training sessions, plus validation when the config folds it in.
/// Returns the sessions used.
pub fn train_on_split(
    features: &FeatureMatrix,
    params: &ModelParams,
    config: &PipelineConfig,
) -> Result<(TrainedModel, Vec<u8>)> {
    let (train, val, _) = nonempty_split(features, config)?;
    let mut sessions: Vec<u8> = config.split.train_sessions.iter().copied().collect();
    let rows = if config.train_includes_validation {
        sessions.extend(&config.split.val_sessions);
        sessions.sort_unstable();
        FeatureMatrix::concat(&[train, val])?
    } else {
        train
    };
    let model = train_model(params, &rows).map_err(|e| e.at_stage("train"))?;
    Ok((model, sessions))
}

/// Scores the test sessions of `features`.
pub fn evaluate_on_split(model: &TrainedModel, features: &FeatureMatrix, config: &PipelineConfig) -> Result<EvalReport> {
    let (_, _, test) = session_split(features, &config.split).map_err(|e| e.at_stage("split"))?;
    if test.n_rows() == 0 {
        return Err(Error::Empty("test split has no rows".into()).at_stage("evaluate"));
    }
    let mut report = evaluate(model, &test).map_err(|e| e.at_stage("evaluate"))?;
    report.split = Some(config.split.clone());
    report.seed = Some(config.seed);
    Ok(report)
}

/// Runs preprocessing, features, tuning, training and evaluation, writing
/// every artifact under `out_dir`.
pub fn run_pipeline(
    manifest_path: impl AsRef<Path>,
    config: &PipelineConfig,
    out_dir: impl AsRef<Path>,
) -> Result<EvalReport> {
    config.validate()?;
    let manifest_path = manifest_path.as_ref();
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let kv = config.to_key_values();
    fs::write(out_dir.join(CONFIG_FILE), kv.to_text()).map_err(|e| Error::io(out_dir.join(CONFIG_FILE), e))?;

    let manifest = load_manifest(manifest_path).map_err(|e| e.at_stage("manifest"))?;
    for s in &manifest.subjects {
        if !s.sessions.iter().any(|e| config.split.test_sessions.contains(&e.index)) {
            return Err(Error::TestSessionAbsent(s.id.clone()));
        }
    }
    if config.write_preprocessed {
        preprocess_dataset(manifest_path, &config.preprocess, out_dir.join("preprocessed"))
            .map_err(|e| e.at_stage("preprocess"))?;
    }

    let (features, sessions) = build_features(manifest_path, &config.preprocess, &FeatureOptions::from_config(config))?;
    features.write(out_dir.join(FEATURES_FILE)).map_err(|e| e.at_stage("features"))?;
    write_json(&sessions, &out_dir.join(PREPROCESS_FILE))?;

    let tuned = tune_on_split(&features, config)?;
    tuned.save(out_dir.join(TUNE_FILE))?;
    tuned.write_trace_csv(out_dir.join(TUNE_TRACE_FILE))?;
    log::info!(
        "best trial {} with validation accuracy {:.4}",
        tuned.best_trial,
        tuned.best_val_accuracy
    );
    let (model, final_sessions) = train_on_split(&features, &tuned.best, config)?;
    model.save(out_dir.join(MODEL_FILE))?;
    let report = evaluate_on_split(&model, &features, config)?;
    report.save(out_dir.join(REPORT_FILE))?;
    log::info!("test accuracy {:.4}", report.accuracy);
    let (train, val, test) = session_split(&features, &config.split)?;

    let final_loss_monotone = match &model.classifier {
        crate::learn::Classifier::Gbt(m) => Some(m.loss_is_monotone()),
        crate::learn::Classifier::Svm(_) => None,
    };
    let run_log = RunLog {
        config: kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        seeds: BTreeMap::from([("master".to_string(), config.seed), ("tuner".to_string(), tuned.seed)]),
        conventions: conventions(),
        sessions,
        rows: BTreeMap::from([
            ("train".to_string(), train.n_rows()),
            ("validation".to_string(), val.n_rows()),
            ("test".to_string(), test.n_rows()),
        ]),
        final_training_sessions: final_sessions,
        tuning_best_trial: tuned.best_trial,
        tuning_best_val_accuracy: tuned.best_val_accuracy,
        non_monotone_trials: tuned
            .trace
            .iter()
            .filter(|t: &&TrialRecord| t.monotone_loss == Some(false))
            .map(|t| t.trial)
            .collect(),
        final_loss_monotone,
        artifacts: [
            CONFIG_FILE,
            PREPROCESS_FILE,
            FEATURES_FILE,
            "features.json",
            TUNE_FILE,
            TUNE_TRACE_FILE,
            MODEL_FILE,
            REPORT_FILE,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    };
    write_json(&run_log, &out_dir.join(RUN_LOG_FILE))?;
    Ok(report)
}
