use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::N_LABELS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelEntry {
    pub id: u16,
    pub word: String,
    pub english_equivalent: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEntry {
    pub index: u8,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectEntry {
    pub id: String,
    pub gender: String,
    pub age: Option<u32>,
    pub sessions: Vec<SessionEntry>,
}

/// Settings recorded when the sessions of a manifest were preprocessed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessingNote {
    pub settings: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub sampling_rate_hz: f64,
    pub labels: Vec<LabelEntry>,
    pub subjects: Vec<SubjectEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocessing: Option<PreprocessingNote>,
}

/// The five imagined words and their English equivalents.
pub fn default_labels() -> Vec<LabelEntry> {
    [
        ("tʃæp", "Left"),
        ("rɑːst", "Right"),
        ("dʒelo", "Forward"),
        ("æɣæb", "Backward"),
        ("ist", "Stop"),
    ]
    .iter()
    .enumerate()
    .map(|(i, (word, en))| LabelEntry {
        id: i as u16,
        word: word.to_string(),
        english_equivalent: en.to_string(),
    })
    .collect()
}

impl DatasetManifest {
    /// Checks everything except file existence.
    pub fn validate_schema(&self) -> Result<()> {
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(Error::Manifest("sampling_rate_hz must be positive".into()));
        }
        if self.labels.len() != N_LABELS {
            return Err(Error::Manifest(format!(
                "label vocabulary must have {N_LABELS} entries, found {}",
                self.labels.len()
            )));
        }
        for (i, label) in self.labels.iter().enumerate() {
            if label.id as usize != i {
                return Err(Error::Manifest(format!("label ids must be 0..{N_LABELS} in order")));
            }
        }
        let mut ids = HashSet::new();
        for subject in &self.subjects {
            if subject.id.is_empty() || !ids.insert(subject.id.as_str()) {
                return Err(Error::Manifest(format!("empty or duplicate subject id {:?}", subject.id)));
            }
            let mut seen = HashSet::new();
            for s in &subject.sessions {
                if !seen.insert(s.index) {
                    return Err(Error::Manifest(format!(
                        "duplicate session index {} for {}",
                        s.index, subject.id
                    )));
                }
            }
            let n = subject.sessions.len();
            if n > 5 || (1..=n as u8).any(|k| !seen.contains(&k)) {
                return Err(Error::Manifest(format!(
                    "session indices of {} must be a prefix of 1..5",
                    subject.id
                )));
            }
        }
        Ok(())
    }

    pub fn n_sessions(&self) -> usize {
        self.subjects.iter().map(|s| s.sessions.len()).sum()
    }

    pub fn n_trials(&self) -> usize {
        self.subjects
            .iter()
            .flat_map(|s| &s.sessions)
            .map(|s| s.n_trials)
            .sum()
    }

    pub fn subject_ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.id.clone()).collect()
    }
}

/// Resolves a session path against the manifest's directory.
pub(crate) fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Session entries of a manifest with their resolved paths.
pub fn session_paths(manifest: &DatasetManifest, manifest_path: &Path) -> Vec<(String, u8, PathBuf)> {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .subjects
        .iter()
        .flat_map(|subj| {
            subj.sessions
                .iter()
                .map(move |s| (subj.id.clone(), s.index, resolve(base, &s.path)))
        })
        .collect()
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
    manifest.validate_schema()?;
    for (subject, index, file) in session_paths(&manifest, path) {
        if !file.is_file() {
            return Err(Error::Manifest(format!(
                "unresolvable path for {subject} session {index}: {}",
                file.display()
            )));
        }
    }
    Ok(manifest)
}

pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    manifest.validate_schema()?;
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(n_subjects: usize, n_sessions: u8) -> DatasetManifest {
        DatasetManifest {
            sampling_rate_hz: 250.0,
            labels: default_labels(),
            subjects: (1..=n_subjects)
                .map(|i| SubjectEntry {
                    id: format!("Sub-{i:02}"),
                    gender: "male".into(),
                    age: Some(20 + i as u32),
                    sessions: (1..=n_sessions)
                        .map(|k| SessionEntry {
                            index: k,
                            path: PathBuf::from(format!("Sub-{i:02}_ses-{k}.ceeg")),
                            n_trials: if k <= 3 { 100 } else { 50 },
                        })
                        .collect(),
                })
                .collect(),
            preprocessing: None,
        }
    }

    fn touch_sessions(m: &DatasetManifest, dir: &Path) {
        for s in m.subjects.iter().flat_map(|s| &s.sessions) {
            fs::write(dir.join(&s.path), b"").unwrap();
        }
    }

    #[test]
    fn eleven_by_five_gives_55_entries_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(11, 5);
        touch_sessions(&m, dir.path());
        let path = dir.path().join("manifest.json");
        save_manifest(&m, &path).unwrap();
        let back = load_manifest(&path).unwrap();
        assert_eq!(back.n_sessions(), 55);
        assert_eq!(back.n_trials(), 4400);
        assert_eq!(back, m);
        let first = fs::read(&path).unwrap();
        save_manifest(&back, &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn four_labels_rejected() {
        let mut m = manifest(1, 1);
        m.labels.pop();
        let err = m.validate_schema().unwrap_err().to_string();
        assert!(err.contains("label vocabulary must have 5 entries"), "{err}");
    }

    #[test]
    fn duplicate_and_gapped_session_indices_rejected() {
        let mut m = manifest(1, 3);
        m.subjects[0].sessions[2].index = 2;
        assert!(m.validate_schema().unwrap_err().to_string().contains("duplicate session index"));
        let mut m = manifest(1, 3);
        m.subjects[0].sessions[2].index = 4;
        assert!(m.validate_schema().is_err());
    }

    #[test]
    fn missing_field_and_missing_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, r#"{"sampling_rate_hz": 250.0, "labels": []}"#).unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::Manifest(_))));

        let m = manifest(2, 2);
        save_manifest(&m, &path).unwrap();
        let err = load_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("unresolvable path"), "{err}");
    }
}
