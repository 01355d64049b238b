//! Plain-text importer for recordings exported as one CSV matrix per trial.
//!
//! Expected layout under the input directory:
//!
//! ```text
//! recording.txt            optional, `sampling_rate_hz=<fs>` (default 250)
//! participants.csv         optional, columns id,gender,age
//! <subject>/ses-<k>/trials.csv     columns trial,label,bad
//! <subject>/ses-<k>/trial_<trial>.csv
//! ```
//!
//! Each trial file has a header row of channel names followed by one row per
//! time sample in microvolts. Trials must be cut so that the imagery phase
//! starts `3 s * fs` samples before the end of the trial (see
//! [`Trial::imagery_onset`]). `label` is a word id in 0..5 and `bad` is 0 or 1.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{
    default_labels, save_manifest, session_file_name, write_session, DatasetManifest, RecordingMeta,
    Session, SessionEntry, SubjectEntry, Trial, DEFAULT_SAMPLING_RATE_HZ,
};
use crate::error::{Error, Result};

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Parse(format!("{}: {e}", path.display()))
    }
}

fn parse_err(path: &Path, what: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{}: {what}", path.display()))
}

fn read_sampling_rate(dir: &Path) -> Result<f64> {
    let path = dir.join("recording.txt");
    if !path.exists() {
        return Ok(DEFAULT_SAMPLING_RATE_HZ);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    for line in text.lines() {
        if let Some(v) = line.trim().strip_prefix("sampling_rate_hz=") {
            return v.trim().parse().map_err(|_| parse_err(&path, "bad sampling rate"));
        }
    }
    Ok(DEFAULT_SAMPLING_RATE_HZ)
}

fn read_participants(dir: &Path) -> Result<BTreeMap<String, (String, Option<u32>)>> {
    let path = dir.join("participants.csv");
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let mut rdr = csv_reader(&path)?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(&path, e))?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let gender = rec.get(1).unwrap_or("unspecified").to_string();
        let age = rec.get(2).and_then(|a| a.parse().ok());
        out.insert(id, (gender, age));
    }
    Ok(out)
}

fn read_trial_matrix(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut rdr = csv_reader(path)?;
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut values = Vec::new();
    let mut n_rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != names.len() {
            return Err(parse_err(path, format!("row {n_rows} has {} columns", rec.len())));
        }
        for field in rec.iter() {
            let v: f64 = field.parse().map_err(|_| parse_err(path, format!("bad number {field:?}")))?;
            values.push(v);
        }
        n_rows += 1;
    }
    // rows are time samples; transpose into channel-major
    let time_major = Array2::from_shape_vec((n_rows, names.len()), values)
        .map_err(|e| parse_err(path, e))?;
    Ok((names, time_major.t().to_owned()))
}

fn import_session(dir: &Path, subject: &str, index: u8, fs_hz: f64) -> Result<Session> {
    let index_path = dir.join("trials.csv");
    let mut rdr = csv_reader(&index_path)?;
    let mut meta: Option<RecordingMeta> = None;
    let mut trials = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(&index_path, e))?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let trial_id = field(0).to_string();
        let label_id: u16 = field(1).parse().map_err(|_| parse_err(&index_path, "bad label"))?;
        let bad = match field(2) {
            "0" | "false" => false,
            "1" | "true" => true,
            other => return Err(parse_err(&index_path, format!("bad flag {other:?}"))),
        };
        let (names, samples) = read_trial_matrix(&dir.join(format!("trial_{trial_id}.csv")))?;
        match &meta {
            None => meta = Some(RecordingMeta::new(fs_hz, names)?),
            Some(m) if m.channel_names != names => {
                return Err(parse_err(&index_path, format!("trial {trial_id}: channel list differs")))
            }
            Some(_) => {}
        }
        trials.push(Trial {
            label_id,
            bad,
            samples,
        });
    }
    let meta = meta.ok_or_else(|| Error::Empty(format!("{}: no trials", index_path.display())))?;
    let session = Session {
        subject_id: subject.to_string(),
        session_index: index,
        meta,
        trials,
    };
    session.validate()?;
    Ok(session)
}

fn sorted_dirs(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            out.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    out.sort();
    Ok(out)
}

/// Converts a CSV tree into CEEG session files plus `manifest.json` in `out_dir`.
pub fn import_csv_dir(csv_dir: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let (csv_dir, out_dir) = (csv_dir.as_ref(), out_dir.as_ref());
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let fs_hz = read_sampling_rate(csv_dir)?;
    let participants = read_participants(csv_dir)?;
    let mut subjects = Vec::new();
    for (subject, subject_dir) in sorted_dirs(csv_dir)? {
        let mut sessions = Vec::new();
        for (name, ses_dir) in sorted_dirs(&subject_dir)? {
            let Some(index) = name.strip_prefix("ses-").and_then(|k| k.parse::<u8>().ok()) else {
                continue;
            };
            let session = import_session(&ses_dir, &subject, index, fs_hz)?;
            let file = session_file_name(&subject, index);
            write_session(&session, out_dir.join(&file))?;
            sessions.push(SessionEntry {
                index,
                path: PathBuf::from(file),
                n_trials: session.trials.len(),
            });
        }
        sessions.sort_by_key(|s| s.index);
        let (gender, age) = participants
            .get(&subject)
            .cloned()
            .unwrap_or_else(|| ("unspecified".to_string(), None));
        subjects.push(SubjectEntry {
            id: subject,
            gender,
            age,
            sessions,
        });
    }
    let manifest = DatasetManifest {
        sampling_rate_hz: fs_hz,
        labels: default_labels(),
        subjects,
        preprocessing: None,
    };
    save_manifest(&manifest, out_dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::read_session;

    #[test]
    fn imports_a_small_tree() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        fs::write(src.path().join("recording.txt"), "sampling_rate_hz=100\n").unwrap();
        fs::write(src.path().join("participants.csv"), "id,gender,age\nSub-01,female,27\n").unwrap();
        let ses = src.path().join("Sub-01").join("ses-1");
        fs::create_dir_all(&ses).unwrap();
        fs::write(ses.join("trials.csv"), "trial,label,bad\n0,3,0\n1,4,1\n").unwrap();
        fs::write(ses.join("trial_0.csv"), "Cz,Pz\n1.5,2\n3,4\n5,6\n").unwrap();
        fs::write(ses.join("trial_1.csv"), "Cz,Pz\n0,0\n").unwrap();

        let m = import_csv_dir(src.path(), out.path()).unwrap();
        assert_eq!(m.subjects.len(), 1);
        assert_eq!(m.subjects[0].gender, "female");
        assert_eq!(m.subjects[0].age, Some(27));
        assert_eq!(m.sampling_rate_hz, 100.0);

        let s = read_session(out.path().join("Sub-01_ses-1.ceeg")).unwrap();
        assert_eq!(s.trials.len(), 2);
        assert_eq!(s.trials[0].samples.row(0).to_vec(), vec![1.5, 3.0, 5.0]);
        assert_eq!(s.trials[0].samples.row(1).to_vec(), vec![2.0, 4.0, 6.0]);
        assert_eq!(s.trials[0].label_id, 3);
        assert!(s.trials[1].bad);
    }

    #[test]
    fn ragged_rows_rejected() {
        let src = tempfile::tempdir().unwrap();
        let ses = src.path().join("S").join("ses-1");
        fs::create_dir_all(&ses).unwrap();
        fs::write(ses.join("trials.csv"), "trial,label,bad\n0,0,0\n").unwrap();
        fs::write(ses.join("trial_0.csv"), "Cz,Pz\n1,2\n3\n").unwrap();
        let out = tempfile::tempdir().unwrap();
        assert!(import_csv_dir(src.path(), out.path()).is_err());
    }
}
