//! CEEG v1 session files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! 0..4   b"CEEG"
//! 4      version (u8) = 1
//! 5      reserved (u8) = 0
//! 6..8   n_channels (u16)
//! 8..16  sampling_rate_hz (f64)
//!        n_channels x { len (u8), UTF-8 name bytes }
//!        n_trials (u32)
//!        per trial: label_id (u16), bad_flag (u8), n_samples (u32),
//!                   n_channels * n_samples f32, channel-major
//! ```
//!
//! The payload carries no subject or session identity. Files are named
//! `<subject>_ses-<k>.ceeg` and [`read_session`] recovers the identity from
//! that name; [`read_session_as`] takes it from the caller instead.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{RecordingMeta, Session, Trial, N_LABELS};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CEEG";
const VERSION: u8 = 1;
const TRIAL_HEADER_LEN: usize = 2 + 1 + 4;

/// Conventional file name for a session.
pub fn session_file_name(subject_id: &str, session_index: u8) -> String {
    format!("{subject_id}_ses-{session_index}.ceeg")
}

fn parse_file_name(path: &Path) -> Result<(String, u8)> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::FileName(path.display().to_string()))?;
    let bad = || Error::FileName(name.to_string());
    let stem = name.strip_suffix(".ceeg").ok_or_else(bad)?;
    let (subject, index) = stem.rsplit_once("_ses-").ok_or_else(bad)?;
    let index: u8 = index.parse().map_err(|_| bad())?;
    if subject.is_empty() || !(1..=5).contains(&index) {
        return Err(bad());
    }
    Ok((subject.to_string(), index))
}

/// Exact encoded size of a session in bytes.
pub fn encoded_len(meta: &RecordingMeta, trial_samples: impl IntoIterator<Item = usize>) -> usize {
    let header = 4 + 1 + 1 + 2 + 8;
    let names: usize = meta.channel_names.iter().map(|n| 1 + n.len()).sum();
    let trials: usize = trial_samples
        .into_iter()
        .map(|n| TRIAL_HEADER_LEN + meta.n_channels() * n * 4)
        .sum();
    header + names + 4 + trials
}

fn encode(session: &Session) -> Result<Vec<u8>> {
    session.validate()?;
    let meta = &session.meta;
    let mut buf = Vec::with_capacity(encoded_len(meta, session.trials.iter().map(Trial::n_samples)));
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    buf.push(0);
    buf.extend_from_slice(&(meta.n_channels() as u16).to_le_bytes());
    buf.extend_from_slice(&meta.sampling_rate_hz.to_le_bytes());
    for name in &meta.channel_names {
        buf.push(name.len() as u8);
        buf.extend_from_slice(name.as_bytes());
    }
    let n_trials = u32::try_from(session.trials.len())
        .map_err(|_| Error::Invariant("too many trials".into()))?;
    buf.extend_from_slice(&n_trials.to_le_bytes());
    for trial in &session.trials {
        let n_samples = u32::try_from(trial.n_samples())
            .map_err(|_| Error::Invariant("trial too long".into()))?;
        buf.extend_from_slice(&trial.label_id.to_le_bytes());
        buf.push(trial.bad as u8);
        buf.extend_from_slice(&n_samples.to_le_bytes());
        for row in trial.samples.rows() {
            for &v in row {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    Ok(buf)
}

/// Writes `session` in CEEG v1 layout. The file name must match
/// [`session_file_name`] so the identity survives a round trip.
pub fn write_session(session: &Session, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(session)?;
    let (subject, index) = parse_file_name(path)?;
    if subject != session.subject_id || index != session.session_index {
        return Err(Error::FileName(format!(
            "{} (session is {}/{})",
            path.display(),
            session.subject_id,
            session.session_index
        )));
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(Error::Truncated {
                offset: self.pos,
                needed: n - available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<(RecordingMeta, Vec<Trial>)> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4)?.try_into().unwrap();
    if &magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = cur.u8()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let reserved = cur.u8()?;
    if reserved != 0 {
        return Err(Error::ReservedByte(reserved));
    }
    let n_channels = cur.u16()? as usize;
    let fs = cur.f64()?;
    let mut names = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        let len = cur.u8()? as usize;
        let raw = cur.take(len)?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| Error::Invariant("channel name is not UTF-8".into()))?;
        names.push(name.to_string());
    }
    let meta = RecordingMeta::new(fs, names)?;
    let n_trials = cur.u32()? as usize;
    // Each trial needs at least its header, so a huge count cannot force a huge allocation.
    let mut trials = Vec::with_capacity(n_trials.min(bytes.len() / TRIAL_HEADER_LEN));
    for t in 0..n_trials {
        let label_id = cur.u16()?;
        if label_id as usize >= N_LABELS {
            return Err(Error::Invariant(format!("trial {t}: label {label_id} out of range")));
        }
        let bad = match cur.u8()? {
            0 => false,
            1 => true,
            other => return Err(Error::Invariant(format!("trial {t}: bad flag {other}"))),
        };
        let n_samples = cur.u32()? as usize;
        if n_samples == 0 {
            return Err(Error::Invariant(format!("trial {t}: no samples")));
        }
        let raw = cur.take(n_channels * n_samples * 4)?;
        let mut samples = Array2::zeros((n_channels, n_samples));
        for (k, (dst, chunk)) in samples.iter_mut().zip(raw.chunks_exact(4)).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::NonFiniteAmplitude {
                    trial: t,
                    channel: k / n_samples,
                    sample: k % n_samples,
                });
            }
            *dst = v as f64;
        }
        trials.push(Trial {
            label_id,
            bad,
            samples,
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::TrailingBytes(bytes.len() - cur.pos));
    }
    Ok((meta, trials))
}

/// Reads the recording payload of any CEEG file regardless of its name.
pub fn read_recording(path: impl AsRef<Path>) -> Result<(RecordingMeta, Vec<Trial>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Reads a session, taking subject and session index from the file name.
pub fn read_session(path: impl AsRef<Path>) -> Result<Session> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (meta, trials) = decode(&bytes)?;
    let (subject_id, session_index) = parse_file_name(path)?;
    Ok(Session {
        subject_id,
        session_index,
        meta,
        trials,
    })
}

/// Reads a session whose identity is known from elsewhere (e.g. a manifest).
pub fn read_session_as(path: impl AsRef<Path>, subject_id: &str, session_index: u8) -> Result<Session> {
    let (meta, trials) = read_recording(path)?;
    let session = Session {
        subject_id: subject_id.to_string(),
        session_index,
        meta,
        trials,
    };
    session.validate()?;
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_session(n_ch: usize, n_trials: usize, n_samples: usize) -> Session {
        let names = (0..n_ch).map(|c| format!("Ch{c}")).collect();
        Session {
            subject_id: "Sub-03".into(),
            session_index: 2,
            meta: RecordingMeta::new(250.0, names).unwrap(),
            trials: (0..n_trials)
                .map(|t| Trial {
                    label_id: (t % 5) as u16,
                    bad: t % 7 == 3,
                    samples: Array2::from_shape_fn((n_ch, n_samples), |(c, s)| {
                        ((c * 31 + s * 7 + t) % 97) as f32 as f64 * 0.5 - 20.0
                    }),
                })
                .collect(),
        }
    }

    #[test]
    fn file_size_matches_layout() {
        let s = sample_session(30, 100, 500);
        let bytes = encode(&s).unwrap();
        let name_bytes: usize = s.meta.channel_names.iter().map(|n| n.len()).sum();
        // fixed header 16 + one length byte per name + u32 trial count
        assert_eq!(bytes.len(), 20 + 30 + name_bytes + 100 * (7 + 30 * 500 * 4));
        assert_eq!(bytes.len(), encoded_len(&s.meta, vec![500; 100]));
    }

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample_session(4, 6, 33);
        let path = dir.path().join(session_file_name(&s.subject_id, s.session_index));
        write_session(&s, &path).unwrap();
        assert_eq!(read_session(&path).unwrap(), s);
        let first = fs::read(&path).unwrap();
        write_session(&read_session(&path).unwrap(), &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn zero_channels_rejected_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = sample_session(1, 1, 3);
        s.meta.channel_names.clear();
        s.trials.clear();
        let path = dir.path().join("Sub-03_ses-2.ceeg");
        assert!(matches!(write_session(&s, &path), Err(Error::Invariant(_))));
        assert!(!path.exists());
    }

    #[test]
    fn mismatched_file_name_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let s = sample_session(2, 1, 3);
        assert!(matches!(
            write_session(&s, dir.path().join("Sub-04_ses-2.ceeg")),
            Err(Error::FileName(_))
        ));
        assert!(matches!(
            write_session(&s, dir.path().join("session.bin")),
            Err(Error::FileName(_))
        ));
    }

    #[test]
    fn distinct_errors_for_corruptions() {
        let good = encode(&sample_session(3, 2, 10)).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[..4].copy_from_slice(b"XEEG");
        assert!(matches!(decode(&bad_magic), Err(Error::BadMagic(_))));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(decode(&bad_version), Err(Error::UnsupportedVersion(2))));

        // cut inside the second trial's sample block
        let cut = good.len() - 17;
        assert!(matches!(decode(&good[..cut]), Err(Error::Truncated { .. })));

        let mut nan = good.clone();
        let last = nan.len() - 4;
        nan[last..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            decode(&nan),
            Err(Error::NonFiniteAmplitude { trial: 1, channel: 2, sample: 9 })
        ));

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(decode(&trailing), Err(Error::TrailingBytes(1))));
    }

    #[test]
    fn every_single_byte_header_corruption_is_rejected() {
        let good = encode(&sample_session(2, 1, 4)).unwrap();
        for pos in 0..6 {
            for value in 0..=255u8 {
                if value == good[pos] {
                    continue;
                }
                let mut bytes = good.clone();
                bytes[pos] = value;
                let err = decode(&bytes).expect_err("corrupted header accepted");
                let typed = match pos {
                    0..=3 => matches!(err, Error::BadMagic(_)),
                    4 => matches!(err, Error::UnsupportedVersion(_)),
                    _ => matches!(err, Error::ReservedByte(_)),
                };
                assert!(typed, "byte {pos} = {value}: unexpected {err:?}");
            }
        }
    }

    #[test]
    fn every_truncation_is_rejected() {
        let good = encode(&sample_session(2, 2, 3)).unwrap();
        for len in 0..good.len() {
            assert!(decode(&good[..len]).is_err(), "prefix of {len} bytes accepted");
        }
    }

    #[test]
    fn file_name_parsing() {
        assert_eq!(
            parse_file_name(Path::new("/x/Sub-01_ses-5.ceeg")).unwrap(),
            ("Sub-01".to_string(), 5)
        );
        assert!(parse_file_name(Path::new("Sub-01_ses-6.ceeg")).is_err());
        assert!(parse_file_name(Path::new("Sub-01.ceeg")).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_identity(
            n_ch in 1usize..6,
            samples in prop::collection::vec(prop::collection::vec(-1e4f32..1e4f32, 1..40), 0..5),
            fs in 1.0f64..2000.0,
            label in 0u16..5,
        ) {
            let names: Vec<String> = (0..n_ch).map(|c| format!("E{c}")).collect();
            let meta = RecordingMeta::new(fs, names).unwrap();
            let trials: Vec<Trial> = samples.iter().enumerate().map(|(t, v)| Trial {
                label_id: label,
                bad: t % 2 == 1,
                samples: Array2::from_shape_fn((n_ch, v.len()), |(c, s)| (v[s] + c as f32) as f64),
            }).collect();
            let s = Session { subject_id: "S".into(), session_index: 1, meta, trials };
            let bytes = encode(&s).unwrap();
            let (meta, trials) = decode(&bytes).unwrap();
            let back = Session { subject_id: "S".into(), session_index: 1, meta, trials };
            prop_assert_eq!(encode(&back).unwrap(), bytes);
            prop_assert_eq!(back, s);
        }
    }
}
