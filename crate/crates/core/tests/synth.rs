use std::collections::BTreeSet;
use std::fs;

use eegid_core::data::{read_session, session_paths, load_manifest, Session};
use eegid_core::dsp::{find_bad_by_correlation, BadChannelConfig, PreprocessConfig, Preprocessor};
use eegid_core::synth::{
    inject_bad_channel, inject_line_noise, separability_check, synth_dataset, synth_session, BadChannelMode,
    SubjectSignature, SynthConfig,
};
use eegid_core::Error;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn small_config(seed: u64) -> SynthConfig {
    SynthConfig {
        n_subjects: 2,
        trials_per_session: vec![3, 3, 3, 2, 2],
        seed,
        ..SynthConfig::default()
    }
}

fn dir_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn default_config_writes_protocol_sized_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_dataset(&SynthConfig::default(), dir.path()).unwrap();
    let manifest_path = dir.path().join("manifest.json");
    assert_eq!(load_manifest(&manifest_path).unwrap(), manifest);
    let paths = session_paths(&manifest, &manifest_path);
    assert_eq!(paths.len(), 55);
    let mut total = 0;
    let mut label_counts = [0usize; 5];
    for (_, _, p) in &paths {
        let s = read_session(p).unwrap();
        for t in &s.trials {
            assert!((1000..=1250).contains(&t.n_samples()), "{} samples", t.n_samples());
            label_counts[t.label_id as usize] += 1;
        }
        total += s.trials.len();
    }
    assert_eq!(total, 4400);
    for c in label_counts {
        assert!((780..=980).contains(&c), "label counts {label_counts:?}");
    }
    assert_eq!(manifest.subjects[7].gender, "female");
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    synth_dataset(&small_config(7), a.path()).unwrap();
    synth_dataset(&small_config(7), b.path()).unwrap();
    synth_dataset(&small_config(8), c.path()).unwrap();
    let (ba, bb, bc) = (dir_bytes(a.path()), dir_bytes(b.path()), dir_bytes(c.path()));
    assert_eq!(ba.len(), 11);
    assert_eq!(ba, bb);
    assert_ne!(ba, bc);
}

#[test]
fn parallel_files_match_serial_generation() {
    let cfg = small_config(11);
    let dir = tempfile::tempdir().unwrap();
    synth_dataset(&cfg, dir.path()).unwrap();
    let sig = SubjectSignature::generate_for(&cfg, 1).unwrap();
    let serial = synth_session(&cfg, &sig, 1, 4).unwrap();
    let on_disk = read_session(dir.path().join("Sub-02_ses-4.ceeg")).unwrap();
    assert_eq!(serial, on_disk);
}

fn power_at(x: &[f64], fs: f64, f: f64) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k = (f * n as f64 / fs).round() as usize;
    buf[k].norm_sqr() / n as f64
}

#[test]
fn line_noise_injection() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let samples = ndarray::Array2::from_shape_fn((4, 1000), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let trial = eegid_core::data::Trial {
        label_id: 0,
        bad: false,
        samples,
    };
    assert_eq!(inject_line_noise(&trial, 250.0, 50.0, 0.0, 1).unwrap(), trial);
    let noisy = inject_line_noise(&trial, 250.0, 50.0, 10.0, 1).unwrap();
    for c in 0..4 {
        let before = power_at(trial.samples.row(c).as_slice().unwrap(), 250.0, 50.0);
        let after = power_at(noisy.samples.row(c).as_slice().unwrap(), 250.0, 50.0);
        assert!(10.0 * (after / before).log10() >= 20.0, "channel {c}");
    }
    assert!(matches!(
        inject_line_noise(&trial, 250.0, 130.0, 1.0, 1),
        Err(Error::AboveNyquist { .. })
    ));
}

fn filtered(session: &Session) -> Session {
    Preprocessor::new(PreprocessConfig::default(), session.meta.sampling_rate_hz)
        .unwrap()
        .filter(session)
}

#[test]
fn injected_noise_channel_is_detected_without_false_positives() {
    let cfg = SynthConfig {
        n_subjects: 4,
        trials_per_session: vec![20, 20, 20, 20, 20],
        ..SynthConfig::default()
    };
    let detector = BadChannelConfig::default();
    let mut detected = 0;
    let mut false_positives = 0;
    for i in 0..20 {
        let subject = i % 4;
        let sig = SubjectSignature::generate_for(&cfg, subject).unwrap();
        let clean = synth_session(&cfg, &sig, subject, (i / 4 + 1) as u8).unwrap();
        let channel = (7 * i + 3) % 30;
        let bad = inject_bad_channel(&clean, channel, BadChannelMode::WhiteNoise { std_uv: 15.0 }, i as u64).unwrap();
        false_positives += find_bad_by_correlation(&filtered(&clean), &detector).unwrap().len();
        let found = find_bad_by_correlation(&filtered(&bad), &detector).unwrap();
        if found == BTreeSet::from([channel]) {
            detected += 1;
        }
    }
    assert_eq!(detected, 20);
    assert_eq!(false_positives, 0);
}

#[test]
fn bad_channel_injection_leaves_other_channels_untouched() {
    let cfg = small_config(5);
    let sig = SubjectSignature::generate_for(&cfg, 0).unwrap();
    let clean = synth_session(&cfg, &sig, 0, 1).unwrap();
    let noisy = inject_bad_channel(&clean, 4, BadChannelMode::WhiteNoise { std_uv: 10.0 }, 1).unwrap();
    let flat = inject_bad_channel(&clean, 4, BadChannelMode::Flatline { value_uv: 2.5 }, 1).unwrap();
    for ((c, n), f) in clean.trials.iter().zip(&noisy.trials).zip(&flat.trials) {
        for ch in (0..30).filter(|&ch| ch != 4) {
            for ((a, b), d) in c.samples.row(ch).iter().zip(n.samples.row(ch)).zip(f.samples.row(ch)) {
                assert_eq!(a.to_bits(), b.to_bits());
                assert_eq!(a.to_bits(), d.to_bits());
            }
        }
        assert_ne!(c.samples.row(4), n.samples.row(4));
        let row = f.samples.row(4);
        let mean = row.sum() / row.len() as f64;
        assert_eq!(row.iter().map(|v| (v - mean).powi(2)).sum::<f64>(), 0.0);
    }
    assert!(matches!(
        inject_bad_channel(&clean, 30, BadChannelMode::Flatline { value_uv: 0.0 }, 1),
        Err(Error::ChannelIndex { index: 30, .. })
    ));
}

#[test]
fn default_subjects_pass_separability_self_check() {
    let report = separability_check(&SynthConfig::default(), 40, 2.0, 3.0).unwrap();
    assert!(report.passed(), "{report:?}");
}
