//! Linear-phase FIR design by the Hamming-windowed sinc method.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transition width of a Hamming-windowed sinc filter is about `3.3 * fs / N`.
const HAMMING_TRANSITION_FACTOR: f64 = 3.3;

/// What a kernel was designed to do, in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FilterDesign {
    Bandpass {
        low_hz: f64,
        high_hz: f64,
        transition_hz: f64,
        fs: f64,
    },
    Notch {
        freqs_hz: Vec<f64>,
        width_hz: f64,
        fs: f64,
    },
}

/// Type-I FIR kernel: odd length, symmetric taps.
#[derive(Debug, Clone, PartialEq)]
pub struct FirKernel {
    taps: Vec<f64>,
    design: FilterDesign,
}

impl FirKernel {
    /// Wraps arbitrary taps; they must have odd length and be symmetric.
    pub fn new(taps: Vec<f64>, design: FilterDesign) -> Result<Self> {
        if taps.len().is_multiple_of(2) {
            return Err(Error::InfeasibleFilter(format!("even tap count {}", taps.len())));
        }
        let n = taps.len();
        if (0..n / 2).any(|i| taps[i] != taps[n - 1 - i]) {
            return Err(Error::InfeasibleFilter("taps are not symmetric".into()));
        }
        Ok(FirKernel { taps, design })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn group_delay_samples(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    pub fn design(&self) -> &FilterDesign {
        &self.design
    }

    /// Magnitude of the DTFT at `freq_hz` for sampling rate `fs`.
    pub fn magnitude(&self, freq_hz: f64, fs: f64) -> f64 {
        // Symmetric taps: H(w) = e^{-jwM} (h[M] + 2 sum_k h[M-k] cos(wk)).
        let m = self.group_delay_samples();
        let w = 2.0 * PI * freq_hz / fs;
        let amp = self.taps[m]
            + 2.0
                * (1..=m)
                    .map(|k| self.taps[m - k] * (w * k as f64).cos())
                    .sum::<f64>();
        amp.abs()
    }

    pub fn gain_db(&self, freq_hz: f64, fs: f64) -> f64 {
        20.0 * self.magnitude(freq_hz, fs).max(1e-300).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandpassSpec {
    pub low_hz: f64,
    pub high_hz: f64,
    pub transition_hz: f64,
    pub fs: f64,
}

impl BandpassSpec {
    /// 3-45 Hz with 2 Hz transitions.
    pub fn eeg_default(fs: f64) -> Self {
        BandpassSpec {
            low_hz: 3.0,
            high_hz: 45.0,
            transition_hz: 2.0,
            fs,
        }
    }

    fn validate(&self) -> Result<()> {
        let nyquist = self.fs / 2.0;
        if !(self.transition_hz > 0.0) {
            return Err(Error::InfeasibleFilter("transition width must be positive".into()));
        }
        if !(self.low_hz - self.transition_hz > 0.0) {
            return Err(Error::InfeasibleFilter(format!(
                "low edge {} Hz minus transition {} Hz must stay above 0",
                self.low_hz, self.transition_hz
            )));
        }
        if !(self.high_hz + self.transition_hz < nyquist) || self.high_hz <= self.low_hz {
            return Err(Error::InfeasibleFilter(format!(
                "high edge {} Hz plus transition must stay below Nyquist {nyquist} Hz",
                self.high_hz
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchSpec {
    pub base_hz: f64,
    pub notch_width_hz: f64,
    pub fs: f64,
}

impl NotchSpec {
    /// 50 Hz mains with a 1 Hz stopband per harmonic.
    pub fn mains_default(fs: f64) -> Self {
        NotchSpec {
            base_hz: 50.0,
            notch_width_hz: 1.0,
            fs,
        }
    }

    /// Every multiple of the base frequency strictly below Nyquist.
    pub fn harmonics(&self) -> Vec<f64> {
        let nyquist = self.fs / 2.0;
        (1..)
            .map(|k| k as f64 * self.base_hz)
            .take_while(|&f| f < nyquist)
            .collect()
    }
}

fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Ideal lowpass impulse response with cutoff `fc`, centred on tap `(n-1)/2`.
fn ideal_lowpass(fc: f64, fs: f64, n: usize) -> Vec<f64> {
    let m = (n - 1) as f64 / 2.0;
    let wc = 2.0 * fc / fs;
    (0..n)
        .map(|i| {
            let x = i as f64 - m;
            if x == 0.0 {
                wc
            } else {
                (PI * wc * x).sin() / (PI * x)
            }
        })
        .collect()
}

/// Enforces exact symmetry against rounding in the tap formulas.
fn symmetrize(taps: &mut [f64]) {
    let n = taps.len();
    for i in 0..n / 2 {
        let v = 0.5 * (taps[i] + taps[n - 1 - i]);
        taps[i] = v;
        taps[n - 1 - i] = v;
    }
}

fn rule_of_thumb_len(fs: f64, transition_hz: f64) -> usize {
    let n = (HAMMING_TRANSITION_FACTOR * fs / transition_hz).ceil() as usize;
    n | 1
}

fn bandpass_taps(spec: &BandpassSpec, n: usize) -> Vec<f64> {
    // -6 dB points sit half a transition outside the passband edges.
    let f1 = spec.low_hz - spec.transition_hz / 2.0;
    let f2 = spec.high_hz + spec.transition_hz / 2.0;
    let hi = ideal_lowpass(f2, spec.fs, n);
    let lo = ideal_lowpass(f1, spec.fs, n);
    let mut taps: Vec<f64> = hamming(n)
        .iter()
        .zip(hi.iter().zip(&lo))
        .map(|(w, (h, l))| w * (h - l))
        .collect();
    symmetrize(&mut taps);
    taps
}

fn grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |i| lo + (hi - lo) * i as f64 / (points - 1).max(1) as f64)
}

fn bandpass_meets(spec: &BandpassSpec, k: &FirKernel) -> bool {
    let fs = spec.fs;
    let pass_ok = grid(spec.low_hz + spec.transition_hz, spec.high_hz - spec.transition_hz, 512)
        .all(|f| k.gain_db(f, fs).abs() <= 1.0);
    let stop_lo = grid(0.0, spec.low_hz - spec.transition_hz, 128).all(|f| k.gain_db(f, fs) <= -20.0);
    let stop_hi = grid(spec.high_hz + spec.transition_hz, fs / 2.0, 512).all(|f| k.gain_db(f, fs) <= -20.0);
    pass_ok && stop_lo && stop_hi
}

/// Hamming-windowed sinc bandpass.
///
/// The length starts from the Hamming rule of thumb and grows in steps of two
/// until the passband stays within 1 dB and the stopbands reach -20 dB.
pub fn design_bandpass(spec: &BandpassSpec) -> Result<FirKernel> {
    spec.validate()?;
    let design = FilterDesign::Bandpass {
        low_hz: spec.low_hz,
        high_hz: spec.high_hz,
        transition_hz: spec.transition_hz,
        fs: spec.fs,
    };
    let start = rule_of_thumb_len(spec.fs, spec.transition_hz);
    for n in (start..start * 4).step_by(2) {
        let kernel = FirKernel::new(bandpass_taps(spec, n), design.clone())?;
        if bandpass_meets(spec, &kernel) {
            return Ok(kernel);
        }
    }
    Err(Error::InfeasibleFilter("bandpass response targets not reachable".into()))
}

fn notch_taps(freqs: &[f64], width: f64, fs: f64, n: usize) -> Vec<f64> {
    let window = hamming(n);
    let mut taps = vec![0.0; n];
    taps[(n - 1) / 2] = 1.0;
    for &f0 in freqs {
        let hi = ideal_lowpass((f0 + width / 2.0).min(fs / 2.0), fs, n);
        let lo = ideal_lowpass(f0 - width / 2.0, fs, n);
        for i in 0..n {
            taps[i] -= window[i] * (hi[i] - lo[i]);
        }
    }
    symmetrize(&mut taps);
    taps
}

fn notch_meets(freqs: &[f64], width: f64, fs: f64, k: &FirKernel) -> bool {
    let deep = freqs.iter().all(|&f| k.gain_db(f, fs) <= -30.0);
    let flat = grid(0.0, fs / 2.0, 2048)
        .filter(|f| freqs.iter().all(|&n| (f - n).abs() >= 2.0 * width))
        .all(|f| k.gain_db(f, fs).abs() <= 1.0);
    deep && flat
}

/// Linear-phase band-stop at the base frequency and all its harmonics below
/// Nyquist, each stopband `notch_width_hz` wide.
pub fn design_notch(spec: &NotchSpec) -> Result<FirKernel> {
    if !(spec.notch_width_hz > 0.0) || !(spec.base_hz > 0.0) || !(spec.fs > 0.0) {
        return Err(Error::InfeasibleFilter("notch base, width and fs must be positive".into()));
    }
    let freqs = spec.harmonics();
    if freqs.is_empty() {
        return Err(Error::NoNotchBelowNyquist(spec.base_hz));
    }
    if freqs[0] - spec.notch_width_hz / 2.0 <= 0.0 {
        return Err(Error::InfeasibleFilter("notch wider than its frequency".into()));
    }
    let design = FilterDesign::Notch {
        freqs_hz: freqs.clone(),
        width_hz: spec.notch_width_hz,
        fs: spec.fs,
    };
    let start = rule_of_thumb_len(spec.fs, spec.notch_width_hz);
    for n in (start..start * 4).step_by(2) {
        let kernel = FirKernel::new(notch_taps(&freqs, spec.notch_width_hz, spec.fs, n), design.clone())?;
        if notch_meets(&freqs, spec.notch_width_hz, spec.fs, &kernel) {
            return Ok(kernel);
        }
    }
    Err(Error::InfeasibleFilter("notch response targets not reachable".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex_oracle::dtft_gain_db;

    /// Brute-force DTFT, independent of the cosine-series shortcut above.
    mod num_complex_oracle {
        use std::f64::consts::PI;
        pub fn dtft_gain_db(taps: &[f64], f: f64, fs: f64) -> f64 {
            let w = 2.0 * PI * f / fs;
            let (re, im) = taps.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, &h)| {
                (re + h * (w * n as f64).cos(), im - h * (w * n as f64).sin())
            });
            10.0 * (re * re + im * im).log10()
        }
    }

    #[test]
    fn bandpass_response() {
        let k = design_bandpass(&BandpassSpec::eeg_default(250.0)).unwrap();
        assert_eq!(k.len(), 413);
        assert_eq!(k.len() % 2, 1);
        let g20 = dtft_gain_db(k.taps(), 20.0, 250.0);
        assert!(g20.abs() <= 1.0, "{g20}");
        assert!(dtft_gain_db(k.taps(), 50.0, 250.0) <= -20.0);
        let dc: f64 = k.taps().iter().sum();
        assert!(20.0 * dc.abs().log10() <= -20.0, "dc {dc}");
    }

    #[test]
    fn bandpass_is_exactly_symmetric() {
        let k = design_bandpass(&BandpassSpec::eeg_default(250.0)).unwrap();
        let t = k.taps();
        assert!((0..t.len()).all(|i| t[i] == t[t.len() - 1 - i]));
        assert_eq!(k.group_delay_samples(), 206);
    }

    #[test]
    fn notch_response() {
        let k = design_notch(&NotchSpec::mains_default(250.0)).unwrap();
        for f in [50.0, 100.0] {
            assert!(dtft_gain_db(k.taps(), f, 250.0) <= -30.0, "{f} Hz");
        }
        assert!(dtft_gain_db(k.taps(), 20.0, 250.0).abs() <= 1.0);
        let t = k.taps();
        assert!((0..t.len()).all(|i| t[i] == t[t.len() - 1 - i]));
    }

    #[test]
    fn harmonics_respect_nyquist() {
        assert_eq!(NotchSpec::mains_default(250.0).harmonics(), vec![50.0, 100.0]);
        assert_eq!(NotchSpec::mains_default(1000.0).harmonics().len(), 9);
        let err = design_notch(&NotchSpec::mains_default(80.0)).unwrap_err();
        assert!(err.to_string().contains("no valid notch below Nyquist"), "{err}");
    }

    #[test]
    fn infeasible_bandpass_rejected() {
        let mut spec = BandpassSpec::eeg_default(250.0);
        spec.transition_hz = 0.0;
        assert!(matches!(design_bandpass(&spec), Err(Error::InfeasibleFilter(_))));
        let mut spec = BandpassSpec::eeg_default(250.0);
        spec.high_hz = 124.0;
        assert!(design_bandpass(&spec).is_err());
        let mut spec = BandpassSpec::eeg_default(250.0);
        spec.low_hz = 1.5;
        assert!(design_bandpass(&spec).is_err());
    }

    #[test]
    fn magnitude_matches_direct_dtft() {
        let k = design_bandpass(&BandpassSpec::eeg_default(250.0)).unwrap();
        for f in [0.0, 1.0, 3.3, 17.0, 44.0, 47.5, 90.0, 125.0] {
            let a = k.gain_db(f, 250.0);
            let b = dtft_gain_db(k.taps(), f, 250.0);
            assert!((a - b).abs() < 1e-6 || (a < -150.0 && b < -150.0), "{f}: {a} vs {b}");
        }
    }
}
