//! Zero-phase FIR filtering by FFT overlap-add.
//!
//! The signal is extended at both ends by mirror reflection (edge sample not
//! repeated) over the kernel's group delay, convolved, and the delay-compensated
//! central part is returned, so output sample `i` is
//! `sum_k h[k] * ext[i + 2d - k]` with `d = (len - 1) / 2`.

use std::sync::Arc;

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::fir::FirKernel;

/// Index into `0..n` of position `i` (possibly outside) under mirror reflection.
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let r = i.rem_euclid(period);
    if r < n as isize {
        r as usize
    } else {
        (period - r) as usize
    }
}

fn reflect_pad(signal: &[f64], pad: usize) -> Vec<f64> {
    let n = signal.len();
    (-(pad as isize)..(n + pad) as isize)
        .map(|i| signal[reflect_index(i, n)])
        .collect()
}

/// Precomputed kernel spectrum for repeated filtering with one kernel.
#[derive(Clone)]
pub struct OverlapAdd {
    taps_len: usize,
    fft_len: usize,
    block_len: usize,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OverlapAdd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OverlapAdd")
            .field("taps_len", &self.taps_len)
            .field("fft_len", &self.fft_len)
            .field("block_len", &self.block_len)
            .finish()
    }
}

impl OverlapAdd {
    /// Uses an FFT of four times the kernel length (at least 256 points).
    pub fn new(kernel: &FirKernel) -> Self {
        let fft_len = (4 * kernel.len()).next_power_of_two().max(256);
        Self::with_block_len(kernel, fft_len - kernel.len() + 1)
    }

    /// Uses input blocks of `block_len` samples.
    pub fn with_block_len(kernel: &FirKernel, block_len: usize) -> Self {
        let block_len = block_len.max(1);
        let fft_len = (block_len + kernel.len() - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); fft_len];
        for (s, &t) in spectrum.iter_mut().zip(kernel.taps()) {
            s.re = t;
        }
        forward.process(&mut spectrum);
        // fold the inverse FFT's 1/N scaling into the kernel
        let scale = 1.0 / fft_len as f64;
        spectrum.iter_mut().for_each(|s| *s *= scale);
        OverlapAdd {
            taps_len: kernel.len(),
            fft_len,
            block_len,
            spectrum,
            forward,
            inverse,
        }
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Full linear convolution of two real signals of equal length, packed
    /// as the real and imaginary parts of one complex sequence.
    fn convolve_packed(&self, re: &[f64], im: &[f64]) -> Vec<Complex64> {
        let n = re.len();
        let out_len = n + self.taps_len - 1;
        let mut out = vec![Complex64::new(0.0, 0.0); out_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        let mut start = 0;
        while start < n {
            let end = (start + self.block_len).min(n);
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            for (b, i) in buf.iter_mut().zip(start..end) {
                *b = Complex64::new(re[i], im[i]);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for (b, s) in buf.iter_mut().zip(&self.spectrum) {
                *b *= s;
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let valid = (end - start + self.taps_len - 1).min(out_len - start);
            for (o, b) in out[start..start + valid].iter_mut().zip(&buf) {
                *o += b;
            }
            start = end;
        }
        out
    }

    fn filter_two(&self, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(a.len(), b.len());
        let n = a.len();
        if n == 0 {
            return (Vec::new(), Vec::new());
        }
        let pad = (self.taps_len - 1) / 2;
        let (ea, eb) = (reflect_pad(a, pad), reflect_pad(b, pad));
        let full = self.convolve_packed(&ea, &eb);
        let out = &full[2 * pad..2 * pad + n];
        (out.iter().map(|c| c.re).collect(), out.iter().map(|c| c.im).collect())
    }

    pub fn filter(&self, signal: &[f64]) -> Vec<f64> {
        let zeros = vec![0.0; signal.len()];
        self.filter_two(signal, &zeros).0
    }

    /// Filters every row of a channel-major matrix.
    pub fn filter_rows(&self, data: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(data.raw_dim());
        let rows: Vec<Vec<f64>> = data.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
        let mut c = 0;
        while c < rows.len() {
            if c + 1 < rows.len() {
                let (fa, fb) = self.filter_two(&rows[c], &rows[c + 1]);
                out.row_mut(c).assign(&ndarray::ArrayView1::from(&fa));
                out.row_mut(c + 1).assign(&ndarray::ArrayView1::from(&fb));
                c += 2;
            } else {
                let fa = self.filter(&rows[c]);
                out.row_mut(c).assign(&ndarray::ArrayView1::from(&fa));
                c += 1;
            }
        }
        out
    }
}

/// Zero-phase filtering of one signal; see the module docs for alignment.
pub fn overlap_add_filter(signal: &[f64], kernel: &FirKernel) -> Vec<f64> {
    OverlapAdd::new(kernel).filter(signal)
}
