use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// One-sided complex spectrum, `n_fft / 2 + 1` bins by frames.
pub type Spectrum = Array2<Complex64>;

/// Periodic Hann window.
pub(crate) fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| x[i]));
    out.extend_from_slice(x);
    out.extend((0..pad).map(|i| x[n - 2 - i]));
    out
}

/// Centred short-time Fourier transform with a Hann window of length `n_fft`.
pub fn stft(samples: &[f64], n_fft: usize, hop: usize) -> Result<Spectrum> {
    if samples.len() < n_fft {
        return Err(Error::TooShort(format!(
            "{} samples is shorter than one {n_fft}-sample window",
            samples.len()
        )));
    }
    let padded = reflect_pad(samples, n_fft / 2);
    let window = hann(n_fft);
    let n_frames = 1 + samples.len() / hop;
    let n_bins = n_fft / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);

    let mut spec = Array2::zeros((n_bins, n_frames));
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        let frame = &padded[t * hop..t * hop + n_fft];
        for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&window) {
            *b = Complex64::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, v) in buf[..n_bins].iter().enumerate() {
            spec[[k, t]] = *v;
        }
    }
    Ok(spec)
}

/// Inverse of [`stft`] by windowed overlap-add, trimmed or zero-padded to `length`.
pub fn istft(spec: &Spectrum, n_fft: usize, hop: usize, length: usize) -> Vec<f64> {
    let n_bins = n_fft / 2 + 1;
    debug_assert_eq!(spec.nrows(), n_bins);
    let n_frames = spec.ncols();
    let window = hann(n_fft);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n_fft);
    let total = n_fft + hop * n_frames.saturating_sub(1);
    let mut out = vec![0.0; total];
    let mut norm = vec![0.0; total];
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];

    for t in 0..n_frames {
        for k in 0..n_bins {
            buf[k] = spec[[k, t]];
        }
        // Hermitian completion; DC and Nyquist must be real.
        buf[0].im = 0.0;
        buf[n_fft / 2].im = 0.0;
        for k in 1..n_fft / 2 {
            buf[n_fft - k] = buf[k].conj();
        }
        ifft.process(&mut buf);
        let start = t * hop;
        for i in 0..n_fft {
            out[start + i] += buf[i].re / n_fft as f64 * window[i];
            norm[start + i] += window[i] * window[i];
        }
    }
    for (o, n) in out.iter_mut().zip(&norm) {
        if *n > 1e-10 {
            *o /= n;
        }
    }
    let offset = n_fft / 2;
    (0..length).map(|i| out.get(offset + i).copied().unwrap_or(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_follows_centred_convention() {
        let x = vec![0.1; 22_050];
        let s = stft(&x, 1024, 256).unwrap();
        assert_eq!(s.dim(), (513, 87));
    }

    #[test]
    fn inverse_recovers_signal() {
        let x: Vec<f64> = (0..5000).map(|i| ((i as f64) * 0.05).sin() + 0.3 * ((i as f64) * 0.31).cos()).collect();
        let s = stft(&x, 1024, 256).unwrap();
        let y = istft(&s, 1024, 256, x.len());
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "max reconstruction error {err}");
    }

    #[test]
    fn too_short_is_rejected() {
        assert!(matches!(stft(&[0.0; 100], 1024, 256), Err(Error::TooShort(_))));
    }
}
