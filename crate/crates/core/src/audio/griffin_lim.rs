use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use super::{istft, mel_filterbank, peak_normalize, stft, AudioClip, MelConfig, MelSpectrogram};
use crate::error::{ensure_finite, Error, Result};

const PHASE_SEED: u64 = 0x6c_1d;

/// Ridge pseudo-inverse of the mel filterbank, `n_bins x n_mels`.
fn filterbank_pinv(basis: &Array2<f64>) -> Array2<f64> {
    let (m, n) = basis.dim();
    let a = DMatrix::from_fn(m, n, |i, j| basis[[i, j]]);
    let mut gram = &a * a.transpose();
    let ridge = 1e-10 * gram.diagonal().max();
    for i in 0..m {
        gram[(i, i)] += ridge;
    }
    let inv = gram.cholesky().expect("mel gram matrix is positive definite").inverse();
    let pinv = a.transpose() * inv;
    Array2::from_shape_fn((n, m), |(i, j)| pinv[(i, j)])
}

/// Approximate linear STFT magnitude whose mel projection matches `mel`.
pub fn mel_to_magnitude(mel: &MelSpectrogram, cfg: &MelConfig) -> Result<Array2<f64>> {
    ensure_finite(mel.values.iter(), "mel spectrogram")?;
    if mel.n_mels() != cfg.n_mels {
        return Err(Error::Shape(format!("expected {} mel bands, got {}", cfg.n_mels, mel.n_mels())));
    }
    let energies = mel.values.mapv(f64::exp);
    Ok(filterbank_pinv(&mel_filterbank(cfg)).dot(&energies).mapv(|v| v.max(0.0)))
}

/// Griffin-Lim phase recovery without output normalization.
pub fn griffin_lim_waveform(mel: &MelSpectrogram, iterations: usize, cfg: &MelConfig) -> Result<AudioClip> {
    if iterations == 0 {
        return Err(Error::InvalidInput("Griffin-Lim needs at least one iteration".into()));
    }
    let magnitude = mel_to_magnitude(mel, cfg)?;
    let length = cfg.hop * (mel.frames() - 1);
    if length < cfg.n_fft {
        return Err(Error::TooShort(format!("{} frames cannot be inverted", mel.frames())));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(PHASE_SEED);
    let mut phase = magnitude.mapv(|_| Complex64::from_polar(1.0, rng.random_range(-PI..PI)));
    let synthesize = |phase: &Array2<Complex64>| {
        let spec = Zip::from(&magnitude).and(phase).map_collect(|&m, &p| p * m);
        istft(&spec, cfg.n_fft, cfg.hop, length)
    };

    for _ in 0..iterations {
        let estimate = stft(&synthesize(&phase), cfg.n_fft, cfg.hop)?;
        phase = estimate.mapv(|c| {
            let n = c.norm();
            if n > 0.0 {
                c / n
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
    }
    AudioClip::new(synthesize(&phase), cfg.sample_rate)
}

/// Griffin-Lim inversion to a peak-normalized waveform.
pub fn griffin_lim_invert(mel: &MelSpectrogram, iterations: usize, cfg: &MelConfig) -> Result<AudioClip> {
    griffin_lim_waveform(mel, iterations, cfg).map(peak_normalize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{mel_spectrogram, TARGET_SAMPLE_RATE};

    fn argmax(col: ndarray::ArrayView1<f64>) -> usize {
        col.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
    }

    fn tone_mel(freq: f64) -> MelSpectrogram {
        let s = (0..16_384)
            .map(|i| 0.8 * (2.0 * PI * freq * i as f64 / TARGET_SAMPLE_RATE as f64).sin())
            .collect();
        mel_spectrogram(&AudioClip::new(s, TARGET_SAMPLE_RATE).unwrap(), &MelConfig::default()).unwrap()
    }

    fn round_trip_error(mel: &MelSpectrogram, iters: usize) -> f64 {
        let cfg = MelConfig::default();
        let wav = griffin_lim_waveform(mel, iters, &cfg).unwrap();
        let back = mel_spectrogram(&wav, &cfg).unwrap();
        (&back.values - &mel.values).mapv(f64::abs).mean().unwrap()
    }

    #[test]
    fn tone_keeps_its_band() {
        let cfg = MelConfig::default();
        let mel = tone_mel(1000.0);
        let wav = griffin_lim_invert(&mel, 30, &cfg).unwrap();
        assert_eq!(wav.sample_rate, TARGET_SAMPLE_RATE);
        assert!((wav.peak() - 1.0).abs() < 1e-12);
        let back = mel_spectrogram(&wav, &cfg).unwrap();
        for t in 2..mel.frames() - 2 {
            assert_eq!(argmax(back.values.column(t)), argmax(mel.values.column(t)));
        }
    }

    #[test]
    fn more_iterations_do_not_hurt() {
        let mel = tone_mel(660.0);
        assert!(round_trip_error(&mel, 60) <= round_trip_error(&mel, 1));
    }

    #[test]
    fn silent_mel_gives_near_silence() {
        let mel = MelSpectrogram::new(Array2::from_elem((80, 40), 1e-5_f64.ln())).unwrap();
        let wav = griffin_lim_waveform(&mel, 10, &MelConfig::default()).unwrap();
        assert!(wav.peak() < 1e-2, "peak {}", wav.peak());
    }

    #[test]
    fn non_finite_and_zero_iterations_are_rejected() {
        let cfg = MelConfig::default();
        let mut mel = tone_mel(500.0);
        assert!(griffin_lim_invert(&mel, 0, &cfg).is_err());
        mel.values[[3, 3]] = f64::NAN;
        assert!(matches!(griffin_lim_invert(&mel, 5, &cfg), Err(Error::InvalidInput(_))));
    }
}
