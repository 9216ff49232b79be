use ndarray::{Array1, Array2};

use super::{stft, AudioClip, MelConfig, MelSpectrogram};
use crate::error::{Error, Result};

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4_f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp()
    }
}

/// Area-normalized triangular filters, `n_mels x (n_fft / 2 + 1)`.
pub fn mel_filterbank(cfg: &MelConfig) -> Array2<f64> {
    let n_bins = cfg.n_fft / 2 + 1;
    let fft_freqs = Array1::linspace(0.0, cfg.sample_rate as f64 / 2.0, n_bins);
    let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
    let edges: Vec<f64> = Array1::linspace(lo, hi, cfg.n_mels + 2).iter().map(|&m| mel_to_hz(m)).collect();

    let mut basis = Array2::zeros((cfg.n_mels, n_bins));
    for m in 0..cfg.n_mels {
        let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let enorm = 2.0 / (right - left);
        for (k, &f) in fft_freqs.iter().enumerate() {
            let rising = (f - left) / (centre - left);
            let falling = (right - f) / (right - centre);
            basis[[m, k]] = rising.min(falling).max(0.0) * enorm;
        }
    }
    basis
}

/// Log-mel magnitude spectrogram: `ln(max(mel, log_floor))`.
pub fn mel_spectrogram(clip: &AudioClip, cfg: &MelConfig) -> Result<MelSpectrogram> {
    if clip.sample_rate != cfg.sample_rate {
        return Err(Error::InvalidInput(format!(
            "expected {} Hz audio, got {} Hz",
            cfg.sample_rate, clip.sample_rate
        )));
    }
    let spec = stft(&clip.samples, cfg.n_fft, cfg.hop)?;
    let magnitude = spec.mapv(|c| c.norm());
    let mel = mel_filterbank(cfg).dot(&magnitude);
    let floor = cfg.log_floor;
    MelSpectrogram::new(mel.mapv(|v| v.max(floor).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{N_MELS, TARGET_SAMPLE_RATE};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, n: usize) -> AudioClip {
        let s = (0..n).map(|i| (2.0 * PI * freq * i as f64 / TARGET_SAMPLE_RATE as f64).sin()).collect();
        AudioClip::new(s, TARGET_SAMPLE_RATE).unwrap()
    }

    #[test]
    fn one_second_gives_87_centred_frames() {
        let mel = mel_spectrogram(&tone(440.0, 22_050), &MelConfig::default()).unwrap();
        assert_eq!(mel.values.dim(), (80, 87));
    }

    #[test]
    fn zeros_hit_the_log_floor() {
        let clip = AudioClip::new(vec![0.0; 22_050], TARGET_SAMPLE_RATE).unwrap();
        let mel = mel_spectrogram(&clip, &MelConfig::default()).unwrap();
        let floor = 1e-5_f64.ln();
        assert!(mel.values.iter().all(|&v| v == floor));
    }

    #[test]
    fn pure_tone_peaks_in_the_nearest_band() {
        // band centres from the scale definition, computed without the filterbank
        let mel_of = |hz: f64| if hz < 1000.0 { 3.0 * hz / 200.0 } else { 15.0 + 27.0 * (hz / 1000.0).ln() / 6.4_f64.ln() };
        let hz_of = |m: f64| if m < 15.0 { 200.0 * m / 3.0 } else { 1000.0 * (6.4_f64.ln() * (m - 15.0) / 27.0).exp() };
        let max_mel = mel_of(11_025.0);
        let centres: Vec<f64> = (1..=N_MELS).map(|i| hz_of(max_mel * i as f64 / (N_MELS + 1) as f64)).collect();
        let expected = centres
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1000.0).abs().total_cmp(&(b.1 - 1000.0).abs()))
            .unwrap()
            .0;

        let mel = mel_spectrogram(&tone(1000.0, 22_050), &MelConfig::default()).unwrap();
        for col in mel.values.columns() {
            let arg = col.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            assert_eq!(arg, expected);
        }
    }

    #[test]
    fn clip_shorter_than_a_window_is_rejected() {
        let clip = AudioClip::new(vec![0.1; 1000], TARGET_SAMPLE_RATE).unwrap();
        assert!(matches!(mel_spectrogram(&clip, &MelConfig::default()), Err(Error::TooShort(_))));
    }

    #[test]
    fn wrong_rate_is_rejected() {
        let clip = AudioClip::new(vec![0.1; 4000], 16_000).unwrap();
        assert!(mel_spectrogram(&clip, &MelConfig::default()).is_err());
    }

    #[test]
    fn mel_scale_round_trips() {
        for hz in [0.0, 100.0, 999.0, 1000.0, 4000.0, 11_025.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn always_80_bands_and_above_floor(n in 1024usize..6000, seed in any::<u64>()) {
            let mut state = seed | 1;
            let samples = (0..n).map(|_| {
                state ^= state << 13; state ^= state >> 7; state ^= state << 17;
                (state as f64 / u64::MAX as f64) * 2.0 - 1.0
            }).collect();
            let clip = AudioClip::new(samples, TARGET_SAMPLE_RATE).unwrap();
            let mel = mel_spectrogram(&clip, &MelConfig::default()).unwrap();
            prop_assert_eq!(mel.n_mels(), 80);
            prop_assert_eq!(mel.frames(), 1 + n / 256);
            let floor = 1e-5_f64.ln();
            prop_assert!(mel.values.iter().all(|&v| v >= floor));
        }
    }
}
