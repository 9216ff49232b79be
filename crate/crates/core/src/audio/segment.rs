use ndarray::{s, Array2};
use rand::Rng;

use super::{MelSegment, MelSpectrogram, LOG_FLOOR, SEGMENT_FRAMES};

/// Uniformly random contiguous crop of [`SEGMENT_FRAMES`] frames.
///
/// Spectrograms shorter than a segment are right-padded with `ln(LOG_FLOOR)`
/// and the pad length is recorded on the segment.
pub fn sample_segment<R: Rng + ?Sized>(mel: &MelSpectrogram, rng: &mut R) -> MelSegment {
    let frames = mel.frames();
    if frames < SEGMENT_FRAMES {
        let mut values = Array2::from_elem((mel.n_mels(), SEGMENT_FRAMES), LOG_FLOOR.ln());
        values.slice_mut(s![.., ..frames]).assign(&mel.values);
        return MelSegment { values, offset: 0, padded_frames: SEGMENT_FRAMES - frames };
    }
    let offset = rng.random_range(0..=frames - SEGMENT_FRAMES);
    MelSegment {
        values: mel.values.slice(s![.., offset..offset + SEGMENT_FRAMES]).to_owned(),
        offset,
        padded_frames: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(frames: usize) -> MelSpectrogram {
        MelSpectrogram::new(Array2::from_shape_fn((80, frames), |(k, t)| (k * 1000 + t) as f64)).unwrap()
    }

    #[test]
    fn exact_length_input_is_returned_whole() {
        let mel = ramp(128);
        let seg = sample_segment(&mel, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(seg.values, mel.values);
        assert_eq!(seg.offset, 0);
    }

    #[test]
    fn same_seed_same_offset() {
        let mel = ramp(300);
        let a = sample_segment(&mel, &mut ChaCha8Rng::seed_from_u64(11));
        let b = sample_segment(&mel, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
        assert_eq!(a.values[[0, 0]], a.offset as f64);
    }

    #[test]
    fn short_input_is_padded_with_floor() {
        let mel = ramp(100);
        let seg = sample_segment(&mel, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(seg.padded_frames, 28);
        assert_eq!(seg.values.slice(s![.., ..100]), mel.values);
        assert!(seg.values.slice(s![.., 100..]).iter().all(|&v| v == 1e-5_f64.ln()));
    }

    #[test]
    fn offsets_cover_the_valid_range() {
        let mel = ramp(131);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = [false; 4];
        for _ in 0..200 {
            seen[sample_segment(&mel, &mut rng).offset] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
