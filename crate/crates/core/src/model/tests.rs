use super::*;
use crate::nn::{channel_stats, Activation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny(kernel: usize, activation: Activation) -> ModelConfig {
    ModelConfig {
        n_mels: 6,
        n_blocks: 2,
        widths: vec![5, 4],
        bottleneck_channels: 3,
        kernel_size: kernel,
        epsilon: 1e-5,
        activation,
        variant: EncoderVariant::SingleEncoder,
        init_seed: 17,
    }
}

fn random_segment(n_mels: usize, rng: &mut ChaCha8Rng) -> MelSegment {
    MelSegment::from_values(Array2::from_shape_simple_fn((n_mels, SEGMENT_FRAMES), || rng.random_range(-3.0..1.0))).unwrap()
}

#[test]
fn encode_is_deterministic() {
    let model = VcModel::new(tiny(3, Activation::Sigmoid { alpha: 0.1 })).unwrap();
    let x = random_segment(6, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(model.encode(&x).unwrap(), model.encode(&x).unwrap());
}

#[test]
fn style_is_time_permutation_invariant_for_pointwise_convs() {
    let model = VcModel::new(tiny(1, Activation::None)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_segment(6, &mut rng);
    let mut perm: Vec<usize> = (0..SEGMENT_FRAMES).collect();
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let shuffled = MelSegment::from_values(x.values.select(Axis(1), &perm)).unwrap();
    let (c1, s1) = model.encode(&x).unwrap();
    let (c2, s2) = model.encode(&shuffled).unwrap();
    for (a, b) in s1.layers.iter().zip(&s2.layers) {
        assert!((&a.mu - &b.mu).iter().all(|d| d.abs() < 1e-10));
        assert!((&a.sigma - &b.sigma).iter().all(|d| d.abs() < 1e-10));
    }
    assert_ne!(c1.values, c2.values);
}

#[test]
fn content_respects_activation_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for act in [Activation::Sigmoid { alpha: 0.1 }, Activation::Sigmoid { alpha: 4.0 }, Activation::Tanh, Activation::Relu, Activation::Elu] {
        let model = VcModel::new(tiny(3, act)).unwrap();
        for _ in 0..5 {
            let x = MelSegment::from_values(Array2::from_shape_simple_fn((6, SEGMENT_FRAMES), || rng.random_range(-50.0..50.0))).unwrap();
            let (c, _) = model.encode(&x).unwrap();
            assert!(c.values.iter().all(|&v| act.contains(v)), "{act}");
            assert_eq!(c.activation, act);
        }
    }
}

#[test]
fn decoder_adain_outputs_carry_injected_stats() {
    // Biased std of an AdaIN output is sigma_t * sqrt(var / (var + eps)); a small
    // eps makes that factor one to well within the tolerance.
    let model = VcModel::new(ModelConfig { epsilon: 1e-9, ..tiny(3, Activation::None) }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (c, _) = model.encode(&random_segment(6, &mut rng)).unwrap();
    let (_, s) = model.encode(&random_segment(6, &mut rng)).unwrap();
    let outs = model.decoder_adain_outputs(&c, &s).unwrap();
    for (j, out) in outs.iter().enumerate() {
        let layer = &s.layers[s.layers.len() - 1 - j];
        let (mu, sigma) = channel_stats(out, 0.0).unwrap();
        assert!((&mu - &layer.mu).iter().all(|d| d.abs() < 1e-5));
        assert!((&sigma - &layer.sigma).iter().all(|d| d.abs() < 1e-5));
    }
}

// A squashed bottleneck leaves decoder variances near epsilon, so the injected
// scale is only reached up to the factor sqrt(var / (var + eps)).
#[test]
fn squashed_content_never_overshoots_injected_scale() {
    let model = VcModel::new(tiny(3, Activation::Sigmoid { alpha: 0.1 })).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (c, _) = model.encode(&random_segment(6, &mut rng)).unwrap();
    let (_, s) = model.encode(&random_segment(6, &mut rng)).unwrap();
    for (j, out) in model.decoder_adain_outputs(&c, &s).unwrap().iter().enumerate() {
        let layer = &s.layers[s.layers.len() - 1 - j];
        let (mu, sigma) = channel_stats(out, 0.0).unwrap();
        assert!((&mu - &layer.mu).iter().all(|d| d.abs() < 1e-9));
        assert!(sigma.iter().zip(&layer.sigma).all(|(a, b)| *a <= *b + 1e-12));
    }
}

#[test]
fn reconstruct_is_decode_of_encode() {
    let model = VcModel::new(tiny(3, Activation::Tanh)).unwrap();
    let x = random_segment(6, &mut ChaCha8Rng::seed_from_u64(5));
    let (c, s) = model.encode(&x).unwrap();
    let y = model.reconstruct(&x).unwrap();
    assert_eq!(y, model.decode(&c, &s).unwrap());
    assert_eq!(y.values.dim(), (6, SEGMENT_FRAMES));
    assert!(y.values.iter().all(|v| v.is_finite()));
}

#[test]
fn decode_rejects_mismatched_style() {
    let model = VcModel::new(tiny(3, Activation::None)).unwrap();
    let x = random_segment(6, &mut ChaCha8Rng::seed_from_u64(6));
    let (c, mut s) = model.encode(&x).unwrap();
    s.layers.pop();
    assert!(matches!(model.decode(&c, &s), Err(Error::Shape(_))));
    let wrong = random_segment(5, &mut ChaCha8Rng::seed_from_u64(6));
    assert!(matches!(model.encode(&wrong), Err(Error::Shape(_))));
}

#[test]
fn self_conversion_equals_reconstruction_bit_exactly() {
    let model = VcModel::new(tiny(5, Activation::Sigmoid { alpha: 0.1 })).unwrap();
    let x = random_segment(6, &mut ChaCha8Rng::seed_from_u64(7));
    let target = MelSpectrogram::new(x.values.clone()).unwrap();
    let converted = model.convert(&x.values, &target).unwrap();
    assert_eq!(converted.values, model.reconstruct(&x).unwrap().values);
}

#[test]
fn conversion_keeps_source_length() {
    let model = VcModel::new(tiny(3, Activation::Sigmoid { alpha: 0.1 })).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let target = MelSpectrogram::new(Array2::from_shape_simple_fn((6, 90), || rng.random_range(-2.0..0.0))).unwrap();
    for frames in [1, 50, 128, 200, 256, 300] {
        let source = Array2::from_shape_simple_fn((6, frames), || rng.random_range(-2.0..0.0));
        let out = model.convert(&source, &target).unwrap();
        assert_eq!(out.values.dim(), (6, frames));
    }
}

#[test]
fn windowed_conversion_matches_per_window_decode() {
    let model = VcModel::new(tiny(3, Activation::Sigmoid { alpha: 0.1 })).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let source = Array2::from_shape_simple_fn((6, 200), || rng.random_range(-2.0..0.0));
    let target = MelSpectrogram::new(Array2::from_shape_simple_fn((6, 150), || rng.random_range(-2.0..0.0))).unwrap();
    let out = model.convert(&source, &target).unwrap();
    let style = model.style_of(&target.values).unwrap();
    let last = MelSegment::from_values(source.slice(s![.., 72..]).to_owned()).unwrap();
    let (c, _) = model.encode(&last).unwrap();
    let expect = model.decode(&c, &style).unwrap();
    let diff = (&out.values.slice(s![.., 128..]) - &expect.values.slice(s![.., 56..])).mapv(f64::abs);
    assert!(diff.iter().all(|&d| d < 1e-10));
}

#[test]
fn dual_encoder_adds_one_encoder_worth_of_parameters() {
    let single = VcModel::new(ModelConfig::default()).unwrap();
    let dual = VcModel::new(ModelConfig::default().with_variant(EncoderVariant::DualEncoder)).unwrap();
    let style_params: usize = dual
        .named_layers()
        .iter()
        .filter(|(n, _)| n.starts_with("style_encoder."))
        .map(|(_, l)| l.parameter_count())
        .sum();
    assert_eq!(dual.parameter_count(), single.parameter_count() + style_params);
    let ratio = dual.parameter_count() as f64 / single.parameter_count() as f64;
    assert!((1.2..=1.6).contains(&ratio), "ratio {ratio}");

    let (content, style) = dual.path_layer_names();
    assert!(content.iter().all(|n| !style.contains(n)));
    assert!(!style.is_empty());
}

#[test]
fn wider_models_have_more_parameters() {
    let base = ModelConfig::default();
    let wide = ModelConfig { widths: base.widths.iter().map(|w| 2 * w).collect(), ..base.clone() };
    assert!(VcModel::new(wide).unwrap().parameter_count() > VcModel::new(base).unwrap().parameter_count());
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    for variant in [EncoderVariant::SingleEncoder, EncoderVariant::DualEncoder] {
        let model = VcModel::new(tiny(3, Activation::Sigmoid { alpha: 0.1 }).with_variant(variant)).unwrap();
        let bytes = model.to_checkpoint_bytes();
        let back = VcModel::from_checkpoint_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_checkpoint_bytes(), bytes);
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let model = VcModel::new(tiny(3, Activation::None)).unwrap();
    let bytes = model.to_checkpoint_bytes();
    assert!(VcModel::from_checkpoint_bytes(&bytes[..bytes.len() - 3]).is_err());
    assert!(VcModel::from_checkpoint_bytes(b"not a checkpoint at all").is_err());
    let mut wrong_version = bytes.clone();
    wrong_version[8] = 9;
    assert!(matches!(VcModel::from_checkpoint_bytes(&wrong_version), Err(Error::Checkpoint(_))));
}

#[test]
fn loss_gradients_match_finite_differences() {
    for (variant, act) in [
        (EncoderVariant::SingleEncoder, Activation::Sigmoid { alpha: 0.7 }),
        (EncoderVariant::SingleEncoder, Activation::Tanh),
        (EncoderVariant::DualEncoder, Activation::Elu),
    ] {
        let mut model = VcModel::new(tiny(3, act).with_variant(variant)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = Array3::from_shape_simple_fn((6, 2, 9), || rng.random_range(-2.0..1.0));
        let (_, grads) = model.loss_and_gradients(&x).unwrap();
        let h = 1e-6;
        for layer_idx in 0..grads.len() {
            for _ in 0..3 {
                let (r, c) = {
                    let w = &model.layers()[layer_idx].weight;
                    (rng.random_range(0..w.nrows()), rng.random_range(0..w.ncols()))
                };
                let orig = model.layers()[layer_idx].weight[[r, c]];
                model.layers_mut()[layer_idx].weight[[r, c]] = orig + h;
                let plus = model.loss_and_gradients(&x).unwrap().0;
                model.layers_mut()[layer_idx].weight[[r, c]] = orig - h;
                let minus = model.loss_and_gradients(&x).unwrap().0;
                model.layers_mut()[layer_idx].weight[[r, c]] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = grads[layer_idx].weight[[r, c]];
                let scale = numeric.abs().max(analytic.abs()).max(1e-6);
                assert!(
                    (numeric - analytic).abs() / scale < 1e-3,
                    "{variant:?} {act} layer {layer_idx} [{r},{c}]: numeric {numeric} analytic {analytic}"
                );
            }
        }
    }
}
