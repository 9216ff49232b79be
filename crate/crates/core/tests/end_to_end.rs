use agvc_core::audio::{write_wav, AudioClip};
use agvc_core::model::{ModelConfig, VcModel};
use agvc_core::pipeline::{convert_files, wav_to_mel, FrontEnd};
use agvc_core::train::{read_loss_csv, run_training, synth_corpus, SynthConfig};
use agvc_core::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn chirp(secs: f64, rate: u32, f0: f64, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (secs * rate as f64) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            0.6 * (std::f64::consts::TAU * (f0 + 40.0 * t) * t).sin() + 0.01 * rng.random_range(-1.0..1.0)
        })
        .collect();
    AudioClip::new(samples, rate).unwrap()
}

fn tiny() -> ModelConfig {
    ModelConfig { n_blocks: 2, widths: vec![8, 8], ..ModelConfig::desk() }
}

#[test]
fn training_artifacts_reload_to_the_trained_model() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(&SynthConfig { n_speakers: 3, utterances_per_speaker: 3, ..SynthConfig::default() }).unwrap().corpus;
    let cfg = TrainConfig { total_steps: 6, batch_size: 4, checkpoint_every: 3, ..TrainConfig::default() };
    let out = run_training(&corpus, &tiny(), &cfg, Some(dir.path())).unwrap();

    let reloaded = VcModel::load(&dir.path().join("final.ckpt")).unwrap();
    assert_eq!(reloaded.weights_digest(), out.model.weights_digest());
    assert!(dir.path().join("step_000003.ckpt").exists());
    assert_eq!(read_loss_csv(&dir.path().join("loss.csv")).unwrap(), out.losses);
}

#[test]
fn files_at_other_rates_convert_at_the_feature_rate() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = (dir.path().join("src.wav"), dir.path().join("tgt.wav"));
    write_wav(&src, &chirp(2.0, 16_000, 150.0, 1)).unwrap();
    write_wav(&tgt, &chirp(0.8, 44_100, 260.0, 2)).unwrap();
    let front = FrontEnd::default();
    let model = VcModel::new(tiny()).unwrap();

    let conv = convert_files(&model, &src, &tgt, &front, 4).unwrap();
    assert_eq!(conv.source_mel, wav_to_mel(&src, &front).unwrap());
    // output keeps the source timing; a short target only lends its statistics
    assert_eq!(conv.mel.frames(), conv.source_mel.frames());
    assert!(conv.target_mel.frames() < 128);
    assert_eq!(conv.audio.sample_rate, 22_050);
    assert!(conv.audio.peak() <= 1.0 && conv.audio.samples.iter().all(|s| s.is_finite()));
}

#[test]
fn different_targets_give_different_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..3).map(|i| dir.path().join(format!("{i}.wav"))).collect();
    for (i, p) in paths.iter().enumerate() {
        write_wav(p, &chirp(1.6, 22_050, 120.0 + 90.0 * i as f64, i as u64)).unwrap();
    }
    let model = VcModel::new(tiny()).unwrap();
    let front = FrontEnd::default();
    let a = convert_files(&model, &paths[0], &paths[1], &front, 2).unwrap().mel;
    let b = convert_files(&model, &paths[0], &paths[2], &front, 2).unwrap().mel;
    let again = convert_files(&model, &paths[0], &paths[1], &front, 2).unwrap().mel;
    assert_eq!(a, again);
    assert_ne!(a, b);
}
