use agvc_bench::tone_clip;
use agvc_core::audio::{griffin_lim_invert, mel_spectrogram, resample, trim_silence, DEFAULT_TRIM_DB};
use agvc_core::model::{ModelConfig, VcModel};
use agvc_core::MelConfig;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn features(c: &mut Criterion) {
    let cfg = MelConfig::default();
    let clip = tone_clip(3.0);
    c.bench_function("mel 3s", |b| b.iter(|| mel_spectrogram(black_box(&clip), &cfg).unwrap()));
    c.bench_function("resample 3s 22.05k->16k", |b| b.iter(|| resample(black_box(&clip), 16_000).unwrap()));
    c.bench_function("trim 3s", |b| b.iter(|| trim_silence(black_box(&clip), DEFAULT_TRIM_DB)));
}

fn synthesis(c: &mut Criterion) {
    let mut group = c.benchmark_group("synthesis");
    group.sample_size(10);
    let cfg = MelConfig::default();
    let mel = mel_spectrogram(&tone_clip(1.5), &cfg).unwrap();
    group.bench_function("griffin-lim 1.5s x16", |b| b.iter(|| griffin_lim_invert(black_box(&mel), 16, &cfg).unwrap()));
    let model = VcModel::new(ModelConfig::desk()).unwrap();
    group.bench_function("convert 1.5s desk", |b| b.iter(|| model.convert(black_box(&mel.values), &mel).unwrap()));
    group.finish();
}

criterion_group!(benches, features, synthesis);
criterion_main!(benches);
