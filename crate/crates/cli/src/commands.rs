use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use agvc_core::audio::store::{read_sidecar, write_mel};
use agvc_core::audio::{griffin_lim_invert, write_wav};
use agvc_core::model::VcModel;
use agvc_core::pipeline::{convert_files, wav_to_mel, FrontEnd};
use agvc_core::probe::{compare_csv, compare_encoder_variants, evaluate_model, run_sweep, sweep_csv, tradeoff_svg, SweepBudget, SweepGrid};
use agvc_core::train::{run_training, synth_corpus, CorpusIndex, MelCorpus};
use agvc_core::Error;
use anyhow::{Context, Result};

use crate::args::*;
use crate::config::RunConfig;
use crate::manifest::{sha256_file, Failure, RunManifest};

/// Minimum share of input files that must preprocess cleanly.
pub const MIN_PREPROCESS_SUCCESS: f64 = 0.9;

const MANIFEST: &str = "manifest.json";

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// `explicit`, else `$AGVC_CACHE_DIR/<default_sub>`.
fn resolve(explicit: Option<&PathBuf>, default_sub: &str, what: &str) -> Result<PathBuf> {
    if let Some(p) = explicit {
        return Ok(p.clone());
    }
    cache_dir()
        .map(|d| d.join(default_sub))
        .ok_or_else(|| Error::InvalidInput(format!("no {what} given and {CACHE_DIR_ENV} is not set")).into())
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn apply_model_flags(cfg: &mut RunConfig, flags: &ModelFlags) {
    if flags.desk {
        cfg.use_desk_model();
    }
    if let Some(a) = flags.activation {
        cfg.model.activation = a;
    }
    if let Some(b) = flags.bottleneck {
        cfg.model.bottleneck_channels = b;
    }
    if let Some(v) = flags.variant {
        cfg.model.variant = v.into();
    }
    if let Some(s) = flags.steps {
        cfg.train.total_steps = s;
    }
    if let Some(b) = flags.batch_size {
        cfg.train.batch_size = b;
    }
}

fn front_end(cfg: &RunConfig) -> FrontEnd {
    FrontEnd { trim_db: cfg.trim_db, mel: cfg.mel.clone() }
}

fn load_corpus(index_path: &Path, manifest: &mut RunManifest) -> Result<MelCorpus> {
    let index = CorpusIndex::load(index_path).with_context(|| format!("loading corpus index {}", index_path.display()))?;
    let root = index_path.parent().unwrap_or(Path::new("."));
    manifest.input(index_path)?;
    Ok(MelCorpus::load(index, root)?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn synthcorpus(args: &SynthArgs) -> Result<PathBuf> {
    let mut cfg = load_config(&args.common)?;
    if let Some(n) = args.speakers {
        cfg.synth.n_speakers = n;
    }
    if let Some(n) = args.utterances {
        cfg.synth.utterances_per_speaker = n;
    }
    cfg.synth.n_mels = cfg.mel.n_mels;
    let out = resolve(args.out.as_ref(), "synth", "output directory")?;
    let mut manifest = RunManifest::start("synthcorpus", args.common.seed, &cfg.synth)?;
    let synth = synth_corpus(&cfg.synth)?;
    for (id, mel) in &synth.corpus.mels {
        let clip = griffin_lim_invert(mel, cfg.griffin_lim_iterations, &cfg.mel)?;
        let path = out.join(Path::new(id).with_extension("wav"));
        fs::create_dir_all(path.parent().expect("speaker directory"))?;
        write_wav(&path, &clip)?;
        manifest.output(&path)?;
    }
    let signatures = out.join("signatures.json");
    write_json(&signatures, &synth.signatures)?;
    manifest.output(&signatures)?;
    manifest.stage("corpus", serde_json::json!({ "speakers": synth.corpus.index.speakers.len(), "utterances": synth.corpus.mels.len() }))?;
    manifest.finish(&out.join(MANIFEST))
}

pub fn preprocess(args: &PreprocessArgs) -> Result<PathBuf> {
    let mut cfg = load_config(&args.common)?;
    if let Some(f) = args.train_fraction {
        cfg.split.train_fraction = f;
    }
    let out = resolve(args.out.as_ref(), "mels", "output directory")?;
    let front = front_end(&cfg);
    let mut manifest = RunManifest::start("preprocess", args.common.seed, &serde_json::json!({ "mel": cfg.mel, "trim_db": cfg.trim_db, "split": cfg.split }))?;

    let entries = fs::read_dir(&args.corpus).map_err(|e| Error::Corpus(format!("{}: {e}", args.corpus.display())))?;
    let mut speakers: Vec<(String, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            speakers.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    speakers.sort();

    let (mut processed, mut skipped, mut total) = (0usize, 0usize, 0usize);
    let mut listing: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (speaker, dir) in &speakers {
        let mut wavs: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        wavs.sort();
        for wav in wavs {
            total += 1;
            let stem = wav.file_stem().expect("wav file name").to_string_lossy().into_owned();
            let rel = format!("{speaker}/{stem}.npy");
            let npy = out.join(&rel);
            let hash = sha256_file(&wav)?;
            manifest.inputs.insert(wav.display().to_string(), hash.clone());
            let cached = npy.exists()
                && read_sidecar(&npy).is_ok_and(|s| s.source_sha256.as_deref() == Some(hash.as_str()) && s.config == cfg.mel);
            if cached {
                skipped += 1;
            } else {
                match wav_to_mel(&wav, &front) {
                    Ok(mel) => {
                        write_mel(&npy, &mel, &cfg.mel, Some(hash))?;
                        processed += 1;
                    }
                    Err(e) => {
                        manifest.failures.push(Failure { path: wav.display().to_string(), reason: e.to_string() });
                        continue;
                    }
                }
            }
            listing.entry(speaker.clone()).or_default().push(rel);
        }
    }
    manifest.stage("files", serde_json::json!({ "total": total, "processed": processed, "skipped": skipped, "failed": manifest.failures.len() }))?;
    let succeeded = processed + skipped;
    if total == 0 || (succeeded as f64) < MIN_PREPROCESS_SUCCESS * total as f64 {
        fs::create_dir_all(&out)?;
        let path = manifest.finish(&out.join(MANIFEST))?;
        return Err(Error::InvalidInput(format!(
            "only {succeeded} of {total} WAV files preprocessed (see {})",
            path.display()
        ))
        .into());
    }
    let index = CorpusIndex::from_listing(listing, cfg.split)?;
    let index_path = out.join("index.json");
    index.save(&index_path)?;
    manifest.output(&index_path)?;
    manifest.finish(&out.join(MANIFEST))?;
    Ok(index_path)
}

pub fn train(args: &TrainArgs) -> Result<PathBuf> {
    let mut cfg = load_config(&args.common)?;
    apply_model_flags(&mut cfg, &args.model);
    if let Some(n) = args.checkpoint_every {
        cfg.train.checkpoint_every = n;
    }
    let index_path = resolve(args.index.as_ref(), "mels/index.json", "corpus index")?;
    let out = resolve(args.out.as_ref(), "run", "run directory")?;
    let mut manifest = RunManifest::start("train", args.common.seed, &serde_json::json!({ "model": cfg.model, "train": cfg.train }))?;
    let corpus = load_corpus(&index_path, &mut manifest)?;
    fs::create_dir_all(&out)?;
    let resolved = out.join("config.json");
    write_json(&resolved, &cfg)?;
    let outcome = match run_training(&corpus, &cfg.model, &cfg.train, Some(&out)) {
        Ok(o) => o,
        Err(e) => {
            manifest.failures.push(Failure { path: out.display().to_string(), reason: e.to_string() });
            manifest.finish(&out.join(MANIFEST))?;
            return Err(e.into());
        }
    };
    let checkpoint = outcome.checkpoint.expect("run directory given");
    for p in [&resolved, &checkpoint, &out.join("loss.csv")] {
        manifest.output(p)?;
    }
    manifest.stage("training", serde_json::json!({
        "steps": outcome.losses.len(),
        "final_loss": outcome.losses.last(),
        "parameters": outcome.model.parameter_count(),
        "weights_sha256": outcome.model.weights_digest(),
    }))?;
    manifest.finish(&out.join(MANIFEST))?;
    Ok(checkpoint)
}

/// Path of the pre-vocoder mel written next to a converted WAV.
pub fn converted_mel_path(out_wav: &Path) -> PathBuf {
    out_wav.with_extension("mel.npy")
}

pub fn convert(args: &ConvertArgs) -> Result<PathBuf> {
    let mut cfg = load_config(&args.common)?;
    if let Some(n) = args.griffin_lim_iters {
        cfg.griffin_lim_iterations = n;
    }
    let mut manifest = RunManifest::start("convert", args.common.seed, &serde_json::json!({ "mel": cfg.mel, "trim_db": cfg.trim_db, "griffin_lim_iterations": cfg.griffin_lim_iterations }))?;
    for p in [&args.checkpoint, &args.source, &args.target] {
        manifest.input(p)?;
    }
    let model = VcModel::load(&args.checkpoint)?;
    if model.config().n_mels != cfg.mel.n_mels {
        return Err(Error::Config(format!(
            "checkpoint expects {} mel bands but features have {}",
            model.config().n_mels,
            cfg.mel.n_mels
        ))
        .into());
    }
    let conv = convert_files(&model, &args.source, &args.target, &front_end(&cfg), cfg.griffin_lim_iterations)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_wav(&args.out, &conv.audio)?;
    let mel_path = converted_mel_path(&args.out);
    write_mel(&mel_path, &conv.mel, &cfg.mel, None)?;
    manifest.output(&args.out)?;
    manifest.output(&mel_path)?;
    manifest.stage("features", serde_json::json!({ "source_frames": conv.source_mel.frames(), "target_frames": conv.target_mel.frames() }))?;
    manifest.stage("convert", serde_json::json!({ "frames": conv.mel.frames(), "weights_sha256": model.weights_digest() }))?;
    manifest.stage("vocoder", serde_json::json!({ "iterations": cfg.griffin_lim_iterations, "samples": conv.audio.len(), "sample_rate": conv.audio.sample_rate }))?;
    manifest.finish(&args.out.with_extension("manifest.json"))?;
    Ok(args.out.clone())
}

pub fn probe(args: &ProbeArgs) -> Result<PathBuf> {
    let cfg = load_config(&args.common)?;
    let index_path = resolve(args.index.as_ref(), "mels/index.json", "corpus index")?;
    let out = resolve(args.out.as_ref(), "probe", "output directory")?;
    let mut manifest = RunManifest::start("probe", args.common.seed, &cfg.probe)?;
    manifest.input(&args.checkpoint)?;
    let model = VcModel::load(&args.checkpoint)?;
    let corpus = load_corpus(&index_path, &mut manifest)?;
    let report = evaluate_model(&model, &corpus, &cfg.probe)?;
    fs::create_dir_all(&out)?;
    let csv = out.join("probe.csv");
    fs::write(
        &csv,
        format!(
            "activation,alpha,bottleneck,acc_C,acc_S,rec,params,chance,n_speakers\n{},{},{},{:.4},{:.4},{:.6},{},{:.4},{}\n",
            report.activation.kind_name(),
            report.activation.alpha().map(|a| a.to_string()).unwrap_or_default(),
            report.bottleneck,
            report.acc_content,
            report.acc_style,
            report.rec_error,
            report.param_count,
            report.chance,
            report.n_speakers
        ),
    )?;
    let json = out.join("probe.json");
    write_json(&json, &report)?;
    manifest.output(&csv)?;
    manifest.output(&json)?;
    manifest.finish(&out.join(MANIFEST))?;
    Ok(csv)
}

fn budget(cfg: &RunConfig, seeds: &[u64], seed_flag: Option<u64>, jobs: usize) -> SweepBudget {
    let seeds = match (seeds.is_empty(), seed_flag) {
        (false, _) => seeds.to_vec(),
        (true, Some(s)) => vec![s],
        (true, None) => cfg.sweep.seeds.clone(),
    };
    SweepBudget { model: cfg.model.clone(), train: cfg.train.clone(), probe: cfg.probe.clone(), seeds, jobs }
}

pub fn sweep(args: &SweepArgs) -> Result<PathBuf> {
    let mut cfg = load_config(&args.common)?;
    apply_model_flags(&mut cfg, &args.model);
    if !args.activations.is_empty() {
        cfg.sweep.activations = args.activations.clone();
    }
    if !args.bottlenecks.is_empty() {
        cfg.sweep.bottlenecks = args.bottlenecks.clone();
    }
    let index_path = resolve(args.index.as_ref(), "mels/index.json", "corpus index")?;
    let out = resolve(args.out.as_ref(), "sweep", "output directory")?;
    let budget = budget(&cfg, &args.seeds, args.common.seed, args.jobs);
    let grid = SweepGrid { activations: cfg.sweep.activations.clone(), bottlenecks: cfg.sweep.bottlenecks.clone() };
    let mut manifest = RunManifest::start("sweep", args.common.seed, &serde_json::json!({ "grid": grid, "budget": budget }))?;
    let corpus = load_corpus(&index_path, &mut manifest)?;
    let points = run_sweep(&grid, &corpus, &budget)?;
    fs::create_dir_all(&out)?;
    let csv = out.join("sweep.csv");
    fs::write(&csv, sweep_csv(&points))?;
    let json = out.join("sweep.json");
    write_json(&json, &points)?;
    let svg = out.join("sweep.svg");
    fs::write(&svg, tradeoff_svg(&points))?;
    for p in [&csv, &json, &svg] {
        manifest.output(p)?;
    }
    for point in &points {
        for f in &point.failures {
            manifest.failures.push(Failure { path: format!("{} seed {}", point.label, f.seed), reason: f.message.clone() });
        }
    }
    manifest.finish(&out.join(MANIFEST))?;
    Ok(csv)
}

pub fn compare(args: &CompareArgs) -> Result<PathBuf> {
    let mut cfg = load_config(&args.common)?;
    apply_model_flags(&mut cfg, &args.model);
    let index_path = resolve(args.index.as_ref(), "mels/index.json", "corpus index")?;
    let out = resolve(args.out.as_ref(), "compare", "output directory")?;
    let budget = budget(&cfg, &args.seeds, args.common.seed, args.jobs);
    let mut manifest = RunManifest::start("compare", args.common.seed, &budget)?;
    let corpus = load_corpus(&index_path, &mut manifest)?;
    let points = compare_encoder_variants(&corpus, &budget)?;
    fs::create_dir_all(&out)?;
    let csv = out.join("compare.csv");
    fs::write(&csv, compare_csv(&points))?;
    let json = out.join("compare.json");
    write_json(&json, &points)?;
    manifest.output(&csv)?;
    manifest.output(&json)?;
    manifest.finish(&out.join(MANIFEST))?;
    Ok(csv)
}
