use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_model, ProbeConfig, ProbeReport};
use crate::error::{Error, Result};
use crate::model::{Activation, EncoderVariant, ModelConfig};
use crate::train::{run_training, MelCorpus, TrainConfig};

/// Content-probe accuracy (percent) above which conversion is expected to fail.
pub const CONTENT_LEAK_THRESHOLD: f64 = 70.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub activations: Vec<Activation>,
    pub bottlenecks: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            activations: vec![
                Activation::None,
                Activation::Sigmoid { alpha: 0.01 },
                Activation::Sigmoid { alpha: 0.1 },
                Activation::Sigmoid { alpha: 1.0 },
            ],
            bottlenecks: vec![1, 2, 4, 8, 16, 32, 64, 128],
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.activations.is_empty() || self.bottlenecks.is_empty() {
            return Err(Error::Config("sweep grid needs at least one activation and one bottleneck".into()));
        }
        if self.bottlenecks.contains(&0) {
            return Err(Error::Config("bottleneck sizes must be positive".into()));
        }
        self.activations.iter().try_for_each(Activation::validate)
    }

    /// Grid points in activation-major order.
    pub fn points(&self) -> Vec<(Activation, usize)> {
        self.activations.iter().flat_map(|&a| self.bottlenecks.iter().map(move |&b| (a, b))).collect()
    }
}

/// Shared training and probing budget for every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBudget {
    /// Base model; activation, bottleneck and variant are overridden per point.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub probe: ProbeConfig,
    /// Each seed sets model initialisation, batch order and probe sampling.
    pub seeds: Vec<u64>,
    /// Worker threads; each job runs single-threaded.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub message: String,
}

/// Seed-aggregated results for one model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub activation: Activation,
    pub bottleneck: usize,
    pub variant: EncoderVariant,
    pub param_count: usize,
    pub reports: Vec<ProbeReport>,
    pub failures: Vec<SeedFailure>,
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

impl SweepPoint {
    /// Mean and sample standard deviation of content accuracy across seeds.
    pub fn acc_content(&self) -> (f64, f64) {
        mean_std(self.reports.iter().map(|r| r.acc_content))
    }

    pub fn acc_style(&self) -> (f64, f64) {
        mean_std(self.reports.iter().map(|r| r.acc_style))
    }

    pub fn rec_error(&self) -> (f64, f64) {
        mean_std(self.reports.iter().map(|r| r.rec_error))
    }

    pub fn chance(&self) -> f64 {
        self.reports.first().map_or(f64::NAN, |r| r.chance)
    }
}

fn run_one(corpus: &MelCorpus, model: &ModelConfig, budget: &SweepBudget, seed: u64) -> Result<ProbeReport> {
    let model = model.clone().with_init_seed(seed);
    let train = TrainConfig { seed, ..budget.train.clone() };
    let outcome = run_training(corpus, &model, &train, None)?;
    evaluate_model(&outcome.model, corpus, &ProbeConfig { seed, ..budget.probe.clone() })
}

/// Trains and probes every `(label, config)` for every seed, in parallel across jobs.
pub fn run_configs(configs: &[(String, ModelConfig)], corpus: &MelCorpus, budget: &SweepBudget) -> Result<Vec<SweepPoint>> {
    if budget.seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    for (_, c) in configs {
        c.validate()?;
    }
    budget.train.validate()?;
    budget.probe.validate()?;
    let jobs: Vec<(usize, u64)> = (0..configs.len()).flat_map(|i| budget.seeds.iter().map(move |&s| (i, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(budget.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<ProbeReport>> =
        pool.install(|| jobs.par_iter().map(|&(i, seed)| run_one(corpus, &configs[i].1, budget, seed)).collect());

    let mut points: Vec<SweepPoint> = configs
        .iter()
        .map(|(label, c)| SweepPoint {
            label: label.clone(),
            activation: c.activation,
            bottleneck: c.bottleneck_channels,
            variant: c.variant,
            param_count: 0,
            reports: Vec::new(),
            failures: Vec::new(),
        })
        .collect();
    for ((i, seed), result) in jobs.into_iter().zip(results) {
        match result {
            Ok(report) => {
                points[i].param_count = report.param_count;
                points[i].reports.push(report);
            }
            Err(Error::Divergence { step, loss }) => {
                points[i].failures.push(SeedFailure { seed, message: format!("diverged at step {step} (loss {loss})") })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(points)
}

/// One point per (activation, bottleneck), trained from `budget.model`.
pub fn run_sweep(grid: &SweepGrid, corpus: &MelCorpus, budget: &SweepBudget) -> Result<Vec<SweepPoint>> {
    grid.validate()?;
    let configs: Vec<(String, ModelConfig)> = grid
        .points()
        .into_iter()
        .map(|(a, b)| (format!("{a}/{b}"), budget.model.clone().with_activation(a).with_bottleneck(b)))
        .collect();
    run_configs(&configs, corpus, budget)
}

/// Single versus dual encoder, each with and without the sigmoid guide.
pub fn compare_encoder_variants(corpus: &MelCorpus, budget: &SweepBudget) -> Result<Vec<SweepPoint>> {
    let sig = Activation::Sigmoid { alpha: 0.1 };
    let configs: Vec<(String, ModelConfig)> = [
        ("1-Enc", EncoderVariant::SingleEncoder, Activation::None),
        ("1-Enc-sig", EncoderVariant::SingleEncoder, sig),
        ("2-Enc", EncoderVariant::DualEncoder, Activation::None),
        ("2-Enc-sig", EncoderVariant::DualEncoder, sig),
    ]
    .into_iter()
    .map(|(label, v, a)| (label.to_string(), budget.model.clone().with_variant(v).with_activation(a)))
    .collect();
    run_configs(&configs, corpus, budget)
}

fn alpha_field(a: &Activation) -> String {
    a.alpha().map(|x| x.to_string()).unwrap_or_default()
}

/// `activation,alpha,bottleneck,acc_C,acc_S,rec,params,acc_C_over_70`, seed means.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("activation,alpha,bottleneck,acc_C,acc_S,rec,params,acc_C_over_70\n");
    for p in points {
        let acc_c = p.acc_content().0;
        out.push_str(&format!(
            "{},{},{},{:.4},{:.4},{:.6},{},{}\n",
            p.activation.kind_name(),
            alpha_field(&p.activation),
            p.bottleneck,
            acc_c,
            p.acc_style().0,
            p.rec_error().0,
            p.param_count,
            acc_c > CONTENT_LEAK_THRESHOLD
        ));
    }
    out
}

/// `model,activation,alpha,acc_C,acc_S,rec,params,chance`, seed means.
pub fn compare_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("model,activation,alpha,acc_C,acc_S,rec,params,chance\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{:.4},{:.4},{:.6},{},{:.4}\n",
            p.label,
            p.activation.kind_name(),
            alpha_field(&p.activation),
            p.acc_content().0,
            p.acc_style().0,
            p.rec_error().0,
            p.param_count,
            p.chance()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::{synth_corpus, SplitOptions, SynthConfig};

    fn setup() -> (MelCorpus, SweepBudget) {
        let corpus = synth_corpus(&SynthConfig {
            n_speakers: 4,
            utterances_per_speaker: 4,
            n_mels: 10,
            min_frames: 130,
            max_frames: 150,
            split: SplitOptions { train_fraction: 0.75, heldout_fraction: 0.25, max_utterances: None, seed: 0 },
            ..SynthConfig::default()
        })
        .unwrap()
        .corpus;
        let budget = SweepBudget {
            model: ModelConfig { n_mels: 10, n_blocks: 2, widths: vec![6, 6], ..ModelConfig::desk() },
            train: TrainConfig { batch_size: 4, total_steps: 3, ..TrainConfig::default() },
            probe: ProbeConfig { hidden_channels: 4, steps: 5, train_per_speaker: 4, eval_per_speaker: 2, ..ProbeConfig::default() },
            seeds: vec![0, 1],
            jobs: 2,
        };
        (corpus, budget)
    }

    #[test]
    fn two_point_grid_gives_two_rows_and_is_deterministic() {
        let (corpus, budget) = setup();
        let grid = SweepGrid { activations: vec![Activation::None, Activation::Sigmoid { alpha: 0.1 }], bottlenecks: vec![4] };
        let a = run_sweep(&grid, &corpus, &budget).unwrap();
        let b = run_sweep(&grid, &corpus, &SweepBudget { jobs: 1, ..budget }).unwrap();
        assert_eq!(a, b);
        let csv = sweep_csv(&a);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().starts_with("sigmoid,0.1,4,"));
        assert!(a.iter().all(|p| p.reports.len() == 2));
    }

    #[test]
    fn compare_has_four_rows_with_parameter_counts() {
        let (corpus, budget) = setup();
        let points = compare_encoder_variants(&corpus, &SweepBudget { seeds: vec![0], ..budget }).unwrap();
        let labels: Vec<&str> = points.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["1-Enc", "1-Enc-sig", "2-Enc", "2-Enc-sig"]);
        assert!(points[2].param_count > points[0].param_count);
        assert_eq!(compare_csv(&points).lines().count(), 5);
    }

    #[test]
    fn divergent_points_are_recorded_not_fatal() {
        let (corpus, mut budget) = setup();
        budget.train.learning_rate = 1e300;
        budget.train.total_steps = 100;
        let grid = SweepGrid { activations: vec![Activation::None], bottlenecks: vec![2] };
        let points = run_sweep(&grid, &corpus, &budget).unwrap();
        assert_eq!(points[0].failures.len(), 2);
        assert!(points[0].reports.is_empty());
    }

    #[test]
    fn empty_grid_is_rejected() {
        let (corpus, budget) = setup();
        let grid = SweepGrid { activations: vec![], bottlenecks: vec![4] };
        assert!(matches!(run_sweep(&grid, &corpus, &budget), Err(Error::Config(_))));
    }

    #[test]
    fn seed_statistics() {
        let (m, s) = mean_std([1.0, 2.0, 3.0].into_iter());
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }
}
