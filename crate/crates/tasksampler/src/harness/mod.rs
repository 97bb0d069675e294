//! End-to-end training harness: configuration, the episodic training loop
//! with pluggable sampling strategy, meta-test evaluation, and file exports.
//!
//! One iteration is: sample a category set per strategy, build the episode,
//! take one learner step on it, then update the sampler's adaptive state from
//! the pre-update predictions. Meta-test evaluation always samples tasks
//! uniformly over the held-out classes; adaptation applies to meta-training
//! only.

mod bench;
mod compare;
mod verify;

pub use bench::{bench_overhead, BenchConfig, BenchRow};
pub use compare::{compare_strategies, CompareReport, PairedComparison, StrategySummary};
pub use verify::{verify_prop1, Prop1Report, Prop1Row};

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;

use crate::episode::ClassIndexedDataset;
use crate::error::{Error, Result};
use crate::learner::LinearEmbedding;
use crate::potentials::{pair_confusion, ClassId, PotentialMatrix, Strategy};
use crate::rng::{stream_rng, TaskRng};
use crate::samplers::{
    sample_classes_uniform, sample_classes_without_replacement, sample_task_gcp, ClassWeights,
};
use crate::stats::{mean_ci95, spearman};
use crate::synthdata::{confusability_ground_truth, generate, ClusterSpec};

// Independent draw streams per run seed.
const STREAM_INIT: u64 = 1;
const STREAM_TASKS: u64 = 2;
const STREAM_EPISODES: u64 = 3;
const STREAM_EVAL: u64 = 4;

/// Task selection policy for the training loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingStrategy {
    /// Uniform category sets; the plain episodic-training baseline.
    Random,
    /// Per-class weights updated toward hard classes, sampled without
    /// replacement.
    ClassHard,
    /// Greedy class-pair sampling with hard-pair updates.
    GcpHard,
    /// Greedy class-pair sampling with easy-pair updates.
    GcpEasy,
    /// Greedy class-pair sampling with uncertainty updates.
    GcpUncertain,
}

impl SamplingStrategy {
    pub const ALL: [SamplingStrategy; 5] = [
        SamplingStrategy::Random,
        SamplingStrategy::ClassHard,
        SamplingStrategy::GcpHard,
        SamplingStrategy::GcpEasy,
        SamplingStrategy::GcpUncertain,
    ];

    /// The pair-update transform for gcp strategies, none otherwise.
    pub fn pair_strategy(self) -> Option<Strategy> {
        match self {
            SamplingStrategy::GcpHard => Some(Strategy::Hard),
            SamplingStrategy::GcpEasy => Some(Strategy::Easy),
            SamplingStrategy::GcpUncertain => Some(Strategy::Uncertain),
            _ => None,
        }
    }
}

impl FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SamplingStrategy::Random),
            "c-hard" => Ok(SamplingStrategy::ClassHard),
            "gcp-hard" => Ok(SamplingStrategy::GcpHard),
            "gcp-easy" => Ok(SamplingStrategy::GcpEasy),
            "gcp-uncertain" => Ok(SamplingStrategy::GcpUncertain),
            other => Err(Error::Parse(format!(
                "unknown strategy '{other}' (expected random, c-hard, gcp-hard, gcp-easy or gcp-uncertain)"
            ))),
        }
    }
}

impl fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SamplingStrategy::Random => "random",
            SamplingStrategy::ClassHard => "c-hard",
            SamplingStrategy::GcpHard => "gcp-hard",
            SamplingStrategy::GcpEasy => "gcp-easy",
            SamplingStrategy::GcpUncertain => "gcp-uncertain",
        };
        write!(f, "{name}")
    }
}

/// Full experiment description. Defaults pin the paper-style settings:
/// alpha = 1, tau = 0.5, snapshots every 40 iterations, 1000 evaluation
/// episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub iterations: usize,
    pub k_way: usize,
    pub m_shot: usize,
    pub n_query: usize,
    pub alpha: f64,
    pub tau: f64,
    pub strategy: SamplingStrategy,
    pub cluster: ClusterSpec,
    pub train_fraction: f64,
    pub embed_dim: usize,
    pub learning_rate: f64,
    pub eval_every: usize,
    pub snapshot_every: usize,
    pub eval_episodes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            iterations: 600,
            k_way: 5,
            m_shot: 5,
            n_query: 15,
            alpha: 1.0,
            tau: 0.5,
            strategy: SamplingStrategy::GcpHard,
            cluster: ClusterSpec::default(),
            train_fraction: 0.8,
            embed_dim: 16,
            learning_rate: 0.05,
            eval_every: 100,
            snapshot_every: 40,
            eval_episodes: 1000,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.cluster.validate()?;
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be positive".into()));
        }
        if self.k_way < 2 {
            return Err(Error::InvalidConfig("k_way must be at least 2".into()));
        }
        if self.m_shot == 0 || self.n_query == 0 {
            return Err(Error::InvalidConfig("m_shot and n_query must be positive".into()));
        }
        if self.m_shot + self.n_query > self.cluster.points_per_class {
            return Err(Error::InvalidConfig(format!(
                "m_shot + n_query = {} exceeds points_per_class = {}",
                self.m_shot + self.n_query,
                self.cluster.points_per_class
            )));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidConfig(format!("tau must lie in [0, 1], got {}", self.tau)));
        }
        if self.embed_dim == 0 {
            return Err(Error::InvalidConfig("embed_dim must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig("learning_rate must be nonnegative".into()));
        }
        if self.eval_every == 0 || self.snapshot_every == 0 || self.eval_episodes == 0 {
            return Err(Error::InvalidConfig(
                "eval_every, snapshot_every and eval_episodes must be positive".into(),
            ));
        }
        let (train, test) = self.split_sizes();
        if train < self.k_way || test < self.k_way {
            return Err(Error::InvalidConfig(format!(
                "split {train}/{test} leaves fewer than k_way = {} classes on a side",
                self.k_way
            )));
        }
        Ok(())
    }

    fn split_sizes(&self) -> (usize, usize) {
        let cut = (self.train_fraction * self.cluster.num_classes as f64).floor() as usize;
        (cut, self.cluster.num_classes - cut)
    }

    /// Number of meta-training classes under the configured split.
    pub fn train_classes(&self) -> usize {
        self.split_sizes().0
    }

    /// Flat key=value form, also the `config.echo` format.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed", self.seed.to_string()),
            ("iterations", self.iterations.to_string()),
            ("k_way", self.k_way.to_string()),
            ("m_shot", self.m_shot.to_string()),
            ("n_query", self.n_query.to_string()),
            ("alpha", self.alpha.to_string()),
            ("tau", self.tau.to_string()),
            ("strategy", self.strategy.to_string()),
            ("num_classes", self.cluster.num_classes.to_string()),
            ("points_per_class", self.cluster.points_per_class.to_string()),
            ("dim", self.cluster.dim.to_string()),
            ("num_superclusters", self.cluster.num_superclusters.to_string()),
            ("within_spread", self.cluster.within_supercluster_spread.to_string()),
            ("between_spread", self.cluster.between_supercluster_spread.to_string()),
            ("noise_sigma", self.cluster.noise_sigma.to_string()),
            ("data_seed", self.cluster.seed.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("embed_dim", self.embed_dim.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("snapshot_every", self.snapshot_every.to_string()),
            ("eval_episodes", self.eval_episodes.to_string()),
        ]
    }

    /// Apply one key=value override; keys match `key_values`.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::Parse(format!("bad value '{value}' for {key}")))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "iterations" => self.iterations = num(key, value)?,
            "k_way" => self.k_way = num(key, value)?,
            "m_shot" => self.m_shot = num(key, value)?,
            "n_query" => self.n_query = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "strategy" => self.strategy = value.parse()?,
            "num_classes" => self.cluster.num_classes = num(key, value)?,
            "points_per_class" => self.cluster.points_per_class = num(key, value)?,
            "dim" => self.cluster.dim = num(key, value)?,
            "num_superclusters" => self.cluster.num_superclusters = num(key, value)?,
            "within_spread" => self.cluster.within_supercluster_spread = num(key, value)?,
            "between_spread" => self.cluster.between_supercluster_spread = num(key, value)?,
            "noise_sigma" => self.cluster.noise_sigma = num(key, value)?,
            "data_seed" => self.cluster.seed = num(key, value)?,
            "train_fraction" => self.train_fraction = num(key, value)?,
            "embed_dim" => self.embed_dim = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "eval_every" => self.eval_every = num(key, value)?,
            "snapshot_every" => self.snapshot_every = num(key, value)?,
            "eval_episodes" => self.eval_episodes = num(key, value)?,
            other => return Err(Error::Parse(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parse a flat key=value config file ('#' starts a comment).
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", ln + 1)))?;
            self.set_key(key.trim(), value.trim())?;
        }
        Ok(())
    }
}

/// One evaluation row of a training run.
#[derive(Debug, Clone, Copy)]
pub struct MetricsRow {
    pub iteration: usize,
    pub train_loss: f64,
    pub eval_accuracy_mean: f64,
    pub eval_accuracy_ci95: f64,
    /// Wall time since run start. Reported in timing.csv; metrics.csv keeps
    /// only the deterministic columns so identical configs produce identical
    /// bytes.
    pub wall_time_ms: f64,
}

#[derive(Debug)]
pub struct RunResult {
    pub metrics: Vec<MetricsRow>,
    pub final_accuracy: f64,
    pub final_accuracy_ci95: f64,
    pub potentials: PotentialMatrix,
    pub class_weights: ClassWeights,
    pub snapshots_written: usize,
    pub sample_time_us: f64,
    pub update_time_us: f64,
    pub out_dir: Option<PathBuf>,
}

pub(crate) struct StepOutcome {
    pub loss: f64,
    pub sample_ns: u64,
    pub update_ns: u64,
}

/// Mutable state of one training loop; shared between `run_training` and the
/// timing benchmark so both measure the identical code path.
pub(crate) struct TrainState {
    pub k_way: usize,
    pub m_shot: usize,
    pub n_query: usize,
    pub alpha: f64,
    pub tau: f64,
    pub strategy: SamplingStrategy,
    pub train_ds: ClassIndexedDataset,
    pub embedding: LinearEmbedding,
    pub potentials: PotentialMatrix,
    pub class_weights: ClassWeights,
    pub task_rng: TaskRng,
    pub episode_rng: TaskRng,
}

impl TrainState {
    pub fn from_parts(
        train_ds: ClassIndexedDataset,
        strategy: SamplingStrategy,
        k_way: usize,
        m_shot: usize,
        n_query: usize,
        alpha: f64,
        tau: f64,
        embed_dim: usize,
        learning_rate: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut init_rng = stream_rng(seed, STREAM_INIT);
        let embedding = LinearEmbedding::new(embed_dim, train_ds.dim(), learning_rate, &mut init_rng)?;
        let potentials = PotentialMatrix::new(train_ds.num_classes())?;
        let class_weights = ClassWeights::uniform(train_ds.num_classes())?;
        Ok(TrainState {
            k_way,
            m_shot,
            n_query,
            alpha,
            tau,
            strategy,
            train_ds,
            embedding,
            potentials,
            class_weights,
            task_rng: stream_rng(seed, STREAM_TASKS),
            episode_rng: stream_rng(seed, STREAM_EPISODES),
        })
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        let sample_start = Instant::now();
        let categories = match self.strategy {
            SamplingStrategy::Random => {
                sample_classes_uniform(self.train_ds.num_classes(), self.k_way, &mut self.task_rng)?
            }
            SamplingStrategy::ClassHard => {
                sample_classes_without_replacement(&self.class_weights, self.k_way, &mut self.task_rng)?
            }
            _ => sample_task_gcp(&self.potentials, self.k_way, &mut self.task_rng)?,
        };
        let sample_ns = sample_start.elapsed().as_nanos() as u64;

        let episode =
            self.train_ds.build_episode(&categories, self.m_shot, self.n_query, &mut self.episode_rng)?;
        let (batch, loss) = self.embedding.train_step(&episode)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("non-finite training loss {loss}")));
        }

        let update_start = Instant::now();
        match self.strategy {
            SamplingStrategy::Random => {}
            SamplingStrategy::ClassHard => {
                self.class_weights.update_from_episode(&episode, &batch, self.alpha, self.tau)?;
            }
            gcp => {
                let pair_strategy = gcp.pair_strategy().expect("gcp strategies carry a transform");
                let confusions = pair_confusion(&batch, &episode)?;
                self.potentials.apply_update(&confusions, self.alpha, self.tau, pair_strategy)?;
            }
        }
        let update_ns = update_start.elapsed().as_nanos() as u64;

        Ok(StepOutcome { loss, sample_ns, update_ns })
    }
}

/// Mean accuracy and 95% half-width over uniformly sampled meta-test
/// episodes. The evaluation stream is re-seeded from scratch, so every
/// evaluation within and across runs of the same seed sees the same tasks.
pub fn evaluate_meta_test(
    embedding: &LinearEmbedding,
    test_ds: &ClassIndexedDataset,
    k_way: usize,
    m_shot: usize,
    n_query: usize,
    episodes: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut rng = stream_rng(seed, STREAM_EVAL);
    let mut accuracies = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let categories = sample_classes_uniform(test_ds.num_classes(), k_way, &mut rng)?;
        let episode = test_ds.build_episode(&categories, m_shot, n_query, &mut rng)?;
        let batch = embedding.forward(&episode)?;
        let mut correct = 0usize;
        for (q, row) in episode.query().iter().zip(batch.probs()) {
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
                .expect("nonempty row")
                .0;
            if episode.categories().classes()[argmax] == q.label {
                correct += 1;
            }
        }
        accuracies.push(correct as f64 / episode.query().len() as f64);
    }
    Ok(mean_ci95(&accuracies))
}

/// Run the full training loop described by `config`, writing `metrics.csv`,
/// `timing.csv`, `potentials_<iter>.csv` snapshots, final learner weights and
/// a `config.echo` under `out_dir` when given.
pub fn run_training(config: &RunConfig, out_dir: Option<&Path>) -> Result<RunResult> {
    config.validate()?;
    let dataset = generate(&config.cluster)?;
    let (train_ds, test_ds) = dataset.meta_split(config.train_fraction)?;
    debug_assert_eq!(train_ds.num_classes() + test_ds.num_classes(), config.cluster.num_classes);

    let mut state = TrainState::from_parts(
        train_ds,
        config.strategy,
        config.k_way,
        config.m_shot,
        config.n_query,
        config.alpha,
        config.tau,
        config.embed_dim,
        config.learning_rate,
        config.seed,
    )?;

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let mut echo = fs::File::create(dir.join("config.echo"))?;
        for (k, v) in config.key_values() {
            writeln!(echo, "{k}={v}")?;
        }
    }

    let run_start = Instant::now();
    let mut metrics = Vec::new();
    let mut window_losses = Vec::new();
    let mut snapshots_written = 0usize;
    let mut sample_ns_total = 0u64;
    let mut update_ns_total = 0u64;

    for t in 1..=config.iterations {
        let outcome = state.step()?;
        window_losses.push(outcome.loss);
        sample_ns_total += outcome.sample_ns;
        update_ns_total += outcome.update_ns;

        if t % config.snapshot_every == 0 {
            if let Some(dir) = out_dir {
                let file = fs::File::create(dir.join(format!("potentials_{t}.csv")))?;
                state.potentials.write_snapshot_csv(file)?;
            }
            snapshots_written += 1;
        }

        if t % config.eval_every == 0 || t == config.iterations {
            let (acc, ci) = evaluate_meta_test(
                &state.embedding,
                &test_ds,
                config.k_way,
                config.m_shot,
                config.n_query,
                config.eval_episodes,
                config.seed,
            )?;
            let train_loss = window_losses.iter().sum::<f64>() / window_losses.len() as f64;
            window_losses.clear();
            metrics.push(MetricsRow {
                iteration: t,
                train_loss,
                eval_accuracy_mean: acc,
                eval_accuracy_ci95: ci,
                wall_time_ms: run_start.elapsed().as_secs_f64() * 1e3,
            });
            if t == config.iterations {
                break;
            }
        }
    }

    if let Some(dir) = out_dir {
        let mut m = fs::File::create(dir.join("metrics.csv"))?;
        writeln!(m, "iteration,train_loss,eval_accuracy_mean,eval_accuracy_ci95")?;
        for row in &metrics {
            writeln!(
                m,
                "{},{:.6},{:.6},{:.6}",
                row.iteration, row.train_loss, row.eval_accuracy_mean, row.eval_accuracy_ci95
            )?;
        }
        let mut t = fs::File::create(dir.join("timing.csv"))?;
        writeln!(t, "iteration,wall_time_ms,sample_time_us,update_time_us")?;
        for row in &metrics {
            writeln!(
                t,
                "{},{:.3},{:.1},{:.1}",
                row.iteration,
                row.wall_time_ms,
                sample_ns_total as f64 / 1e3,
                update_ns_total as f64 / 1e3
            )?;
        }
        let weights = fs::File::create(dir.join("weights.csv"))?;
        state.embedding.save_csv(weights)?;
    }

    let last = metrics.last().expect("at least the final evaluation row");
    Ok(RunResult {
        final_accuracy: last.eval_accuracy_mean,
        final_accuracy_ci95: last.eval_accuracy_ci95,
        metrics,
        potentials: state.potentials,
        class_weights: state.class_weights,
        snapshots_written,
        sample_time_us: sample_ns_total as f64 / 1e3,
        update_time_us: update_ns_total as f64 / 1e3,
        out_dir: out_dir.map(Path::to_path_buf),
    })
}

/// Spearman correlations of learned log potentials against the ground-truth
/// confusability of the meta-training classes.
#[derive(Debug, Clone, Copy)]
pub struct StructureCorrelation {
    /// Against negative class-center distance.
    pub vs_negative_distance: f64,
    /// Against the same-supercluster indicator.
    pub vs_same_supercluster: f64,
}

pub fn potential_structure_correlation(
    config: &RunConfig,
    potentials: &PotentialMatrix,
) -> Result<StructureCorrelation> {
    let dataset = generate(&config.cluster)?;
    let truth = confusability_ground_truth(&dataset, &config.cluster)?;
    let train = config.train_classes();
    if potentials.num_classes() != train {
        return Err(Error::InvalidConfig(format!(
            "potentials cover {} classes but the train split has {train}",
            potentials.num_classes()
        )));
    }
    // Meta-train classes are the first `train` classes of the full dataset,
    // so ground-truth pairs map one-to-one onto potential pairs.
    let mut logs = Vec::new();
    let mut neg_dist = Vec::new();
    let mut same = Vec::new();
    for t in truth {
        let (i, j) = t.pair;
        if i.index() < train && j.index() < train {
            logs.push(potentials.log_potential(i, j)?);
            neg_dist.push(-t.center_distance);
            same.push(if t.same_supercluster { 1.0 } else { 0.0 });
        }
    }
    Ok(StructureCorrelation {
        vs_negative_distance: spearman(&logs, &neg_dist)?,
        vs_same_supercluster: spearman(&logs, &same)?,
    })
}

/// Evaluation-isolation check: every meta-training episode draws classes from
/// the train split only, by construction of the split datasets. This helper
/// asserts the ranges for a run's samplers.
pub fn assert_split_isolation(config: &RunConfig) -> Result<()> {
    let (train, test) = config.split_sizes();
    let dataset = generate(&config.cluster)?;
    let (train_ds, test_ds) = dataset.meta_split(config.train_fraction)?;
    if train_ds.num_classes() != train || test_ds.num_classes() != test {
        return Err(Error::InvalidConfig("split sizes disagree with config".into()));
    }
    // Train-side class ids i map to original ids i; test-side ids j map to
    // original train + j. The id ranges are disjoint.
    for c in 0..train_ds.num_classes() {
        let a = train_ds.pool(ClassId(c))[0].as_ref();
        let b = dataset.pool(ClassId(c))[0].as_ref();
        if a != b {
            return Err(Error::Dataset("train split does not alias the original pools".into()));
        }
    }
    for c in 0..test_ds.num_classes() {
        let a = test_ds.pool(ClassId(c))[0].as_ref();
        let b = dataset.pool(ClassId(train + c))[0].as_ref();
        if a != b {
            return Err(Error::Dataset("test split does not alias the original pools".into()));
        }
    }
    Ok(())
}
