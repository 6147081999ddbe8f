//! The batch RL outer loop: collect dense rollouts under the current
//! policy (ε-greedy, randomized perception per scenario), keep them in
//! a bounded FIFO buffer, fit the Q-network to the Monte Carlo
//! targets, and checkpoint every batch.

use crate::nn::Adam;
use crate::qpolicy::{GreedyQPolicy, PolicyError, QNet, Variant};
use crate::rollouts::{dense_rollout, DenseTrajectory, EpisodeEnd, RolloutConfig};
use crate::worldgen::{
    randomize_perception, sample_scenario, Environment, GoalMode, PerceptionJitter,
    PerceptionParams, SamplerConfig, WorldError,
};
use crate::dynamics::DynamicsError;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const REPORT_FORMAT: &str = "divis-train/1";

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at batch {batch} epoch {epoch}")]
    NonFiniteLoss { batch: usize, epoch: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad train report: {0}")]
    BadReport(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Outer batches B.
    pub batches: usize,
    /// Dense rollouts collected per batch, M.
    pub episodes_per_batch: usize,
    /// Fitting epochs per batch, E.
    pub epochs_per_fit: usize,
    pub learning_rate: f64,
    /// Exploration schedule: linear from start to end over
    /// `epsilon_anneal_batches` batches.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_anneal_batches: usize,
    /// Replay buffer capacity in steps; whole episodes evict FIFO.
    pub buffer_capacity: usize,
    /// Episodes per optimizer step during fitting.
    pub minibatch_episodes: usize,
    pub seed: u64,
    pub variant: Variant,
    pub goal_mode: GoalMode,
    /// Cap on start-to-goal distance for training scenarios; short
    /// horizons need reachable goals.
    #[serde(default)]
    pub max_goal_distance: Option<f64>,
    /// Multiplier applied to Monte Carlo targets during fitting; the
    /// greedy argmax is scale-invariant, and scaling returns to O(1)
    /// keeps Huber errors in the quadratic region.
    #[serde(default = "default_target_scale")]
    pub target_scale: f64,
    #[serde(default)]
    pub rollout: RolloutConfig,
    #[serde(default)]
    pub perception_base: PerceptionParams,
    #[serde(default)]
    pub perception_jitter: PerceptionJitter,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batches: 200,
            episodes_per_batch: 8,
            epochs_per_fit: 4,
            learning_rate: 1e-3,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_anneal_batches: 100,
            buffer_capacity: 50_000,
            minibatch_episodes: 4,
            seed: 0,
            variant: Variant::RecurrentFlow,
            goal_mode: GoalMode::GoalImage,
            max_goal_distance: None,
            target_scale: 1.0,
            rollout: RolloutConfig::default(),
            perception_base: PerceptionParams::default(),
            perception_jitter: PerceptionJitter::default(),
        }
    }
}

impl TrainConfig {
    pub fn epsilon_at(&self, batch: usize) -> f64 {
        if self.epsilon_anneal_batches == 0 {
            return self.epsilon_end;
        }
        let frac = (batch as f64 / self.epsilon_anneal_batches as f64).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// Bounded FIFO episode buffer; capacity counts steps.
#[derive(Debug, Default)]
pub struct ReplayBuffer {
    episodes: std::collections::VecDeque<DenseTrajectory>,
    steps: usize,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            episodes: Default::default(),
            steps: 0,
            capacity,
        }
    }

    pub fn push(&mut self, traj: DenseTrajectory) {
        self.steps += traj.base.steps.len();
        self.episodes.push_back(traj);
        while self.steps > self.capacity && self.episodes.len() > 1 {
            if let Some(old) = self.episodes.pop_front() {
                self.steps -= old.base.steps.len();
            }
        }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn episodes(&self) -> impl Iterator<Item = &DenseTrajectory> {
        self.episodes.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    /// Mean per-episode loss for each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Fit the network to a dense dataset: E epochs of Adam on the masked
/// Huber loss over full K-vector targets, backpropagated through the
/// recurrent unrolling of each episode.
fn default_target_scale() -> f64 {
    1.0
}

pub fn fit(
    net: &QNet,
    dataset: &[&DenseTrajectory],
    config: &TrainConfig,
    batch_index: usize,
) -> Result<(QNet, FitStats), TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut net = net.clone();
    let mut flat = net.to_flat();
    let mut opt = Adam::new(flat.len(), config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[config.seed, batch_index as u64, 0xf17]));
    let mut epoch_losses = Vec::with_capacity(config.epochs_per_fit);
    for epoch in 0..config.epochs_per_fit {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut counted = 0usize;
        for chunk in order.chunks(config.minibatch_episodes.max(1)) {
            let mut grads = vec![0.0; flat.len()];
            let mut chunk_loss = 0.0;
            for idx in chunk {
                let traj = dataset[*idx];
                if traj.base.steps.is_empty() {
                    continue;
                }
                let mut hidden = net.initial_hidden();
                let mut caches = Vec::with_capacity(traj.base.steps.len());
                for step in &traj.base.steps {
                    let (_, h, cache) = net.forward_cached(&step.observation, &hidden)?;
                    caches.push(cache);
                    hidden = h;
                }
                let targets: Vec<Vec<f64>> = traj
                    .q_targets
                    .iter()
                    .map(|row| row.iter().map(|q| q * config.target_scale).collect())
                    .collect();
                let (loss, g) = net.bptt(&caches, &targets, &traj.mask);
                chunk_loss += loss;
                counted += 1;
                for (acc, gi) in grads.iter_mut().zip(g.to_flat()) {
                    *acc += gi / chunk.len() as f64;
                }
            }
            if !chunk_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    batch: batch_index,
                    epoch,
                });
            }
            epoch_loss += chunk_loss;
            opt.step(&mut flat, &grads);
            net.assign_from_flat(&flat);
        }
        epoch_losses.push(if counted > 0 { epoch_loss / counted as f64 } else { 0.0 });
    }
    Ok((net, FitStats { epoch_losses }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub env_id: String,
    pub scenario_seed: u64,
    pub rollout_seed: u64,
    pub perception_seed: u64,
    pub steps: usize,
    pub success: bool,
    pub collision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch: usize,
    pub epsilon: f64,
    pub episodes: Vec<EpisodeRecord>,
    /// Success / collision rates of this batch's collection episodes,
    /// run with the previous batch's checkpoint parameters.
    pub success_rate: f64,
    pub collision_rate: f64,
    pub buffer_steps: usize,
    pub fit: FitStats,
    /// Checkpoint file name (relative to the run directory) holding
    /// the parameters after this batch's fit.
    pub checkpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub format: String,
    pub variant: Variant,
    pub batches: Vec<BatchRecord>,
}

fn mix(parts: &[u64]) -> u64 {
    fn splitmix64(mut x: u64) -> u64 {
        x = x.wrapping_add(0x9e3779b97f4a7c15);
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
        x ^ (x >> 31)
    }
    let mut acc = 0x452821e638d01377u64;
    for (i, p) in parts.iter().enumerate() {
        acc = splitmix64(acc ^ p.rotate_left(11 * i as u32 + 3));
    }
    acc
}

pub fn checkpoint_name(batch: usize) -> String {
    format!("ckpt_{batch:04}.ckpt")
}

fn report_path(out_dir: &Path) -> PathBuf {
    out_dir.join("train_report.ndjson")
}

fn read_existing_report(out_dir: &Path) -> Result<Option<TrainReport>, TrainError> {
    let path = report_path(out_dir);
    if !path.exists() {
        return Ok(None);
    }
    let mut lines = BufReader::new(std::fs::File::open(&path)?).lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Ok(None),
    };
    let mut report: TrainReport =
        serde_json::from_str(&header).map_err(|e| TrainError::BadReport(e.to_string()))?;
    if report.format != REPORT_FORMAT {
        return Err(TrainError::BadReport(format!(
            "unknown format {:?}",
            report.format
        )));
    }
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: BatchRecord =
            serde_json::from_str(&line).map_err(|e| TrainError::BadReport(e.to_string()))?;
        report.batches.push(rec);
    }
    Ok(Some(report))
}

fn write_report(out_dir: &Path, report: &TrainReport) -> Result<(), TrainError> {
    let mut f = std::fs::File::create(report_path(out_dir))?;
    let header = TrainReport {
        format: report.format.clone(),
        variant: report.variant,
        batches: Vec::new(),
    };
    writeln!(f, "{}", serde_json::to_string(&header).unwrap())?;
    for rec in &report.batches {
        writeln!(f, "{}", serde_json::to_string(rec).unwrap())?;
    }
    Ok(())
}

/// Sample a scenario, skipping seeds the sampler rejects.
fn sample_with_retries(
    env: &Environment,
    mode: GoalMode,
    base_seed: u64,
    cfg: &SamplerConfig,
) -> Result<crate::worldgen::Scenario, WorldError> {
    let mut last_err = None;
    for attempt in 0..50u64 {
        match sample_scenario(env, mode, mix(&[base_seed, attempt]), cfg) {
            Ok(s) => return Ok(s),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap())
}

/// Run the batch RL loop over ALL training environments. Emits one
/// checkpoint per batch into `out_dir` plus an append-style report
/// file; an interrupted run restarted with the same `out_dir` resumes
/// after the last completed batch (with an empty replay buffer).
pub fn train(
    environments: &[Environment],
    config: &TrainConfig,
    out_dir: &Path,
) -> Result<(QNet, TrainReport), TrainError> {
    assert!(!environments.is_empty(), "need at least one environment");
    std::fs::create_dir_all(out_dir)?;

    let mut report = match read_existing_report(out_dir)? {
        Some(r) => r,
        None => TrainReport {
            format: REPORT_FORMAT.to_string(),
            variant: config.variant,
            batches: Vec::new(),
        },
    };
    let start_batch = report.batches.len();
    let mut net = if start_batch > 0 {
        let last = &report.batches[start_batch - 1];
        QNet::load(&out_dir.join(&last.checkpoint))?
    } else {
        QNet::new(
            config.variant,
            config.rollout.grid.n,
            config.rollout.space.k,
            mix(&[config.seed, 0x1417]),
        )
    };
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);

    for b in start_batch..config.batches {
        let epsilon = config.epsilon_at(b);
        let mut episodes = Vec::with_capacity(config.episodes_per_batch);
        let mut successes = 0usize;
        let mut collisions = 0usize;
        for m in 0..config.episodes_per_batch {
            let env = &environments[(b * config.episodes_per_batch + m) % environments.len()];
            let scenario_seed = mix(&[config.seed, b as u64, m as u64, 0x5c]);
            let sampler = SamplerConfig {
            max_goal_distance: config.max_goal_distance,
            ..SamplerConfig::default()
        };
            let scenario =
                sample_with_retries(env, config.goal_mode, scenario_seed, &sampler)?;
            let perception_seed = mix(&[config.seed, b as u64, m as u64, 0x9e]);
            let perception = randomize_perception(
                &config.perception_base,
                perception_seed,
                &config.perception_jitter,
            );
            let rollout_seed = mix(&[config.seed, b as u64, m as u64, 0x07]);
            let mut rollout_cfg = config.rollout.clone();
            rollout_cfg.exploration_epsilon = epsilon;
            let policy = GreedyQPolicy { net: &net, epsilon: 0.0 };
            let dense = dense_rollout(env, &scenario, &policy, &rollout_cfg, &perception, rollout_seed)?;
            if dense.base.success {
                successes += 1;
            }
            if dense.base.terminal == EpisodeEnd::Collision {
                collisions += 1;
            }
            episodes.push(EpisodeRecord {
                env_id: env.id.clone(),
                scenario_seed,
                rollout_seed,
                perception_seed,
                steps: dense.base.steps.len(),
                success: dense.base.success,
                collision: dense.base.terminal == EpisodeEnd::Collision,
            });
            buffer.push(dense);
        }
        let dataset: Vec<&DenseTrajectory> = buffer.episodes().collect();
        let (new_net, stats) = fit(&net, &dataset, config, b)?;
        net = new_net;
        let ckpt = checkpoint_name(b);
        net.save(&out_dir.join(&ckpt))?;
        let m = config.episodes_per_batch as f64;
        report.batches.push(BatchRecord {
            batch: b,
            epsilon,
            episodes,
            success_rate: successes as f64 / m,
            collision_rate: collisions as f64 / m,
            buffer_steps: buffer.steps(),
            fit: stats,
            checkpoint: ckpt,
        });
        write_report(out_dir, &report)?;
    }
    Ok((net, report))
}

/// Re-run one recorded batch's collection episodes against a given
/// parameter snapshot; returns (success_rate, collision_rate). Used to
/// verify checkpoints reproduce their recorded statistics.
pub fn replay_batch_collection(
    environments: &[Environment],
    config: &TrainConfig,
    net: &QNet,
    record: &BatchRecord,
) -> Result<(f64, f64), TrainError> {
    let mut successes = 0usize;
    let mut collisions = 0usize;
    for ep in &record.episodes {
        let env = environments
            .iter()
            .find(|e| e.id == ep.env_id)
            .ok_or_else(|| TrainError::BadReport(format!("unknown env {}", ep.env_id)))?;
        let sampler = SamplerConfig {
            max_goal_distance: config.max_goal_distance,
            ..SamplerConfig::default()
        };
        let scenario = sample_with_retries(env, config.goal_mode, ep.scenario_seed, &sampler)?;
        let perception = randomize_perception(
            &config.perception_base,
            ep.perception_seed,
            &config.perception_jitter,
        );
        let mut rollout_cfg = config.rollout.clone();
        rollout_cfg.exploration_epsilon = record.epsilon;
        let policy = GreedyQPolicy { net, epsilon: 0.0 };
        let traj = crate::rollouts::run_episode(
            env,
            &scenario,
            &policy,
            &rollout_cfg,
            &perception,
            ep.rollout_seed,
        )?;
        if traj.success {
            successes += 1;
        }
        if traj.terminal == EpisodeEnd::Collision {
            collisions += 1;
        }
    }
    let m = record.episodes.len() as f64;
    Ok((successes as f64 / m, collisions as f64 / m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qpolicy::VgmPolicy;
    use crate::worldgen::fixtures;

    fn small_config(seed: u64) -> TrainConfig {
        TrainConfig {
            batches: 1,
            episodes_per_batch: 1,
            epochs_per_fit: 1,
            learning_rate: 1e-3,
            epsilon_start: 0.5,
            epsilon_end: 0.5,
            epsilon_anneal_batches: 1,
            buffer_capacity: 2_000,
            minibatch_episodes: 2,
            seed,
            variant: Variant::Reactive,
            goal_mode: GoalMode::GoalImage,
            max_goal_distance: None,
            target_scale: 1.0,
            rollout: RolloutConfig {
                max_steps: 6,
                ..RolloutConfig::default()
            },
            perception_base: PerceptionParams::default(),
            perception_jitter: PerceptionJitter::default(),
        }
    }

    fn tiny_dataset(seed: u64, max_steps: usize) -> (Environment, DenseTrajectory) {
        let env = fixtures::by_id("studio").unwrap();
        let scenario = sample_scenario(
            &env,
            GoalMode::GoalImage,
            seed,
            &SamplerConfig::default(),
        )
        .unwrap();
        let config = RolloutConfig {
            max_steps,
            ..RolloutConfig::default()
        };
        let policy = VgmPolicy {
            grid: config.grid,
            space: config.space.clone(),
            use_collision: true,
        };
        let dense = dense_rollout(
            &env,
            &scenario,
            &policy,
            &config,
            // miss-free perception: these tests exercise the
            // optimizer, not detector-failure robustness
            &PerceptionParams {
                miss_rate: 0.0,
                ..PerceptionParams::default()
            },
            seed,
        )
        .unwrap();
        (env, dense)
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = TrainConfig {
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_anneal_batches: 10,
            ..small_config(0)
        };
        assert_eq!(cfg.epsilon_at(0), 1.0);
        assert!((cfg.epsilon_at(5) - 0.55).abs() < 1e-12);
        assert!((cfg.epsilon_at(10) - 0.1).abs() < 1e-12);
        assert!((cfg.epsilon_at(50) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn buffer_fifo_eviction() {
        let (_, dense) = tiny_dataset(3, 4);
        let steps = dense.base.steps.len();
        assert!(steps > 0);
        let mut buf = ReplayBuffer::new(steps * 3);
        for _ in 0..5 {
            buf.push(dense.clone());
        }
        assert!(buf.steps() <= steps * 3);
        assert_eq!(buf.len(), 3);
        // a single oversized episode is kept (capacity floor of one)
        let mut tiny = ReplayBuffer::new(1);
        buf_push_n(&mut tiny, &dense, 2);
        assert_eq!(tiny.len(), 1);
    }

    fn buf_push_n(buf: &mut ReplayBuffer, d: &DenseTrajectory, n: usize) {
        for _ in 0..n {
            buf.push(d.clone());
        }
    }

    #[test]
    fn fit_stationary_point() {
        let (_, dense) = tiny_dataset(4, 4);
        let net = QNet::new(Variant::Reactive, 16, 9, 1);
        // overwrite targets with the net's own predictions
        let mut d = dense.clone();
        let mut hidden = net.initial_hidden();
        for (t, step) in d.base.steps.iter().enumerate() {
            let (q, h) = net.forward(&step.observation, &hidden).unwrap();
            hidden = h;
            d.q_targets[t] = q;
        }
        let cfg = TrainConfig {
            epochs_per_fit: 3,
            ..small_config(0)
        };
        let (new_net, stats) = fit(&net, &[&d], &cfg, 0).unwrap();
        assert!(stats.epoch_losses.iter().all(|l| *l == 0.0));
        let before = net.to_flat();
        let after = new_net.to_flat();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn fit_zero_epochs_unchanged() {
        let (_, dense) = tiny_dataset(5, 4);
        let net = QNet::new(Variant::Reactive, 16, 9, 2);
        let cfg = TrainConfig {
            epochs_per_fit: 0,
            ..small_config(0)
        };
        let (new_net, stats) = fit(&net, &[&dense], &cfg, 0).unwrap();
        assert_eq!(net, new_net);
        assert!(stats.epoch_losses.is_empty());
    }

    #[test]
    fn fit_overfits_single_batch() {
        let (_, dense) = tiny_dataset(6, 6);
        assert!(!dense.base.steps.is_empty());
        let net = QNet::new(Variant::Reactive, 16, 9, 3);
        let cfg = TrainConfig {
            epochs_per_fit: 200,
            learning_rate: 3e-3,
            ..small_config(0)
        };
        let (_, stats) = fit(&net, &[&dense], &cfg, 0).unwrap();
        let initial = stats.epoch_losses[0];
        let last = *stats.epoch_losses.last().unwrap();
        assert!(
            last < 0.1 * initial,
            "loss {initial} -> {last} did not overfit"
        );
        for w in stats.epoch_losses[10..].windows(2) {
            assert!(
                w[1] <= w[0] * 1.05 + 1e-9,
                "loss not near-monotone after epoch 10: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn smoke_train_emits_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let envs = vec![fixtures::by_id("corridor_hall").unwrap()];
        let cfg = small_config(1);
        let (net, report) = train(&envs, &cfg, dir.path()).unwrap();
        assert_eq!(report.batches.len(), 1);
        let ckpt = dir.path().join(&report.batches[0].checkpoint);
        assert!(ckpt.exists());
        let loaded = QNet::load(&ckpt).unwrap();
        assert_eq!(net, loaded);
    }

    #[test]
    fn train_deterministic() {
        let envs = vec![fixtures::by_id("studio").unwrap()];
        let cfg = TrainConfig {
            batches: 2,
            ..small_config(7)
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let (_, r1) = train(&envs, &cfg, d1.path()).unwrap();
        let (_, r2) = train(&envs, &cfg, d2.path()).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn train_resumes_from_last_checkpoint() {
        let envs = vec![fixtures::by_id("studio").unwrap()];
        let dir = tempfile::tempdir().unwrap();
        let cfg2 = TrainConfig {
            batches: 2,
            ..small_config(9)
        };
        train(&envs, &cfg2, dir.path()).unwrap();
        let cfg4 = TrainConfig {
            batches: 4,
            ..small_config(9)
        };
        let (_, report) = train(&envs, &cfg4, dir.path()).unwrap();
        assert_eq!(report.batches.len(), 4);
        assert_eq!(
            report.batches.iter().map(|b| b.batch).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );
        for b in &report.batches {
            assert!(dir.path().join(&b.checkpoint).exists());
        }
    }

    #[test]
    fn checkpoints_reproduce_recorded_rates() {
        let envs = vec![fixtures::by_id("studio").unwrap(), fixtures::by_id("lounge").unwrap()];
        let cfg = TrainConfig {
            batches: 3,
            episodes_per_batch: 2,
            ..small_config(11)
        };
        let dir = tempfile::tempdir().unwrap();
        let (_, report) = train(&envs, &cfg, dir.path()).unwrap();
        // batch b's collection ran with the parameters from batch b-1's
        // checkpoint
        for b in 1..report.batches.len() {
            let prev = QNet::load(&dir.path().join(&report.batches[b - 1].checkpoint)).unwrap();
            let (succ, coll) =
                replay_batch_collection(&envs, &cfg, &prev, &report.batches[b]).unwrap();
            assert!((succ - report.batches[b].success_rate).abs() <= 0.02);
            assert!((coll - report.batches[b].collision_rate).abs() <= 0.02);
        }
    }
}
