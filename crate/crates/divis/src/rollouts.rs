//! Episode execution and the dense multi-step Monte Carlo rollout
//! engine: at every visited state the engine forks one branch per
//! non-selected action, applies it once, and follows the current
//! policy greedily to the horizon, yielding a full vector of Monte
//! Carlo action values per visited state.

use crate::dynamics::{goal_distance, step, ActionSpace, DynamicsError, RewardParams, Terminal};
use crate::perception::{observe, EgoGrid, ObservationStack};
use crate::qpolicy::{HiddenState, Policy};
use crate::worldgen::{Environment, PerceptionParams, Pose, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const TRAJ_FORMAT: &str = "divis-traj/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    /// Discount factor in [0, 1].
    pub gamma: f64,
    /// Episode horizon T.
    pub max_steps: usize,
    /// Branch at every visited state; when false, only at the start
    /// state.
    pub branch_all_states: bool,
    /// Probability of replacing the on-policy action with a uniform
    /// one (base episode only; branches are always greedy).
    pub exploration_epsilon: f64,
    /// Minimum reward-suffix length for a horizon-truncated target to
    /// enter the fit mask. Truncated returns are biased low, and near
    /// the horizon that bias teaches a recurrent net time-dependent
    /// values that extrapolate badly past the training horizon; 0
    /// keeps every target. Targets ending in success, collision, or
    /// STOP are exact and always kept.
    #[serde(default)]
    pub min_target_suffix: usize,
    pub space: ActionSpace,
    pub rewards: RewardParams,
    pub grid: EgoGrid,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            gamma: 0.95,
            max_steps: 40,
            branch_all_states: true,
            exploration_epsilon: 0.0,
            min_target_suffix: 0,
            space: ActionSpace::default(),
            rewards: RewardParams::default(),
            grid: EgoGrid::default(),
        }
    }
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeEnd {
    Collision,
    Stopped,
    Success,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajStep {
    /// Pose before the action (the state s_t).
    pub pose: Pose,
    pub observation: ObservationStack,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub scenario: Scenario,
    pub steps: Vec<TrajStep>,
    pub final_pose: Pose,
    pub terminal: EpisodeEnd,
    pub success: bool,
}

/// A trajectory with a Monte Carlo action-value vector per visited
/// state. `q_targets[t][a]` is only meaningful where `mask[t][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseTrajectory {
    pub base: Trajectory,
    pub q_targets: Vec<Vec<f64>>,
    pub mask: Vec<Vec<bool>>,
}

/// Discounted return of a reward sequence.
pub fn mc_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

/// Discounted return with the goal treated as an absorbing state: a
/// success-terminated sequence keeps paying its final reward forever,
/// adding `gamma^L * r_last / (1 - gamma)` to the plain return.
/// Without this, ending the episode at the goal would truncate future
/// reward and make *avoiding* the goal return-maximizing.
pub fn episode_return(rewards: &[f64], gamma: f64, success: bool) -> f64 {
    let tail = if success && gamma < 1.0 {
        rewards.last().map_or(0.0, |r| r / (1.0 - gamma))
    } else {
        0.0
    };
    rewards.iter().rev().fold(tail, |acc, r| r + gamma * acc)
}

fn mix(parts: &[u64]) -> u64 {
    fn splitmix64(mut x: u64) -> u64 {
        x = x.wrapping_add(0x9e3779b97f4a7c15);
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
        x ^ (x >> 31)
    }
    let mut acc = 0x243f6a8885a308d3u64;
    for (i, p) in parts.iter().enumerate() {
        acc = splitmix64(acc ^ p.rotate_left(7 * i as u32 + 1));
    }
    acc
}

/// Everything needed to restart execution from a visited state.
struct ForkPoint {
    t: usize,
    pose: Pose,
    hidden_after: HiddenState,
    action: usize,
}

struct EpisodeTrace {
    trajectory: Trajectory,
    forks: Vec<ForkPoint>,
    d_init: f64,
}

fn run_episode_traced(
    env: &Environment,
    scenario: &Scenario,
    policy: &dyn Policy,
    config: &RolloutConfig,
    perception: &PerceptionParams,
    seed: u64,
) -> Result<EpisodeTrace, DynamicsError> {
    let goal = &scenario.goal;
    let d_init = goal_distance(env, scenario.start_pose.position(), goal)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, 0x0e]));
    let mut pose = scenario.start_pose;
    let mut pose_prev = pose;
    let mut hidden = policy.initial_state();
    let mut steps = Vec::new();
    let mut forks = Vec::new();

    if d_init < config.rewards.success_distance {
        return Ok(EpisodeTrace {
            trajectory: Trajectory {
                scenario: scenario.clone(),
                steps,
                final_pose: pose,
                terminal: EpisodeEnd::Success,
                success: true,
            },
            forks,
            d_init,
        });
    }

    let mut terminal = EpisodeEnd::MaxSteps;
    let mut success = false;
    for t in 0..config.max_steps {
        let obs = observe(
            env,
            pose,
            pose_prev,
            goal,
            &config.grid,
            perception,
            scenario.seed,
            t as u64,
        );
        let mut action = policy.act(&obs, &mut hidden, &mut rng);
        if config.exploration_epsilon > 0.0 && rng.gen::<f64>() < config.exploration_epsilon {
            action = rng.gen_range(0..config.space.k);
        }
        let outcome = step(
            env,
            pose,
            action,
            &config.space,
            &config.rewards,
            goal,
            d_init,
        )?;
        steps.push(TrajStep {
            pose,
            observation: obs,
            action,
            reward: outcome.reward,
        });
        forks.push(ForkPoint {
            t,
            pose,
            hidden_after: hidden.clone(),
            action,
        });
        pose_prev = pose;
        pose = outcome.new_pose;
        if outcome.terminal == Terminal::Collision {
            terminal = EpisodeEnd::Collision;
            break;
        }
        if outcome.success {
            terminal = EpisodeEnd::Success;
            success = true;
            break;
        }
        if outcome.terminal == Terminal::Stopped {
            terminal = EpisodeEnd::Stopped;
            break;
        }
    }
    Ok(EpisodeTrace {
        trajectory: Trajectory {
            scenario: scenario.clone(),
            steps,
            final_pose: pose,
            terminal,
            success,
        },
        forks,
        d_init,
    })
}

/// Run one episode: step with policy actions (ε-greedy when ε > 0)
/// until collision, STOP, success, or `max_steps`.
pub fn run_episode(
    env: &Environment,
    scenario: &Scenario,
    policy: &dyn Policy,
    config: &RolloutConfig,
    perception: &PerceptionParams,
    seed: u64,
) -> Result<Trajectory, DynamicsError> {
    run_episode_traced(env, scenario, policy, config, perception, seed)
        .map(|trace| trace.trajectory)
}

/// Rewards of one branch: the forced action at the fork state, then
/// greedy policy following until termination or the global horizon.
#[allow(clippy::too_many_arguments)]
fn run_branch(
    env: &Environment,
    scenario: &Scenario,
    policy: &dyn Policy,
    config: &RolloutConfig,
    perception: &PerceptionParams,
    fork: &ForkPoint,
    forced_action: usize,
    d_init: f64,
    seed: u64,
) -> Result<BranchResult, DynamicsError> {
    let goal = &scenario.goal;
    let mut rewards = Vec::new();
    let outcome = step(
        env,
        fork.pose,
        forced_action,
        &config.space,
        &config.rewards,
        goal,
        d_init,
    )?;
    rewards.push(outcome.reward);
    let branch_success =
        |o: &crate::dynamics::StepOutcome| o.success && o.terminal != Terminal::Collision;
    if outcome.terminal != Terminal::None || outcome.success {
        return Ok(BranchResult {
            rewards,
            success: branch_success(&outcome),
            terminated: true,
        });
    }
    let mut pose_prev = fork.pose;
    let mut pose = outcome.new_pose;
    let mut hidden = fork.hidden_after.clone();
    let mut success = false;
    let mut terminated = false;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, fork.t as u64, forced_action as u64]));
    for t in fork.t + 1..config.max_steps {
        let obs = observe(
            env,
            pose,
            pose_prev,
            goal,
            &config.grid,
            perception,
            scenario.seed,
            t as u64,
        );
        let action = policy.act(&obs, &mut hidden, &mut rng);
        let outcome = step(
            env,
            pose,
            action,
            &config.space,
            &config.rewards,
            goal,
            d_init,
        )?;
        rewards.push(outcome.reward);
        pose_prev = pose;
        pose = outcome.new_pose;
        if outcome.terminal != Terminal::None || outcome.success {
            success = branch_success(&outcome);
            terminated = true;
            break;
        }
    }
    Ok(BranchResult {
        rewards,
        success,
        terminated,
    })
}

struct BranchResult {
    rewards: Vec<f64>,
    success: bool,
    /// false when the branch was cut off by the global horizon, so
    /// its return is a truncated (biased-low) estimate
    terminated: bool,
}

/// Run the on-policy episode, then evaluate every non-selected action
/// at every visited state by branch rollout. The selected action's
/// target is the discounted on-policy suffix return.
///
/// Branch results merge in (t, action) order, so output is identical
/// for serial and parallel execution.
pub fn dense_rollout(
    env: &Environment,
    scenario: &Scenario,
    policy: &dyn Policy,
    config: &RolloutConfig,
    perception: &PerceptionParams,
    seed: u64,
) -> Result<DenseTrajectory, DynamicsError> {
    let trace = run_episode_traced(env, scenario, policy, config, perception, seed)?;
    let k = config.space.k;
    let n_steps = trace.trajectory.steps.len();
    let mut q_targets = vec![vec![0.0; k]; n_steps];
    let mut mask = vec![vec![false; k]; n_steps];

    // on-policy targets from the base trajectory's own rewards; the
    // absorbing-goal tail applies when the base episode succeeded
    let mut suffix = if trace.trajectory.success && config.gamma < 1.0 {
        trace
            .trajectory
            .steps
            .last()
            .map_or(0.0, |s| s.reward / (1.0 - config.gamma))
    } else {
        0.0
    };
    let base_terminated = trace.trajectory.terminal != EpisodeEnd::MaxSteps;
    for t in (0..n_steps).rev() {
        suffix = trace.trajectory.steps[t].reward + config.gamma * suffix;
        let a_t = trace.trajectory.steps[t].action;
        q_targets[t][a_t] = suffix;
        mask[t][a_t] = base_terminated || n_steps - t >= config.min_target_suffix;
    }

    let tasks: Vec<(usize, usize)> = trace
        .forks
        .iter()
        .filter(|f| config.branch_all_states || f.t == 0)
        .flat_map(|f| (0..k).filter(|a| *a != f.action).map(|a| (f.t, a)))
        .collect();
    let results: Vec<(usize, usize, BranchResult)> = tasks
        .par_iter()
        .map(|(t, a)| {
            let res = run_branch(
                env,
                scenario,
                policy,
                config,
                perception,
                &trace.forks[*t],
                *a,
                trace.d_init,
                seed,
            )?;
            Ok((*t, *a, res))
        })
        .collect::<Result<_, DynamicsError>>()?;
    for (t, a, res) in results {
        q_targets[t][a] = episode_return(&res.rewards, config.gamma, res.success);
        mask[t][a] = res.terminated || res.rewards.len() >= config.min_target_suffix;
    }
    Ok(DenseTrajectory {
        base: trace.trajectory,
        q_targets,
        mask,
    })
}

#[derive(Serialize, Deserialize)]
struct TrajHeader {
    format: String,
    scenario: Scenario,
    terminal: EpisodeEnd,
    success: bool,
    final_pose: Pose,
    step_count: usize,
}

#[derive(Serialize, Deserialize)]
struct TrajRecord {
    t: usize,
    pose: Pose,
    action: usize,
    reward: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    q_targets: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<Vec<bool>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    observation: Option<ObservationStack>,
}

/// Write a dense trajectory as newline-delimited JSON: a versioned
/// header record, then one record per step. Observations are elided
/// unless `include_observations`.
pub fn write_dense_trajectory<W: Write>(
    w: &mut W,
    traj: &DenseTrajectory,
    include_observations: bool,
) -> std::io::Result<()> {
    let header = TrajHeader {
        format: TRAJ_FORMAT.to_string(),
        scenario: traj.base.scenario.clone(),
        terminal: traj.base.terminal,
        success: traj.base.success,
        final_pose: traj.base.final_pose,
        step_count: traj.base.steps.len(),
    };
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for (t, step) in traj.base.steps.iter().enumerate() {
        let rec = TrajRecord {
            t,
            pose: step.pose,
            action: step.action,
            reward: step.reward,
            q_targets: Some(traj.q_targets[t].clone()),
            mask: Some(traj.mask[t].clone()),
            observation: include_observations.then(|| step.observation.clone()),
        };
        writeln!(w, "{}", serde_json::to_string(&rec)?)?;
    }
    Ok(())
}

/// Read back a dense trajectory log. Elided observations come back as
/// empty grids.
pub fn read_dense_trajectory<R: BufRead>(r: &mut R) -> Result<DenseTrajectory, String> {
    let mut lines = r.lines();
    let header_line = lines
        .next()
        .ok_or("empty trajectory log")?
        .map_err(|e| e.to_string())?;
    let header: TrajHeader = serde_json::from_str(&header_line).map_err(|e| e.to_string())?;
    if header.format != TRAJ_FORMAT {
        return Err(format!("unknown trajectory format {:?}", header.format));
    }
    let mut steps = Vec::new();
    let mut q_targets = Vec::new();
    let mut mask = Vec::new();
    for line in lines {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrajRecord = serde_json::from_str(&line).map_err(|e| e.to_string())?;
        steps.push(TrajStep {
            pose: rec.pose,
            observation: rec
                .observation
                .unwrap_or_else(|| crate::perception::ObservationStack {
                    phi_c_t: crate::perception::GridMap::zeros(0),
                    phi_c_prev: crate::perception::GridMap::zeros(0),
                    phi_s_t: crate::perception::GridMap::zeros(0),
                    phi_s_prev: crate::perception::GridMap::zeros(0),
                    psi_u: crate::perception::GridMap::zeros(0),
                    psi_v: crate::perception::GridMap::zeros(0),
                }),
            action: rec.action,
            reward: rec.reward,
        });
        q_targets.push(rec.q_targets.unwrap_or_default());
        mask.push(rec.mask.unwrap_or_default());
    }
    if steps.len() != header.step_count {
        return Err(format!(
            "log declares {} steps, found {}",
            header.step_count,
            steps.len()
        ));
    }
    Ok(DenseTrajectory {
        base: Trajectory {
            scenario: header.scenario,
            steps,
            final_pose: header.final_pose,
            terminal: header.terminal,
            success: header.success,
        },
        q_targets,
        mask,
    })
}
