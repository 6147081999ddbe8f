//! Scenario-suite evaluation, policy comparison tables, and SVG
//! trajectory rendering, plus the deterministic builders for the
//! shipped suites (seen / unseen / occlusion-heavy / open-field /
//! obstacle-between).

use crate::dynamics::DynamicsError;
use crate::geom::{wrap_angle, Vec2};
use crate::qpolicy::Policy;
use crate::rollouts::{run_episode, EpisodeEnd, RolloutConfig, Trajectory};
use crate::worldgen::{
    randomize_perception, sample_scenario, Environment, GoalMode, GoalSpec, PerceptionJitter,
    PerceptionParams, Pose, SamplerConfig, Scenario, Split, WorldError,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

pub const SUITE_FORMAT: &str = "divis-suite/1";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no suites given")]
    NoSuites,
    #[error("suite references unknown environment {0}")]
    UnknownEnv(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad suite file: {0}")]
    BadSuite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteTag {
    Standard,
    OcclusionHeavy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSuite {
    pub name: String,
    pub split: Split,
    pub tag: SuiteTag,
    pub scenarios: Vec<Scenario>,
}

#[derive(Serialize, Deserialize)]
struct SuiteFile {
    format: String,
    #[serde(flatten)]
    suite: EvalSuite,
}

pub fn suite_to_json(suite: &EvalSuite) -> String {
    serde_json::to_string_pretty(&SuiteFile {
        format: SUITE_FORMAT.to_string(),
        suite: suite.clone(),
    })
    .unwrap()
}

pub fn suite_from_json(s: &str) -> Result<EvalSuite, EvalError> {
    let file: SuiteFile = serde_json::from_str(s).map_err(|e| EvalError::BadSuite(e.to_string()))?;
    if file.format != SUITE_FORMAT {
        return Err(EvalError::BadSuite(format!(
            "unknown format {:?}",
            file.format
        )));
    }
    Ok(file.suite)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub env_id: String,
    pub scenario_seed: u64,
    pub trial: usize,
    pub success: bool,
    pub collision: bool,
    pub steps: usize,
    pub end: EpisodeEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent of trials ending in success.
    pub success_rate: f64,
    /// Percent of trials ending in collision.
    pub collision_rate: f64,
    pub mean_episode_len: f64,
    pub outcomes: Vec<Outcome>,
}

impl Metrics {
    fn from_outcomes(outcomes: Vec<Outcome>) -> Metrics {
        let n = outcomes.len().max(1) as f64;
        let successes = outcomes.iter().filter(|o| o.success).count() as f64;
        let collisions = outcomes.iter().filter(|o| o.collision).count() as f64;
        let steps: usize = outcomes.iter().map(|o| o.steps).sum();
        Metrics {
            success_rate: 100.0 * successes / n,
            collision_rate: 100.0 * collisions / n,
            mean_episode_len: steps as f64 / n,
            outcomes,
        }
    }

    /// Weighted merge of per-suite metrics (trial counts as weights).
    pub fn merge(parts: &[&Metrics]) -> Metrics {
        let outcomes = parts
            .iter()
            .flat_map(|m| m.outcomes.iter().cloned())
            .collect();
        Metrics::from_outcomes(outcomes)
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub rollout: RolloutConfig,
    pub perception_base: PerceptionParams,
    pub perception_jitter: PerceptionJitter,
    pub trials_per_scenario: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            rollout: RolloutConfig::default(),
            perception_base: PerceptionParams::default(),
            perception_jitter: PerceptionJitter::default(),
            trials_per_scenario: 1,
        }
    }
}

fn mix(parts: &[u64]) -> u64 {
    fn splitmix64(mut x: u64) -> u64 {
        x = x.wrapping_add(0x9e3779b97f4a7c15);
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
        x ^ (x >> 31)
    }
    let mut acc = 0x13198a2e03707344u64;
    for (i, p) in parts.iter().enumerate() {
        acc = splitmix64(acc ^ p.rotate_left(13 * i as u32 + 5));
    }
    acc
}

fn env_by_id<'a>(envs: &'a [Environment], id: &str) -> Result<&'a Environment, EvalError> {
    envs.iter()
        .find(|e| e.id == id)
        .ok_or_else(|| EvalError::UnknownEnv(id.to_string()))
}

/// Evaluate a policy over a suite: each scenario runs
/// `trials_per_scenario` times with fresh randomized perception per
/// trial. All seeds derive from the scenario's own seed, so results
/// are independent of scenario order and of parallelism.
pub fn evaluate(
    policy: &dyn Policy,
    envs: &[Environment],
    suite: &EvalSuite,
    cfg: &EvalConfig,
) -> Result<Metrics, EvalError> {
    for s in &suite.scenarios {
        env_by_id(envs, &s.env_id)?;
    }
    let tasks: Vec<(&Scenario, usize)> = suite
        .scenarios
        .iter()
        .flat_map(|s| (0..cfg.trials_per_scenario).map(move |t| (s, t)))
        .collect();
    let outcomes: Vec<Outcome> = tasks
        .par_iter()
        .map(|(scenario, trial)| {
            let env = env_by_id(envs, &scenario.env_id)?;
            let perception = randomize_perception(
                &cfg.perception_base,
                mix(&[scenario.seed, *trial as u64, 0x9e7c]),
                &cfg.perception_jitter,
            );
            let traj = run_episode(
                env,
                scenario,
                policy,
                &cfg.rollout,
                &perception,
                mix(&[scenario.seed, *trial as u64, 0xe7]),
            )?;
            Ok(Outcome {
                env_id: scenario.env_id.clone(),
                scenario_seed: scenario.seed,
                trial: *trial,
                success: traj.success,
                collision: traj.terminal == EpisodeEnd::Collision,
                steps: traj.steps.len(),
                end: traj.terminal,
            })
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(Metrics::from_outcomes(outcomes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub policies: Vec<String>,
    pub suites: Vec<String>,
    /// success_rates[policy][suite], percent.
    pub success_rates: Vec<Vec<f64>>,
    /// collision_rates[policy][suite], percent.
    pub collision_rates: Vec<Vec<f64>>,
}

impl Comparison {
    /// Human-readable aligned table of success rates.
    pub fn to_text(&self) -> String {
        let name_w = self
            .policies
            .iter()
            .map(|p| p.len())
            .max()
            .unwrap_or(6)
            .max("policy".len());
        let col_w = self.suites.iter().map(|s| s.len().max(6)).collect::<Vec<_>>();
        let mut out = format!("{:name_w$}", "policy");
        for (s, w) in self.suites.iter().zip(&col_w) {
            out.push_str(&format!("  {s:>w$}"));
        }
        out.push('\n');
        for (p, rates) in self.policies.iter().zip(&self.success_rates) {
            out.push_str(&format!("{p:name_w$}"));
            for (r, w) in rates.iter().zip(&col_w) {
                out.push_str(&format!("  {:>w$.1}", r));
            }
            out.push('\n');
        }
        out
    }
}

/// Success-rate table over (policy, suite) pairs.
pub fn compare(
    policies: &[&dyn Policy],
    envs: &[Environment],
    suites: &[&EvalSuite],
    cfg: &EvalConfig,
) -> Result<Comparison, EvalError> {
    if suites.is_empty() {
        return Err(EvalError::NoSuites);
    }
    let mut success_rates = Vec::new();
    let mut collision_rates = Vec::new();
    for policy in policies {
        let mut srow = Vec::new();
        let mut crow = Vec::new();
        for suite in suites {
            let m = evaluate(*policy, envs, suite, cfg)?;
            srow.push(m.success_rate);
            crow.push(m.collision_rate);
        }
        success_rates.push(srow);
        collision_rates.push(crow);
    }
    Ok(Comparison {
        policies: policies.iter().map(|p| p.name()).collect(),
        suites: suites.iter().map(|s| s.name.clone()).collect(),
        success_rates,
        collision_rates,
    })
}

/// Render a top-view SVG: bounds, walls, obstacles, goals, the agent's
/// path as a polyline in world coordinates (start red, end blue, a
/// cross marker on collision).
pub fn render_trajectory(
    env: &Environment,
    traj: &Trajectory,
    out: &Path,
) -> Result<(), EvalError> {
    const SCALE: f64 = 60.0;
    let (w, h) = (env.bounds.width(), env.bounds.height());
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" \
         viewBox=\"0 0 {} {}\">\n",
        (w * SCALE).ceil(),
        (h * SCALE).ceil(),
        (w * SCALE).ceil(),
        (h * SCALE).ceil()
    ));
    // world coordinates inside this group; y flipped to point up
    svg.push_str(&format!(
        "<g transform=\"scale({SCALE},-{SCALE}) translate(0,-{h})\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\" \
         stroke=\"black\" stroke-width=\"0.03\"/>\n"
    ));
    for wall in &env.walls {
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" \
             stroke-width=\"0.03\"/>\n",
            wall.a.x, wall.a.y, wall.b.x, wall.b.y
        ));
    }
    for obstacle in &env.obstacles {
        match &obstacle.shape {
            crate::geom::Shape::Circle { center, radius } => {
                svg.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"#bbbbbb\" \
                     stroke=\"#555555\" stroke-width=\"0.02\"/>\n",
                    center.x, center.y, radius
                ));
            }
            crate::geom::Shape::Polygon { points } => {
                let pts: Vec<String> =
                    points.iter().map(|p| format!("{},{}", p.x, p.y)).collect();
                svg.push_str(&format!(
                    "<polygon points=\"{}\" fill=\"#bbbbbb\" stroke=\"#555555\" \
                     stroke-width=\"0.02\"/>\n",
                    pts.join(" ")
                ));
            }
        }
    }
    for g in &env.goal_objects {
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"gold\" stroke=\"#806000\" \
             stroke-width=\"0.02\"/>\n",
            g.position.x, g.position.y, g.radius
        ));
    }
    // path polyline: the logged poses, then the final pose
    let mut pts: Vec<(f64, f64)> = traj.steps.iter().map(|s| (s.pose.x, s.pose.y)).collect();
    pts.push((traj.final_pose.x, traj.final_pose.y));
    let joined: Vec<String> = pts.iter().map(|(x, y)| format!("{x},{y}")).collect();
    svg.push_str(&format!(
        "<polyline class=\"path\" points=\"{}\" fill=\"none\" stroke=\"#2060c0\" \
         stroke-width=\"0.04\"/>\n",
        joined.join(" ")
    ));
    let (sx, sy) = pts[0];
    let (ex, ey) = pts[pts.len() - 1];
    svg.push_str(&format!(
        "<circle class=\"start\" cx=\"{sx}\" cy=\"{sy}\" r=\"0.09\" fill=\"red\"/>\n"
    ));
    svg.push_str(&format!(
        "<circle class=\"end\" cx=\"{ex}\" cy=\"{ey}\" r=\"0.09\" fill=\"blue\"/>\n"
    ));
    if traj.terminal == EpisodeEnd::Collision {
        svg.push_str(&format!(
            "<g class=\"collision\" stroke=\"red\" stroke-width=\"0.04\">\
             <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>\
             <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/></g>\n",
            ex - 0.12,
            ey - 0.12,
            ex + 0.12,
            ey + 0.12,
            ex - 0.12,
            ey + 0.12,
            ex + 0.12,
            ey - 0.12
        ));
    }
    svg.push_str("</g>\n</svg>\n");
    let mut f = std::fs::File::create(out)?;
    f.write_all(svg.as_bytes())?;
    Ok(())
}

/// Goal position referenced by a scenario (first matching object).
pub fn goal_position(env: &Environment, goal: &GoalSpec) -> Option<Vec2> {
    goal.matching_indices(env)
        .first()
        .map(|i| env.goal_objects[*i].position)
}

// ---------------------------------------------------------------------------
// Suite builders
// ---------------------------------------------------------------------------

const SUITE_MIN_GOAL_DIST: f64 = 0.8;
const SUITE_MAX_GOAL_DIST: f64 = 5.0;
/// Grid resolution for shortest-path certification.
const CERT_CELL: f64 = 0.06;

/// Shortest collision-free path (agent radius clearance) from start to
/// within 0.25 m of the goal position, on a coarse grid; `None` when
/// unreachable.
fn shortest_path(
    env: &Environment,
    start: Vec2,
    goal_pos: Vec2,
    radius: f64,
    excl: crate::worldgen::GoalExclusion,
) -> Option<Vec<Vec2>> {
    let nx = (env.bounds.width() / CERT_CELL).ceil() as usize;
    let ny = (env.bounds.height() / CERT_CELL).ceil() as usize;
    let center = |i: usize, j: usize| {
        Vec2::new((i as f64 + 0.5) * CERT_CELL, (j as f64 + 0.5) * CERT_CELL)
    };
    let idx = |i: usize, j: usize| j * nx + i;
    let mut free = vec![false; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            let p = center(i, j);
            if env.bounds.contains(p) && env.nearest_obstacle_distance(p, excl) > radius {
                free[idx(i, j)] = true;
            }
        }
    }
    let cell_of = |p: Vec2| {
        (
            ((p.x / CERT_CELL) as usize).min(nx - 1),
            ((p.y / CERT_CELL) as usize).min(ny - 1),
        )
    };
    let (si, sj) = cell_of(start);
    if !free[idx(si, sj)] {
        return None;
    }
    // Dijkstra, 8-connected
    #[derive(PartialEq)]
    struct Node(f64, usize, usize);
    impl Eq for Node {}
    impl PartialOrd for Node {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Node {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            other.0.partial_cmp(&self.0).unwrap_or(std::cmp::Ordering::Equal)
        }
    }
    let mut dist = vec![f64::INFINITY; nx * ny];
    let mut prev = vec![usize::MAX; nx * ny];
    let mut heap = BinaryHeap::new();
    dist[idx(si, sj)] = 0.0;
    heap.push(Node(0.0, si, sj));
    let mut goal_cell = None;
    while let Some(Node(d, i, j)) = heap.pop() {
        if d > dist[idx(i, j)] {
            continue;
        }
        if center(i, j).distance(goal_pos) < 0.25 {
            goal_cell = Some((i, j));
            break;
        }
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if !(0..nx as i64).contains(&ni) || !(0..ny as i64).contains(&nj) {
                    continue;
                }
                let (ni, nj) = (ni as usize, nj as usize);
                if !free[idx(ni, nj)] {
                    continue;
                }
                let step = if di != 0 && dj != 0 {
                    std::f64::consts::SQRT_2 * CERT_CELL
                } else {
                    CERT_CELL
                };
                if d + step < dist[idx(ni, nj)] {
                    dist[idx(ni, nj)] = d + step;
                    prev[idx(ni, nj)] = idx(i, j);
                    heap.push(Node(d + step, ni, nj));
                }
            }
        }
    }
    let (gi, gj) = goal_cell?;
    let mut path = vec![center(gi, gj)];
    let mut cur = idx(gi, gj);
    while prev[cur] != usize::MAX {
        cur = prev[cur];
        path.push(center(cur % nx, cur / nx));
    }
    path.push(start);
    path.reverse();
    Some(path)
}

/// True when walking the path with heading along the direction of
/// motion loses sight of the goal (out of the view cone, or blocked)
/// at some waypoint.
fn path_breaks_view(env: &Environment, path: &[Vec2], goal: &GoalSpec, fov: f64) -> bool {
    let Some(goal_pos) = goal_position(env, goal) else {
        return false;
    };
    let goal_idx = goal.matching_indices(env)[0];
    for w in path.windows(2) {
        let heading = (w[1] - w[0]).angle();
        let bearing = wrap_angle((goal_pos - w[0]).angle() - heading);
        let in_fov = bearing.abs() <= fov / 2.0;
        let visible = env.goal_visible(w[0], goal_idx);
        if !(in_fov && visible) {
            return true;
        }
    }
    false
}

fn accept_distance(env: &Environment, s: &Scenario) -> bool {
    let Some(gp) = goal_position(env, &s.goal) else {
        return false;
    };
    let d = s.start_pose.position().distance(gp);
    (SUITE_MIN_GOAL_DIST..=SUITE_MAX_GOAL_DIST).contains(&d)
}

/// Standard suite over the given environments: `per_env` scenarios
/// each, goal-image mode, start-to-goal distance within suite bounds.
fn build_standard(
    name: &str,
    envs: &[Environment],
    split: Split,
    per_env: usize,
    salt: u64,
) -> EvalSuite {
    let mut scenarios = Vec::new();
    let sampler = SamplerConfig {
        split,
        max_goal_distance: Some(SUITE_MAX_GOAL_DIST),
        ..SamplerConfig::default()
    };
    for env in envs {
        let mut accepted = 0usize;
        let mut attempt = 0u64;
        while accepted < per_env && attempt < 10_000 {
            let seed = mix(&[salt, attempt, 0x5u64]);
            attempt += 1;
            let Ok(s) = sample_scenario(env, GoalMode::GoalImage, seed, &sampler) else {
                continue;
            };
            if !accept_distance(env, &s) {
                continue;
            }
            scenarios.push(s);
            accepted += 1;
        }
        assert_eq!(accepted, per_env, "could not fill suite for {}", env.id);
    }
    EvalSuite {
        name: name.to_string(),
        split,
        tag: SuiteTag::Standard,
        scenarios,
    }
}

/// 120 scenarios over the six seen environments.
pub fn build_seen_suite() -> EvalSuite {
    build_standard("seen", &crate::worldgen::fixtures::seen(), Split::Seen, 20, 0xa11ce)
}

/// 80 scenarios over the four unseen environments.
pub fn build_unseen_suite() -> EvalSuite {
    build_standard(
        "unseen",
        &crate::worldgen::fixtures::unseen(),
        Split::Unseen,
        20,
        0xb0b,
    )
}

/// 40 seen-environment scenarios certified occlusion-heavy: the goal
/// is visible at the start, but every waypoint walk of the shortest
/// collision-free path loses sight of it at some point.
pub fn build_occlusion_suite() -> EvalSuite {
    let envs = crate::worldgen::fixtures::seen();
    // environments with enough structure to hide a goal
    let pick = ["office", "lshape", "atrium", "lounge"];
    let sampler = SamplerConfig {
        split: Split::Seen,
        max_goal_distance: Some(SUITE_MAX_GOAL_DIST),
        ..SamplerConfig::default()
    };
    let grid = crate::perception::EgoGrid::default();
    let radius = crate::worldgen::DEFAULT_AGENT_RADIUS;
    let mut scenarios = Vec::new();
    let mut attempt = 0u64;
    while scenarios.len() < 40 && attempt < 40_000 {
        let env = envs
            .iter()
            .find(|e| e.id == pick[(attempt as usize) % pick.len()])
            .unwrap();
        let seed = mix(&[0x0cc1, attempt, 0x7u64]);
        attempt += 1;
        let Ok(s) = sample_scenario(env, GoalMode::GoalImage, seed, &sampler) else {
            continue;
        };
        if !accept_distance(env, &s) {
            continue;
        }
        let Some(gp) = goal_position(env, &s.goal) else {
            continue;
        };
        let excl = s.goal.exclusion();
        let Some(path) = shortest_path(env, s.start_pose.position(), gp, radius, excl) else {
            continue;
        };
        if !path_breaks_view(env, &path, &s.goal, grid.fov) {
            continue;
        }
        scenarios.push(s);
    }
    assert_eq!(scenarios.len(), 40, "could not certify 40 occlusion scenarios");
    EvalSuite {
        name: "occlusion".to_string(),
        split: Split::Seen,
        tag: SuiteTag::OcclusionHeavy,
        scenarios,
    }
}

/// Straight-corridor scenarios with nothing between start and goal:
/// the swept disc along the start-goal segment is collision-free and
/// the start faces the goal.
pub fn build_open_field_suite() -> EvalSuite {
    let env = crate::worldgen::fixtures::by_id("corridor_hall").unwrap();
    let radius = crate::worldgen::DEFAULT_AGENT_RADIUS;
    let mut scenarios = Vec::new();
    for i in 0..24usize {
        let toward_right = i % 2 == 0;
        let goal_obj = if toward_right {
            env.goal_by_instance("corridor_suitcase_0").unwrap()
        } else {
            env.goal_by_instance("corridor_ball_0").unwrap()
        };
        let x = 4.0 + (i / 2) as f64 * 0.45;
        let y = 1.5 + (i % 4) as f64 * 0.32;
        let start = Vec2::new(if toward_right { x } else { 12.0 - x }, y);
        let d = start.distance(goal_obj.position);
        assert!((SUITE_MIN_GOAL_DIST..=8.0).contains(&d));
        let heading = (goal_obj.position - start).angle();
        let goal = GoalSpec::GoalImage {
            instance_id: goal_obj.instance_id.clone(),
        };
        // certify clearance of the direct line, goal excluded
        let hit = env.sweep_disc(start, goal_obj.position, radius, goal.exclusion());
        assert!(
            hit.map_or(true, |t| t * d > d - 0.3),
            "open-field scenario {i} blocked"
        );
        scenarios.push(Scenario {
            env_id: env.id.clone(),
            start_pose: Pose::new(start.x, start.y, heading),
            goal,
            seed: mix(&[0x0f1e1d, i as u64]),
            split: Split::Seen,
        });
    }
    EvalSuite {
        name: "open_field".to_string(),
        split: Split::Seen,
        tag: SuiteTag::Standard,
        scenarios,
    }
}

/// Scenarios whose straight start-goal line is blocked by an obstacle
/// well before the goal, start facing the goal.
pub fn build_obstacle_between_suite() -> EvalSuite {
    let envs = crate::worldgen::fixtures::seen();
    let pick = ["studio", "lounge", "atrium"];
    let radius = crate::worldgen::DEFAULT_AGENT_RADIUS;
    let mut scenarios = Vec::new();
    let mut attempt = 0u64;
    while scenarios.len() < 30 && attempt < 40_000 {
        let env = envs
            .iter()
            .find(|e| e.id == pick[(attempt as usize) % pick.len()])
            .unwrap();
        let seed = mix(&[0x0b57, attempt, 0x3u64]);
        attempt += 1;
        // uniform candidate start via the scenario sampler's seed
        // stream, then re-aim at a goal whose line is blocked
        let sampler = SamplerConfig {
            split: Split::Seen,
            ..SamplerConfig::default()
        };
        let Ok(base) = sample_scenario(env, GoalMode::GoalImage, seed, &sampler) else {
            continue;
        };
        let start = base.start_pose.position();
        let mut chosen = None;
        for g in &env.goal_objects {
            let d = start.distance(g.position);
            if !(1.5..=SUITE_MAX_GOAL_DIST).contains(&d) {
                continue;
            }
            let goal = GoalSpec::GoalImage {
                instance_id: g.instance_id.clone(),
            };
            match env.sweep_disc(start, g.position, radius, goal.exclusion()) {
                // blocked well before the goal: greedy straight-line
                // driving cannot get close
                Some(t) if t * d < d - 0.6 => {
                    chosen = Some((g.position, goal));
                    break;
                }
                _ => {}
            }
        }
        let Some((gp, goal)) = chosen else { continue };
        let heading = (gp - start).angle();
        scenarios.push(Scenario {
            env_id: env.id.clone(),
            start_pose: Pose::new(start.x, start.y, heading),
            goal,
            seed: mix(&[0x0b57c, attempt]),
            split: Split::Seen,
        });
    }
    assert_eq!(scenarios.len(), 30, "could not build obstacle-between suite");
    EvalSuite {
        name: "obstacle_between".to_string(),
        split: Split::Seen,
        tag: SuiteTag::Standard,
        scenarios,
    }
}
