//! Environment definitions, scenario sampling and perception-noise
//! randomization. Environments are immutable after construction and
//! safe to share across workers; scenario sampling is a pure function
//! of `(env, seed)`.

use crate::geom::{ray_shape_hit, wrap_angle, ray_segment_hit, Segment, Shape, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub mod fixtures;

/// Default agent (vehicle) radius in meters, ~16 cm.
pub const DEFAULT_AGENT_RADIUS: f64 = 0.16;

/// Grid pitch used for free-space validation flood fill.
const VALIDATION_CELL: f64 = 0.05;

pub const ENV_FORMAT: &str = "divis-env/1";
pub const SCENARIO_FORMAT: &str = "divis-scn/1";

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("obstacle {index} extends outside bounds")]
    ObstacleOutsideBounds { index: usize },
    #[error("goal object '{instance_id}' extends outside bounds")]
    GoalOutsideBounds { instance_id: String },
    #[error("goal objects '{a}' and '{b}' overlap")]
    OverlappingGoals { a: String, b: String },
    #[error("goal object '{instance_id}' intersects an obstacle or wall")]
    GoalBlocked { instance_id: String },
    #[error("free space empty")]
    EmptyFreeSpace,
    #[error("free space disconnected")]
    DisconnectedFreeSpace,
    #[error("scenario sampling exhausted after {retries} retries")]
    SamplingExhausted { retries: usize },
    #[error("environment '{0}' has no goal objects")]
    NoGoals(String),
    #[error("unexpected file format '{found}', expected '{expected}'")]
    BadFormat { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn new(w: f64, h: f64) -> Self {
        Bounds {
            min: Vec2::ZERO,
            max: Vec2::new(w, h),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_strict(&self, p: Vec2, margin: f64) -> bool {
        p.x > self.min.x + margin
            && p.x < self.max.x - margin
            && p.y > self.min.y + margin
            && p.y < self.max.y - margin
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn edges(&self) -> [Segment; 4] {
        let (a, b) = (self.min, self.max);
        let c = Vec2::new(b.x, a.y);
        let d = Vec2::new(a.x, b.y);
        [
            Segment::new(a, c),
            Segment::new(c, b),
            Segment::new(b, d),
            Segment::new(d, a),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub shape: Shape,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalObject {
    pub position: Vec2,
    pub radius: f64,
    pub category: String,
    pub instance_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Environment {
    pub id: String,
    pub bounds: Bounds,
    pub walls: Vec<Segment>,
    pub obstacles: Vec<Obstacle>,
    pub goal_objects: Vec<GoalObject>,
    /// Bounds edges plus interior walls, cached for distance queries.
    #[serde(skip)]
    wall_index: Vec<Segment>,
}

/// Which goal discs to leave out of collision geometry. The scenario's
/// goal must be reachable to within the success distance, so it never
/// counts as an obstacle; every other goal object does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GoalExclusion<'a> {
    None,
    Instance(&'a str),
    Category(&'a str),
}

impl GoalExclusion<'_> {
    pub fn excludes(&self, g: &GoalObject) -> bool {
        match self {
            GoalExclusion::None => false,
            GoalExclusion::Instance(id) => g.instance_id == *id,
            GoalExclusion::Category(c) => g.category == *c,
        }
    }
}

impl Environment {
    fn rebuild_index(&mut self) {
        self.wall_index = self.bounds.edges().to_vec();
        self.wall_index.extend(self.walls.iter().copied());
    }

    pub fn all_walls(&self) -> &[Segment] {
        &self.wall_index
    }

    /// Euclidean distance from `point` to the nearest wall or obstacle
    /// boundary. Goal discs matching `excl` are skipped; the rest count
    /// as obstacles.
    pub fn nearest_obstacle_distance(&self, point: Vec2, excl: GoalExclusion) -> f64 {
        let mut best = f64::INFINITY;
        for w in &self.wall_index {
            best = best.min(w.distance_to_point(point));
        }
        for o in &self.obstacles {
            best = best.min(o.shape.distance_to_point(point));
        }
        for g in &self.goal_objects {
            if !excl.excludes(g) {
                let d = (point.distance(g.position) - g.radius).max(0.0);
                best = best.min(d);
            }
        }
        best
    }

    /// Closest point on any wall/obstacle boundary (same exclusion rule
    /// as `nearest_obstacle_distance`).
    pub fn nearest_boundary_point(&self, point: Vec2, excl: GoalExclusion) -> Vec2 {
        let mut best = point;
        let mut best_d = f64::INFINITY;
        let mut consider = |c: Vec2| {
            let d = c.distance(point);
            if d < best_d {
                best_d = d;
                best = c;
            }
        };
        for w in &self.wall_index {
            consider(w.closest_point(point));
        }
        for o in &self.obstacles {
            consider(o.shape.closest_boundary_point(point));
        }
        for g in &self.goal_objects {
            if !excl.excludes(g) {
                let d = point - g.position;
                let c = if d.length() == 0.0 {
                    g.position + Vec2::new(g.radius, 0.0)
                } else {
                    g.position + d.normalized() * g.radius
                };
                consider(c);
            }
        }
        best
    }

    /// First-hit distance of a ray against walls, obstacles and
    /// non-excluded goal discs. `None` when nothing is hit within
    /// `max_t`.
    pub fn raycast(&self, origin: Vec2, dir: Vec2, max_t: f64, excl: GoalExclusion) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut consider = |t: f64| {
            if t <= max_t {
                best = Some(best.map_or(t, |b: f64| b.min(t)));
            }
        };
        for w in &self.wall_index {
            if let Some(t) = ray_segment_hit(origin, dir, w) {
                consider(t);
            }
        }
        for o in &self.obstacles {
            if let Some(t) = ray_shape_hit(origin, dir, &o.shape) {
                consider(t);
            }
        }
        for g in &self.goal_objects {
            if !excl.excludes(g) {
                if let Some(t) = crate::geom::ray_circle_hit(origin, dir, g.position, g.radius) {
                    consider(t);
                }
            }
        }
        best
    }

    /// Earliest sweep parameter at which a disc of radius `r` moving
    /// from `p0` to `p1` touches collision geometry.
    pub fn sweep_disc(&self, p0: Vec2, p1: Vec2, r: f64, excl: GoalExclusion) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut consider = |t: f64| {
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        };
        for w in &self.wall_index {
            if let Some(t) = crate::geom::sweep_disc_segment(p0, p1, r, w) {
                consider(t);
            }
        }
        for o in &self.obstacles {
            if let Some(t) = crate::geom::sweep_disc_shape(p0, p1, r, &o.shape) {
                consider(t);
            }
        }
        for g in &self.goal_objects {
            if !excl.excludes(g) {
                if let Some(t) = crate::geom::sweep_disc_circle(p0, p1, r, g.position, g.radius) {
                    consider(t);
                }
            }
        }
        best
    }

    /// Line of sight from `from` to the goal object's disc, blocked by
    /// walls, obstacles and other goal discs.
    pub fn goal_visible(&self, from: Vec2, goal_idx: usize) -> bool {
        let g = &self.goal_objects[goal_idx];
        let to = g.position - from;
        let dist = to.length();
        if dist <= g.radius {
            return true;
        }
        let dir = to.normalized();
        let excl = GoalExclusion::Instance(&g.instance_id);
        match self.raycast(from, dir, dist - g.radius, excl) {
            Some(_) => false,
            None => true,
        }
    }

    pub fn goal_by_instance(&self, instance_id: &str) -> Option<&GoalObject> {
        self.goal_objects.iter().find(|g| g.instance_id == instance_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Seen,
    Unseen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum GoalSpec {
    GoalImage { instance_id: String },
    Category { category: String },
}

impl GoalSpec {
    pub fn exclusion(&self) -> GoalExclusion<'_> {
        match self {
            GoalSpec::GoalImage { instance_id } => GoalExclusion::Instance(instance_id),
            GoalSpec::Category { category } => GoalExclusion::Category(category),
        }
    }

    /// Indices of goal objects in `env` that satisfy this goal.
    pub fn matching_indices(&self, env: &Environment) -> Vec<usize> {
        env.goal_objects
            .iter()
            .enumerate()
            .filter(|(_, g)| self.exclusion().excludes(g))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose { x, y, heading }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub env_id: String,
    pub start_pose: Pose,
    pub goal: GoalSpec,
    pub seed: u64,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMode {
    GoalImage,
    Category,
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub agent_radius: f64,
    pub fov: f64,
    pub max_retries: usize,
    /// Reject starts farther than this from the chosen goal, when set.
    pub max_goal_distance: Option<f64>,
    pub split: Split,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            agent_radius: DEFAULT_AGENT_RADIUS,
            fov: 120.0f64.to_radians(),
            max_retries: 1000,
            max_goal_distance: None,
            split: Split::Seen,
        }
    }
}

/// Validate a raw environment description and build an `Environment`.
pub fn build_environment(
    id: &str,
    bounds: Bounds,
    walls: Vec<Segment>,
    obstacles: Vec<Obstacle>,
    goal_objects: Vec<GoalObject>,
) -> Result<Environment, WorldError> {
    for (index, o) in obstacles.iter().enumerate() {
        let inside = match &o.shape {
            Shape::Circle { center, radius } => {
                bounds.contains_strict(Vec2::new(center.x - radius, center.y - radius), 0.0)
                    && bounds.contains_strict(Vec2::new(center.x + radius, center.y + radius), 0.0)
            }
            Shape::Polygon { points } => points.iter().all(|p| bounds.contains_strict(*p, 0.0)),
        };
        if !inside {
            return Err(WorldError::ObstacleOutsideBounds { index });
        }
    }
    for g in &goal_objects {
        if !bounds.contains_strict(
            Vec2::new(g.position.x - g.radius, g.position.y - g.radius),
            0.0,
        ) || !bounds.contains_strict(
            Vec2::new(g.position.x + g.radius, g.position.y + g.radius),
            0.0,
        ) {
            return Err(WorldError::GoalOutsideBounds {
                instance_id: g.instance_id.clone(),
            });
        }
    }
    for i in 0..goal_objects.len() {
        for j in (i + 1)..goal_objects.len() {
            let (a, b) = (&goal_objects[i], &goal_objects[j]);
            if a.position.distance(b.position) <= a.radius + b.radius {
                return Err(WorldError::OverlappingGoals {
                    a: a.instance_id.clone(),
                    b: b.instance_id.clone(),
                });
            }
        }
    }

    let mut env = Environment {
        id: id.to_string(),
        bounds,
        walls,
        obstacles,
        goal_objects,
        wall_index: Vec::new(),
    };
    env.rebuild_index();

    for g in &env.goal_objects {
        let mut d = f64::INFINITY;
        for w in &env.wall_index {
            d = d.min(w.distance_to_point(g.position));
        }
        for o in &env.obstacles {
            d = d.min(o.shape.distance_to_point(g.position));
        }
        if d <= g.radius {
            return Err(WorldError::GoalBlocked {
                instance_id: g.instance_id.clone(),
            });
        }
    }

    check_free_space(&env)?;
    Ok(env)
}

/// Flood fill over a fine grid: free space (clearance > agent radius,
/// with every goal disc treated as an obstacle) must be non-empty and
/// connected.
fn check_free_space(env: &Environment) -> Result<(), WorldError> {
    let nx = (env.bounds.width() / VALIDATION_CELL).round() as usize;
    let ny = (env.bounds.height() / VALIDATION_CELL).round() as usize;
    let mut free = vec![false; nx * ny];
    let mut first = None;
    let mut free_count = 0usize;
    for iy in 0..ny {
        for ix in 0..nx {
            let p = Vec2::new(
                env.bounds.min.x + (ix as f64 + 0.5) * VALIDATION_CELL,
                env.bounds.min.y + (iy as f64 + 0.5) * VALIDATION_CELL,
            );
            if env.nearest_obstacle_distance(p, GoalExclusion::None) > DEFAULT_AGENT_RADIUS {
                free[iy * nx + ix] = true;
                free_count += 1;
                if first.is_none() {
                    first = Some((ix, iy));
                }
            }
        }
    }
    let Some(start) = first else {
        return Err(WorldError::EmptyFreeSpace);
    };
    let mut seen = vec![false; nx * ny];
    let mut stack = vec![start];
    seen[start.1 * nx + start.0] = true;
    let mut reached = 0usize;
    while let Some((ix, iy)) = stack.pop() {
        reached += 1;
        let mut push = |jx: usize, jy: usize, stack: &mut Vec<(usize, usize)>| {
            let idx = jy * nx + jx;
            if free[idx] && !seen[idx] {
                seen[idx] = true;
                stack.push((jx, jy));
            }
        };
        if ix > 0 {
            push(ix - 1, iy, &mut stack);
        }
        if ix + 1 < nx {
            push(ix + 1, iy, &mut stack);
        }
        if iy > 0 {
            push(ix, iy - 1, &mut stack);
        }
        if iy + 1 < ny {
            push(ix, iy + 1, &mut stack);
        }
    }
    if reached != free_count {
        return Err(WorldError::DisconnectedFreeSpace);
    }
    Ok(())
}

/// Sample an evaluation/training scenario: start pose uniform over free
/// space with clearance above the agent radius, heading uniform and
/// re-oriented so a goal object lies in the field of view.
pub fn sample_scenario(
    env: &Environment,
    mode: GoalMode,
    seed: u64,
    cfg: &SamplerConfig,
) -> Result<Scenario, WorldError> {
    if env.goal_objects.is_empty() {
        return Err(WorldError::NoGoals(env.id.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.max_retries {
        let p = Vec2::new(
            rng.gen_range(env.bounds.min.x..env.bounds.max.x),
            rng.gen_range(env.bounds.min.y..env.bounds.max.y),
        );
        if env.nearest_obstacle_distance(p, GoalExclusion::None) <= cfg.agent_radius {
            continue;
        }
        let mut heading = rng.gen_range(0.0..std::f64::consts::TAU);
        let visible: Vec<usize> = (0..env.goal_objects.len())
            .filter(|&i| {
                if let Some(maxd) = cfg.max_goal_distance {
                    if p.distance(env.goal_objects[i].position) > maxd {
                        return false;
                    }
                }
                env.goal_visible(p, i)
            })
            .collect();
        if visible.is_empty() {
            continue;
        }
        let in_fov: Vec<usize> = visible
            .iter()
            .copied()
            .filter(|&i| {
                let bearing = (env.goal_objects[i].position - p).angle();
                wrap_angle(bearing - heading).abs() <= cfg.fov / 2.0
            })
            .collect();
        let goal_idx = if !in_fov.is_empty() {
            in_fov[rng.gen_range(0..in_fov.len())]
        } else {
            // Re-orient toward a visible goal, with jitter inside the fov.
            let gi = visible[rng.gen_range(0..visible.len())];
            let bearing = (env.goal_objects[gi].position - p).angle();
            let half = cfg.fov / 2.0 * 0.9;
            heading = wrap_angle(bearing + rng.gen_range(-half..half));
            gi
        };
        let g = &env.goal_objects[goal_idx];
        let goal = match mode {
            GoalMode::GoalImage => GoalSpec::GoalImage {
                instance_id: g.instance_id.clone(),
            },
            GoalMode::Category => GoalSpec::Category {
                category: g.category.clone(),
            },
        };
        return Ok(Scenario {
            env_id: env.id.clone(),
            start_pose: Pose::new(p.x, p.y, heading),
            goal,
            seed,
            split: cfg.split,
        });
    }
    Err(WorldError::SamplingExhausted {
        retries: cfg.max_retries,
    })
}

/// Parameters of the synthetic perception noise; stands in for the
/// rendering randomization of a 3D simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionParams {
    pub semantic_noise_sd: f64,
    pub false_positive_rate: f64,
    pub blur_radius: f64,
    pub dropout_rate: f64,
    /// Per-step probability that the semantic detector misses every
    /// goal peak (whole-frame detection failure).
    #[serde(default)]
    pub miss_rate: f64,
    pub seed: u64,
}

impl Default for PerceptionParams {
    fn default() -> Self {
        PerceptionParams {
            semantic_noise_sd: 0.04,
            false_positive_rate: 0.05,
            blur_radius: 0.4,
            dropout_rate: 0.03,
            miss_rate: 0.25,
            seed: 0,
        }
    }
}

/// Half-width jitter ranges applied by `randomize_perception`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionJitter {
    pub semantic_noise_sd: f64,
    pub false_positive_rate: f64,
    pub blur_radius: f64,
    pub dropout_rate: f64,
    #[serde(default)]
    pub miss_rate: f64,
}

impl Default for PerceptionJitter {
    fn default() -> Self {
        PerceptionJitter {
            semantic_noise_sd: 0.03,
            false_positive_rate: 0.04,
            blur_radius: 0.3,
            dropout_rate: 0.02,
            miss_rate: 0.1,
        }
    }
}

/// Jitter perception parameters uniformly within `base ± jitter`,
/// clamped to valid ranges. Deterministic given `seed`.
pub fn randomize_perception(
    base: &PerceptionParams,
    seed: u64,
    jitter: &PerceptionJitter,
) -> PerceptionParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |center: f64, half: f64, lo: f64, hi: f64| -> f64 {
        if half == 0.0 {
            return center.clamp(lo, hi);
        }
        rng.gen_range(center - half..=center + half).clamp(lo, hi)
    };
    PerceptionParams {
        semantic_noise_sd: draw(base.semantic_noise_sd, jitter.semantic_noise_sd, 0.0, f64::MAX),
        false_positive_rate: draw(
            base.false_positive_rate,
            jitter.false_positive_rate,
            0.0,
            1.0,
        ),
        blur_radius: draw(base.blur_radius, jitter.blur_radius, 0.0, f64::MAX),
        dropout_rate: draw(base.dropout_rate, jitter.dropout_rate, 0.0, 1.0),
        miss_rate: draw(base.miss_rate, jitter.miss_rate, 0.0, 1.0),
        seed,
    }
}

/// Allocate a perception seed for the given split. Seen and unseen
/// splits draw from disjoint ranges.
pub fn perception_seed(split: Split, index: u64) -> u64 {
    match split {
        Split::Seen => index & (u64::MAX >> 1),
        Split::Unseen => (1 << 63) | index,
    }
}

#[derive(Serialize, Deserialize)]
struct EnvFile {
    format: String,
    #[serde(flatten)]
    env: Environment,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    format: String,
    #[serde(flatten)]
    scenario: Scenario,
}

pub fn environment_to_json(env: &Environment) -> Result<String, WorldError> {
    Ok(serde_json::to_string_pretty(&EnvFile {
        format: ENV_FORMAT.to_string(),
        env: env.clone(),
    })?)
}

pub fn environment_from_json(text: &str) -> Result<Environment, WorldError> {
    let file: EnvFile = serde_json::from_str(text)?;
    if file.format != ENV_FORMAT {
        return Err(WorldError::BadFormat {
            expected: ENV_FORMAT.to_string(),
            found: file.format,
        });
    }
    let mut env = file.env;
    env.rebuild_index();
    Ok(env)
}

pub fn save_environment(env: &Environment, path: &Path) -> Result<(), WorldError> {
    std::fs::write(path, environment_to_json(env)?)?;
    Ok(())
}

pub fn load_environment(path: &Path) -> Result<Environment, WorldError> {
    environment_from_json(&std::fs::read_to_string(path)?)
}

pub fn scenario_to_json(s: &Scenario) -> Result<String, WorldError> {
    Ok(serde_json::to_string_pretty(&ScenarioFile {
        format: SCENARIO_FORMAT.to_string(),
        scenario: s.clone(),
    })?)
}

pub fn scenario_from_json(text: &str) -> Result<Scenario, WorldError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    if file.format != SCENARIO_FORMAT {
        return Err(WorldError::BadFormat {
            expected: SCENARIO_FORMAT.to_string(),
            found: file.format,
        });
    }
    Ok(file.scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_room_with_goal() -> Environment {
        build_environment(
            "room",
            Bounds::new(10.0, 10.0),
            Vec::new(),
            Vec::new(),
            vec![GoalObject {
                position: Vec2::new(8.0, 8.0),
                radius: 0.15,
                category: "ball".into(),
                instance_id: "ball_0".into(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn empty_room_builds() {
        let env = empty_room_with_goal();
        assert_eq!(env.goal_objects.len(), 1);
        // free space = bounds minus the goal disc: center clearance is to a wall
        let d = env.nearest_obstacle_distance(Vec2::new(2.0, 2.0), GoalExclusion::None);
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bisecting_wall_rejected() {
        let err = build_environment(
            "split",
            Bounds::new(10.0, 10.0),
            vec![Segment::new(Vec2::new(5.0, 0.0), Vec2::new(5.0, 10.0))],
            Vec::new(),
            vec![GoalObject {
                position: Vec2::new(8.0, 8.0),
                radius: 0.15,
                category: "ball".into(),
                instance_id: "ball_0".into(),
            }],
        )
        .unwrap_err();
        assert!(matches!(err, WorldError::DisconnectedFreeSpace));
    }

    #[test]
    fn overlapping_goals_rejected() {
        let mk = |id: &str, x: f64| GoalObject {
            position: Vec2::new(x, 5.0),
            radius: 0.2,
            category: "ball".into(),
            instance_id: id.into(),
        };
        let err = build_environment(
            "dup",
            Bounds::new(10.0, 10.0),
            Vec::new(),
            Vec::new(),
            vec![mk("a", 5.0), mk("b", 5.3)],
        )
        .unwrap_err();
        assert!(matches!(err, WorldError::OverlappingGoals { .. }));
    }

    #[test]
    fn packed_room_rejected_as_empty() {
        let err = build_environment(
            "full",
            Bounds::new(1.0, 1.0),
            Vec::new(),
            vec![Obstacle {
                shape: Shape::Circle {
                    center: Vec2::new(0.5, 0.5),
                    radius: 0.49,
                },
                category: "block".into(),
            }],
            Vec::new(),
        )
        .unwrap_err();
        assert!(matches!(err, WorldError::EmptyFreeSpace));
    }

    #[test]
    fn scenario_sampling_deterministic() {
        let env = empty_room_with_goal();
        let cfg = SamplerConfig::default();
        let a = sample_scenario(&env, GoalMode::GoalImage, 7, &cfg).unwrap();
        let b = sample_scenario(&env, GoalMode::GoalImage, 7, &cfg).unwrap();
        assert_eq!(a, b);
        match &a.goal {
            GoalSpec::GoalImage { instance_id } => assert_eq!(instance_id, "ball_0"),
            _ => panic!("wrong mode"),
        }
    }

    #[test]
    fn scenario_goal_in_fov() {
        let env = empty_room_with_goal();
        let cfg = SamplerConfig::default();
        for seed in 0..200u64 {
            let s = sample_scenario(&env, GoalMode::Category, seed, &cfg).unwrap();
            let p = s.start_pose.position();
            let bearing = (env.goal_objects[0].position - p).angle();
            assert!(
                wrap_angle(bearing - s.start_pose.heading).abs() <= cfg.fov / 2.0 + 1e-9,
                "goal out of fov for seed {seed}"
            );
            assert!(
                env.nearest_obstacle_distance(p, GoalExclusion::None) > cfg.agent_radius
            );
        }
    }

    #[test]
    fn perception_randomization() {
        let base = PerceptionParams::default();
        let zero = PerceptionJitter {
            semantic_noise_sd: 0.0,
            false_positive_rate: 0.0,
            blur_radius: 0.0,
            dropout_rate: 0.0,
            miss_rate: 0.0,
        };
        let out = randomize_perception(&base, 11, &zero);
        assert_eq!(out.semantic_noise_sd, base.semantic_noise_sd);
        assert_eq!(out.dropout_rate, base.dropout_rate);

        let jit = PerceptionJitter::default();
        let a = randomize_perception(&base, 5, &jit);
        let b = randomize_perception(&base, 5, &jit);
        assert_eq!(a, b);
        for seed in 0..1000u64 {
            let p = randomize_perception(&base, seed, &jit);
            assert!(p.semantic_noise_sd >= base.semantic_noise_sd - jit.semantic_noise_sd - 1e-12);
            assert!(p.semantic_noise_sd <= base.semantic_noise_sd + jit.semantic_noise_sd + 1e-12);
            assert!((0.0..=1.0).contains(&p.false_positive_rate));
            assert!((0.0..=1.0).contains(&p.dropout_rate));
            assert!(p.blur_radius >= 0.0);
        }
    }

    #[test]
    fn perception_seed_ranges_disjoint() {
        for i in 0..1000u64 {
            let s = perception_seed(Split::Seen, i);
            let u = perception_seed(Split::Unseen, i);
            assert_eq!(s >> 63, 0);
            assert_eq!(u >> 63, 1);
        }
    }

    #[test]
    fn environment_roundtrip_bit_exact() {
        let env = empty_room_with_goal();
        let json = environment_to_json(&env).unwrap();
        let back = environment_from_json(&json).unwrap();
        assert_eq!(environment_to_json(&back).unwrap(), json);
    }
}
