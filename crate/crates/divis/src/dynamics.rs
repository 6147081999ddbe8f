//! Agent kinematics, the K-way action space, per-step rewards and
//! termination. All functions here are pure over immutable environment
//! data.

use crate::geom::{wrap_angle, Vec2};
use crate::worldgen::{Environment, GoalSpec, Pose};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid action index {index} for {k} actions")]
    InvalidAction { index: usize, k: usize },
    #[error("no goal object in environment matches the goal spec")]
    NoMatchingGoal,
}

/// Discrete action: a rotation bin applied before a fixed-velocity
/// forward translation, or STOP. Rotation sign is positive clockwise
/// (rightward turn), matching left-to-right observation columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Action {
    Rotate(f64),
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub k: usize,
    /// Full rotation span in radians, symmetric about straight ahead.
    pub rotation_range: f64,
    /// Distance traversed per non-STOP step, meters.
    pub velocity: f64,
}

impl Default for ActionSpace {
    fn default() -> Self {
        ActionSpace {
            k: 9,
            rotation_range: std::f64::consts::PI,
            velocity: 0.25,
        }
    }
}

impl ActionSpace {
    /// Rotation of bin `i` (0..k-1 are rotation bins left to right,
    /// k-1 is STOP).
    pub fn action(&self, index: usize) -> Option<Action> {
        if index + 1 == self.k {
            Some(Action::Stop)
        } else if index < self.k {
            Some(Action::Rotate(self.bin_angle(index)))
        } else {
            None
        }
    }

    pub fn num_bins(&self) -> usize {
        self.k - 1
    }

    pub fn bin_angle(&self, bin: usize) -> f64 {
        let n = self.num_bins() as f64;
        -self.rotation_range / 2.0 + (bin as f64 + 0.5) * self.rotation_range / n
    }

    /// Rotation bin whose center is nearest `angle`; ties go to the
    /// lower index.
    pub fn nearest_bin(&self, angle: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..self.num_bins() {
            let d = (self.bin_angle(i) - angle).abs();
            if d < best_d - 1e-12 {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// The straight-ahead bin (nearest to zero rotation).
    pub fn center_bin(&self) -> usize {
        self.nearest_bin(0.0)
    }

    pub fn stop_index(&self) -> usize {
        self.k - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Agent (vehicle) radius `r`, meters.
    pub agent_radius: f64,
    /// Clearance threshold `tau_d` above which the collision reward
    /// saturates at 1.
    pub clearance_threshold: f64,
    pub success_distance: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            agent_radius: crate::worldgen::DEFAULT_AGENT_RADIUS,
            clearance_threshold: 1.0,
            success_distance: 0.30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    None,
    Collision,
    Stopped,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub new_pose: Pose,
    pub reward: f64,
    /// `(R_c, R_g)`; `reward` is exactly their sum.
    pub reward_parts: (f64, f64),
    /// Distance to the nearest obstacle after the move.
    pub d_o: f64,
    /// Distance to the goal after the move.
    pub d_t: f64,
    pub terminal: Terminal,
    pub success: bool,
}

/// Collision-avoidance reward: `min(1, (d_o - r) / (tau_d - r))`,
/// clamped below at -1 so returns stay bounded on the terminal step.
pub fn collision_reward(d_o: f64, params: &RewardParams) -> f64 {
    let r = params.agent_radius;
    ((d_o - r) / (params.clearance_threshold - r)).min(1.0).max(-1.0)
}

/// Goal-progress reward: `max(0, 1 - min(d_t, d_init) / d_init)`.
pub fn progress_reward(d_t: f64, d_init: f64) -> f64 {
    (1.0 - d_t.min(d_init) / d_init).max(0.0)
}

/// Distance from `point` to the goal (nearest matching goal object
/// center).
pub fn goal_distance(env: &Environment, point: Vec2, goal: &GoalSpec) -> Result<f64, DynamicsError> {
    let mut best = f64::INFINITY;
    for g in &env.goal_objects {
        if goal.exclusion().excludes(g) {
            best = best.min(point.distance(g.position));
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(DynamicsError::NoMatchingGoal)
    }
}

/// Distance from `point` to the nearest obstacle boundary; the
/// scenario's goal object(s) are excluded from collision geometry.
pub fn nearest_obstacle_distance(env: &Environment, point: Vec2, goal: Option<&GoalSpec>) -> f64 {
    let excl = goal.map_or(crate::worldgen::GoalExclusion::None, |g| g.exclusion());
    env.nearest_obstacle_distance(point, excl)
}

/// Advance one step: rotate into the bin, then translate `velocity`
/// meters along the new heading with a continuous swept-disc collision
/// check. STOP leaves the pose unchanged and terminates.
pub fn step(
    env: &Environment,
    pose: Pose,
    action_index: usize,
    space: &ActionSpace,
    params: &RewardParams,
    goal: &GoalSpec,
    d_init: f64,
) -> Result<StepOutcome, DynamicsError> {
    let action = space
        .action(action_index)
        .ok_or(DynamicsError::InvalidAction {
            index: action_index,
            k: space.k,
        })?;
    let excl = goal.exclusion();

    let (new_pose, terminal) = match action {
        Action::Stop => (pose, Terminal::Stopped),
        Action::Rotate(delta) => {
            // positive rotation = clockwise = heading decreases
            let heading = wrap_angle(pose.heading - delta);
            let p0 = pose.position();
            let p1 = p0 + Vec2::from_angle(heading) * space.velocity;
            match env.sweep_disc(p0, p1, params.agent_radius, excl) {
                Some(t) => {
                    let mut pos = p0 + (p1 - p0) * t.clamp(0.0, 1.0);
                    // Nudge just past contact so the collision pose is
                    // strictly overlapping (d_o < r).
                    let d = env.nearest_obstacle_distance(pos, excl);
                    if d >= params.agent_radius {
                        let bp = env.nearest_boundary_point(pos, excl);
                        let toward = (bp - pos).normalized();
                        pos = pos + toward * (d - params.agent_radius + 1e-9);
                    }
                    (Pose::new(pos.x, pos.y, heading), Terminal::Collision)
                }
                None => (Pose::new(p1.x, p1.y, heading), Terminal::None),
            }
        }
    };

    let p = new_pose.position();
    let d_o = env.nearest_obstacle_distance(p, excl);
    let d_t = goal_distance(env, p, goal)?;
    let r_c = collision_reward(d_o, params);
    let r_g = progress_reward(d_t, d_init);
    Ok(StepOutcome {
        new_pose,
        reward: r_c + r_g,
        reward_parts: (r_c, r_g),
        d_o,
        d_t,
        terminal,
        success: d_t < params.success_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldgen::{build_environment, Bounds, GoalObject};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn room() -> Environment {
        build_environment(
            "room",
            Bounds::new(10.0, 10.0),
            Vec::new(),
            Vec::new(),
            vec![GoalObject {
                position: Vec2::new(9.0, 9.0),
                radius: 0.15,
                category: "ball".into(),
                instance_id: "ball_0".into(),
            }],
        )
        .unwrap()
    }

    fn goal() -> GoalSpec {
        GoalSpec::GoalImage {
            instance_id: "ball_0".into(),
        }
    }

    #[test]
    fn action_space_layout() {
        let s = ActionSpace::default();
        assert_eq!(s.k, 9);
        assert_eq!(s.num_bins(), 8);
        assert_eq!(s.action(8), Some(Action::Stop));
        // bin centers symmetric about zero
        for i in 0..s.num_bins() {
            let mirror = s.num_bins() - 1 - i;
            assert!((s.bin_angle(i) + s.bin_angle(mirror)).abs() < 1e-12);
        }
        // evenly spaced
        let step = s.rotation_range / s.num_bins() as f64;
        for i in 1..s.num_bins() {
            assert!((s.bin_angle(i) - s.bin_angle(i - 1) - step).abs() < 1e-12);
        }
        // tie between the two middle bins goes to the lower index
        assert_eq!(s.center_bin(), 3);
    }

    #[test]
    fn reward_analytic_values() {
        let p = RewardParams::default();
        assert_eq!(collision_reward(p.clearance_threshold, &p), 1.0);
        assert_eq!(collision_reward(p.agent_radius, &p), 0.0);
        let mid = RewardParams {
            agent_radius: 0.16,
            clearance_threshold: 1.0,
            success_distance: 0.3,
        };
        assert!((collision_reward(0.58, &mid) - 0.5).abs() < 1e-12);
        assert_eq!(progress_reward(0.0, 2.0), 1.0);
        assert_eq!(progress_reward(2.0, 2.0), 0.0);
        assert_eq!(progress_reward(4.0, 2.0), 0.0);
    }

    #[test]
    fn reward_monotonicity() {
        let p = RewardParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let a = rng.gen_range(0.0..3.0);
            let b = rng.gen_range(0.0..3.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            assert!(collision_reward(lo, &p) <= collision_reward(hi, &p));
            let d_init = rng.gen_range(0.5..5.0);
            assert!(progress_reward(hi, d_init) <= progress_reward(lo, d_init));
            assert!((0.0..=1.0).contains(&progress_reward(a, d_init)));
        }
    }

    #[test]
    fn stop_keeps_pose() {
        let env = room();
        let s = ActionSpace::default();
        let pose = Pose::new(2.0, 2.0, 0.3);
        let out = step(&env, pose, s.stop_index(), &s, &RewardParams::default(), &goal(), 5.0)
            .unwrap();
        assert_eq!(out.new_pose, pose);
        assert_eq!(out.terminal, Terminal::Stopped);
    }

    #[test]
    fn pure_translation_on_center_bin() {
        let env = room();
        // 3 rotation bins + STOP: bin 1 is exactly 0 rad
        let s = ActionSpace {
            k: 4,
            ..ActionSpace::default()
        };
        assert_eq!(s.bin_angle(1), 0.0);
        let out = step(
            &env,
            Pose::new(1.0, 1.0, 0.0),
            1,
            &s,
            &RewardParams::default(),
            &goal(),
            5.0,
        )
        .unwrap();
        assert!((out.new_pose.x - 1.25).abs() < 1e-12);
        assert!((out.new_pose.y - 1.0).abs() < 1e-12);
        assert_eq!(out.terminal, Terminal::None);
    }

    #[test]
    fn wall_ahead_collides() {
        let env = room();
        let s = ActionSpace {
            k: 4,
            ..ActionSpace::default()
        };
        // 0.2 m from the east wall, facing it; swept disc of r=0.16
        // travelling 0.25 m must contact.
        let out = step(
            &env,
            Pose::new(9.8, 5.0, 0.0),
            1,
            &s,
            &RewardParams::default(),
            &goal(),
            5.0,
        )
        .unwrap();
        assert_eq!(out.terminal, Terminal::Collision);
        assert!(out.d_o < RewardParams::default().agent_radius);
    }

    #[test]
    fn invalid_action_rejected() {
        let env = room();
        let s = ActionSpace::default();
        let err = step(
            &env,
            Pose::new(2.0, 2.0, 0.0),
            9,
            &s,
            &RewardParams::default(),
            &goal(),
            5.0,
        );
        assert!(matches!(err, Err(DynamicsError::InvalidAction { .. })));
    }

    #[test]
    fn step_deterministic() {
        let env = room();
        let s = ActionSpace::default();
        let p = RewardParams::default();
        let a = step(&env, Pose::new(3.0, 4.0, 1.1), 2, &s, &p, &goal(), 5.0).unwrap();
        let b = step(&env, Pose::new(3.0, 4.0, 1.1), 2, &s, &p, &goal(), 5.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn swept_collision_soundness_fuzz() {
        let env = crate::worldgen::fixtures::by_id("office").unwrap();
        let s = ActionSpace::default();
        let p = RewardParams::default();
        let g = GoalSpec::GoalImage {
            instance_id: "office_chair_0".into(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut tried = 0usize;
        while tried < 100_000 {
            let pos = Vec2::new(rng.gen_range(0.0..12.0), rng.gen_range(0.0..10.0));
            if nearest_obstacle_distance(&env, pos, Some(&g)) <= p.agent_radius {
                continue;
            }
            tried += 1;
            let pose = Pose::new(pos.x, pos.y, rng.gen_range(0.0..std::f64::consts::TAU));
            let a = rng.gen_range(0..s.k);
            let out = step(&env, pose, a, &s, &p, &g, 5.0).unwrap();
            match out.terminal {
                Terminal::Collision => assert!(out.d_o < p.agent_radius),
                _ => assert!(
                    out.d_o >= p.agent_radius - 1e-9,
                    "overlap without collision: d_o={} at {:?}",
                    out.d_o,
                    out.new_pose
                ),
            }
        }
    }

    #[test]
    fn nearest_obstacle_examples() {
        let env = room();
        // center of the empty 10 m room: nearest wall is 5 m away
        // (the goal disc is excluded as the scenario goal)
        let d = nearest_obstacle_distance(&env, Vec2::new(5.0, 5.0), Some(&goal()));
        assert!((d - 5.0).abs() < 1e-12);
        // point on a wall
        let d = nearest_obstacle_distance(&env, Vec2::new(0.0, 5.0), Some(&goal()));
        assert_eq!(d, 0.0);
    }

    #[test]
    fn nearest_obstacle_matches_boundary_sampling() {
        // brute-force oracle: minimum distance to 1e5 points sampled
        // along all boundary primitives of the office fixture
        let env = crate::worldgen::fixtures::by_id("office").unwrap();
        let p = Vec2::new(2.0, 3.0);
        let fast = env.nearest_obstacle_distance(p, crate::worldgen::GoalExclusion::None);

        let mut samples: Vec<Vec2> = Vec::new();
        let per_seg = |a: Vec2, b: Vec2, out: &mut Vec<Vec2>| {
            for i in 0..=500 {
                let t = i as f64 / 500.0;
                out.push(a + (b - a) * t);
            }
        };
        for w in env.all_walls() {
            per_seg(w.a, w.b, &mut samples);
        }
        for o in &env.obstacles {
            match &o.shape {
                crate::geom::Shape::Circle { center, radius } => {
                    for i in 0..2000 {
                        let a = i as f64 / 2000.0 * std::f64::consts::TAU;
                        samples.push(*center + Vec2::from_angle(a) * *radius);
                    }
                }
                crate::geom::Shape::Polygon { points } => {
                    for i in 0..points.len() {
                        per_seg(points[i], points[(i + 1) % points.len()], &mut samples);
                    }
                }
            }
        }
        for g in &env.goal_objects {
            for i in 0..2000 {
                let a = i as f64 / 2000.0 * std::f64::consts::TAU;
                samples.push(g.position + Vec2::from_angle(a) * g.radius);
            }
        }
        assert!(samples.len() > 10_000);
        let brute = samples
            .iter()
            .map(|s| s.distance(p))
            .fold(f64::INFINITY, f64::min);
        assert!((fast - brute).abs() < 1e-3, "fast={fast} brute={brute}");
    }
}
