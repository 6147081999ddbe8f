//! Synthesizes the egocentric observation stack directly from
//! geometry: a collision map, a semantic goal-correlation map with
//! parametric noise, and a geometric egomotion flow map.
//!
//! Grid convention: columns are bearing bins across the field of view,
//! left to right (signed bearing, positive clockwise); rows are range
//! bins from near to far. Flow is reported in display coordinates:
//! horizontal u grows rightward with the columns, vertical v grows
//! toward the agent (an approaching object has positive v).

use crate::geom::{wrap_angle, Vec2};
use crate::worldgen::{Environment, GoalExclusion, GoalSpec, PerceptionParams, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Sub-rays cast per column when rasterizing the collision map.
const SUBRAYS: usize = 5;
/// Spread of a semantic peak, in cells.
const PEAK_SIGMA: f64 = 0.8;
/// Peak contributions below this are written as exact zeros.
const PEAK_CUTOFF: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoGrid {
    /// Cells per side (N).
    pub n: usize,
    /// Field of view, radians.
    pub fov: f64,
    /// Far edge of the last range bin, meters.
    pub max_range: f64,
}

impl Default for EgoGrid {
    fn default() -> Self {
        EgoGrid {
            n: 16,
            fov: 120.0f64.to_radians(),
            max_range: 2.0,
        }
    }
}

impl EgoGrid {
    pub fn cell_range(&self) -> f64 {
        self.max_range / self.n as f64
    }

    pub fn cell_bearing(&self) -> f64 {
        self.fov / self.n as f64
    }

    /// Signed bearing of the center of column `j` (negative = left).
    pub fn column_bearing(&self, j: usize) -> f64 {
        -self.fov / 2.0 + (j as f64 + 0.5) * self.cell_bearing()
    }

    /// Continuous column coordinate of a signed bearing.
    pub fn column_of(&self, bearing: f64) -> f64 {
        (bearing + self.fov / 2.0) / self.cell_bearing()
    }

    /// Continuous row coordinate of a range.
    pub fn row_of(&self, range: f64) -> f64 {
        range / self.cell_range()
    }
}

/// Single-channel n x n map, row-major, f32.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    pub n: usize,
    pub data: Vec<f32>,
}

impl GridMap {
    pub fn zeros(n: usize) -> Self {
        GridMap {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f32) {
        self.data[row * self.n + col] = v;
    }

    /// `(row, col)` of the maximum; ties go to the first cell in
    /// row-major order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0usize;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        (best / self.n, best % self.n)
    }

    pub fn max(&self) -> f32 {
        self.data.iter().cloned().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == 0.0)
    }
}

/// The five-channel observation: collision and semantic map pairs plus
/// the two flow components. Serialization order is
/// `[phi_c_t, phi_c_prev, phi_s_t, phi_s_prev, psi_u, psi_v]`,
/// row-major f32 per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationStack {
    pub phi_c_t: GridMap,
    pub phi_c_prev: GridMap,
    pub phi_s_t: GridMap,
    pub phi_s_prev: GridMap,
    pub psi_u: GridMap,
    pub psi_v: GridMap,
}

impl ObservationStack {
    pub fn n(&self) -> usize {
        self.phi_c_t.n
    }

    pub fn channels(&self) -> [&GridMap; 6] {
        [
            &self.phi_c_t,
            &self.phi_c_prev,
            &self.phi_s_t,
            &self.phi_s_prev,
            &self.psi_u,
            &self.psi_v,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.channels()
            .iter()
            .all(|c| c.data.iter().all(|v| v.is_finite()))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Deterministic noise stream for `(params.seed, scenario_seed, step)`.
pub fn noise_rng(params_seed: u64, scenario_seed: u64, step_index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(params_seed)
        ^ splitmix64(scenario_seed.rotate_left(17))
        ^ splitmix64(step_index.rotate_left(41));
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Probability per step of leaving a detector-miss burst; the mean
/// burst length is its reciprocal (4 steps).
pub const MISS_BURST_EXIT: f64 = 0.25;

/// Whether the semantic detector misses every goal peak at this step.
/// Misses are bursty: a two-state Markov chain whose stationary miss
/// fraction is `params.miss_rate` and whose bursts last
/// `1 / MISS_BURST_EXIT` steps on average. The chain is replayed from
/// step 0 on every call, so this stays a pure function of
/// `(params.seed, scenario_seed, step_index)` and branch rollouts that
/// continue an episode's step indices see the same miss sequence.
pub fn detector_missed(params: &PerceptionParams, scenario_seed: u64, step_index: u64) -> bool {
    if params.miss_rate <= 0.0 {
        return false;
    }
    if params.miss_rate >= 1.0 {
        return true;
    }
    let p_enter =
        (params.miss_rate * MISS_BURST_EXIT / (1.0 - params.miss_rate)).min(1.0);
    let mixed = splitmix64(params.seed ^ 0xb115_7e55)
        ^ splitmix64(scenario_seed.rotate_left(23));
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    let mut miss = rng.gen::<f64>() < params.miss_rate;
    for _ in 0..step_index {
        let u: f64 = rng.gen();
        miss = if miss {
            u >= MISS_BURST_EXIT
        } else {
            u < p_enter
        };
    }
    miss
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Binary occupancy over the egocentric grid: a cell is set when an
/// obstacle intersects its (bearing, range) bin, and every cell behind
/// the first hit along a bearing is set too (line-of-sight occlusion).
pub fn collision_map(env: &Environment, pose: Pose, grid: &EgoGrid, excl: GoalExclusion) -> GridMap {
    let mut map = GridMap::zeros(grid.n);
    let origin = pose.position();
    let cell = grid.cell_range();
    for j in 0..grid.n {
        let left = -grid.fov / 2.0 + j as f64 * grid.cell_bearing();
        let mut first_row = grid.n; // first occupied row in this column
        for s in 0..SUBRAYS {
            let bearing = left + (s as f64 + 0.5) / SUBRAYS as f64 * grid.cell_bearing();
            let dir = Vec2::from_angle(pose.heading - bearing);
            if let Some(t) = env.raycast(origin, dir, grid.max_range, excl) {
                let row = (t / cell).floor() as usize;
                first_row = first_row.min(row.min(grid.n - 1));
            }
        }
        for i in first_row..grid.n {
            map.set(i, j, 1.0);
        }
    }
    map
}

/// Signed bearing and range of a world point as seen from `pose`.
fn bearing_range(pose: Pose, point: Vec2) -> (f64, f64) {
    let rel = point - pose.position();
    let range = rel.length();
    let bearing = -wrap_angle(rel.angle() - pose.heading);
    (bearing, range)
}

fn add_peak(map: &mut Vec<f64>, n: usize, peak_row: f64, peak_col: f64) {
    for i in 0..n {
        for j in 0..n {
            let dr = (i as f64 + 0.5) - peak_row;
            let dc = (j as f64 + 0.5) - peak_col;
            let v = (-(dr * dr + dc * dc) / (2.0 * PEAK_SIGMA * PEAK_SIGMA)).exp();
            if v >= PEAK_CUTOFF {
                let idx = i * n + j;
                map[idx] = map[idx].max(v);
            }
        }
    }
}

fn gaussian_blur(map: &mut Vec<f64>, n: usize, sigma: f64) {
    if sigma < 1e-3 {
        return;
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let mut sum = 0.0;
    for d in -radius..=radius {
        let w = (-(d * d) as f64 / (2.0 * sigma * sigma)).exp();
        kernel.push(w);
        sum += w;
    }
    for w in &mut kernel {
        *w /= sum;
    }
    let mut tmp = vec![0.0f64; n * n];
    // horizontal
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for (ki, d) in (-radius..=radius).enumerate() {
                let jj = j as i64 + d;
                if (0..n as i64).contains(&jj) {
                    acc += kernel[ki] * map[i * n + jj as usize];
                }
            }
            tmp[i * n + j] = acc;
        }
    }
    // vertical
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for (ki, d) in (-radius..=radius).enumerate() {
                let ii = i as i64 + d;
                if (0..n as i64).contains(&ii) {
                    acc += kernel[ki] * tmp[ii as usize * n + j];
                }
            }
            map[i * n + j] = acc;
        }
    }
}

/// Goal-correlation score map: a unimodal peak at each visible
/// matching goal object, then parametric noise (dropout, blur,
/// Gaussian perturbation, false-positive blobs), clamped to [0, 1].
///
/// Objects beyond `max_range` keep their bearing and are clamped to
/// the far row, so direction to a distant goal stays observable.
pub fn semantic_map(
    env: &Environment,
    pose: Pose,
    goal: &GoalSpec,
    grid: &EgoGrid,
    params: &PerceptionParams,
    scenario_seed: u64,
    step_index: u64,
) -> GridMap {
    let n = grid.n;
    let mut acc = vec![0.0f64; n * n];
    let noisy = params.semantic_noise_sd > 0.0
        || params.false_positive_rate > 0.0
        || params.dropout_rate > 0.0;
    let mut rng = noise_rng(params.seed, scenario_seed, step_index);
    let missed = detector_missed(params, scenario_seed, step_index);

    for idx in goal.matching_indices(env) {
        if missed {
            break;
        }
        let dropped = params.dropout_rate > 0.0 && rng.gen::<f64>() < params.dropout_rate;
        if dropped {
            continue;
        }
        if !env.goal_visible(pose.position(), idx) {
            continue;
        }
        let g = &env.goal_objects[idx];
        let (bearing, range) = bearing_range(pose, g.position);
        if bearing.abs() > grid.fov / 2.0 {
            continue;
        }
        let peak_col = grid.column_of(bearing);
        let peak_row = grid.row_of(range).min(n as f64 - 0.5);
        add_peak(&mut acc, n, peak_row, peak_col);
    }

    // A peak spreads over neighboring cells; mask out any cell whose
    // own anchor point is not line-of-sight visible.
    let origin = pose.position();
    let excl = goal.exclusion();
    for i in 0..n {
        for j in 0..n {
            if acc[i * n + j] == 0.0 {
                continue;
            }
            let bearing = grid.column_bearing(j);
            let range = (i as f64 + 0.5) * grid.cell_range();
            let dir = Vec2::from_angle(pose.heading - bearing);
            if env.raycast(origin, dir, range, excl).is_some() {
                acc[i * n + j] = 0.0;
            }
        }
    }

    if noisy || params.blur_radius > 0.0 {
        gaussian_blur(&mut acc, n, params.blur_radius);
    }
    if params.semantic_noise_sd > 0.0 {
        for v in acc.iter_mut() {
            *v += params.semantic_noise_sd * normal(&mut rng);
        }
    }
    if params.false_positive_rate > 0.0 {
        while rng.gen::<f64>() < params.false_positive_rate {
            let row = rng.gen_range(0..n) as f64 + 0.5;
            let col = rng.gen_range(0..n) as f64 + 0.5;
            let amp: f64 = rng.gen_range(0.3..0.8);
            let mut blob = vec![0.0f64; n * n];
            add_peak(&mut blob, n, row, col);
            for (a, b) in acc.iter_mut().zip(blob.iter()) {
                *a += amp * b;
            }
        }
    }

    let mut map = GridMap::zeros(n);
    for (out, v) in map.data.iter_mut().zip(acc.iter()) {
        *out = v.clamp(0.0, 1.0) as f32;
    }
    map
}

/// Geometric egomotion flow: for each current cell, the display-space
/// displacement (in cells) of that cell's world anchor point between
/// the previous and current egocentric frames.
pub fn flow_map(pose_prev: Pose, pose_t: Pose, grid: &EgoGrid) -> (GridMap, GridMap) {
    let n = grid.n;
    let mut du = GridMap::zeros(n);
    let mut dv = GridMap::zeros(n);
    let translation = pose_t.position() - pose_prev.position();
    let pure_rotation = translation.x == 0.0 && translation.y == 0.0;
    // Without translation the egocentric transform is an exact bearing
    // shift: column shift is uniform, range is unchanged.
    let heading_shift = pose_prev.heading - pose_t.heading;
    for i in 0..n {
        for j in 0..n {
            let (u, v) = if pure_rotation {
                (-heading_shift / grid.cell_bearing(), 0.0)
            } else {
                let bearing = grid.column_bearing(j);
                let range = (i as f64 + 0.5) * grid.cell_range();
                let anchor =
                    pose_t.position() + Vec2::from_angle(pose_t.heading - bearing) * range;
                let (b_prev, r_prev) = bearing_range(pose_prev, anchor);
                let col_prev = grid.column_of(b_prev);
                let row_prev = grid.row_of(r_prev);
                let col_t = j as f64 + 0.5;
                let row_t = i as f64 + 0.5;
                (col_t - col_prev, row_prev - row_t)
            };
            // Near-range anchors can swing bearing violently under
            // translation, producing outlier displacements of tens of
            // cells; beyond a quarter frame the motion is unresolvable
            // anyway, so clamp to keep the channel's scale sane.
            let lim = n as f64 / 4.0;
            du.set(i, j, u.clamp(-lim, lim) as f32);
            dv.set(i, j, v.clamp(-lim, lim) as f32);
        }
    }
    (du, dv)
}

/// Assemble the full observation. At `step_index == 0` the previous
/// channels duplicate the current ones and the flow is zero.
#[allow(clippy::too_many_arguments)]
pub fn observe(
    env: &Environment,
    pose_t: Pose,
    pose_prev: Pose,
    goal: &GoalSpec,
    grid: &EgoGrid,
    params: &PerceptionParams,
    scenario_seed: u64,
    step_index: u64,
) -> ObservationStack {
    let excl = goal.exclusion();
    let phi_c_t = collision_map(env, pose_t, grid, excl);
    let phi_s_t = semantic_map(env, pose_t, goal, grid, params, scenario_seed, step_index);
    if step_index == 0 {
        let zero = GridMap::zeros(grid.n);
        return ObservationStack {
            phi_c_prev: phi_c_t.clone(),
            phi_s_prev: phi_s_t.clone(),
            phi_c_t,
            phi_s_t,
            psi_u: zero.clone(),
            psi_v: zero,
        };
    }
    let phi_c_prev = collision_map(env, pose_prev, grid, excl);
    let phi_s_prev = semantic_map(
        env,
        pose_prev,
        goal,
        grid,
        params,
        scenario_seed,
        step_index - 1,
    );
    let (psi_u, psi_v) = flow_map(pose_prev, pose_t, grid);
    ObservationStack {
        phi_c_t,
        phi_c_prev,
        phi_s_t,
        phi_s_prev,
        psi_u,
        psi_v,
    }
}
