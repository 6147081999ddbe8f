//! The policy zoo: random, visual goal matching (with and without the
//! collision complement), and the learned Q-policies (reactive,
//! recurrent, recurrent + flow) built on the `nn` kernel.

use crate::dynamics::ActionSpace;
use crate::nn::{
    column_pool_backward, column_pool_forward, huber, relu_backward, relu_forward, Conv3x3,
    ConvGru, GruCache, Linear,
};
use crate::perception::{EgoGrid, GridMap, ObservationStack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

/// Feature channels after the input convolution.
pub const FEATURES: usize = 16;
/// Hidden channels of the recurrent cell.
pub const HIDDEN: usize = 16;

pub const CKPT_FORMAT: &str = "divis-ckpt/1";

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("observation grid is {got}x{got}, policy expects {want}x{want}")]
    ShapeMismatch { got: usize, want: usize },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Reactive,
    Recurrent,
    RecurrentFlow,
}

impl Variant {
    pub fn input_channels(&self) -> usize {
        match self {
            Variant::Reactive => 2,
            Variant::Recurrent => 4,
            Variant::RecurrentFlow => 6,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Reactive => "reactive",
            Variant::Recurrent => "recurrent",
            Variant::RecurrentFlow => "recurrent_flow",
        }
    }

    pub fn from_name(s: &str) -> Option<Variant> {
        match s {
            "reactive" => Some(Variant::Reactive),
            "recurrent" => Some(Variant::Recurrent),
            "recurrent_flow" => Some(Variant::RecurrentFlow),
            _ => None,
        }
    }

    pub fn is_recurrent(&self) -> bool {
        !matches!(self, Variant::Reactive)
    }
}

/// Per-episode recurrent state; all zeros at episode start. The
/// reactive variant carries an empty state.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState(pub Vec<f64>);

/// Q-network parameters: input conv -> ReLU -> (conv-GRU) ->
/// column-average pool -> linear head over per-column features.
#[derive(Debug, Clone, PartialEq)]
pub struct QNet {
    pub variant: Variant,
    pub grid_n: usize,
    pub k: usize,
    pub conv1: Conv3x3,
    pub gru: Option<ConvGru>,
    pub head: Linear,
}

/// Per-step forward intermediates for backpropagation through time.
pub struct StepCache {
    input: Vec<f64>,
    a1: Vec<f64>,
    gru: Option<GruCache>,
    pooled: Vec<f64>,
    q: Vec<f64>,
}

impl QNet {
    pub fn new(variant: Variant, grid_n: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv1 = Conv3x3::init(variant.input_channels(), FEATURES, &mut rng);
        let gru = variant
            .is_recurrent()
            .then(|| ConvGru::init(FEATURES, HIDDEN, &mut rng));
        let feat = if variant.is_recurrent() { HIDDEN } else { FEATURES };
        let head = Linear::init(feat * grid_n, k, &mut rng);
        QNet {
            variant,
            grid_n,
            k,
            conv1,
            gru,
            head,
        }
    }

    pub fn zeros_like(&self) -> QNet {
        QNet {
            variant: self.variant,
            grid_n: self.grid_n,
            k: self.k,
            conv1: Conv3x3::zeros(self.conv1.c_in, self.conv1.c_out),
            gru: self
                .gru
                .as_ref()
                .map(|g| ConvGru::zeros(g.c_x, g.c_h)),
            head: Linear::zeros(self.head.dim_in, self.head.dim_out),
        }
    }

    pub fn param_count(&self) -> usize {
        self.conv1.param_count()
            + self.gru.as_ref().map_or(0, |g| g.param_count())
            + self.head.param_count()
    }

    pub fn initial_hidden(&self) -> HiddenState {
        if self.variant.is_recurrent() {
            HiddenState(vec![0.0; HIDDEN * self.grid_n * self.grid_n])
        } else {
            HiddenState(Vec::new())
        }
    }

    /// Parameter tensors in checkpoint order.
    fn tensor_views(&self) -> Vec<(&'static str, &[f64])> {
        let mut v = vec![
            ("conv1.w", self.conv1.w.as_slice()),
            ("conv1.b", self.conv1.b.as_slice()),
        ];
        if let Some(g) = &self.gru {
            v.push(("gru.wz.w", g.wz.w.as_slice()));
            v.push(("gru.wz.b", g.wz.b.as_slice()));
            v.push(("gru.wr.w", g.wr.w.as_slice()));
            v.push(("gru.wr.b", g.wr.b.as_slice()));
            v.push(("gru.wh.w", g.wh.w.as_slice()));
            v.push(("gru.wh.b", g.wh.b.as_slice()));
        }
        v.push(("head.w", self.head.w.as_slice()));
        v.push(("head.b", self.head.b.as_slice()));
        v
    }

    fn tensor_views_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut v = vec![&mut self.conv1.w, &mut self.conv1.b];
        if let Some(g) = &mut self.gru {
            v.push(&mut g.wz.w);
            v.push(&mut g.wz.b);
            v.push(&mut g.wr.w);
            v.push(&mut g.wr.b);
            v.push(&mut g.wh.w);
            v.push(&mut g.wh.b);
        }
        v.push(&mut self.head.w);
        v.push(&mut self.head.b);
        v
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (_, t) in self.tensor_views() {
            out.extend_from_slice(t);
        }
        out
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for t in self.tensor_views_mut() {
            let len = t.len();
            t.copy_from_slice(&flat[off..off + len]);
            off += len;
        }
        assert_eq!(off, flat.len());
    }

    /// Stack the variant's input channels from an observation.
    fn input_tensor(&self, obs: &ObservationStack) -> Result<Vec<f64>, PolicyError> {
        if obs.n() != self.grid_n {
            return Err(PolicyError::ShapeMismatch {
                got: obs.n(),
                want: self.grid_n,
            });
        }
        let chans: Vec<&GridMap> = match self.variant {
            Variant::Reactive => vec![&obs.phi_c_t, &obs.phi_s_t],
            Variant::Recurrent => {
                vec![&obs.phi_c_t, &obs.phi_c_prev, &obs.phi_s_t, &obs.phi_s_prev]
            }
            Variant::RecurrentFlow => vec![
                &obs.phi_c_t,
                &obs.phi_c_prev,
                &obs.phi_s_t,
                &obs.phi_s_prev,
                &obs.psi_u,
                &obs.psi_v,
            ],
        };
        // Occupancy/semantic channels live in [0, 1] but flow is a
        // displacement in cells (forward motion alone is ~2 cells per
        // step); rescale so no input channel dominates the shared
        // convolution.
        let flow_scale = 0.25;
        let n_maps = if self.variant == Variant::RecurrentFlow {
            chans.len() - 2
        } else {
            chans.len()
        };
        let mut x = Vec::with_capacity(chans.len() * self.grid_n * self.grid_n);
        for (ci, c) in chans.into_iter().enumerate() {
            let s = if ci >= n_maps { flow_scale } else { 1.0 };
            x.extend(c.data.iter().map(|v| *v as f64 * s));
        }
        Ok(x)
    }

    pub fn forward(
        &self,
        obs: &ObservationStack,
        hidden: &HiddenState,
    ) -> Result<(Vec<f64>, HiddenState), PolicyError> {
        let (q, h, _) = self.forward_cached(obs, hidden)?;
        Ok((q, h))
    }

    pub fn forward_cached(
        &self,
        obs: &ObservationStack,
        hidden: &HiddenState,
    ) -> Result<(Vec<f64>, HiddenState, StepCache), PolicyError> {
        let n = self.grid_n;
        let input = self.input_tensor(obs)?;
        let a1 = self.conv1.forward(&input, n);
        let feat = relu_forward(&a1);
        let (features_out, h_new, gru_cache) = match &self.gru {
            Some(gru) => {
                let (h_new, cache) = gru.forward(&feat, &hidden.0, n);
                (h_new.clone(), HiddenState(h_new), Some(cache))
            }
            None => (feat, HiddenState(Vec::new()), None),
        };
        let c = if self.variant.is_recurrent() { HIDDEN } else { FEATURES };
        let pooled = column_pool_forward(&features_out, c, n);
        let q = self.head.forward(&pooled);
        let cache = StepCache {
            input,
            a1,
            gru: gru_cache,
            pooled,
            q: q.clone(),
        };
        Ok((q, h_new, cache))
    }

    /// Backpropagation through time over one episode. `targets[t][a]`
    /// is only read where `mask[t][a]` is true. The loss is the masked
    /// mean Huber per step, summed over steps. Returns (loss, grads).
    pub fn bptt(
        &self,
        caches: &[StepCache],
        targets: &[Vec<f64>],
        mask: &[Vec<bool>],
    ) -> (f64, QNet) {
        let n = self.grid_n;
        let c = if self.variant.is_recurrent() { HIDDEN } else { FEATURES };
        let mut grads = self.zeros_like();
        let mut loss = 0.0;
        let hn = HIDDEN * n * n;
        let mut grad_h_future = vec![0.0; if self.variant.is_recurrent() { hn } else { 0 }];
        for t in (0..caches.len()).rev() {
            let cache = &caches[t];
            let m = mask[t].iter().filter(|b| **b).count();
            let mut grad_q = vec![0.0; self.k];
            if m > 0 {
                for a in 0..self.k {
                    if mask[t][a] {
                        let (l, d) = huber(cache.q[a], targets[t][a]);
                        loss += l / m as f64;
                        grad_q[a] = d / m as f64;
                    }
                }
            }
            let mut grad_pooled = vec![0.0; self.head.dim_in];
            self.head
                .backward(&cache.pooled, &grad_q, Some(&mut grad_pooled), &mut grads.head);
            let mut grad_features = vec![0.0; c * n * n];
            column_pool_backward(c, n, &grad_pooled, &mut grad_features);
            let grad_feat = match (&self.gru, &cache.gru) {
                (Some(gru), Some(gc)) => {
                    for (g, f) in grad_features.iter_mut().zip(&grad_h_future) {
                        *g += f;
                    }
                    let (grad_x, grad_h_prev) =
                        gru.backward(gc, n, &grad_features, grads.gru.as_mut().unwrap());
                    grad_h_future = grad_h_prev;
                    grad_x
                }
                _ => grad_features,
            };
            let mut grad_a1 = vec![0.0; cache.a1.len()];
            relu_backward(&cache.a1, &grad_feat, &mut grad_a1);
            self.conv1
                .backward(&cache.input, n, &grad_a1, None, &mut grads.conv1);
        }
        (loss, grads)
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        let meta = CkptMeta {
            variant: self.variant,
            grid_n: self.grid_n,
            k: self.k,
            tensors: self
                .tensor_views()
                .iter()
                .map(|(name, t)| (name.to_string(), t.len()))
                .collect(),
        };
        let mut buf = Vec::new();
        buf.extend_from_slice(CKPT_FORMAT.as_bytes());
        buf.push(b'\n');
        buf.extend_from_slice(serde_json::to_string(&meta).unwrap().as_bytes());
        buf.push(b'\n');
        for (_, t) in self.tensor_views() {
            for v in t {
                buf.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<QNet, PolicyError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut lines = bytes.splitn(3, |b| *b == b'\n');
        let header = lines.next().unwrap_or_default();
        if header != CKPT_FORMAT.as_bytes() {
            return Err(PolicyError::BadCheckpoint(format!(
                "unknown header {:?}",
                String::from_utf8_lossy(header)
            )));
        }
        let meta_line = lines
            .next()
            .ok_or_else(|| PolicyError::BadCheckpoint("missing metadata".into()))?;
        let meta: CkptMeta = serde_json::from_slice(meta_line)
            .map_err(|e| PolicyError::BadCheckpoint(e.to_string()))?;
        let data = lines.next().unwrap_or_default();
        let total: usize = meta.tensors.iter().map(|(_, l)| l).sum();
        if data.len() != total * 4 {
            return Err(PolicyError::BadCheckpoint(format!(
                "expected {} bytes of tensor data, found {}",
                total * 4,
                data.len()
            )));
        }
        let mut net = QNet {
            variant: meta.variant,
            grid_n: meta.grid_n,
            k: meta.k,
            conv1: Conv3x3::zeros(meta.variant.input_channels(), FEATURES),
            gru: meta
                .variant
                .is_recurrent()
                .then(|| ConvGru::zeros(FEATURES, HIDDEN)),
            head: Linear::zeros(
                (if meta.variant.is_recurrent() { HIDDEN } else { FEATURES }) * meta.grid_n,
                meta.k,
            ),
        };
        {
            let views = net.tensor_views_mut();
            let mut off = 0;
            for t in views {
                for v in t.iter_mut() {
                    let raw: [u8; 4] = data[off..off + 4].try_into().unwrap();
                    *v = f32::from_le_bytes(raw) as f64;
                    off += 4;
                }
            }
            if off != data.len() {
                return Err(PolicyError::BadCheckpoint("trailing tensor data".into()));
            }
        }
        let expected: Vec<(String, usize)> = net
            .tensor_views()
            .iter()
            .map(|(name, t)| (name.to_string(), t.len()))
            .collect();
        if expected != meta.tensors {
            return Err(PolicyError::BadCheckpoint("tensor layout mismatch".into()));
        }
        Ok(net)
    }
}

#[derive(Serialize, Deserialize)]
struct CkptMeta {
    variant: Variant,
    grid_n: usize,
    k: usize,
    tensors: Vec<(String, usize)>,
}

/// ε-greedy selection; greedy ties go to the lowest index.
pub fn select_action(q: &[f64], epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..q.len());
    }
    let mut best = 0;
    for (i, v) in q.iter().enumerate() {
        if *v > q[best] {
            best = i;
        }
    }
    best
}

pub fn random_action(k: usize, rng: &mut ChaCha8Rng) -> usize {
    rng.gen_range(0..k)
}

/// Map a grid column to the rotation bin nearest that column's
/// bearing.
fn column_to_bin(col: usize, grid: &EgoGrid, space: &ActionSpace) -> usize {
    space.nearest_bin(grid.column_bearing(col))
}

/// Minimum semantic-map peak for the VGM baselines to treat the goal
/// as detected; background noise stays below this, so a sub-threshold
/// map means "no detection this step" rather than "steer at noise".
pub const VGM_DETECTION_THRESHOLD: f32 = 0.15;

/// Greedy visual-matching baseline: turn toward the semantic argmax
/// column; no detection means go straight.
pub fn vgm_action(phi_s: &GridMap, grid: &EgoGrid, space: &ActionSpace) -> usize {
    if phi_s.max() < VGM_DETECTION_THRESHOLD {
        return space.center_bin();
    }
    let (_, col) = phi_s.argmax();
    column_to_bin(col, grid, space)
}

/// Visual matching plus free space: argmax of phi_s + (1 - phi_c);
/// without a detection, only the free-space term steers.
pub fn vgm_collision_action(
    phi_s: &GridMap,
    phi_c: &GridMap,
    grid: &EgoGrid,
    space: &ActionSpace,
) -> usize {
    let detected = phi_s.max() >= VGM_DETECTION_THRESHOLD;
    let n = phi_s.n;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..n {
        for j in 0..n {
            let sem = if detected { phi_s.get(i, j) as f64 } else { 0.0 };
            let score = sem + (1.0 - phi_c.get(i, j) as f64);
            if score > best.1 {
                best = (j, score);
            }
        }
    }
    column_to_bin(best.0, grid, space)
}

/// A policy maps observations to action indices, threading an opaque
/// per-episode state.
pub trait Policy: Sync {
    fn initial_state(&self) -> HiddenState;
    fn act(&self, obs: &ObservationStack, state: &mut HiddenState, rng: &mut ChaCha8Rng) -> usize;
    fn name(&self) -> String;
}

pub struct RandomPolicy {
    pub k: usize,
}

impl Policy for RandomPolicy {
    fn initial_state(&self) -> HiddenState {
        HiddenState(Vec::new())
    }
    fn act(&self, _obs: &ObservationStack, _state: &mut HiddenState, rng: &mut ChaCha8Rng) -> usize {
        random_action(self.k, rng)
    }
    fn name(&self) -> String {
        "random".into()
    }
}

pub struct VgmPolicy {
    pub grid: EgoGrid,
    pub space: ActionSpace,
    pub use_collision: bool,
}

impl Policy for VgmPolicy {
    fn initial_state(&self) -> HiddenState {
        HiddenState(Vec::new())
    }
    fn act(&self, obs: &ObservationStack, _state: &mut HiddenState, _rng: &mut ChaCha8Rng) -> usize {
        if self.use_collision {
            vgm_collision_action(&obs.phi_s_t, &obs.phi_c_t, &self.grid, &self.space)
        } else {
            vgm_action(&obs.phi_s_t, &self.grid, &self.space)
        }
    }
    fn name(&self) -> String {
        if self.use_collision {
            "vgm_collision".into()
        } else {
            "vgm".into()
        }
    }
}

pub struct GreedyQPolicy<'a> {
    pub net: &'a QNet,
    pub epsilon: f64,
}

impl Policy for GreedyQPolicy<'_> {
    fn initial_state(&self) -> HiddenState {
        self.net.initial_hidden()
    }
    fn act(&self, obs: &ObservationStack, state: &mut HiddenState, rng: &mut ChaCha8Rng) -> usize {
        let (q, h) = self
            .net
            .forward(obs, state)
            .expect("observation shape matches policy");
        *state = h;
        select_action(&q, self.epsilon, rng)
    }
    fn name(&self) -> String {
        self.net.variant.name().into()
    }
}
