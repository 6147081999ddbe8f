//! Minimal hand-rolled neural network kernel for the Q-network: 3x3
//! same-padding convolution, a convolutional GRU cell, column-average
//! pooling, a linear head, Huber loss, and Adam.
//!
//! All math runs in f64 so finite-difference gradient checks are
//! meaningful, but parameters are kept on the f32 grid (rounded
//! through f32 after every update) so checkpoints serialize to f32
//! bit-exactly and reload to an identical forward pass.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Round every value through f32 so it is exactly representable.
pub fn round_to_f32(xs: &mut [f64]) {
    for x in xs.iter_mut() {
        *x = *x as f32 as f64;
    }
}

/// 3x3 convolution with zero padding; maps (c_in, n, n) to
/// (c_out, n, n). Tensors are flat, channel-major, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3 {
    pub c_in: usize,
    pub c_out: usize,
    /// c_out x c_in x 3 x 3
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Conv3x3 {
    pub fn zeros(c_in: usize, c_out: usize) -> Self {
        Conv3x3 {
            c_in,
            c_out,
            w: vec![0.0; c_out * c_in * 9],
            b: vec![0.0; c_out],
        }
    }

    pub fn init(c_in: usize, c_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Self::zeros(c_in, c_out);
        // He-style fan-in scaling
        let sd = (2.0 / (c_in as f64 * 9.0)).sqrt();
        for w in layer.w.iter_mut() {
            *w = rng.gen_range(-sd..sd);
        }
        round_to_f32(&mut layer.w);
        layer
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn forward(&self, x: &[f64], n: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.c_in * n * n);
        let mut y = vec![0.0; self.c_out * n * n];
        for co in 0..self.c_out {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = self.b[co];
                    for ci in 0..self.c_in {
                        for di in 0..3usize {
                            let ii = i as i64 + di as i64 - 1;
                            if !(0..n as i64).contains(&ii) {
                                continue;
                            }
                            for dj in 0..3usize {
                                let jj = j as i64 + dj as i64 - 1;
                                if !(0..n as i64).contains(&jj) {
                                    continue;
                                }
                                acc += self.w[((co * self.c_in + ci) * 3 + di) * 3 + dj]
                                    * x[(ci * n + ii as usize) * n + jj as usize];
                            }
                        }
                    }
                    y[(co * n + i) * n + j] = acc;
                }
            }
        }
        y
    }

    /// Accumulates into `grad_x` (if given) and `grad`.
    pub fn backward(
        &self,
        x: &[f64],
        n: usize,
        grad_y: &[f64],
        mut grad_x: Option<&mut [f64]>,
        grad: &mut Conv3x3,
    ) {
        for co in 0..self.c_out {
            for i in 0..n {
                for j in 0..n {
                    let g = grad_y[(co * n + i) * n + j];
                    if g == 0.0 {
                        continue;
                    }
                    grad.b[co] += g;
                    for ci in 0..self.c_in {
                        for di in 0..3usize {
                            let ii = i as i64 + di as i64 - 1;
                            if !(0..n as i64).contains(&ii) {
                                continue;
                            }
                            for dj in 0..3usize {
                                let jj = j as i64 + dj as i64 - 1;
                                if !(0..n as i64).contains(&jj) {
                                    continue;
                                }
                                let xi = (ci * n + ii as usize) * n + jj as usize;
                                grad.w[((co * self.c_in + ci) * 3 + di) * 3 + dj] += g * x[xi];
                                if let Some(gx) = grad_x.as_deref_mut() {
                                    gx[xi] +=
                                        g * self.w[((co * self.c_in + ci) * 3 + di) * 3 + dj];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Convolutional GRU cell over (c, n, n) feature maps. Each gate is a
/// 3x3 convolution over the concatenation of input and (possibly
/// reset-gated) hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGru {
    pub c_x: usize,
    pub c_h: usize,
    pub wz: Conv3x3,
    pub wr: Conv3x3,
    pub wh: Conv3x3,
}

/// Forward-pass intermediates needed for backpropagation through time.
#[derive(Debug, Clone)]
pub struct GruCache {
    xh: Vec<f64>,
    xrh: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    c: Vec<f64>,
    h_prev: Vec<f64>,
}

impl ConvGru {
    pub fn zeros(c_x: usize, c_h: usize) -> Self {
        ConvGru {
            c_x,
            c_h,
            wz: Conv3x3::zeros(c_x + c_h, c_h),
            wr: Conv3x3::zeros(c_x + c_h, c_h),
            wh: Conv3x3::zeros(c_x + c_h, c_h),
        }
    }

    pub fn init(c_x: usize, c_h: usize, rng: &mut ChaCha8Rng) -> Self {
        // Bias the update gate toward the input (z ~ 0.73) so a fresh
        // cell is mostly feedforward; carrying long-range state is
        // then learned rather than imposed on a noisy init.
        let mut wz = Conv3x3::init(c_x + c_h, c_h, rng);
        for b in wz.b.iter_mut() {
            *b = 1.0;
        }
        ConvGru {
            c_x,
            c_h,
            wz,
            wr: Conv3x3::init(c_x + c_h, c_h, rng),
            wh: Conv3x3::init(c_x + c_h, c_h, rng),
        }
    }

    pub fn param_count(&self) -> usize {
        self.wz.param_count() + self.wr.param_count() + self.wh.param_count()
    }

    pub fn forward(&self, x: &[f64], h: &[f64], n: usize) -> (Vec<f64>, GruCache) {
        let hn = self.c_h * n * n;
        debug_assert_eq!(h.len(), hn);
        let mut xh = Vec::with_capacity(x.len() + hn);
        xh.extend_from_slice(x);
        xh.extend_from_slice(h);
        let z: Vec<f64> = self.wz.forward(&xh, n).iter().map(|a| sigmoid(*a)).collect();
        let r: Vec<f64> = self.wr.forward(&xh, n).iter().map(|a| sigmoid(*a)).collect();
        let mut xrh = Vec::with_capacity(x.len() + hn);
        xrh.extend_from_slice(x);
        xrh.extend((0..hn).map(|i| r[i] * h[i]));
        let c: Vec<f64> = self.wh.forward(&xrh, n).iter().map(|a| a.tanh()).collect();
        let h_new: Vec<f64> = (0..hn).map(|i| (1.0 - z[i]) * h[i] + z[i] * c[i]).collect();
        let cache = GruCache {
            xh,
            xrh,
            z,
            r,
            c,
            h_prev: h.to_vec(),
        };
        (h_new, cache)
    }

    /// Returns gradients wrt the input and previous hidden state,
    /// accumulating parameter gradients into `grad`.
    pub fn backward(
        &self,
        cache: &GruCache,
        n: usize,
        grad_h_new: &[f64],
        grad: &mut ConvGru,
    ) -> (Vec<f64>, Vec<f64>) {
        let hn = self.c_h * n * n;
        let xn = self.c_x * n * n;
        let mut grad_x = vec![0.0; xn];
        let mut grad_h = vec![0.0; hn];

        // candidate branch
        let da_c: Vec<f64> = (0..hn)
            .map(|i| grad_h_new[i] * cache.z[i] * (1.0 - cache.c[i] * cache.c[i]))
            .collect();
        let mut grad_xrh = vec![0.0; xn + hn];
        self.wh
            .backward(&cache.xrh, n, &da_c, Some(&mut grad_xrh), &mut grad.wh);
        grad_x
            .iter_mut()
            .zip(&grad_xrh[..xn])
            .for_each(|(g, d)| *g += d);
        let grad_rh = &grad_xrh[xn..];
        for i in 0..hn {
            grad_h[i] += grad_rh[i] * cache.r[i];
        }

        // update gate
        let da_z: Vec<f64> = (0..hn)
            .map(|i| {
                grad_h_new[i]
                    * (cache.c[i] - cache.h_prev[i])
                    * cache.z[i]
                    * (1.0 - cache.z[i])
            })
            .collect();
        // reset gate
        let da_r: Vec<f64> = (0..hn)
            .map(|i| grad_rh[i] * cache.h_prev[i] * cache.r[i] * (1.0 - cache.r[i]))
            .collect();
        let mut grad_xh = vec![0.0; xn + hn];
        self.wz
            .backward(&cache.xh, n, &da_z, Some(&mut grad_xh), &mut grad.wz);
        self.wr
            .backward(&cache.xh, n, &da_r, Some(&mut grad_xh), &mut grad.wr);
        grad_x
            .iter_mut()
            .zip(&grad_xh[..xn])
            .for_each(|(g, d)| *g += d);
        for i in 0..hn {
            grad_h[i] += grad_xh[xn + i] + grad_h_new[i] * (1.0 - cache.z[i]);
        }
        (grad_x, grad_h)
    }
}

/// Fully connected layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub dim_in: usize,
    pub dim_out: usize,
    /// dim_out x dim_in
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn zeros(dim_in: usize, dim_out: usize) -> Self {
        Linear {
            dim_in,
            dim_out,
            w: vec![0.0; dim_out * dim_in],
            b: vec![0.0; dim_out],
        }
    }

    pub fn init(dim_in: usize, dim_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Self::zeros(dim_in, dim_out);
        let sd = (2.0 / dim_in as f64).sqrt();
        for w in layer.w.iter_mut() {
            *w = rng.gen_range(-sd..sd);
        }
        round_to_f32(&mut layer.w);
        layer
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim_out)
            .map(|o| {
                self.b[o]
                    + self.w[o * self.dim_in..(o + 1) * self.dim_in]
                        .iter()
                        .zip(x)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn backward(
        &self,
        x: &[f64],
        grad_y: &[f64],
        grad_x: Option<&mut [f64]>,
        grad: &mut Linear,
    ) {
        for o in 0..self.dim_out {
            let g = grad_y[o];
            grad.b[o] += g;
            for i in 0..self.dim_in {
                grad.w[o * self.dim_in + i] += g * x[i];
            }
        }
        if let Some(gx) = grad_x {
            for i in 0..self.dim_in {
                let mut acc = 0.0;
                for o in 0..self.dim_out {
                    acc += grad_y[o] * self.w[o * self.dim_in + i];
                }
                gx[i] += acc;
            }
        }
    }
}

pub fn relu_forward(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.max(0.0)).collect()
}

pub fn relu_backward(x: &[f64], grad_y: &[f64], grad_x: &mut [f64]) {
    for i in 0..x.len() {
        if x[i] > 0.0 {
            grad_x[i] += grad_y[i];
        }
    }
}

/// Average over rows within each column: (c, n, n) -> c*n features,
/// keeping the bearing (column) structure the head needs to map
/// columns to actions.
pub fn column_pool_forward(x: &[f64], c: usize, n: usize) -> Vec<f64> {
    let mut y = vec![0.0; c * n];
    for ch in 0..c {
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += x[(ch * n + i) * n + j];
            }
            y[ch * n + j] = acc / n as f64;
        }
    }
    y
}

pub fn column_pool_backward(c: usize, n: usize, grad_y: &[f64], grad_x: &mut [f64]) {
    for ch in 0..c {
        for j in 0..n {
            let g = grad_y[ch * n + j] / n as f64;
            for i in 0..n {
                grad_x[(ch * n + i) * n + j] += g;
            }
        }
    }
}

/// Huber loss with delta = 1; returns (loss, dloss/dpred).
pub fn huber(pred: f64, target: f64) -> (f64, f64) {
    let e = pred - target;
    if e.abs() <= 1.0 {
        (0.5 * e * e, e)
    } else {
        (e.abs() - 0.5, e.signum())
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(dim: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// One update; afterwards `params` is rounded back to the f32 grid.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
        round_to_f32(params);
    }
}

/// Central-difference derivative of `f` wrt `params[i]`.
pub fn finite_difference<F: FnMut(&[f64]) -> f64>(
    params: &mut Vec<f64>,
    i: usize,
    eps: f64,
    mut f: F,
) -> f64 {
    let orig = params[i];
    params[i] = orig + eps;
    let fp = f(params);
    params[i] = orig - eps;
    let fm = f(params);
    params[i] = orig;
    (fp - fm) / (2.0 * eps)
}

/// Relative error between an analytic and a numeric gradient entry.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}
