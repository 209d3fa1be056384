//! Minimal differentiable building blocks.
//!
//! Parameters live in a [`ParamStore`]; layers hold [`ParamId`]s into it.
//! Every layer has a hand-derived backward pass that *accumulates* into the
//! store's gradient buffers, so shared layers and repeated calls sum up
//! naturally. Batches are matrices with one row per sample.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const LOGVAR_MIN: f64 = -20.0;
pub const LOGVAR_MAX: f64 = 20.0;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamArray {
    pub name: String,
    pub value: Matrix,
    #[serde(skip, default = "empty_matrix")]
    pub grad: Matrix,
}

fn empty_matrix() -> Matrix {
    Matrix::zeros(0, 0)
}

impl ParamArray {
    pub fn new(name: String, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        ParamArray { name, value, grad }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<ParamArray>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(&mut self, name: String, rows: usize, cols: usize) -> ParamId {
        self.params.push(ParamArray::new(name, Matrix::zeros(rows, cols)));
        ParamId(self.params.len() - 1)
    }

    /// Uniform in `±1/sqrt(fan_in)`.
    pub fn uniform<R: Rng>(&mut self, name: String, rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> ParamId {
        let bound = 1.0 / libm::sqrt(fan_in.max(1) as f64);
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
        self.params.push(ParamArray::new(name, Matrix::from_vec(rows, cols, data)));
        ParamId(self.params.len() - 1)
    }

    #[inline]
    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    #[inline]
    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].value
    }

    #[inline]
    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].grad
    }

    #[inline]
    pub fn grad_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.params[id.0].grad
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamArray> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut ParamArray> {
        self.params.iter_mut()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.as_slice().len()).sum()
    }
}

/// Accumulates `dW += d_actᵀ·input` and returns `d_act·W`.
fn affine_backward(store: &mut ParamStore, weight: ParamId, input: &Matrix, d_act: &Matrix) -> Matrix {
    let d_input = d_act.matmul(store.value(weight));
    d_act.t_matmul_into(input, store.grad_mut(weight));
    d_input
}

fn bias_backward(store: &mut ParamStore, bias: ParamId, d_act: &Matrix) {
    let g = store.grad_mut(bias).as_mut_slice();
    for r in 0..d_act.rows() {
        for (gj, dj) in g.iter_mut().zip(d_act.row(r)) {
            *gj += dj;
        }
    }
}

fn add_bias(out: &mut Matrix, bias: &Matrix) {
    let b = bias.as_slice();
    for r in 0..out.rows() {
        for (o, bj) in out.row_mut(r).iter_mut().zip(b) {
            *o += bj;
        }
    }
}

/// `y = x·Wᵀ + b` with `W` of shape `out × in`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        let weight = store.uniform(alloc::format!("{name}.weight"), output_dim, input_dim, input_dim, rng);
        let bias = store.zeros(alloc::format!("{name}.bias"), 1, output_dim);
        Linear { weight, bias, input_dim, output_dim }
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim {
            return Err(Error::ShapeMismatch(alloc::format!(
                "linear expects {} inputs, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        let mut y = x.matmul_t(store.value(self.weight));
        add_bias(&mut y, store.value(self.bias));
        Ok(y)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&self, store: &mut ParamStore, x: &Matrix, dy: &Matrix) -> Matrix {
        bias_backward(store, self.bias, dy);
        affine_backward(store, self.weight, x, dy)
    }
}

/// Gated recurrent unit with the gate convention
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// h̃  = tanh(W x + U (r ⊙ h) + b)
/// h' = (1 − z) ⊙ h + z ⊙ h̃
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GruCell {
    pub w_update: ParamId,
    pub u_update: ParamId,
    pub b_update: ParamId,
    pub w_reset: ParamId,
    pub u_reset: ParamId,
    pub b_reset: ParamId,
    pub w_candidate: ParamId,
    pub u_candidate: ParamId,
    pub b_candidate: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    x: Matrix,
    h: Matrix,
    z: Matrix,
    r: Matrix,
    candidate: Matrix,
    reset_hidden: Matrix,
}

impl GruCell {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let w = |gate: &str, store: &mut ParamStore, rng: &mut R| {
            (
                store.uniform(alloc::format!("{name}.w_{gate}"), hidden_dim, input_dim, hidden_dim, rng),
                store.uniform(alloc::format!("{name}.u_{gate}"), hidden_dim, hidden_dim, hidden_dim, rng),
                store.zeros(alloc::format!("{name}.b_{gate}"), 1, hidden_dim),
            )
        };
        let (w_update, u_update, b_update) = w("update", store, rng);
        let (w_reset, u_reset, b_reset) = w("reset", store, rng);
        let (w_candidate, u_candidate, b_candidate) = w("candidate", store, rng);
        GruCell {
            w_update,
            u_update,
            b_update,
            w_reset,
            u_reset,
            b_reset,
            w_candidate,
            u_candidate,
            b_candidate,
            input_dim,
            hidden_dim,
        }
    }

    fn gate(&self, store: &ParamStore, w: ParamId, u: ParamId, b: ParamId, x: &Matrix, h: &Matrix) -> Matrix {
        let mut a = x.matmul_t(store.value(w));
        a.add_assign(&h.matmul_t(store.value(u)));
        add_bias(&mut a, store.value(b));
        a
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix, h: &Matrix) -> Result<(Matrix, GruCache)> {
        if x.cols() != self.input_dim || h.cols() != self.hidden_dim || x.rows() != h.rows() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "gru expects ({}, {}) inputs, got x {:?}, h {:?}",
                self.input_dim,
                self.hidden_dim,
                x.shape(),
                h.shape()
            )));
        }
        let z = self.gate(store, self.w_update, self.u_update, self.b_update, x, h).map(sigmoid);
        let r = self.gate(store, self.w_reset, self.u_reset, self.b_reset, x, h).map(sigmoid);
        let mut reset_hidden = r.clone();
        for (a, b) in reset_hidden.as_mut_slice().iter_mut().zip(h.as_slice()) {
            *a *= b;
        }
        let candidate =
            self.gate(store, self.w_candidate, self.u_candidate, self.b_candidate, x, &reset_hidden).map(tanh);
        let mut out = Matrix::zeros(h.rows(), h.cols());
        for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
            let zi = z.as_slice()[i];
            *o = (1.0 - zi) * h.as_slice()[i] + zi * candidate.as_slice()[i];
        }
        let cache = GruCache { x: x.clone(), h: h.clone(), z, r, candidate, reset_hidden };
        Ok((out, cache))
    }

    /// Returns `(dx, dh)` and accumulates parameter gradients.
    pub fn backward(&self, store: &mut ParamStore, cache: &GruCache, d_out: &Matrix) -> (Matrix, Matrix) {
        let n = d_out.as_slice().len();
        let (z, r, c, h) = (cache.z.as_slice(), cache.r.as_slice(), cache.candidate.as_slice(), cache.h.as_slice());
        let dout = d_out.as_slice();
        let (rows, cols) = d_out.shape();

        let mut dh = Matrix::zeros(rows, cols);
        let mut d_update = Matrix::zeros(rows, cols);
        let mut d_cand = Matrix::zeros(rows, cols);
        for i in 0..n {
            dh.as_mut_slice()[i] = dout[i] * (1.0 - z[i]);
            d_update.as_mut_slice()[i] = dout[i] * (c[i] - h[i]) * z[i] * (1.0 - z[i]);
            d_cand.as_mut_slice()[i] = dout[i] * z[i] * (1.0 - c[i] * c[i]);
        }

        bias_backward(store, self.b_candidate, &d_cand);
        let mut dx = affine_backward(store, self.w_candidate, &cache.x, &d_cand);
        let d_reset_hidden = affine_backward(store, self.u_candidate, &cache.reset_hidden, &d_cand);
        let mut d_reset = Matrix::zeros(rows, cols);
        for i in 0..n {
            let g = d_reset_hidden.as_slice()[i];
            dh.as_mut_slice()[i] += g * r[i];
            d_reset.as_mut_slice()[i] = g * h[i] * r[i] * (1.0 - r[i]);
        }

        bias_backward(store, self.b_update, &d_update);
        dx.add_assign(&affine_backward(store, self.w_update, &cache.x, &d_update));
        dh.add_assign(&affine_backward(store, self.u_update, &cache.h, &d_update));

        bias_backward(store, self.b_reset, &d_reset);
        dx.add_assign(&affine_backward(store, self.w_reset, &cache.x, &d_reset));
        dh.add_assign(&affine_backward(store, self.u_reset, &cache.h, &d_reset));

        (dx, dh)
    }
}

/// Diagonal Gaussian per row: mean and log-variance, log-variance already
/// clamped to `[LOGVAR_MIN, LOGVAR_MAX]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHead {
    pub mean: Matrix,
    pub logvar: Matrix,
}

impl GaussianHead {
    /// Clamps raw log-variances; [`GaussianHead::clamp_mask`] tells which
    /// entries pass gradient.
    pub fn new(mean: Matrix, raw_logvar: Matrix) -> Self {
        let logvar = raw_logvar.map(|v| v.clamp(LOGVAR_MIN, LOGVAR_MAX));
        GaussianHead { mean, logvar }
    }

    /// 1 where the raw log-variance was inside the clamp range.
    pub fn clamp_mask(raw_logvar: &Matrix) -> Matrix {
        raw_logvar.map(|v| if (LOGVAR_MIN..=LOGVAR_MAX).contains(&v) { 1.0 } else { 0.0 })
    }

    pub fn variance(&self) -> Matrix {
        self.logvar.map(libm::exp)
    }
}

pub fn standard_normal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// `z = μ + exp(½·logvar)·ε`
pub fn reparameterize(head: &GaussianHead, eps: &Matrix) -> Matrix {
    let mut z = head.mean.clone();
    for ((zi, lv), e) in z.as_mut_slice().iter_mut().zip(head.logvar.as_slice()).zip(eps.as_slice()) {
        *zi += libm::exp(0.5 * lv) * e;
    }
    z
}

/// Draws ε from the generator and returns `(z, ε)`.
pub fn sample_reparameterized<R: Rng>(head: &GaussianHead, rng: &mut R) -> (Matrix, Matrix) {
    let eps = standard_normal(head.mean.rows(), head.mean.cols(), rng);
    (reparameterize(head, &eps), eps)
}

/// Gradients of a loss through `z` with respect to `(μ, logvar)`.
pub fn reparameterize_backward(head: &GaussianHead, eps: &Matrix, dz: &Matrix) -> (Matrix, Matrix) {
    let dmean = dz.clone();
    let mut dlogvar = dz.clone();
    for ((d, lv), e) in dlogvar.as_mut_slice().iter_mut().zip(head.logvar.as_slice()).zip(eps.as_slice()) {
        *d *= 0.5 * libm::exp(0.5 * lv) * e;
    }
    (dmean, dlogvar)
}

/// `KL(N(μ, σ²) ‖ N(0, I))` for every row: `½ Σ (μ² + σ² − 1 − log σ²)`.
pub fn kl_rows(head: &GaussianHead) -> Vec<f64> {
    (0..head.mean.rows())
        .map(|r| {
            let s: f64 = head
                .mean
                .row(r)
                .iter()
                .zip(head.logvar.row(r))
                .map(|(m, lv)| m * m + libm::expm1(*lv) - lv)
                .sum();
            0.5 * s
        })
        .collect()
}

pub fn kl_to_standard_normal(head: &GaussianHead) -> f64 {
    kl_rows(head).iter().sum()
}

/// Gradient of `Σ_rows weight[row] · KL_row` with respect to `(μ, logvar)`.
pub fn kl_backward(head: &GaussianHead, weights: &[f64]) -> (Matrix, Matrix) {
    let mut dmean = head.mean.clone();
    let mut dlogvar = head.logvar.map(|lv| 0.5 * libm::expm1(lv));
    for r in 0..head.mean.rows() {
        let w = weights[r];
        dmean.row_mut(r).iter_mut().for_each(|x| *x *= w);
        dlogvar.row_mut(r).iter_mut().for_each(|x| *x *= w);
    }
    (dmean, dlogvar)
}

/// Adaptive-moment gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn first_moments(&self) -> &[Matrix] {
        &self.first
    }

    /// Applies one update from the store's gradient buffers. Nothing is
    /// modified when any gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if let Some(bad) = store.iter().find(|p| !p.grad.is_finite()) {
            return Err(Error::NonFiniteGradient(bad.name.clone()));
        }
        if self.first.len() != store.len() {
            self.first = store.iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(self.beta1, f64::from(t));
        let c2 = 1.0 - libm::pow(self.beta2, f64::from(t));
        for ((p, m), v) in store.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let vals = p.value.as_mut_slice();
            let grads = p.grad.as_slice();
            for i in 0..vals.len() {
                let g = grads[i];
                let mi = &mut m.as_mut_slice()[i];
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                let vi = &mut v.as_mut_slice()[i];
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                vals[i] -= self.learning_rate * m_hat / (libm::sqrt(v_hat) + self.epsilon);
            }
        }
        Ok(())
    }
}
