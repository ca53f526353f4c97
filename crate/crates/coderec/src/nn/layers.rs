//! Network building blocks with hand-written forward and backward passes.
//!
//! Every layer caches what its backward pass needs during forward, so a
//! training step is `forward -> loss gradient -> backward` over the layer
//! stack in reverse. Convolution is lowered to GEMM via im2col with the
//! whole batch in one matrix product; its weight gradient is likewise a
//! single GEMM over the batch.

use rand_chacha::ChaCha8Rng;

use super::scalar::{matmul_nn, matmul_nt, matmul_tn, Scalar};
use crate::rng::DrawExt;
use crate::{Error, Result};

/// Numerical floor inside the batch-norm variance denominator.
pub const BATCHNORM_EPSILON: f64 = 1e-5;
/// Fraction of the previous running statistic kept per batch-norm update.
pub const BATCHNORM_MOMENTUM: f64 = 0.9;

/// Whether a forward pass is part of training (batch statistics, dropout)
/// or inference (running statistics, no dropout).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// One learnable array and the gradient accumulated for it.
#[derive(Debug, Clone)]
pub(crate) struct Param<F> {
    pub value: Vec<F>,
    pub grad: Vec<F>,
}

impl<F: Scalar> Param<F> {
    fn new(value: Vec<F>) -> Self {
        let grad = vec![F::ZERO; value.len()];
        Self { value, grad }
    }

    pub(crate) fn zero_grad(&mut self) {
        self.grad.fill(F::ZERO);
    }
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Valid (no padding) stride-1 2-D convolution in channel-last layout.
///
/// Weights are stored as a `(k*k*in_c) x out_c` row-major matrix whose row
/// index runs over `(kernel_row, kernel_col, in_channel)` — exactly the
/// column order im2col produces.
pub(crate) struct Conv2d<F: Scalar> {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub weight: Param<F>,
    pub bias: Param<F>,
    cols: Vec<F>,
    cached_batch: usize,
}

impl<F: Scalar> Conv2d<F> {
    pub(crate) fn new(
        in_h: usize,
        in_w: usize,
        in_c: usize,
        out_c: usize,
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if k == 0 || k > in_h || k > in_w {
            return Err(Error::construction(format!(
                "convolution kernel {k} does not fit a {in_h}x{in_w} input"
            )));
        }
        if in_c == 0 || out_c == 0 {
            return Err(Error::construction("convolution needs at least one channel"));
        }
        let fan_in = k * k * in_c;
        let weight = Param::new(he_uniform(fan_in * out_c, fan_in, rng));
        let bias = Param::new(vec![F::ZERO; out_c]);
        Ok(Self { in_h, in_w, in_c, out_c, k, weight, bias, cols: Vec::new(), cached_batch: 0 })
    }

    pub(crate) fn out_h(&self) -> usize {
        self.in_h - self.k + 1
    }

    pub(crate) fn out_w(&self) -> usize {
        self.in_w - self.k + 1
    }

    /// Lowers `x` (batch x in_h x in_w x in_c) into patch rows.
    fn im2col(&self, x: &[F], batch: usize) -> Vec<F> {
        let (oh, ow, k, ic) = (self.out_h(), self.out_w(), self.k, self.in_c);
        let patch = k * k * ic;
        let mut cols = vec![F::ZERO; batch * oh * ow * patch];
        for b in 0..batch {
            for r in 0..oh {
                for c in 0..ow {
                    let row = ((b * oh + r) * ow + c) * patch;
                    for kr in 0..k {
                        // One contiguous (k*ic) run per kernel row.
                        let src = ((b * self.in_h + r + kr) * self.in_w + c) * ic;
                        let dst = row + kr * k * ic;
                        cols[dst..dst + k * ic].copy_from_slice(&x[src..src + k * ic]);
                    }
                }
            }
        }
        cols
    }

    /// Scatters patch-row gradients back onto the input image gradient.
    fn col2im(&self, dcols: &[F], batch: usize) -> Vec<F> {
        let (oh, ow, k, ic) = (self.out_h(), self.out_w(), self.k, self.in_c);
        let patch = k * k * ic;
        let mut dx = vec![F::ZERO; batch * self.in_h * self.in_w * ic];
        for b in 0..batch {
            for r in 0..oh {
                for c in 0..ow {
                    let row = ((b * oh + r) * ow + c) * patch;
                    for kr in 0..k {
                        let dst = ((b * self.in_h + r + kr) * self.in_w + c) * ic;
                        let src = row + kr * k * ic;
                        for i in 0..k * ic {
                            dx[dst + i] += dcols[src + i];
                        }
                    }
                }
            }
        }
        dx
    }

    pub(crate) fn forward(&mut self, x: &[F], batch: usize) -> Vec<F> {
        let rows = batch * self.out_h() * self.out_w();
        let patch = self.k * self.k * self.in_c;
        self.cols = self.im2col(x, batch);
        self.cached_batch = batch;
        let mut out = vec![F::ZERO; rows * self.out_c];
        matmul_nn(rows, patch, self.out_c, &self.cols, &self.weight.value, &mut out, F::ZERO);
        for row in out.chunks_exact_mut(self.out_c) {
            for (y, &b) in row.iter_mut().zip(&self.bias.value) {
                *y += b;
            }
        }
        out
    }

    pub(crate) fn backward(&mut self, dout: &[F]) -> Vec<F> {
        let batch = self.cached_batch;
        let rows = batch * self.out_h() * self.out_w();
        let patch = self.k * self.k * self.in_c;
        // dW += cols^T @ dout in one whole-batch GEMM.
        matmul_tn(patch, rows, self.out_c, &self.cols, dout, &mut self.weight.grad, F::ONE);
        for row in dout.chunks_exact(self.out_c) {
            for (g, &d) in self.bias.grad.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dcols = vec![F::ZERO; rows * patch];
        matmul_nt(rows, self.out_c, patch, dout, &self.weight.value, &mut dcols, F::ZERO);
        self.col2im(&dcols, batch)
    }
}

// ---------------------------------------------------------------------------
// Batch normalisation
// ---------------------------------------------------------------------------

/// Per-channel batch normalisation over all batch and spatial positions.
///
/// Training uses biased batch statistics and folds them into running
/// estimates with momentum [`BATCHNORM_MOMENTUM`]; inference normalises by
/// the running estimates.
pub(crate) struct BatchNorm<F: Scalar> {
    pub channels: usize,
    pub gamma: Param<F>,
    pub beta: Param<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
    xhat: Vec<F>,
    inv_std: Vec<F>,
}

impl<F: Scalar> BatchNorm<F> {
    pub(crate) fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: Param::new(vec![F::ONE; channels]),
            beta: Param::new(vec![F::ZERO; channels]),
            running_mean: vec![F::ZERO; channels],
            running_var: vec![F::ONE; channels],
            xhat: Vec::new(),
            inv_std: Vec::new(),
        }
    }

    pub(crate) fn forward(&mut self, x: &[F], mode: Mode) -> Result<Vec<F>> {
        let c = self.channels;
        let rows = x.len() / c;
        debug_assert_eq!(x.len(), rows * c);
        let eps = F::from_f64(BATCHNORM_EPSILON);
        let mut out = vec![F::ZERO; x.len()];
        match mode {
            Mode::Train => {
                if rows < 2 {
                    return Err(Error::training(
                        "batch normalisation needs at least 2 rows per training batch",
                    ));
                }
                let inv_rows = F::from_f64(1.0 / rows as f64);
                let momentum = F::from_f64(BATCHNORM_MOMENTUM);
                let blend = F::from_f64(1.0 - BATCHNORM_MOMENTUM);
                self.xhat = vec![F::ZERO; x.len()];
                self.inv_std = vec![F::ZERO; c];
                for ch in 0..c {
                    let mut mean = F::ZERO;
                    for r in 0..rows {
                        mean += x[r * c + ch];
                    }
                    mean *= inv_rows;
                    let mut var = F::ZERO;
                    for r in 0..rows {
                        let d = x[r * c + ch] - mean;
                        var += d * d;
                    }
                    var *= inv_rows;
                    let inv_std = F::ONE / (var + eps).sqrt();
                    self.inv_std[ch] = inv_std;
                    self.running_mean[ch] = momentum * self.running_mean[ch] + blend * mean;
                    self.running_var[ch] = momentum * self.running_var[ch] + blend * var;
                    let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
                    for r in 0..rows {
                        let xh = (x[r * c + ch] - mean) * inv_std;
                        self.xhat[r * c + ch] = xh;
                        out[r * c + ch] = g * xh + b;
                    }
                }
            }
            Mode::Eval => {
                for ch in 0..c {
                    let inv_std = F::ONE / (self.running_var[ch] + eps).sqrt();
                    let mean = self.running_mean[ch];
                    let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
                    for r in 0..rows {
                        out[r * c + ch] = g * (x[r * c + ch] - mean) * inv_std + b;
                    }
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn backward(&mut self, dout: &[F]) -> Vec<F> {
        let c = self.channels;
        let rows = dout.len() / c;
        let inv_rows = F::from_f64(1.0 / rows as f64);
        let mut dx = vec![F::ZERO; dout.len()];
        for ch in 0..c {
            let mut dbeta = F::ZERO;
            let mut dgamma = F::ZERO;
            for r in 0..rows {
                let d = dout[r * c + ch];
                dbeta += d;
                dgamma += d * self.xhat[r * c + ch];
            }
            self.beta.grad[ch] += dbeta;
            self.gamma.grad[ch] += dgamma;
            // dx = gamma*inv_std * (dout - mean(dout) - xhat * mean(dout*xhat))
            let scale = self.gamma.value[ch] * self.inv_std[ch];
            let mean_d = dbeta * inv_rows;
            let mean_dx = dgamma * inv_rows;
            for r in 0..rows {
                let i = r * c + ch;
                dx[i] = scale * (dout[i] - mean_d - self.xhat[i] * mean_dx);
            }
        }
        dx
    }
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

/// Element-wise nonlinearity applied after batch norm and between dense
/// layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    /// Stable name used in configuration files.
    pub fn as_str(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    /// Parses the name produced by [`Activation::as_str`].
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::argument(format!(
                "unknown activation {other:?} (expected relu or tanh)"
            ))),
        }
    }
}

/// Activation layer instance caching its pre-activation input.
///
/// Caching the input (rather than the output) lets gradient verification ask
/// how close the last batch came to a ReLU kink.
pub(crate) struct ActLayer<F: Scalar> {
    pub kind: Activation,
    cache: Vec<F>,
}

impl<F: Scalar> ActLayer<F> {
    pub(crate) fn new(kind: Activation) -> Self {
        Self { kind, cache: Vec::new() }
    }

    pub(crate) fn forward(&mut self, x: &[F]) -> Vec<F> {
        self.cache = x.to_vec();
        match self.kind {
            Activation::Relu => x.iter().map(|&v| v.max_with(F::ZERO)).collect(),
            Activation::Tanh => x.iter().map(|&v| v.tanh()).collect(),
        }
    }

    pub(crate) fn backward(&mut self, dout: &[F]) -> Vec<F> {
        match self.kind {
            Activation::Relu => dout
                .iter()
                .zip(&self.cache)
                .map(|(&d, &x)| if x > F::ZERO { d } else { F::ZERO })
                .collect(),
            Activation::Tanh => dout
                .iter()
                .zip(&self.cache)
                .map(|(&d, &x)| {
                    let y = x.tanh();
                    d * (F::ONE - y * y)
                })
                .collect(),
        }
    }

    /// Distance of the last batch to this layer's nearest non-smooth point
    /// (infinite for tanh).
    pub(crate) fn kink_margin(&self) -> f64 {
        match self.kind {
            Activation::Relu => self
                .cache
                .iter()
                .map(|x| x.to_f64().abs())
                .fold(f64::INFINITY, f64::min),
            Activation::Tanh => f64::INFINITY,
        }
    }
}

// ---------------------------------------------------------------------------
// Max pooling
// ---------------------------------------------------------------------------

/// Non-overlapping `p x p` max pooling (stride `p`, valid; trailing rows and
/// columns that do not fill a window are dropped).
pub(crate) struct MaxPool<F: Scalar> {
    pub in_h: usize,
    pub in_w: usize,
    pub channels: usize,
    pub p: usize,
    argmax: Vec<usize>,
    cached_input_len: usize,
    /// Smallest winner-vs-runner-up gap seen in the last forward pass.
    win_margin: f64,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Scalar> MaxPool<F> {
    pub(crate) fn new(in_h: usize, in_w: usize, channels: usize, p: usize) -> Result<Self> {
        if p < 2 || p > in_h || p > in_w {
            return Err(Error::construction(format!(
                "pool window {p} does not fit a {in_h}x{in_w} input"
            )));
        }
        Ok(Self {
            in_h,
            in_w,
            channels,
            p,
            argmax: Vec::new(),
            cached_input_len: 0,
            win_margin: f64::INFINITY,
            _marker: std::marker::PhantomData,
        })
    }

    pub(crate) fn out_h(&self) -> usize {
        self.in_h / self.p
    }

    pub(crate) fn out_w(&self) -> usize {
        self.in_w / self.p
    }

    pub(crate) fn forward(&mut self, x: &[F], batch: usize) -> Vec<F> {
        let (oh, ow, c, p) = (self.out_h(), self.out_w(), self.channels, self.p);
        self.cached_input_len = x.len();
        self.win_margin = f64::INFINITY;
        let mut out = vec![F::ZERO; batch * oh * ow * c];
        self.argmax = vec![0usize; out.len()];
        for b in 0..batch {
            for r in 0..oh {
                for col in 0..ow {
                    for ch in 0..c {
                        let mut best_idx =
                            ((b * self.in_h + r * p) * self.in_w + col * p) * c + ch;
                        let mut best = x[best_idx];
                        let mut second = f64::NEG_INFINITY;
                        for pr in 0..p {
                            for pc in 0..p {
                                let idx = ((b * self.in_h + r * p + pr) * self.in_w
                                    + col * p
                                    + pc)
                                    * c
                                    + ch;
                                if idx == best_idx {
                                    continue;
                                }
                                if x[idx] > best {
                                    second = best.to_f64();
                                    best = x[idx];
                                    best_idx = idx;
                                } else {
                                    second = second.max(x[idx].to_f64());
                                }
                            }
                        }
                        self.win_margin = self.win_margin.min(best.to_f64() - second);
                        let o = ((b * oh + r) * ow + col) * c + ch;
                        out[o] = best;
                        self.argmax[o] = best_idx;
                    }
                }
            }
        }
        out
    }

    /// Smallest winner-vs-runner-up gap in the last forward pass: how close
    /// the batch came to switching an argmax.
    pub(crate) fn kink_margin(&self) -> f64 {
        self.win_margin
    }

    pub(crate) fn backward(&mut self, dout: &[F]) -> Vec<F> {
        let mut dx = vec![F::ZERO; self.cached_input_len];
        for (o, &src) in self.argmax.iter().enumerate() {
            dx[src] += dout[o];
        }
        dx
    }
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// Fully connected layer `y = x W + b` with `W: in x out` row-major.
pub(crate) struct Dense<F: Scalar> {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Param<F>,
    pub bias: Param<F>,
    x_cache: Vec<F>,
    cached_batch: usize,
}

impl<F: Scalar> Dense<F> {
    pub(crate) fn new(
        in_features: usize,
        out_features: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if in_features == 0 || out_features == 0 {
            return Err(Error::construction("dense layer widths must be positive"));
        }
        let weight = Param::new(he_uniform(in_features * out_features, in_features, rng));
        let bias = Param::new(vec![F::ZERO; out_features]);
        Ok(Self { in_features, out_features, weight, bias, x_cache: Vec::new(), cached_batch: 0 })
    }

    pub(crate) fn forward(&mut self, x: &[F], batch: usize) -> Vec<F> {
        self.x_cache = x.to_vec();
        self.cached_batch = batch;
        let mut out = vec![F::ZERO; batch * self.out_features];
        matmul_nn(
            batch,
            self.in_features,
            self.out_features,
            x,
            &self.weight.value,
            &mut out,
            F::ZERO,
        );
        for row in out.chunks_exact_mut(self.out_features) {
            for (y, &b) in row.iter_mut().zip(&self.bias.value) {
                *y += b;
            }
        }
        out
    }

    pub(crate) fn backward(&mut self, dout: &[F]) -> Vec<F> {
        let batch = self.cached_batch;
        matmul_tn(
            self.in_features,
            batch,
            self.out_features,
            &self.x_cache,
            dout,
            &mut self.weight.grad,
            F::ONE,
        );
        for row in dout.chunks_exact(self.out_features) {
            for (g, &d) in self.bias.grad.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = vec![F::ZERO; batch * self.in_features];
        matmul_nt(
            batch,
            self.out_features,
            self.in_features,
            dout,
            &self.weight.value,
            &mut dx,
            F::ZERO,
        );
        dx
    }
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Inverted dropout: surviving activations are scaled by `1/(1-rate)` during
/// training so inference is a plain identity.
pub(crate) struct Dropout<F: Scalar> {
    pub rate: f64,
    mask: Vec<F>,
}

impl<F: Scalar> Dropout<F> {
    pub(crate) fn new(rate: f64) -> Self {
        Self { rate, mask: Vec::new() }
    }

    pub(crate) fn forward(&mut self, x: &[F], mode: Mode, rng: &mut ChaCha8Rng) -> Vec<F> {
        if mode == Mode::Eval || self.rate == 0.0 {
            self.mask.clear();
            return x.to_vec();
        }
        let keep_scale = F::from_f64(1.0 / (1.0 - self.rate));
        self.mask = x
            .iter()
            .map(|_| if rng.uniform() < self.rate { F::ZERO } else { keep_scale })
            .collect();
        x.iter().zip(&self.mask).map(|(&v, &m)| v * m).collect()
    }

    pub(crate) fn backward(&mut self, dout: &[F]) -> Vec<F> {
        if self.mask.is_empty() {
            return dout.to_vec();
        }
        dout.iter().zip(&self.mask).map(|(&d, &m)| d * m).collect()
    }
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy head
// ---------------------------------------------------------------------------

/// In-place row softmax with max subtraction for stability.
pub(crate) fn softmax_rows<F: Scalar>(logits: &mut [F], classes: usize) {
    for row in logits.chunks_exact_mut(classes) {
        let mut max = row[0];
        for &v in row.iter() {
            max = max.max_with(v);
        }
        let mut sum = F::ZERO;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
}

/// Mean negative log-likelihood of the target classes.
pub(crate) fn cross_entropy<F: Scalar>(probs: &[F], labels: &[u16], classes: usize) -> f64 {
    // Softmax probabilities can underflow to exactly 0 when logit gaps are
    // large (early epochs on few batches, where the normalisation statistics
    // are still settling). The true cross-entropy is finite there, so floor
    // the probability at the smallest positive f64 rather than return
    // infinity. NaN from genuine divergence still propagates.
    let floor = f64::MIN_POSITIVE;
    let mut total = 0.0;
    for (row, &label) in probs.chunks_exact(classes).zip(labels) {
        let p = row[label as usize].to_f64();
        total -= if p < floor && !p.is_nan() { floor.ln() } else { p.ln() };
    }
    total / labels.len() as f64
}

/// Gradient of [`cross_entropy`] with respect to the logits:
/// `(softmax - onehot) / batch`.
pub(crate) fn softmax_ce_grad<F: Scalar>(probs: &[F], labels: &[u16], classes: usize) -> Vec<F> {
    let inv_batch = F::from_f64(1.0 / labels.len() as f64);
    let mut grad = probs.to_vec();
    for (row, &label) in grad.chunks_exact_mut(classes).zip(labels) {
        row[label as usize] -= F::ONE;
        for g in row.iter_mut() {
            *g *= inv_batch;
        }
    }
    grad
}

// ---------------------------------------------------------------------------
// Initialisation
// ---------------------------------------------------------------------------

/// He-uniform initialisation: `U(-sqrt(6/fan_in), +sqrt(6/fan_in))`.
fn he_uniform<F: Scalar>(len: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Vec<F> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..len).map(|_| F::from_f64((rng.uniform() * 2.0 - 1.0) * bound)).collect()
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
