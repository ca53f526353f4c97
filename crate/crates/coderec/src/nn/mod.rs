//! Convolutional classifier over decode-evidence tensors, built from
//! scratch on a GEMM primitive.
//!
//! The network follows a fixed pipeline shape driven by [`ModelConfig`]:
//!
//! ```text
//!     [conv -> batchnorm -> activation -> (maxpool)] * C
//!     flatten
//!     [dense -> activation -> dropout] * (D-1)
//!     dense -> softmax
//! ```
//!
//! Convolutions are valid (no padding), stride 1, channel-last; pooling is
//! optional per block (window 1 means none). The whole engine is generic
//! over the element type: `f32` carries production training and inference,
//! while the same code instantiated at `f64` backs finite-difference
//! gradient verification (see [`gradient_check`]).
//!
//! Nothing here knows about channel codes: inputs are `side x side x
//! channels` tensors and labels are class indices, which keeps the module
//! reusable and separately testable.
//!
//! # Open questions
//!
//! How many multiplications does the full-scale reference model cost per
//! frame? [`count_macs`] walks the exact shapes and reports **184,113,152**
//! multiply-accumulates for the default 26x26x4 configuration:
//!
//! ```text
//!     conv1 1x1,   4 -> 128   26x26 out        346,112
//!     conv2 2x2, 128 -> 128   25x25 out     40,960,000
//!     conv3 2x2, 128 -> 128   24x24 out     37,748,736
//!     conv4 2x2, 128 -> 128   23x23 out     34,668,544
//!     dense 67,712 -> 1024                  69,337,088
//!     dense  1,024 -> 1024                   1,048,576
//!     dense  1,024 -> 4                          4,096
//!     total                                184,113,152
//! ```
//!
//! A figure of roughly 1.15e8 multiplications is sometimes quoted for this
//! architecture. That matches the convolutional stages alone — they sum to
//! 113,723,392 — so the quoted number appears to omit the fully connected
//! layers, which are dominated by the 67,712-wide flatten feeding the first
//! 1024-unit layer (69.3M MACs on its own). Both conventions land at the
//! same order of magnitude; the count here includes every GEMM the forward
//! pass performs and excludes batch-norm scaling, pooling comparisons and
//! activation evaluation, which are linear-time and cheap by comparison.

use rand_chacha::ChaCha8Rng;

use crate::rng;
use crate::{Error, Result};

mod gradcheck;
mod io;
mod layers;
mod optim;
mod scalar;
mod train;

pub use gradcheck::{gradient_check, GradientCheckReport};
pub use io::{load_network, save_network, WeightManifest};
pub use layers::{Activation, Mode, BATCHNORM_EPSILON, BATCHNORM_MOMENTUM};
pub use optim::{Nadam, NadamConfig};
pub use scalar::Scalar;
pub use train::{
    evaluate, grid_search, train, train_with_progress, DataView, EpochStats, GridPoint,
    TrainConfig, TrainOutcome,
};

use layers::{ActLayer, BatchNorm, Conv2d, Dense, Dropout, MaxPool, Param};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// One convolutional block: a `kernel x kernel` valid convolution to
/// `channels` output maps, optionally followed by `pool x pool` max pooling
/// (`pool = 1` disables pooling).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvBlockConfig {
    pub kernel: usize,
    pub channels: usize,
    pub pool: usize,
}

/// Complete architecture description.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Input plane side length `s`.
    pub input_side: usize,
    /// Input channels `m` (one per candidate).
    pub input_channels: usize,
    /// Convolutional blocks, applied in order.
    pub conv: Vec<ConvBlockConfig>,
    /// Dense widths after flattening; the last width is the class count.
    pub dense: Vec<usize>,
    /// Dropout rate between hidden dense layers (inverted dropout).
    pub dropout: f64,
    /// Nonlinearity used throughout.
    pub activation: Activation,
}

impl Default for ModelConfig {
    /// The full-scale reference architecture for the four-candidate LDPC
    /// family: four 128-map convolutions with kernels 1,2,2,2 and two
    /// 1024-wide hidden dense layers with 0.65 dropout.
    fn default() -> Self {
        Self {
            input_side: 26,
            input_channels: 4,
            conv: vec![
                ConvBlockConfig { kernel: 1, channels: 128, pool: 1 },
                ConvBlockConfig { kernel: 2, channels: 128, pool: 1 },
                ConvBlockConfig { kernel: 2, channels: 128, pool: 1 },
                ConvBlockConfig { kernel: 2, channels: 128, pool: 1 },
            ],
            dense: vec![1024, 1024, 4],
            dropout: 0.65,
            activation: Activation::Relu,
        }
    }
}

impl ModelConfig {
    /// The full-scale reference architecture on an arbitrary tensor geometry.
    pub fn full_scale(input_side: usize, input_channels: usize, classes: usize) -> Self {
        Self {
            input_side,
            input_channels,
            dense: vec![1024, 1024, classes],
            ..Self::default()
        }
    }

    /// A compact profile with the same kernel pattern, sized for single-core
    /// training at desk scale.
    pub fn compact(input_side: usize, input_channels: usize, classes: usize) -> Self {
        Self {
            input_side,
            input_channels,
            conv: vec![
                ConvBlockConfig { kernel: 1, channels: 24, pool: 1 },
                ConvBlockConfig { kernel: 2, channels: 24, pool: 1 },
                ConvBlockConfig { kernel: 2, channels: 24, pool: 1 },
                ConvBlockConfig { kernel: 2, channels: 24, pool: 1 },
            ],
            dense: vec![192, classes],
            dropout: 0.5,
            activation: Activation::Relu,
        }
    }

    /// Class count (width of the final dense layer).
    pub fn classes(&self) -> usize {
        self.dense.last().copied().unwrap_or(0)
    }

    /// Flat input length `side^2 * channels`.
    pub fn input_len(&self) -> usize {
        self.input_side * self.input_side * self.input_channels
    }

    /// Walks the feature-map shape through the conv blocks, rejecting any
    /// block that does not fit. Returns `(h, w, c)` after each block plus
    /// the flattened feature count.
    fn shape_walk(&self) -> Result<(Vec<(usize, usize, usize)>, usize)> {
        if self.input_side == 0 || self.input_channels == 0 {
            return Err(Error::construction("input tensor must be non-empty"));
        }
        if self.dense.is_empty() {
            return Err(Error::construction("at least one dense layer is required"));
        }
        if self.dense.iter().any(|&w| w == 0) {
            return Err(Error::construction("dense widths must be positive"));
        }
        if self.classes() < 2 {
            return Err(Error::construction("the final dense width is the class count; need >= 2"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::construction(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        let (mut h, mut w, mut c) = (self.input_side, self.input_side, self.input_channels);
        let mut shapes = Vec::with_capacity(self.conv.len());
        for (i, block) in self.conv.iter().enumerate() {
            if block.kernel == 0 || block.kernel > h || block.kernel > w {
                return Err(Error::construction(format!(
                    "conv block {}: kernel {} does not fit a {h}x{w} input",
                    i + 1,
                    block.kernel
                )));
            }
            if block.channels == 0 {
                return Err(Error::construction(format!(
                    "conv block {}: output channels must be positive",
                    i + 1
                )));
            }
            h -= block.kernel - 1;
            w -= block.kernel - 1;
            c = block.channels;
            if block.pool > 1 {
                if block.pool > h || block.pool > w {
                    return Err(Error::construction(format!(
                        "conv block {}: pool window {} does not fit a {h}x{w} map",
                        i + 1,
                        block.pool
                    )));
                }
                h /= block.pool;
                w /= block.pool;
            }
            shapes.push((h, w, c));
        }
        Ok((shapes, h * w * c))
    }

    /// Checks that the architecture is internally consistent.
    pub fn validate(&self) -> Result<()> {
        self.shape_walk().map(|_| ())
    }
}

/// Multiply-accumulate count for one forward pass of `config`: the usual
/// `outH*outW*k^2*Cin*Cout` per convolution plus `in*out` per dense layer.
pub fn count_macs(config: &ModelConfig) -> Result<u64> {
    let (shapes, features) = config.shape_walk()?;
    let mut total = 0u64;
    let (mut h, mut w, mut cin) = (config.input_side, config.input_side, config.input_channels);
    for (block, &(oh, ow, oc)) in config.conv.iter().zip(&shapes) {
        let conv_h = h - block.kernel + 1;
        let conv_w = w - block.kernel + 1;
        total += (conv_h * conv_w * block.kernel * block.kernel * cin * block.channels) as u64;
        (h, w, cin) = (oh, ow, oc);
    }
    let mut inputs = features;
    for &width in &config.dense {
        total += (inputs * width) as u64;
        inputs = width;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// One stage of the pipeline, with a stable name for diagnostics.
enum Stage<F: Scalar> {
    Conv(Conv2d<F>),
    Norm(BatchNorm<F>),
    Act(ActLayer<F>),
    Pool(MaxPool<F>),
    Dense(Dense<F>),
    Dropout(Dropout<F>),
}

/// A fully assembled network with parameters, caches and shape bookkeeping.
pub struct Network<F: Scalar> {
    config: ModelConfig,
    stages: Vec<(String, Stage<F>)>,
}

impl<F: Scalar> std::fmt::Debug for Network<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Network")
            .field("config", &self.config)
            .field("stages", &self.stages.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>())
            .finish()
    }
}

impl<F: Scalar> Network<F> {
    /// Builds and He-initialises a network; all randomness comes from `seed`.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        let (_, features) = config.shape_walk()?;
        let mut rng = rng::chacha(seed);
        let mut stages: Vec<(String, Stage<F>)> = Vec::new();
        let (mut h, mut w, mut c) = (config.input_side, config.input_side, config.input_channels);
        for (i, block) in config.conv.iter().enumerate() {
            let n = i + 1;
            let conv = Conv2d::new(h, w, c, block.channels, block.kernel, &mut rng)?;
            h = conv.out_h();
            w = conv.out_w();
            c = block.channels;
            stages.push((format!("conv{n}"), Stage::Conv(conv)));
            stages.push((format!("norm{n}"), Stage::Norm(BatchNorm::new(c))));
            stages.push((format!("act{n}"), Stage::Act(ActLayer::new(config.activation))));
            if block.pool > 1 {
                let pool = MaxPool::new(h, w, c, block.pool)?;
                h = pool.out_h();
                w = pool.out_w();
                stages.push((format!("pool{n}"), Stage::Pool(pool)));
            }
        }
        let mut inputs = features;
        let last = config.dense.len() - 1;
        for (j, &width) in config.dense.iter().enumerate() {
            let n = j + 1;
            stages.push((format!("dense{n}"), Stage::Dense(Dense::new(inputs, width, &mut rng)?)));
            if j < last {
                stages.push((
                    format!("dense{n}_act"),
                    Stage::Act(ActLayer::new(config.activation)),
                ));
                if config.dropout > 0.0 {
                    stages.push((
                        format!("dense{n}_dropout"),
                        Stage::Dropout(Dropout::new(config.dropout)),
                    ));
                }
            }
            inputs = width;
        }
        Ok(Self { config: config.clone(), stages })
    }

    /// The architecture this network was built from.
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Class count.
    pub fn classes(&self) -> usize {
        self.config.classes()
    }

    /// Flat input length per sample.
    pub fn input_len(&self) -> usize {
        self.config.input_len()
    }

    /// Runs the pipeline to logits. `rng` drives dropout in training mode
    /// and is untouched otherwise.
    pub(crate) fn forward(
        &mut self,
        input: &[F],
        batch: usize,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<F>> {
        if input.len() != batch * self.config.input_len() {
            return Err(Error::argument(format!(
                "input holds {} values, expected {} x {}",
                input.len(),
                batch,
                self.config.input_len()
            )));
        }
        let mut x = input.to_vec();
        for (_, stage) in self.stages.iter_mut() {
            x = match stage {
                Stage::Conv(conv) => conv.forward(&x, batch),
                Stage::Norm(norm) => norm.forward(&x, mode)?,
                Stage::Act(act) => act.forward(&x),
                Stage::Pool(pool) => pool.forward(&x, batch),
                Stage::Dense(dense) => dense.forward(&x, batch),
                Stage::Dropout(dropout) => dropout.forward(&x, mode, rng),
            };
        }
        Ok(x)
    }

    /// Backpropagates a logit gradient, accumulating parameter gradients and
    /// returning the input gradient.
    pub(crate) fn backward(&mut self, dlogits: &[F]) -> Vec<F> {
        let mut d = dlogits.to_vec();
        for (_, stage) in self.stages.iter_mut().rev() {
            d = match stage {
                Stage::Conv(conv) => conv.backward(&d),
                Stage::Norm(norm) => norm.backward(&d),
                Stage::Act(act) => act.backward(&d),
                Stage::Pool(pool) => pool.backward(&d),
                Stage::Dense(dense) => dense.backward(&d),
                Stage::Dropout(dropout) => dropout.backward(&d),
            };
        }
        d
    }

    /// Clears accumulated gradients.
    pub(crate) fn zero_grads(&mut self) {
        for (_, p) in self.params_mut() {
            p.zero_grad();
        }
    }

    /// All trainable parameters in declaration order, with the owning
    /// stage's name.
    pub(crate) fn params_mut(&mut self) -> Vec<(&str, &mut Param<F>)> {
        let mut out: Vec<(&str, &mut Param<F>)> = Vec::new();
        for (name, stage) in self.stages.iter_mut() {
            match stage {
                Stage::Conv(conv) => {
                    out.push((name.as_str(), &mut conv.weight));
                    out.push((name.as_str(), &mut conv.bias));
                }
                Stage::Norm(norm) => {
                    out.push((name.as_str(), &mut norm.gamma));
                    out.push((name.as_str(), &mut norm.beta));
                }
                Stage::Dense(dense) => {
                    out.push((name.as_str(), &mut dense.weight));
                    out.push((name.as_str(), &mut dense.bias));
                }
                Stage::Act(_) | Stage::Pool(_) | Stage::Dropout(_) => {}
            }
        }
        out
    }

    /// Every persistent array in declaration order: trainable parameters
    /// plus batch-norm running statistics. This is the serialisation order.
    pub(crate) fn state_arrays(&self) -> Vec<&[F]> {
        let mut out: Vec<&[F]> = Vec::new();
        for (_, stage) in self.stages.iter() {
            match stage {
                Stage::Conv(conv) => {
                    out.push(&conv.weight.value);
                    out.push(&conv.bias.value);
                }
                Stage::Norm(norm) => {
                    out.push(&norm.gamma.value);
                    out.push(&norm.beta.value);
                    out.push(&norm.running_mean);
                    out.push(&norm.running_var);
                }
                Stage::Dense(dense) => {
                    out.push(&dense.weight.value);
                    out.push(&dense.bias.value);
                }
                Stage::Act(_) | Stage::Pool(_) | Stage::Dropout(_) => {}
            }
        }
        out
    }

    /// Names of [`Network::state_arrays`] entries, in the same order.
    pub(crate) fn state_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, stage) in self.stages.iter() {
            match stage {
                Stage::Conv(_) | Stage::Dense(_) => {
                    out.push(format!("{name}.weight"));
                    out.push(format!("{name}.bias"));
                }
                Stage::Norm(_) => {
                    out.push(format!("{name}.gamma"));
                    out.push(format!("{name}.beta"));
                    out.push(format!("{name}.running_mean"));
                    out.push(format!("{name}.running_var"));
                }
                Stage::Act(_) | Stage::Pool(_) | Stage::Dropout(_) => {}
            }
        }
        out
    }

    /// Snapshot of [`Network::state_arrays`] by value.
    pub fn export_state(&self) -> Vec<Vec<F>> {
        self.state_arrays().into_iter().map(<[F]>::to_vec).collect()
    }

    /// Restores a snapshot taken from a network of identical architecture.
    pub fn import_state(&mut self, state: &[Vec<F>]) -> Result<()> {
        let mut slots: Vec<&mut Vec<F>> = Vec::new();
        for (_, stage) in self.stages.iter_mut() {
            match stage {
                Stage::Conv(conv) => {
                    slots.push(&mut conv.weight.value);
                    slots.push(&mut conv.bias.value);
                }
                Stage::Norm(norm) => {
                    slots.push(&mut norm.gamma.value);
                    slots.push(&mut norm.beta.value);
                    slots.push(&mut norm.running_mean);
                    slots.push(&mut norm.running_var);
                }
                Stage::Dense(dense) => {
                    slots.push(&mut dense.weight.value);
                    slots.push(&mut dense.bias.value);
                }
                Stage::Act(_) | Stage::Pool(_) | Stage::Dropout(_) => {}
            }
        }
        if slots.len() != state.len() {
            return Err(Error::format(format!(
                "state holds {} arrays, the architecture needs {}",
                state.len(),
                slots.len()
            )));
        }
        for (slot, values) in slots.into_iter().zip(state) {
            if slot.len() != values.len() {
                return Err(Error::format(format!(
                    "state array of {} values does not fit a slot of {}",
                    values.len(),
                    slot.len()
                )));
            }
            slot.copy_from_slice(values);
        }
        Ok(())
    }

    /// Smallest distance to a non-smooth decision (ReLU kink, pool argmax
    /// switch) observed in the most recent forward pass.
    pub(crate) fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for (_, stage) in self.stages.iter() {
            margin = margin.min(match stage {
                Stage::Act(act) => act.kink_margin(),
                Stage::Pool(pool) => pool.kink_margin(),
                _ => f64::INFINITY,
            });
        }
        margin
    }

    /// Class probabilities for a batch, in inference mode.
    pub fn predict_probs(&mut self, input: &[F], batch: usize) -> Result<Vec<F>> {
        let mut scratch = rng::chacha(0);
        let mut logits = self.forward(input, batch, Mode::Eval, &mut scratch)?;
        layers::softmax_rows(&mut logits, self.classes());
        Ok(logits)
    }

    /// Most likely class per sample.
    pub fn predict_classes(&mut self, input: &[F], batch: usize) -> Result<Vec<usize>> {
        let probs = self.predict_probs(input, batch)?;
        Ok(probs
            .chunks_exact(self.classes())
            .map(|row| {
                let mut best = 0;
                for (i, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
