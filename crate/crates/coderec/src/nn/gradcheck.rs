//! Finite-difference verification of the analytic gradients.
//!
//! The whole network is instantiated at `f64`, a small batch is pushed
//! through in training mode (dropout must be disabled), and every parameter
//! of every layer — plus the input itself — is perturbed with central
//! differences. Trials whose forward pass lands too close to a non-smooth
//! point (a ReLU kink or a max-pool argmax switch) are rejected and redrawn:
//! a finite difference straddling such a point measures the wrong one-sided
//! derivative, which would indict a correct backward pass.

use super::layers::{cross_entropy, softmax_ce_grad, softmax_rows, Mode};
use super::{ModelConfig, Network};
use crate::rng::{self, DrawExt};
use crate::{Error, Result};

/// Batch size used for every trial (batch norm needs at least two rows).
const BATCH: usize = 3;
/// Minimum distance to a ReLU kink / pool argmax switch for a trial to count.
/// Probes move pre-activations by O(1e-5), a safety factor of ~100 below.
const MARGIN_FLOOR: f64 = 1e-3;
/// Central-difference step is `1e-5 * max(1, |theta|)`.
const STEP_SCALE: f64 = 1e-5;

/// Worst relative disagreement per layer (plus the `"input"` pseudo-layer),
/// with trial bookkeeping.
#[derive(Debug, Clone)]
pub struct GradientCheckReport {
    /// `(layer name, max relative error over all trials and indices)`,
    /// in network declaration order, ending with `"input"`.
    pub per_layer: Vec<(String, f64)>,
    /// Accepted trials (the requested count).
    pub trials: usize,
    /// Trials rejected for sitting too close to a kink.
    pub rejected: usize,
}

impl GradientCheckReport {
    /// Largest relative error across every layer.
    pub fn max_error(&self) -> f64 {
        self.per_layer.iter().map(|(_, e)| *e).fold(0.0, f64::max)
    }

    /// Whether every layer agrees within `tolerance`.
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_error() < tolerance
    }
}

/// Relative error between a finite difference and an analytic gradient.
///
/// Differences below 1e-9 count as exact: that is the cancellation noise
/// floor of an O(1) loss at the probe step size, and it keeps genuinely
/// zero gradients (a dead ReLU unit's bias) from dividing noise by noise.
fn relative_error(fd: f64, analytic: f64) -> f64 {
    let diff = (fd - analytic).abs();
    if diff < 1e-9 {
        return 0.0;
    }
    diff / fd.abs().max(analytic.abs()).max(1e-4)
}

/// Runs `trials` accepted finite-difference trials against `config` and
/// reports the worst relative error per layer.
///
/// Fresh weights, inputs and labels are drawn for every trial from streams
/// derived off `seed`, so the check covers many operating points rather
/// than one lucky initialisation.
pub fn gradient_check(config: &ModelConfig, trials: usize, seed: u64) -> Result<GradientCheckReport> {
    if config.dropout != 0.0 {
        return Err(Error::argument(
            "finite-difference verification requires dropout disabled (rate 0)",
        ));
    }
    if trials == 0 {
        return Err(Error::argument("at least one trial is required"));
    }
    config.validate()?;

    let classes = config.classes();
    let input_len = config.input_len();
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut attempt = 0u64;

    while accepted < trials {
        if attempt > 20 * trials as u64 + 100 {
            return Err(Error::metric(format!(
                "could not find {trials} well-conditioned trials in {attempt} attempts"
            )));
        }
        let trial_seed = rng::derive_seed(seed, attempt);
        attempt += 1;

        let mut net = Network::<f64>::new(config, rng::derive_seed(trial_seed, 0))?;
        let mut draw = rng::chacha(rng::derive_seed(trial_seed, 1));
        let input: Vec<f64> = (0..BATCH * input_len).map(|_| draw.gaussian() * 0.8).collect();
        let labels: Vec<u16> = (0..BATCH).map(|_| draw.index(classes) as u16).collect();

        // Condition check: reject trials that straddle a kink.
        let mut scratch = rng::chacha(0);
        net.forward(&input, BATCH, Mode::Train, &mut scratch)?;
        if net.kink_margin() < MARGIN_FLOOR {
            rejected += 1;
            continue;
        }
        accepted += 1;

        // Analytic gradients for every parameter and the input.
        net.zero_grads();
        let mut probs = net.forward(&input, BATCH, Mode::Train, &mut scratch)?;
        softmax_rows(&mut probs, classes);
        let dlogits = softmax_ce_grad(&probs, &labels, classes);
        let dinput = net.backward(&dlogits);
        let analytic: Vec<(String, Vec<f64>)> = net
            .params_mut()
            .iter()
            .map(|(name, p)| (name.to_string(), p.grad.clone()))
            .collect();

        if worst.is_empty() {
            worst = analytic.iter().map(|(name, _)| (name.clone(), 0.0)).collect();
            worst.dedup_by(|a, b| a.0 == b.0);
            worst.push(("input".into(), 0.0));
        }

        let loss_at = |net: &mut Network<f64>, x: &[f64]| -> f64 {
            let mut scratch = rng::chacha(0);
            let mut logits = net.forward(x, BATCH, Mode::Train, &mut scratch).unwrap();
            softmax_rows(&mut logits, classes);
            cross_entropy(&logits, &labels, classes)
        };

        // Parameters: perturb every index of every array.
        for (slot, (name, grads)) in analytic.iter().enumerate() {
            let mut layer_worst = 0.0f64;
            for i in 0..grads.len() {
                let theta = net.params_mut()[slot].1.value[i];
                let h = STEP_SCALE * theta.abs().max(1.0);
                net.params_mut()[slot].1.value[i] = theta + h;
                let plus = loss_at(&mut net, &input);
                net.params_mut()[slot].1.value[i] = theta - h;
                let minus = loss_at(&mut net, &input);
                net.params_mut()[slot].1.value[i] = theta;
                let fd = (plus - minus) / (2.0 * h);
                layer_worst = layer_worst.max(relative_error(fd, grads[i]));
            }
            let entry = worst.iter_mut().find(|(n, _)| n == name).unwrap();
            entry.1 = entry.1.max(layer_worst);
        }

        // Input gradient.
        let mut x = input.clone();
        let mut input_worst = 0.0f64;
        for i in 0..x.len() {
            let v = x[i];
            let h = STEP_SCALE * v.abs().max(1.0);
            x[i] = v + h;
            let plus = loss_at(&mut net, &x);
            x[i] = v - h;
            let minus = loss_at(&mut net, &x);
            x[i] = v;
            let fd = (plus - minus) / (2.0 * h);
            input_worst = input_worst.max(relative_error(fd, dinput[i]));
        }
        let entry = worst.last_mut().unwrap();
        entry.1 = entry.1.max(input_worst);
    }

    Ok(GradientCheckReport { per_layer: worst, trials: accepted, rejected })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
