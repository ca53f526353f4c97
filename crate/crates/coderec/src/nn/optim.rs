//! Nadam: Adam with Nesterov momentum.
//!
//! Update rule per element, with step counter `t` starting at 1:
//!
//! ```text
//!     m   = b1*m + (1 - b1)*g
//!     v   = b2*v + (1 - b2)*g^2
//!     m^  = m / (1 - b1^(t+1))         (look-ahead bias correction)
//!     v^  = v / (1 - b2^t)
//!     w  -= lr * (b1*m^ + (1 - b1)*g / (1 - b1^t)) / (sqrt(v^) + eps)
//! ```

use super::layers::Param;
use super::scalar::Scalar;

/// Hyper-parameters of the Nadam optimiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NadamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NadamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.002, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Optimiser state: first and second moment estimates per parameter array.
///
/// The arrays handed to [`Nadam::step_arrays`] must arrive in the same order
/// and with the same shapes on every call; moments are matched positionally.
pub struct Nadam<F: Scalar> {
    config: NadamConfig,
    t: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> Nadam<F> {
    pub fn new(config: NadamConfig) -> Self {
        Self { config, t: 0, m: Vec::new(), v: Vec::new() }
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update to `(values, gradients)` pairs.
    pub fn step_arrays(&mut self, arrays: &mut [(&mut [F], &[F])]) {
        if self.m.is_empty() {
            self.m = arrays.iter().map(|(w, _)| vec![F::ZERO; w.len()]).collect();
            self.v = self.m.clone();
        }
        debug_assert_eq!(self.m.len(), arrays.len());
        self.t += 1;
        let t = self.t as f64;
        let c = &self.config;
        let b1 = F::from_f64(c.beta1);
        let b2 = F::from_f64(c.beta2);
        let one_m_b1 = F::from_f64(1.0 - c.beta1);
        let one_m_b2 = F::from_f64(1.0 - c.beta2);
        let lr = F::from_f64(c.learning_rate);
        let eps = F::from_f64(c.epsilon);
        // Bias corrections are scalars, so they are computed in f64.
        let m_corr = F::from_f64(1.0 / (1.0 - c.beta1.powf(t + 1.0)));
        let g_corr = F::from_f64(1.0 / (1.0 - c.beta1.powf(t)));
        let v_corr = F::from_f64(1.0 / (1.0 - c.beta2.powf(t)));
        for (slot, (values, grads)) in arrays.iter_mut().enumerate() {
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            debug_assert_eq!(values.len(), grads.len());
            debug_assert_eq!(values.len(), m.len());
            for i in 0..values.len() {
                let g = grads[i];
                m[i] = b1 * m[i] + one_m_b1 * g;
                v[i] = b2 * v[i] + one_m_b2 * g * g;
                let m_hat = m[i] * m_corr;
                let v_hat = v[i] * v_corr;
                let update = (b1 * m_hat + one_m_b1 * g * g_corr) / (v_hat.sqrt() + eps);
                values[i] -= lr * update;
            }
        }
    }

    /// Steps a set of layer parameters (values paired with their accumulated
    /// gradients).
    pub(crate) fn step_params(&mut self, params: &mut [&mut Param<F>]) {
        let mut arrays: Vec<(&mut [F], &[F])> = params
            .iter_mut()
            .map(|p| {
                let Param { value, grad } = &mut **p;
                (value.as_mut_slice(), grad.as_slice())
            })
            .collect();
        self.step_arrays(&mut arrays);
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
