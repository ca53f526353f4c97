//! Baseband channel simulation: BPSK over AWGN and Rayleigh fading.
//!
//! The transmit chain maps codeword bits to antipodal symbols, passes them
//! through one of three channel models, and converts the received amplitudes
//! to log-likelihood ratios:
//!
//! * **AWGN** — `y = x + n` with noise variance set by the configured SNR.
//! * **Single-path Rayleigh** — `y_i = a0*|h_i|*x_i + n_i`, a flat fading
//!   channel with ideal phase compensation, so only the envelope remains.
//! * **Dual-path Rayleigh** — `y_i = a0*|h0_i|*x_i + a1*Re(h1_i)*x_{i-d} + n_i`,
//!   the same compensated main path plus an uncompensated echo delayed by
//!   `d` samples, which adds intersymbol interference.
//!
//! The SNR is defined relative to the **total average received signal
//! power**, so a configuration with two equal-gain paths at a given SNR sees
//! proportionally stronger noise than a single path would.  Per-path gains
//! are stated in dB of average received power: a path at 0 dB contributes
//! unit average power regardless of whether its fading is envelope- or
//! in-phase-compensated (the in-phase projection of a unit-power complex
//! gain carries half the power, which the amplitude mapping compensates).
//!
//! Demodulation assumes a fixed nominal noise variance (1.0 by default)
//! rather than the true per-frame value: the receiver under study does not
//! know the operating SNR, and the downstream decoders only need LLRs that
//! are correct up to a positive scale.

use num_complex::Complex64;

use crate::codebook::BitVector;
use crate::rng::{self, DrawExt};

mod fading;

pub use fading::{rayleigh_gains, FadingProcess, OSCILLATOR_COUNT};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Which propagation model [`apply_channel`] simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    /// Additive white Gaussian noise only.
    Awgn,
    /// One Rayleigh-fading path with ideal phase compensation.
    SinglePathRayleigh,
    /// A compensated main path plus a delayed uncompensated echo.
    DualPathRayleigh,
}

impl ChannelModel {
    /// Stable lower-case name used in CLI arguments and CSV output.
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelModel::Awgn => "awgn",
            ChannelModel::SinglePathRayleigh => "rayleigh1",
            ChannelModel::DualPathRayleigh => "rayleigh2",
        }
    }

    /// Parses the name produced by [`ChannelModel::as_str`].
    pub fn parse(text: &str) -> crate::Result<Self> {
        match text {
            "awgn" => Ok(ChannelModel::Awgn),
            "rayleigh1" => Ok(ChannelModel::SinglePathRayleigh),
            "rayleigh2" => Ok(ChannelModel::DualPathRayleigh),
            other => Err(crate::Error::argument(format!(
                "unknown channel model {other:?} (expected awgn, rayleigh1 or rayleigh2)"
            ))),
        }
    }

    /// Compact tag stored in dataset records.
    pub fn tag(&self) -> u8 {
        match self {
            ChannelModel::Awgn => 0,
            ChannelModel::SinglePathRayleigh => 1,
            ChannelModel::DualPathRayleigh => 2,
        }
    }

    /// Inverse of [`ChannelModel::tag`].
    pub fn from_tag(tag: u8) -> crate::Result<Self> {
        match tag {
            0 => Ok(ChannelModel::Awgn),
            1 => Ok(ChannelModel::SinglePathRayleigh),
            2 => Ok(ChannelModel::DualPathRayleigh),
            other => Err(crate::Error::format(format!("unknown channel tag {other}"))),
        }
    }
}

/// Full description of one simulated channel condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Propagation model.
    pub model: ChannelModel,
    /// Signal-to-noise ratio in dB, relative to total average received power.
    pub snr_db: f64,
    /// Normalised Doppler `f_D / f_s` of every fading path; must lie in
    /// `(0, 0.5)` when a fading model is selected.
    pub doppler_ratio: f64,
    /// Echo delay in samples for the dual-path model; must be at least 1.
    pub path_delay_samples: usize,
    /// Average received power of the two paths in dB. The second entry is
    /// ignored by the AWGN and single-path models.
    pub path_gains_db: [f64; 2],
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            model: ChannelModel::Awgn,
            snr_db: 0.0,
            doppler_ratio: 0.001,
            path_delay_samples: 2,
            path_gains_db: [0.0, 0.0],
        }
    }
}

impl ChannelConfig {
    /// Checks internal consistency; every public entry point calls this.
    pub fn validate(&self) -> crate::Result<()> {
        if !self.snr_db.is_finite() {
            return Err(crate::Error::argument(format!(
                "SNR must be finite, got {} dB",
                self.snr_db
            )));
        }
        if self.model != ChannelModel::Awgn
            && !(self.doppler_ratio > 0.0 && self.doppler_ratio < 0.5)
        {
            return Err(crate::Error::argument(format!(
                "doppler ratio must lie in (0, 0.5), got {}",
                self.doppler_ratio
            )));
        }
        if self.model == ChannelModel::DualPathRayleigh && self.path_delay_samples == 0 {
            return Err(crate::Error::argument(
                "path delay must be at least 1 sample".to_string(),
            ));
        }
        if self.path_gains_db.iter().any(|g| !g.is_finite()) {
            return Err(crate::Error::argument(format!(
                "path gains must be finite, got {:?} dB",
                self.path_gains_db
            )));
        }
        Ok(())
    }

    /// Total average received signal power implied by the model and gains.
    pub fn total_received_power(&self) -> f64 {
        let p0 = 10f64.powf(self.path_gains_db[0] / 10.0);
        match self.model {
            ChannelModel::Awgn => 1.0,
            ChannelModel::SinglePathRayleigh => p0,
            ChannelModel::DualPathRayleigh => p0 + 10f64.powf(self.path_gains_db[1] / 10.0),
        }
    }

    /// Noise variance that realises the configured SNR.
    pub fn noise_sigma2(&self) -> f64 {
        self.total_received_power() * 10f64.powf(-self.snr_db / 10.0)
    }
}

// ---------------------------------------------------------------------------
// Modulation and demodulation
// ---------------------------------------------------------------------------

/// Maps bits to antipodal BPSK symbols: 0 → +1.0, 1 → −1.0.
pub fn modulate_bpsk(bits: &BitVector) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

/// Converts received amplitudes to LLRs as `2*y / nominal_sigma2`.
///
/// `nominal_sigma2` is the noise variance the receiver *assumes*; it is not
/// required to match the true channel. The default assumption throughout the
/// crate is 1.0.
pub fn demodulate_llr(received: &[f64], nominal_sigma2: f64) -> crate::Result<Vec<f64>> {
    if !(nominal_sigma2 > 0.0 && nominal_sigma2.is_finite()) {
        return Err(crate::Error::argument(format!(
            "nominal noise variance must be positive and finite, got {nominal_sigma2}"
        )));
    }
    Ok(received.iter().map(|&y| 2.0 * y / nominal_sigma2).collect())
}

// ---------------------------------------------------------------------------
// Channel application
// ---------------------------------------------------------------------------

/// Sub-stream indices carved out of a frame seed: the derivation is part of
/// the reproducibility contract, so datasets regenerate bit-exactly.
const STREAM_NOISE: u64 = 0;
const STREAM_PATH0: u64 = 1;
const STREAM_PATH1: u64 = 2;

/// Passes BPSK symbols through the configured channel, deterministically.
///
/// All randomness (noise and fading) is derived from `seed`, so the same
/// call always produces the same received frame.
pub fn apply_channel(
    symbols: &[f64],
    config: &ChannelConfig,
    seed: u64,
) -> crate::Result<Vec<f64>> {
    config.validate()?;
    let sigma = config.noise_sigma2().sqrt();
    let clean = match config.model {
        ChannelModel::Awgn => symbols.to_vec(),
        ChannelModel::SinglePathRayleigh => {
            let gains = fading_path(symbols.len(), config, STREAM_PATH0, seed)?;
            let a0 = amplitude_envelope(config.path_gains_db[0]);
            single_path_output(symbols, &gains, a0)
        }
        ChannelModel::DualPathRayleigh => {
            let delay = config.path_delay_samples;
            if symbols.len() <= delay {
                return Err(crate::Error::argument(format!(
                    "frame of {} symbols is not longer than the {delay}-sample path delay",
                    symbols.len()
                )));
            }
            let main = fading_path(symbols.len(), config, STREAM_PATH0, seed)?;
            let echo = fading_path(symbols.len(), config, STREAM_PATH1, seed)?;
            let a0 = amplitude_envelope(config.path_gains_db[0]);
            let a1 = amplitude_in_phase(config.path_gains_db[1]);
            dual_path_output(symbols, &main, &echo, a0, a1, delay)
        }
    };
    let mut rng = rng::chacha(rng::derive_seed(seed, STREAM_NOISE));
    Ok(clean.into_iter().map(|y| y + sigma * rng.gaussian()).collect())
}

/// AWGN-only convenience wrapper around [`apply_channel`].
pub fn apply_awgn(symbols: &[f64], snr_db: f64, seed: u64) -> crate::Result<Vec<f64>> {
    let config = ChannelConfig { model: ChannelModel::Awgn, snr_db, ..ChannelConfig::default() };
    apply_channel(symbols, &config, seed)
}

/// Fading-only entry point; rejects the AWGN model.
pub fn apply_fading(
    symbols: &[f64],
    config: &ChannelConfig,
    seed: u64,
) -> crate::Result<Vec<f64>> {
    if config.model == ChannelModel::Awgn {
        return Err(crate::Error::argument(
            "fading application requires a Rayleigh channel model".to_string(),
        ));
    }
    apply_channel(symbols, config, seed)
}

/// Draws one path's gain sequence from the per-frame seed.
fn fading_path(
    length: usize,
    config: &ChannelConfig,
    stream: u64,
    seed: u64,
) -> crate::Result<Vec<Complex64>> {
    rayleigh_gains(length, config.doppler_ratio, rng::derive_seed(seed, stream))
}

/// Amplitude scale for an envelope-compensated path of the given dB power:
/// `E[(a*|h|)^2] = a^2` because `E[|h|^2] = 1`.
fn amplitude_envelope(gain_db: f64) -> f64 {
    10f64.powf(gain_db / 20.0)
}

/// Amplitude scale for an uncompensated in-phase path of the given dB power:
/// `E[(a*Re(h))^2] = a^2/2`, so a factor `sqrt(2)` restores the stated power.
fn amplitude_in_phase(gain_db: f64) -> f64 {
    std::f64::consts::SQRT_2 * 10f64.powf(gain_db / 20.0)
}

/// Noiseless single-path output `y_i = a0*|h_i|*x_i`.
fn single_path_output(symbols: &[f64], gains: &[Complex64], a0: f64) -> Vec<f64> {
    symbols.iter().zip(gains).map(|(&x, h)| a0 * h.norm() * x).collect()
}

/// Noiseless dual-path output `y_i = a0*|h0_i|*x_i + a1*Re(h1_i)*x_{i-d}`,
/// with the echo silent for the first `delay` samples.
fn dual_path_output(
    symbols: &[f64],
    main: &[Complex64],
    echo: &[Complex64],
    a0: f64,
    a1: f64,
    delay: usize,
) -> Vec<f64> {
    (0..symbols.len())
        .map(|i| {
            let direct = a0 * main[i].norm() * symbols[i];
            let delayed = if i >= delay { a1 * echo[i].re * symbols[i - delay] } else { 0.0 };
            direct + delayed
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
