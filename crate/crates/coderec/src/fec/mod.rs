//! Encoders and soft-input decoders for the four candidate schemes.
//!
//! # Overview
//!
//! Everything downstream of the channel works on frames of per-bit
//! log-likelihood ratios (natural log, positive means "bit 0 more likely").
//! This module turns a candidate code and an LLR frame into a
//! [`DecodeResult`]: the decoded message, the message *re-encoded* into a
//! valid codeword, and bookkeeping (iterations, convergence, the decoder's
//! soft posterior where one exists).
//!
//! One decoder per scheme:
//!
//! * LDPC — sum-product belief propagation with early syndrome termination
//!   ([`decode_ldpc_bp`]).
//! * Convolutional — soft-metric Viterbi over the terminated trellis
//!   ([`decode_viterbi`]).
//! * Turbo — iterative max-log-MAP with extrinsic exchange through the
//!   interleaver ([`decode_turbo`]).
//! * Polar — successive-cancellation list decoding with exact LLR kernels
//!   ([`decode_polar_scl`]).
//!
//! Every decoder clips its input to [`LLR_CLIP`] first; recognition never
//! assumes knowledge of the channel SNR, so all kernels are
//! scale-tolerant (max-log, correlation metrics) or numerically saturated
//! (tanh products).
//!
//! The recognition evidence is the re-encoding agreement
//! ([`reencode_agreement`]): `a[i] = (1 - 2*c̃[i]) * l[i]` where `c̃` is the
//! re-encoded codeword. Under the true candidate the decoder tends to
//! reproduce the transmitted codeword, so `a` concentrates on `|l|`; under
//! a wrong candidate signs are haphazard and the agreement hovers around
//! zero.

mod bp;
mod scl;
mod turbo;
mod viterbi;

pub use bp::decode_ldpc_bp;
pub use scl::{decode_polar_scl, polar_transform};
pub use turbo::decode_turbo;
pub use viterbi::decode_viterbi;

use crate::codebook::{
    BitVector, BuiltCode, Candidate, LdpcCode, PolarCode, Trellis, TurboStructure,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Shared decoder plumbing

/// LLR saturation bound (natural-log units) applied at every decoder input
/// and when computing evidence. Keeps tanh/exp kernels numerically tame.
pub const LLR_CLIP: f64 = 20.0;

/// Iteration and list budgets for the iterative decoders.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderConfig {
    /// Belief-propagation iteration cap (LDPC).
    pub bp_iterations: usize,
    /// Turbo decoder iteration cap.
    pub turbo_iterations: usize,
    /// Successive-cancellation list size (polar).
    pub list_size: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig { bp_iterations: 20, turbo_iterations: 8, list_size: 8 }
    }
}

/// Outcome of decoding one frame under one candidate.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    /// Decoded message bits (length K of the candidate).
    pub message: BitVector,
    /// The message re-encoded: always a valid codeword of the candidate,
    /// even when the decoder did not converge.
    pub codeword: BitVector,
    /// Correlation of the re-encoded codeword against the clipped input,
    /// `sum (1 - 2*c̃[i]) * l[i]` (the trellis decoder reports its own
    /// stepwise accumulation of the same sum).
    pub metric: f64,
    /// Iterations actually spent (1 for the one-shot trellis decoders).
    pub iterations: usize,
    /// Whether the decoder reached a self-consistent stopping condition
    /// (zero syndrome for BP; re-encoded/channel agreement or a decision
    /// fixed point for turbo; always true for the one-shot
    /// maximum-likelihood trellis decoders).
    pub converged: bool,
    /// Per-codeword-bit posterior LLRs where the decoder produces them
    /// (BP: full posterior; turbo: a-posteriori at systematic positions,
    /// channel values at parity positions; Viterbi/SCL: none).
    pub posterior: Option<Vec<f64>>,
}

/// Validates an LLR frame (finite values only) and returns a clipped copy.
pub(crate) fn clip_frame(llrs: &[f64]) -> Result<Vec<f64>> {
    if let Some(pos) = llrs.iter().position(|v| !v.is_finite()) {
        return Err(Error::argument(format!(
            "LLR frame entry {pos} is {} (must be finite)",
            llrs[pos]
        )));
    }
    Ok(llrs.iter().map(|&v| v.clamp(-LLR_CLIP, LLR_CLIP)).collect())
}

/// Codeword/LLR correlation `sum (1 - 2*c[i]) * l[i]`, accumulated in
/// index order.
pub fn correlation(codeword: &BitVector, llrs: &[f64]) -> f64 {
    debug_assert_eq!(codeword.len(), llrs.len());
    codeword
        .iter()
        .zip(llrs)
        .fold(0.0, |acc, (&c, &l)| acc + (1.0 - 2.0 * f64::from(c)) * l)
}

/// Hard decision under the sign convention: positive LLR means bit 0.
#[inline]
pub(crate) fn hard_bit(llr: f64) -> u8 {
    u8::from(llr < 0.0)
}

// ---------------------------------------------------------------------------
// Encoding

/// Encodes a message under a candidate's code.
pub fn encode(candidate: &Candidate, message: &BitVector) -> Result<BitVector> {
    if message.len() != candidate.message_len {
        return Err(Error::argument(format!(
            "message has {} bits, candidate {} expects {}",
            message.len(),
            candidate.label,
            candidate.message_len
        )));
    }
    match &candidate.code {
        BuiltCode::Ldpc(code) => encode_ldpc(code, message),
        BuiltCode::Conv(trellis) => encode_conv(trellis, message),
        BuiltCode::Turbo(structure) => encode_turbo(structure, message),
        BuiltCode::Polar(code) => encode_polar(code, message),
    }
}

/// Systematic LDPC encoding, `c = m * G`.
pub fn encode_ldpc(code: &LdpcCode, message: &BitVector) -> Result<BitVector> {
    let bits = code.generator.vec_mul(message.as_slice())?;
    BitVector::new(bits)
}

/// Tail-terminated convolutional encoding: the message followed by
/// `memory` zero flush bits, branch outputs interleaved in polynomial
/// order.
pub fn encode_conv(trellis: &Trellis, message: &BitVector) -> Result<BitVector> {
    if trellis.recursive {
        return Err(Error::argument(
            "convolutional encoding expects a feed-forward trellis".to_string(),
        ));
    }
    let mut inputs = Vec::with_capacity(message.len() + trellis.memory);
    inputs.extend_from_slice(message.as_slice());
    inputs.extend(std::iter::repeat(0u8).take(trellis.memory));
    let mut bits = Vec::with_capacity(inputs.len() * trellis.outputs_per_branch);
    let end_state = trellis.run(&inputs, &mut bits);
    debug_assert_eq!(end_state, 0, "zero flush must terminate the trellis");
    BitVector::new(bits)
}

/// Rate-1/3 turbo encoding: per information bit, the systematic bit, the
/// first constituent's parity, and the second constituent's parity on the
/// interleaved message (no termination).
pub fn encode_turbo(structure: &TurboStructure, message: &BitVector) -> Result<BitVector> {
    if message.len() != structure.k_info {
        return Err(Error::argument(format!(
            "message has {} bits, turbo code expects {}",
            message.len(),
            structure.k_info
        )));
    }
    let mut parity1 = Vec::with_capacity(structure.k_info);
    structure.trellis.run(message.as_slice(), &mut parity1);
    let interleaved: Vec<u8> = structure
        .interleaver
        .iter()
        .map(|&i| message.get(i))
        .collect();
    let mut parity2 = Vec::with_capacity(structure.k_info);
    structure.trellis.run(&interleaved, &mut parity2);
    let mut bits = Vec::with_capacity(structure.n);
    for i in 0..structure.k_info {
        bits.push(message.get(i));
        bits.push(parity1[i]);
        bits.push(parity2[i]);
    }
    BitVector::new(bits)
}

/// Shortened polar encoding: message bits on the information set, zeros on
/// frozen inputs, the butterfly transform, then truncation to `e_out`
/// coded bits (the discarded tail is identically zero by construction).
pub fn encode_polar(code: &PolarCode, message: &BitVector) -> Result<BitVector> {
    if message.len() != code.k {
        return Err(Error::argument(format!(
            "message has {} bits, polar code expects {}",
            message.len(),
            code.k
        )));
    }
    let mut u = vec![0u8; code.mother_n];
    for (bit, &pos) in message.iter().zip(&code.info_set) {
        u[pos] = *bit;
    }
    polar_transform(&mut u);
    debug_assert!(
        u[code.e_out..].iter().all(|&b| b == 0),
        "shortened coded positions must be zero"
    );
    u.truncate(code.e_out);
    BitVector::new(u)
}

// ---------------------------------------------------------------------------
// Decoding

/// Decodes an LLR frame under a candidate with the given budgets.
///
/// The frame length must equal the candidate's own codeword length;
/// adapting a foreign-length frame to a candidate is the caller's job
/// (the feature extractor truncates or zero-pads).
pub fn decode(candidate: &Candidate, llrs: &[f64], config: &DecoderConfig) -> Result<DecodeResult> {
    if llrs.len() != candidate.codeword_len {
        return Err(Error::argument(format!(
            "frame has {} LLRs, candidate {} expects {}",
            llrs.len(),
            candidate.label,
            candidate.codeword_len
        )));
    }
    match &candidate.code {
        BuiltCode::Ldpc(code) => decode_ldpc_bp(code, llrs, config.bp_iterations),
        BuiltCode::Conv(trellis) => decode_viterbi(trellis, llrs),
        BuiltCode::Turbo(structure) => decode_turbo(structure, llrs, config.turbo_iterations),
        BuiltCode::Polar(code) => decode_polar_scl(code, llrs, config.list_size),
    }
}

/// Re-encoding agreement evidence: `a[i] = (1 - 2*c̃[i]) * l[i]`.
///
/// `llrs` should be the same (clipped) frame the decoder saw. The mean of
/// `a` is large and positive when the candidate is the one that actually
/// encoded the frame.
pub fn reencode_agreement(codeword: &BitVector, llrs: &[f64]) -> Result<Vec<f64>> {
    if codeword.len() != llrs.len() {
        return Err(Error::argument(format!(
            "codeword length {} does not match frame length {}",
            codeword.len(),
            llrs.len()
        )));
    }
    Ok(codeword
        .iter()
        .zip(llrs)
        .map(|(&c, &l)| (1.0 - 2.0 * f64::from(c)) * l)
        .collect())
}

/// Draws a uniformly random message of length `k`.
pub fn random_message(k: usize, rng: &mut rand_chacha::ChaCha8Rng) -> BitVector {
    use rand_chacha::rand_core::RngCore;
    let mut bits = Vec::with_capacity(k);
    let mut word = 0u64;
    for i in 0..k {
        if i % 64 == 0 {
            word = rng.next_u64();
        }
        bits.push((word & 1) as u8);
        word >>= 1;
    }
    BitVector::new(bits).expect("bits are 0/1 by construction")
}

// ---------------------------------------------------------------------------

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::codebook::{CandidateSet, Scheme};
    use crate::rng::DrawExt;
    use std::sync::OnceLock;

    pub(crate) fn set_for(scheme: Scheme) -> &'static CandidateSet {
        static SETS: OnceLock<Vec<CandidateSet>> = OnceLock::new();
        let sets = SETS.get_or_init(|| {
            [Scheme::Ldpc, Scheme::Conv, Scheme::Turbo, Scheme::Polar]
                .into_iter()
                .map(|s| CandidateSet::for_scheme(s).unwrap())
                .collect()
        });
        match scheme {
            Scheme::Ldpc => &sets[0],
            Scheme::Conv => &sets[1],
            Scheme::Turbo => &sets[2],
            Scheme::Polar => &sets[3],
        }
    }

    /// Noiseless BPSK LLRs for a codeword at the given magnitude.
    pub(crate) fn noiseless_llrs(codeword: &BitVector, magnitude: f64) -> Vec<f64> {
        codeword
            .iter()
            .map(|&c| (1.0 - 2.0 * f64::from(c)) * magnitude)
            .collect()
    }

    #[test]
    fn all_zero_message_encodes_to_all_zero_codeword() {
        for scheme in [Scheme::Ldpc, Scheme::Conv, Scheme::Turbo, Scheme::Polar] {
            for cand in &set_for(scheme).candidates {
                let msg = BitVector::zeros(cand.message_len);
                let cw = encode(cand, &msg).unwrap();
                assert_eq!(cw.len(), cand.codeword_len, "{}", cand.label);
                assert!(cw.iter().all(|&b| b == 0), "{}", cand.label);
            }
        }
    }

    #[test]
    fn ldpc_codewords_have_zero_syndrome() {
        let set = set_for(Scheme::Ldpc);
        let mut rng = crate::rng::chacha(7);
        for cand in &set.candidates {
            let code = match &cand.code {
                BuiltCode::Ldpc(c) => c,
                _ => unreachable!(),
            };
            for _ in 0..5 {
                let msg = random_message(cand.message_len, &mut rng);
                let cw = encode(cand, &msg).unwrap();
                let syndrome = code.h.mul_vec(cw.as_slice()).unwrap();
                assert!(syndrome.iter().all(|&s| s == 0), "{}", cand.label);
            }
        }
    }

    #[test]
    fn encode_decode_identity_noiseless() {
        let mut rng = crate::rng::chacha(23);
        let cfg = DecoderConfig::default();
        for scheme in [Scheme::Ldpc, Scheme::Conv, Scheme::Turbo, Scheme::Polar] {
            for cand in &set_for(scheme).candidates {
                for trial in 0..5 {
                    let msg = random_message(cand.message_len, &mut rng);
                    let cw = encode(cand, &msg).unwrap();
                    let llrs = noiseless_llrs(&cw, 8.0);
                    let result = decode(cand, &llrs, &cfg).unwrap();
                    assert_eq!(result.message, msg, "{} trial {trial}", cand.label);
                    assert_eq!(result.codeword, cw, "{} trial {trial}", cand.label);
                    assert!(result.converged, "{} trial {trial}", cand.label);
                }
            }
        }
    }

    #[test]
    fn decoded_codeword_is_always_self_consistent() {
        // Garbage input: the decoder may fail to converge, but the
        // re-encoded codeword must still satisfy the code's own checks.
        let mut rng = crate::rng::chacha(31);
        let cfg = DecoderConfig::default();
        for scheme in [Scheme::Ldpc, Scheme::Conv, Scheme::Turbo, Scheme::Polar] {
            for cand in &set_for(scheme).candidates {
                let llrs: Vec<f64> = (0..cand.codeword_len)
                    .map(|_| 4.0 * (rng.uniform() - 0.5))
                    .collect();
                let result = decode(cand, &llrs, &cfg).unwrap();
                let again = encode(cand, &result.message).unwrap();
                assert_eq!(result.codeword, again, "{}", cand.label);
                assert!(result.metric.is_finite(), "{}", cand.label);
            }
        }
    }

    #[test]
    fn reencode_agreement_full_agreement_gives_magnitudes() {
        let mut rng = crate::rng::chacha(5);
        let llrs: Vec<f64> = (0..64).map(|_| 10.0 * (rng.uniform() - 0.5)).collect();
        let hard = BitVector::new(llrs.iter().map(|&l| hard_bit(l)).collect()).unwrap();
        let a = reencode_agreement(&hard, &llrs).unwrap();
        for (ai, li) in a.iter().zip(&llrs) {
            assert_eq!(*ai, li.abs());
        }
    }

    #[test]
    fn reencode_agreement_zero_llrs_give_zero_evidence() {
        let cw = BitVector::new(vec![1, 0, 1, 1]).unwrap();
        let a = reencode_agreement(&cw, &[0.0; 4]).unwrap();
        assert_eq!(a, vec![0.0; 4]);
    }

    #[test]
    fn reencode_agreement_random_codeword_has_near_zero_mean() {
        // Independent random bits against fixed LLRs: the agreement mean is
        // a zero-mean statistic with standard deviation ~ 1/sqrt(n); check
        // the 3-sigma band holds for the vast majority of trials.
        let n = 648;
        let trials = 1000;
        let mut rng = crate::rng::chacha(99);
        let llrs: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
        let sigma: f64 = (llrs.iter().map(|l| l * l).sum::<f64>() / n as f64).sqrt();
        let band = 3.0 * sigma / (n as f64).sqrt();
        let mut inside = 0;
        for _ in 0..trials {
            let cw = random_message(n, &mut rng);
            let a = reencode_agreement(&cw, &llrs).unwrap();
            let mean = a.iter().sum::<f64>() / n as f64;
            if mean.abs() < band {
                inside += 1;
            }
        }
        assert!(inside >= 985, "only {inside}/{trials} trials inside 3 sigma");
    }

    #[test]
    fn length_and_finiteness_errors() {
        let set = set_for(Scheme::Ldpc);
        let cand = &set.candidates[0];
        let cfg = DecoderConfig::default();
        assert!(decode(cand, &[0.0; 10], &cfg).is_err());
        assert!(encode(cand, &BitVector::zeros(5)).is_err());
        let mut llrs = vec![1.0; cand.codeword_len];
        llrs[7] = f64::INFINITY;
        let err = decode(cand, &llrs, &cfg).unwrap_err();
        assert!(err.to_string().contains("finite"), "{err}");
        assert!(reencode_agreement(&BitVector::zeros(3), &[0.0; 4]).is_err());
    }

    #[test]
    fn clipping_is_applied_at_decoder_input() {
        // A huge LLR must enter the metric at the saturation bound.
        let set = set_for(Scheme::Conv);
        let cand = &set.candidates[0];
        let msg = BitVector::zeros(cand.message_len);
        let cw = encode(cand, &msg).unwrap();
        let mut llrs = noiseless_llrs(&cw, 10.0);
        llrs[0] = 1e9;
        let result = decode(cand, &llrs, &DecoderConfig::default()).unwrap();
        let expected = LLR_CLIP + 10.0 * (llrs.len() - 1) as f64;
        assert!((result.metric - expected).abs() < 1e-9, "{}", result.metric);
    }
}
