//! Blind recognition of channel-code parameters from soft demodulator output.
//!
//! Given one received frame of log-likelihood ratios and a known finite set of
//! candidate code parameters (LDPC rates, convolutional polynomials, turbo
//! constituent polynomials, or polar output lengths), this crate decides which
//! candidate produced the frame. The receiver decodes the frame under *every*
//! candidate, turns each attempt into a re-encoding agreement vector, stacks
//! the vectors into a square multi-channel feature tensor, and classifies the
//! tensor either with a trained convolutional network or with a max-average
//! baseline.
//!
//! The crate is organized along that pipeline:
//!
//! * [`codebook`] — candidate parameter sets and code construction (parity
//!   matrices, trellises, turbo interleavers, polar information sets).
//! * [`fec`] — encoders and soft-input decoders (belief propagation, Viterbi,
//!   max-log-MAP turbo, successive-cancellation list polar).
//! * [`channel`] — BPSK modulation, AWGN and Rayleigh-fading impairments, and
//!   LLR demodulation.
//! * [`features`] — decode-evidence extraction and tensor assembly, plus the
//!   max-average baseline classifier.
//! * [`nn`] — a small self-contained neural-network engine (conv / batch-norm
//!   / dense layers, Nadam, training loop, weight files).
//! * [`dataset`] — labelled dataset generation, stratified splits, and the
//!   binary dataset format.
//! * [`cli`] — the command implementations behind the `coderec` binary and
//!   the detection-report CSV writer.

pub mod channel;
pub mod cli;
pub mod codebook;
pub mod config;
pub mod dataset;
mod error;
pub mod features;
pub mod fec;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
