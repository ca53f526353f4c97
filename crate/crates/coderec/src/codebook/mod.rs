//! Candidate code parameters and code construction.
//!
//! # Overview
//!
//! Recognition always runs against a finite, known candidate set: one coding
//! scheme (LDPC, convolutional, turbo, or polar) and a handful of parameter
//! choices within it. This module defines the parameter types, builds each
//! candidate into its operational form (parity-check matrix + systematic
//! generator, trellis, turbo structure, or polar information set), and fixes
//! the default candidate sets:
//!
//! * LDPC: IEEE 802.11n, n = 648, rates 1/2, 2/3, 3/4, 5/6.
//! * Convolutional: rate 1/2, polynomial pairs (5,7) through (561,753)
//!   octal, constraint lengths 3..9, 50 information bits, tail-terminated.
//! * Turbo: rate 1/3, constraint-length-5 recursive-systematic
//!   constituents, 400 information bits, fixed pseudo-random interleaver.
//! * Polar: mother length 256 shortened to 150/160/170/180 outputs,
//!   144 information bits.
//!
//! A [`CandidateSet`] also fixes the feature-tensor geometry: vectors are
//! padded to the longest candidate codeword `n_max` and reshaped to an
//! `s x s` plane with `s = ceil(sqrt(n_max))`.
//!
//! # Example
//!
//! ```
//! use coderec::codebook::{CandidateSet, Scheme};
//!
//! let set = CandidateSet::for_scheme(Scheme::Ldpc).unwrap();
//! assert_eq!(set.len(), 4);
//! assert_eq!(set.n_max, 648);
//! assert_eq!(set.tensor_side, 26);
//! ```

mod gf2;
mod ldpc;
mod polar;
mod tables;
mod trellis;
mod turbo;

pub use gf2::{gf2_systemize, BinaryMatrix, BitVector, Systemized};
pub use ldpc::{build_ldpc, expand_prototype, LdpcCode};
pub use polar::{build_polar, reliability_order, PolarCode};
pub use trellis::Trellis;
pub use turbo::{build_turbo, TurboStructure};

use crate::{Error, Result};
use sha2::{Digest, Sha256};

// ---------------------------------------------------------------------------
// Parameter types

/// Coding scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Ldpc,
    Conv,
    Turbo,
    Polar,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Ldpc => "ldpc",
            Scheme::Conv => "conv",
            Scheme::Turbo => "turbo",
            Scheme::Polar => "polar",
        }
    }

    pub fn parse(s: &str) -> Result<Scheme> {
        match s {
            "ldpc" => Ok(Scheme::Ldpc),
            "conv" => Ok(Scheme::Conv),
            "turbo" => Ok(Scheme::Turbo),
            "polar" => Ok(Scheme::Polar),
            other => Err(Error::config(format!(
                "unknown scheme {other:?} (expected ldpc, conv, turbo, or polar)"
            ))),
        }
    }
}

/// LDPC candidate parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcSpec {
    pub n: usize,
    /// Code rate as (numerator, denominator).
    pub rate: (usize, usize),
    /// Circulant block size of the prototype expansion.
    pub z: usize,
}

/// Convolutional candidate parameters (rate 1/2, tail-terminated).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    /// Generator polynomials; bit `i` taps the register value `i` steps old.
    pub generators: Vec<u32>,
    pub constraint_len: usize,
    pub k_info: usize,
}

impl ConvSpec {
    /// Codeword length including the `constraint_len - 1` flush steps.
    pub fn codeword_len(&self) -> usize {
        self.generators.len() * (self.k_info + self.constraint_len - 1)
    }
}

/// Turbo candidate parameters (rate 1/3 parallel concatenation).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurboSpec {
    /// Listed generator polynomials; the second is the constituent parity.
    pub generators: [u32; 3],
    /// Feedback polynomial shared by both constituents.
    pub feedback: u32,
    pub constraint_len: usize,
    pub k_info: usize,
    pub interleaver_seed: u64,
}

/// Polar candidate parameters (shortened mother code).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarSpec {
    pub mother_n: usize,
    pub k_info: usize,
    /// Transmitted output length.
    pub e_out: usize,
}

/// Any candidate's parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CandidateSpec {
    Ldpc(LdpcSpec),
    Conv(ConvSpec),
    Turbo(TurboSpec),
    Polar(PolarSpec),
}

// ---------------------------------------------------------------------------
// Default candidate parameters

pub const LDPC_RATES: &[(usize, usize)] = &[(1, 2), (2, 3), (3, 4), (5, 6)];

/// Convolutional candidates: (generators octal, constraint length).
pub const CONV_CANDIDATES: &[(&[u32], usize)] = &[
    (&[0o5, 0o7], 3),
    (&[0o15, 0o17], 4),
    (&[0o23, 0o35], 5),
    (&[0o53, 0o75], 6),
    (&[0o133, 0o171], 7),
    (&[0o247, 0o371], 8),
    (&[0o561, 0o753], 9),
];

pub const CONV_K_INFO: usize = 50;
pub const TURBO_K_INFO: usize = 400;
pub const TURBO_INTERLEAVER_SEED: u64 = 42;

/// Turbo candidates: fixed generator lists and feedback taps.
pub const TURBO_CANDIDATES: &[TurboSpec] = &[
    TurboSpec {
        generators: [0o33, 0o25, 0o17],
        feedback: 0o33,
        constraint_len: 5,
        k_info: TURBO_K_INFO,
        interleaver_seed: TURBO_INTERLEAVER_SEED,
    },
    TurboSpec {
        generators: [0o15, 0o13, 0o24],
        feedback: 0o37,
        constraint_len: 5,
        k_info: TURBO_K_INFO,
        interleaver_seed: TURBO_INTERLEAVER_SEED,
    },
    TurboSpec {
        generators: [0o27, 0o37, 0o15],
        feedback: 0o35,
        constraint_len: 5,
        k_info: TURBO_K_INFO,
        interleaver_seed: TURBO_INTERLEAVER_SEED,
    },
    TurboSpec {
        generators: [0o25, 0o27, 0o37],
        feedback: 0o31,
        constraint_len: 5,
        k_info: TURBO_K_INFO,
        interleaver_seed: TURBO_INTERLEAVER_SEED,
    },
];

pub const POLAR_CANDIDATES: &[PolarSpec] = &[
    PolarSpec { mother_n: 256, k_info: 144, e_out: 150 },
    PolarSpec { mother_n: 256, k_info: 144, e_out: 160 },
    PolarSpec { mother_n: 256, k_info: 144, e_out: 170 },
    PolarSpec { mother_n: 256, k_info: 144, e_out: 180 },
];

// ---------------------------------------------------------------------------
// Built candidates and sets

/// A candidate in operational form.
#[derive(Debug, Clone)]
pub enum BuiltCode {
    Ldpc(LdpcCode),
    Conv(Trellis),
    Turbo(TurboStructure),
    Polar(PolarCode),
}

/// One candidate of a set: parameters, built code, and frame geometry.
#[derive(Debug, Clone)]
pub struct Candidate {
    /// Short unique name used in reports and file manifests.
    pub label: String,
    pub spec: CandidateSpec,
    pub code: BuiltCode,
    pub codeword_len: usize,
    pub message_len: usize,
}

/// An ordered candidate set plus the tensor geometry it induces.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub scheme: Scheme,
    pub candidates: Vec<Candidate>,
    /// Longest candidate codeword; evidence vectors are padded to this.
    pub n_max: usize,
    /// Side of the square feature plane, `ceil(sqrt(n_max))`.
    pub tensor_side: usize,
}

fn build_candidate(spec: CandidateSpec) -> Result<Candidate> {
    let (label, code, codeword_len, message_len) = match &spec {
        CandidateSpec::Ldpc(s) => {
            let code = build_ldpc(s)?;
            let label = format!("r{}/{}", s.rate.0, s.rate.1);
            let (n, k) = (code.n, code.k);
            (label, BuiltCode::Ldpc(code), n, k)
        }
        CandidateSpec::Conv(s) => {
            let trellis = Trellis::feedforward(&s.generators, s.constraint_len)?;
            let label = format!(
                "g{}",
                s.generators
                    .iter()
                    .map(|g| format!("{g:o}"))
                    .collect::<Vec<_>>()
                    .join("-")
            );
            (label, BuiltCode::Conv(trellis), s.codeword_len(), s.k_info)
        }
        CandidateSpec::Turbo(s) => {
            let t = build_turbo(s)?;
            let label = format!(
                "t{:o}-{:o}-{:o}",
                s.generators[0], s.generators[1], s.generators[2]
            );
            let (n, k) = (t.n, t.k_info);
            (label, BuiltCode::Turbo(t), n, k)
        }
        CandidateSpec::Polar(s) => {
            let code = build_polar(s)?;
            let label = format!("e{}", s.e_out);
            let (n, k) = (code.e_out, code.k);
            (label, BuiltCode::Polar(code), n, k)
        }
    };
    Ok(Candidate { label, spec, code, codeword_len, message_len })
}

impl CandidateSet {
    /// Builds a set from explicit candidate parameters.
    ///
    /// All candidates must belong to `scheme`; the set must not be empty.
    pub fn new(scheme: Scheme, specs: Vec<CandidateSpec>) -> Result<CandidateSet> {
        if specs.is_empty() {
            return Err(Error::construction("candidate set is empty".to_string()));
        }
        for (i, spec) in specs.iter().enumerate() {
            let s = match spec {
                CandidateSpec::Ldpc(_) => Scheme::Ldpc,
                CandidateSpec::Conv(_) => Scheme::Conv,
                CandidateSpec::Turbo(_) => Scheme::Turbo,
                CandidateSpec::Polar(_) => Scheme::Polar,
            };
            if s != scheme {
                return Err(Error::construction(format!(
                    "candidate {i} is a {} spec in a {} set",
                    s.as_str(),
                    scheme.as_str()
                )));
            }
        }
        let candidates: Vec<Candidate> =
            specs.into_iter().map(build_candidate).collect::<Result<_>>()?;
        let n_max = candidates.iter().map(|c| c.codeword_len).max().unwrap();
        let tensor_side = (n_max as f64).sqrt().ceil() as usize;
        Ok(CandidateSet { scheme, candidates, n_max, tensor_side })
    }

    /// The default candidate set for a scheme.
    pub fn for_scheme(scheme: Scheme) -> Result<CandidateSet> {
        let specs: Vec<CandidateSpec> = match scheme {
            Scheme::Ldpc => LDPC_RATES
                .iter()
                .map(|&rate| CandidateSpec::Ldpc(LdpcSpec { n: 648, rate, z: 27 }))
                .collect(),
            Scheme::Conv => CONV_CANDIDATES
                .iter()
                .map(|&(gens, constraint_len)| {
                    CandidateSpec::Conv(ConvSpec {
                        generators: gens.to_vec(),
                        constraint_len,
                        k_info: CONV_K_INFO,
                    })
                })
                .collect(),
            Scheme::Turbo => TURBO_CANDIDATES
                .iter()
                .cloned()
                .map(CandidateSpec::Turbo)
                .collect(),
            Scheme::Polar => POLAR_CANDIDATES
                .iter()
                .cloned()
                .map(CandidateSpec::Polar)
                .collect(),
        };
        CandidateSet::new(scheme, specs)
    }

    /// Number of candidates (the classifier's class count).
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.candidates.iter().map(|c| c.label.as_str()).collect()
    }

    /// Codeword length of each candidate, in set order.
    pub fn codeword_lens(&self) -> Vec<usize> {
        self.candidates.iter().map(|c| c.codeword_len).collect()
    }

    /// SHA-256 over a canonical description of the set. Datasets and weight
    /// files record this digest so mismatched artifacts are rejected early.
    pub fn digest(&self) -> [u8; 32] {
        let mut text = format!("scheme={}\n", self.scheme.as_str());
        for c in &self.candidates {
            let line = match &c.spec {
                CandidateSpec::Ldpc(s) => {
                    format!("ldpc n={} rate={}/{} z={}", s.n, s.rate.0, s.rate.1, s.z)
                }
                CandidateSpec::Conv(s) => format!(
                    "conv gens={:?} constraint={} k={}",
                    s.generators, s.constraint_len, s.k_info
                ),
                CandidateSpec::Turbo(s) => format!(
                    "turbo gens={:?} feedback={} constraint={} k={} ilseed={}",
                    s.generators, s.feedback, s.constraint_len, s.k_info, s.interleaver_seed
                ),
                CandidateSpec::Polar(s) => {
                    format!("polar n={} k={} e={}", s.mother_n, s.k_info, s.e_out)
                }
            };
            text.push_str(&line);
            text.push('\n');
        }
        let digest = Sha256::digest(text.as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_set_geometry() {
        let ldpc = CandidateSet::for_scheme(Scheme::Ldpc).unwrap();
        assert_eq!(ldpc.len(), 4);
        assert_eq!(ldpc.n_max, 648);
        assert_eq!(ldpc.tensor_side, 26);

        let conv = CandidateSet::for_scheme(Scheme::Conv).unwrap();
        assert_eq!(conv.len(), 7);
        assert_eq!(
            conv.codeword_lens(),
            vec![104, 106, 108, 110, 112, 114, 116]
        );
        assert_eq!(conv.tensor_side, 11);

        let turbo = CandidateSet::for_scheme(Scheme::Turbo).unwrap();
        assert_eq!(turbo.len(), 4);
        assert_eq!(turbo.n_max, 1200);
        assert_eq!(turbo.tensor_side, 35);

        let polar = CandidateSet::for_scheme(Scheme::Polar).unwrap();
        assert_eq!(polar.len(), 4);
        assert_eq!(polar.n_max, 180);
        assert_eq!(polar.tensor_side, 14);
    }

    #[test]
    fn labels_are_unique_and_csv_safe() {
        for scheme in [Scheme::Ldpc, Scheme::Conv, Scheme::Turbo, Scheme::Polar] {
            let set = CandidateSet::for_scheme(scheme).unwrap();
            let labels = set.labels();
            let mut dedup = labels.clone();
            dedup.sort_unstable();
            dedup.dedup();
            assert_eq!(dedup.len(), labels.len(), "{scheme:?}");
            assert!(labels.iter().all(|l| !l.contains(',')), "{scheme:?}");
        }
    }

    #[test]
    fn digest_distinguishes_sets_and_is_stable() {
        let a = CandidateSet::for_scheme(Scheme::Ldpc).unwrap();
        let b = CandidateSet::for_scheme(Scheme::Ldpc).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = CandidateSet::for_scheme(Scheme::Conv).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn mixed_scheme_set_is_rejected() {
        let err = CandidateSet::new(
            Scheme::Ldpc,
            vec![CandidateSpec::Polar(PolarSpec { mother_n: 256, k_info: 144, e_out: 160 })],
        )
        .unwrap_err();
        assert!(err.to_string().contains("polar spec in a ldpc set"));
    }

    #[test]
    fn scheme_parse_round_trip() {
        for s in [Scheme::Ldpc, Scheme::Conv, Scheme::Turbo, Scheme::Polar] {
            assert_eq!(Scheme::parse(s.as_str()).unwrap(), s);
        }
        assert!(Scheme::parse("hamming").is_err());
    }
}
