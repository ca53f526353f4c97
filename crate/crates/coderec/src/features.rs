//! Decode-evidence features: the bridge between soft decoders and the
//! classifier.
//!
//! The recogniser never looks at raw LLRs directly.  Instead, a received
//! frame is decoded under **every** candidate parameterisation, and each
//! decode is condensed into an *evidence vector* that scores how well that
//! candidate explains the frame:
//!
//! ```text
//!     a_i = (1 - 2*c~_i) * l_i
//! ```
//!
//! where `c~` is the re-encoded codeword produced by the decoder and `l` is
//! the (clipped) received frame.  When the candidate is the true one, the
//! decoder usually lands on the transmitted codeword, the signs of `c~`
//! agree with the signs of `l`, and the evidence is a vector of magnitudes —
//! strongly positive on average.  Under a wrong candidate the decoder
//! converges somewhere unrelated and the evidence hovers around zero,
//! positive and negative entries cancelling.  A configuration switch swaps
//! the agreement values for the decoder's posterior LLRs where a soft
//! output exists (belief propagation and turbo candidates).
//!
//! Candidates within a family disagree about codeword length, so each
//! candidate adapts the frame to itself: it reads the first `n_j` LLRs and
//! treats missing positions as erasures (zero LLRs).  The per-candidate
//! vectors are then zero-padded to the family maximum `n_max`, reshaped
//! row-major into `s x s` planes (`s = ceil(sqrt(n_max))`), and stacked
//! into an `s x s x m` tensor — one image channel per candidate — which is
//! what the convolutional classifier consumes.
//!
//! Two classification rules operate on this representation:
//!
//! * [`baseline_max_average`] picks the candidate with the highest mean
//!   evidence — the natural threshold rule, needing no training.
//! * The neural classifier (see [`crate::nn`]) learns cross-candidate
//!   structure that the per-candidate means ignore, which is what lifts
//!   recognition at low SNR.

use crate::codebook::CandidateSet;
use crate::fec::{self, DecoderConfig, LLR_CLIP};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Evidence extraction
// ---------------------------------------------------------------------------

/// What each candidate contributes to the feature tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvidenceSource {
    /// Signed agreement `(1 - 2*c~_i) * l_i` between the re-encoded codeword
    /// and the received frame. Works for every decoder.
    #[default]
    ReencodeAgreement,
    /// The decoder's posterior LLRs (clamped to the clipping bound). Only
    /// available for candidates whose decoder emits a soft output.
    PosteriorLlr,
}

impl EvidenceSource {
    /// Stable name used in configuration files.
    pub fn as_str(&self) -> &'static str {
        match self {
            EvidenceSource::ReencodeAgreement => "agreement",
            EvidenceSource::PosteriorLlr => "posterior",
        }
    }

    /// Parses the name produced by [`EvidenceSource::as_str`].
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "agreement" => Ok(EvidenceSource::ReencodeAgreement),
            "posterior" => Ok(EvidenceSource::PosteriorLlr),
            other => Err(Error::argument(format!(
                "unknown evidence source {other:?} (expected agreement or posterior)"
            ))),
        }
    }
}

/// Per-candidate evidence vectors for one received frame, before padding.
///
/// Vector `j` has the length of candidate `j`'s codeword; every entry is
/// bounded by the LLR clipping constant.
#[derive(Debug, Clone)]
pub struct EvidenceBank {
    vectors: Vec<Vec<f64>>,
    side: usize,
    n_max: usize,
}

impl EvidenceBank {
    /// Number of candidates (tensor channels).
    pub fn candidate_count(&self) -> usize {
        self.vectors.len()
    }

    /// Evidence vector of candidate `j`, at its own codeword length.
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j]
    }

    /// Codeword length of each candidate.
    pub fn lengths(&self) -> Vec<usize> {
        self.vectors.iter().map(Vec::len).collect()
    }

    /// Side of the square tensor plane this bank reshapes into.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Frame length every vector is zero-padded to when stacked (the
    /// longest codeword in the family).
    pub fn padded_len(&self) -> usize {
        self.n_max
    }
}

/// Decodes a frame under every candidate in `set` and collects the evidence.
///
/// The frame is adapted per candidate: the first `n_j` LLRs are used, and a
/// frame shorter than `n_j` is extended with zeros (erasures). Fails if the
/// set is empty, the frame contains non-finite values, or a posterior source
/// is requested for a candidate without soft output.
pub fn candidate_evidence(
    llrs: &[f64],
    set: &CandidateSet,
    decoder: &DecoderConfig,
    source: EvidenceSource,
) -> Result<EvidenceBank> {
    if set.is_empty() {
        return Err(Error::argument("candidate set is empty".to_string()));
    }
    let mut vectors = Vec::with_capacity(set.len());
    for candidate in &set.candidates {
        let n_j = candidate.codeword_len;
        let mut adapted: Vec<f64> = llrs.iter().take(n_j).copied().collect();
        adapted.resize(n_j, 0.0);
        // The clipped frame is both what the decoder effectively sees and
        // what the agreement is scored against, keeping every tensor entry
        // inside the clipping bound.
        let clipped = fec::clip_frame(&adapted)?;
        let result = fec::decode(candidate, &adapted, decoder)?;
        let evidence = match source {
            EvidenceSource::ReencodeAgreement => {
                fec::reencode_agreement(&result.codeword, &clipped)?
            }
            EvidenceSource::PosteriorLlr => match &result.posterior {
                Some(posterior) => {
                    posterior.iter().map(|&x| x.clamp(-LLR_CLIP, LLR_CLIP)).collect()
                }
                None => {
                    return Err(Error::argument(format!(
                        "candidate {} has no soft-output decoder; posterior evidence \
                         is only available for belief-propagation and turbo candidates",
                        candidate.label
                    )))
                }
            },
        };
        vectors.push(evidence);
    }
    Ok(EvidenceBank { vectors, side: set.tensor_side, n_max: set.n_max })
}

// ---------------------------------------------------------------------------
// Tensor construction
// ---------------------------------------------------------------------------

/// A dense `side x side x channels` feature tensor in channel-last layout:
/// element `(r, c, j)` lives at `(r*side + c)*channels + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    side: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureTensor {
    /// Wraps raw channel-last data; the length must be `side^2 * channels`
    /// and every value finite.
    pub fn from_raw(side: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != side * side * channels {
            return Err(Error::argument(format!(
                "tensor data holds {} values, expected {}x{}x{} = {}",
                data.len(),
                side,
                side,
                channels,
                side * side * channels
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::argument(format!(
                "tensor value at flat index {bad} is not finite"
            )));
        }
        Ok(Self { side, channels, data })
    }

    /// Plane side length `s`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of candidate channels `m`.
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Element `(row, col, channel)`.
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f32 {
        self.data[(row * self.side + col) * self.channels + channel]
    }

    /// Flat channel-last data, row-major within each plane.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Reads channel `j` back out as the flat `side^2` vector it was folded
    /// from (padding included).
    pub fn unfold_plane(&self, j: usize) -> Vec<f32> {
        (0..self.side * self.side).map(|i| self.data[i * self.channels + j]).collect()
    }
}

/// Zero-pads each evidence vector to the family maximum and stacks them into
/// the `s x s x m` tensor the classifier consumes.
pub fn reshape_stack(bank: &EvidenceBank) -> FeatureTensor {
    let side = bank.side;
    let channels = bank.vectors.len();
    let mut data = vec![0f32; side * side * channels];
    for (j, vector) in bank.vectors.iter().enumerate() {
        for (i, &value) in vector.iter().enumerate() {
            data[i * channels + j] = value as f32;
        }
    }
    FeatureTensor { side, channels, data }
}

// ---------------------------------------------------------------------------
// Baseline classifier
// ---------------------------------------------------------------------------

/// Threshold baseline: the candidate whose evidence has the highest mean
/// (over its own codeword length). Ties resolve to the lowest index.
pub fn baseline_max_average(bank: &EvidenceBank) -> usize {
    let mut best = 0usize;
    let mut best_mean = f64::NEG_INFINITY;
    for (j, vector) in bank.vectors.iter().enumerate() {
        let mean = vector.iter().sum::<f64>() / vector.len() as f64;
        if mean > best_mean {
            best = j;
            best_mean = mean;
        }
    }
    best
}

/// The same baseline evaluated on a stored tensor, given each candidate's
/// codeword length (stored tensors are padded, so the lengths are needed to
/// average over real entries only).
pub fn baseline_from_tensor(tensor: &FeatureTensor, lengths: &[usize]) -> Result<usize> {
    if lengths.len() != tensor.channels() {
        return Err(Error::argument(format!(
            "{} candidate lengths supplied for a {}-channel tensor",
            lengths.len(),
            tensor.channels()
        )));
    }
    let area = tensor.side() * tensor.side();
    let mut best = 0usize;
    let mut best_mean = f64::NEG_INFINITY;
    for (j, &n_j) in lengths.iter().enumerate() {
        if n_j == 0 || n_j > area {
            return Err(Error::argument(format!(
                "candidate {j} length {n_j} does not fit a {area}-cell plane"
            )));
        }
        let plane = tensor.unfold_plane(j);
        let mean = plane[..n_j].iter().map(|&v| f64::from(v)).sum::<f64>() / n_j as f64;
        if mean > best_mean {
            best = j;
            best_mean = mean;
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
