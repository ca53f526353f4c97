//! Soft-metric Viterbi decoding of terminated convolutional codes.

use super::{clip_frame, encode_conv, DecodeResult};
use crate::codebook::{BitVector, Trellis};
use crate::{Error, Result};

/// Correlation metric of one branch: the branch's output bits against the
/// step's LLRs, summed in polynomial order. The grouping (per-branch sum,
/// then a running fold over time) is fixed so that an exhaustive
/// path-enumeration oracle reproduces the path metric bit-for-bit.
#[inline]
fn branch_metric(trellis: &Trellis, state: usize, input: u8, step_llrs: &[f64]) -> f64 {
    let packed = trellis.output(state, input);
    let mut sum = 0.0;
    for (j, &l) in step_llrs.iter().enumerate() {
        let bit = f64::from((packed >> j) & 1);
        sum += (1.0 - 2.0 * bit) * l;
    }
    sum
}

/// Accumulates a full path's metric for a given input sequence, using the
/// same grouping as the decoder. Exposed for the exhaustive-search tests.
#[cfg(test)]
pub(crate) fn path_metric(trellis: &Trellis, inputs: &[u8], llrs: &[f64]) -> f64 {
    let opb = trellis.outputs_per_branch;
    let mut state = 0usize;
    let mut metric = 0.0;
    for (t, &d) in inputs.iter().enumerate() {
        metric += branch_metric(trellis, state, d, &llrs[t * opb..(t + 1) * opb]);
        state = trellis.next_state(state, d);
    }
    metric
}

/// Maximum-likelihood decoding of one tail-terminated frame.
///
/// The decoder maximizes the codeword/LLR correlation over every trellis
/// path that starts and ends in the zero state; the final `memory` steps
/// admit only the zero flush input. Ties prefer the zero input, which
/// makes the decision deterministic (and irrelevant at metric level).
pub fn decode_viterbi(trellis: &Trellis, llrs: &[f64]) -> Result<DecodeResult> {
    let opb = trellis.outputs_per_branch;
    if llrs.len() % opb != 0 {
        return Err(Error::argument(format!(
            "frame of {} LLRs is not a multiple of the {} output bits per branch",
            llrs.len(),
            opb
        )));
    }
    let steps = llrs.len() / opb;
    if steps <= trellis.memory {
        return Err(Error::argument(format!(
            "frame spans {steps} trellis steps, need more than the {} flush steps",
            trellis.memory
        )));
    }
    let k_info = steps - trellis.memory;
    let channel = clip_frame(llrs)?;

    let num_states = trellis.num_states;
    let mut metric = vec![f64::NEG_INFINITY; num_states];
    metric[0] = 0.0;
    let mut next_metric = vec![f64::NEG_INFINITY; num_states];
    // survivor[t * num_states + s] = (predecessor state, input) of the best
    // path reaching state s after step t.
    let mut survivor = vec![(0u16, 0u8); steps * num_states];

    for t in 0..steps {
        let step_llrs = &channel[t * opb..(t + 1) * opb];
        let inputs: &[u8] = if t < k_info { &[0, 1] } else { &[0] };
        next_metric.fill(f64::NEG_INFINITY);
        for state in 0..num_states {
            let base = metric[state];
            if base == f64::NEG_INFINITY {
                continue;
            }
            for &input in inputs {
                let cand = base + branch_metric(trellis, state, input, step_llrs);
                let target = trellis.next_state(state, input);
                if cand > next_metric[target] {
                    next_metric[target] = cand;
                    survivor[t * num_states + target] = (state as u16, input);
                }
            }
        }
        std::mem::swap(&mut metric, &mut next_metric);
    }

    // Terminated frame: trace back from the zero state.
    let mut inputs = vec![0u8; steps];
    let mut state = 0usize;
    for t in (0..steps).rev() {
        let (prev, input) = survivor[t * num_states + state];
        inputs[t] = input;
        state = prev as usize;
    }
    debug_assert_eq!(state, 0, "traceback must reach the starting state");

    let message = BitVector::new(inputs[..k_info].to_vec())?;
    let codeword = encode_conv(trellis, &message)?;
    Ok(DecodeResult {
        message,
        codeword,
        metric: metric[0],
        iterations: 1,
        converged: true,
        posterior: None,
    })
}

// ---------------------------------------------------------------------------
