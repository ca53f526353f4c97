//! Iterative max-log-MAP decoding of the rate-1/3 turbo code.

use super::{clip_frame, correlation, encode_turbo, hard_bit, DecodeResult, LLR_CLIP};
use crate::codebook::{BitVector, Trellis, TurboStructure};
use crate::{Error, Result};

/// One max-log-MAP pass over a recursive-systematic constituent.
///
/// `sys` and `parity` are the constituent's own channel LLRs (in *its*
/// input order), `apriori` the extrinsic information from the other
/// constituent. Returns per-bit a-posteriori LLRs; the caller subtracts
/// `sys + apriori` to obtain the new extrinsic values.
///
/// The trellis starts in the zero state; the final state is unknown
/// (the code is unterminated), so the backward recursion starts uniform.
fn max_log_map(trellis: &Trellis, sys: &[f64], parity: &[f64], apriori: &[f64]) -> Vec<f64> {
    let k = sys.len();
    let states = trellis.num_states;

    // gamma(t, s, d) = (1-2d)*(apriori+sys)/2 + (1-2p)*parity/2.
    let gamma = |t: usize, s: usize, d: u8| -> f64 {
        let input_term = apriori[t].clamp(-LLR_CLIP, LLR_CLIP) + sys[t];
        let p = f64::from(trellis.output_bit(s, d, 0));
        (1.0 - 2.0 * f64::from(d)) * 0.5 * input_term + (1.0 - 2.0 * p) * 0.5 * parity[t]
    };

    // Forward recursion from the known zero start state.
    let mut alpha = vec![f64::NEG_INFINITY; (k + 1) * states];
    alpha[0] = 0.0;
    for t in 0..k {
        let (lo, hi) = (t * states, (t + 1) * states);
        for s in 0..states {
            let a = alpha[lo + s];
            if a == f64::NEG_INFINITY {
                continue;
            }
            for d in 0..2u8 {
                let ns = trellis.next_state(s, d);
                let cand = a + gamma(t, s, d);
                if cand > alpha[hi + ns] {
                    alpha[hi + ns] = cand;
                }
            }
        }
    }

    // Backward recursion, uniform at the (unterminated) frame end.
    let mut beta = vec![0.0f64; (k + 1) * states];
    for t in (0..k).rev() {
        let (lo, hi) = (t * states, (t + 1) * states);
        for s in 0..states {
            let mut best = f64::NEG_INFINITY;
            for d in 0..2u8 {
                let ns = trellis.next_state(s, d);
                let cand = gamma(t, s, d) + beta[hi + ns];
                if cand > best {
                    best = cand;
                }
            }
            beta[lo + s] = best;
        }
    }

    // A-posteriori LLR: best d=0 branch minus best d=1 branch.
    let mut app = vec![0.0f64; k];
    for t in 0..k {
        let (lo, hi) = (t * states, (t + 1) * states);
        let mut best = [f64::NEG_INFINITY; 2];
        for s in 0..states {
            let a = alpha[lo + s];
            if a == f64::NEG_INFINITY {
                continue;
            }
            for d in 0..2u8 {
                let ns = trellis.next_state(s, d);
                let cand = a + gamma(t, s, d) + beta[hi + ns];
                if cand > best[d as usize] {
                    best[d as usize] = cand;
                }
            }
        }
        app[t] = best[0] - best[1];
    }
    app
}

/// Decodes one turbo frame by exchanging extrinsic information between the
/// two constituent decoders for up to `max_iters` rounds.
///
/// Stops early — and reports convergence — when the re-encoded hard
/// decision reproduces the channel hard decisions or when the decisions
/// reach a fixed point between rounds.
pub fn decode_turbo(
    structure: &TurboStructure,
    llrs: &[f64],
    max_iters: usize,
) -> Result<DecodeResult> {
    if llrs.len() != structure.n {
        return Err(Error::argument(format!(
            "frame has {} LLRs, turbo code expects {}",
            llrs.len(),
            structure.n
        )));
    }
    if max_iters == 0 {
        return Err(Error::argument("iteration budget must be at least 1".to_string()));
    }
    let channel = clip_frame(llrs)?;
    let k = structure.k_info;
    let pi = &structure.interleaver;

    let sys: Vec<f64> = (0..k).map(|i| channel[3 * i]).collect();
    let par1: Vec<f64> = (0..k).map(|i| channel[3 * i + 1]).collect();
    let par2: Vec<f64> = (0..k).map(|i| channel[3 * i + 2]).collect();
    let sys_perm: Vec<f64> = pi.iter().map(|&i| sys[i]).collect();
    let channel_hard: Vec<u8> = channel.iter().map(|&l| hard_bit(l)).collect();

    let mut apriori1 = vec![0.0f64; k];
    let mut apriori2 = vec![0.0f64; k];
    let mut app_final = vec![0.0f64; k];
    let mut previous: Option<Vec<u8>> = None;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=max_iters {
        iterations = iter;

        let app1 = max_log_map(&structure.trellis, &sys, &par1, &apriori1);
        for (i, &p) in pi.iter().enumerate() {
            apriori2[i] = app1[p] - sys[p] - apriori1[p].clamp(-LLR_CLIP, LLR_CLIP);
        }

        let app2 = max_log_map(&structure.trellis, &sys_perm, &par2, &apriori2);
        for (i, &p) in pi.iter().enumerate() {
            apriori1[p] = app2[i] - sys_perm[i] - apriori2[i].clamp(-LLR_CLIP, LLR_CLIP);
            app_final[p] = app2[i];
        }

        let decisions: Vec<u8> = app_final.iter().map(|&l| hard_bit(l)).collect();
        let message = BitVector::new(decisions.clone())?;
        let reencoded = encode_turbo(structure, &message)?;
        if reencoded.as_slice() == &channel_hard[..] || previous.as_deref() == Some(&decisions[..])
        {
            converged = true;
            break;
        }
        previous = Some(decisions);
    }

    let message = BitVector::new(app_final.iter().map(|&l| hard_bit(l)).collect())?;
    let codeword = encode_turbo(structure, &message)?;
    let metric = correlation(&codeword, &channel);
    // Posterior at systematic positions; parity positions keep the channel
    // view (the constituent decoders do not emit parity-bit posteriors).
    let mut posterior = channel.clone();
    for i in 0..k {
        posterior[3 * i] = app_final[i];
    }
    Ok(DecodeResult {
        message,
        codeword,
        metric,
        iterations,
        converged,
        posterior: Some(posterior),
    })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::super::tests::{noiseless_llrs, set_for};
    use super::super::{encode, random_message, DecoderConfig};
    use super::*;
    use crate::codebook::{BuiltCode, Scheme};
    use crate::rng::DrawExt;

    fn structure(index: usize) -> &'static TurboStructure {
        match &set_for(Scheme::Turbo).candidates[index].code {
            BuiltCode::Turbo(s) => s,
            _ => unreachable!(),
        }
    }

    #[test]
    fn noiseless_frames_recover_in_one_iteration() {
        let mut rng = crate::rng::chacha(83);
        for cand in &set_for(Scheme::Turbo).candidates {
            let msg = random_message(cand.message_len, &mut rng);
            let cw = encode(cand, &msg).unwrap();
            let llrs = noiseless_llrs(&cw, 5.0);
            let result = super::super::decode(cand, &llrs, &DecoderConfig::default()).unwrap();
            assert_eq!(result.message, msg, "{}", cand.label);
            assert!(result.converged, "{}", cand.label);
            assert_eq!(result.iterations, 1, "{}", cand.label);
        }
    }

    #[test]
    fn corrects_scattered_weak_flips() {
        let s = structure(0);
        let mut rng = crate::rng::chacha(89);
        let msg = random_message(s.k_info, &mut rng);
        let cw = encode_turbo(s, &msg).unwrap();
        let mut llrs = noiseless_llrs(&cw, 4.0);
        // Flip a handful of well-separated positions at low confidence.
        for &pos in &[10usize, 301, 502, 703, 1004, 1105] {
            llrs[pos] = -llrs[pos].signum() * 0.5;
        }
        let result = decode_turbo(s, &llrs, 8).unwrap();
        assert_eq!(result.message, msg);
        assert!(result.converged);
    }

    #[test]
    fn iterations_reduce_bit_errors_on_average() {
        // Monte-Carlo: mean information-bit errors after the full budget
        // must not exceed the mean after one iteration, at an SNR where
        // the first pass still leaves errors.
        let s = structure(0);
        let cand = &set_for(Scheme::Turbo).candidates[0];
        let mut rng = crate::rng::chacha(97);
        let sigma = 1.0; // roughly 0 dB per transmitted bit
        let (mut errs_one, mut errs_full) = (0u32, 0u32);
        for _ in 0..40 {
            let msg = random_message(s.k_info, &mut rng);
            let cw = encode(cand, &msg).unwrap();
            let llrs: Vec<f64> = cw
                .iter()
                .map(|&c| {
                    let symbol = 1.0 - 2.0 * f64::from(c);
                    let y = symbol + sigma * rng.gaussian();
                    2.0 * y / (sigma * sigma)
                })
                .collect();
            let one = decode_turbo(s, &llrs, 1).unwrap();
            let full = decode_turbo(s, &llrs, 8).unwrap();
            errs_one += one
                .message
                .iter()
                .zip(msg.iter())
                .filter(|(a, b)| a != b)
                .count() as u32;
            errs_full += full
                .message
                .iter()
                .zip(msg.iter())
                .filter(|(a, b)| a != b)
                .count() as u32;
        }
        assert!(
            errs_full <= errs_one,
            "full budget {errs_full} errors vs single iteration {errs_one}"
        );
        assert!(errs_one > 0, "test should exercise a noisy regime");
    }

    #[test]
    fn all_zero_llrs_stay_finite() {
        let s = structure(1);
        let result = decode_turbo(s, &vec![0.0; s.n], 8).unwrap();
        assert!(result.metric.is_finite());
        let posterior = result.posterior.as_ref().unwrap();
        assert!(posterior.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = structure(0);
        assert!(decode_turbo(s, &[0.0; 99], 8).is_err());
        assert!(decode_turbo(s, &vec![0.0; s.n], 0).is_err());
    }
}
