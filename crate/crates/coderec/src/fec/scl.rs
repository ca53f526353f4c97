//! Successive-cancellation list decoding of shortened polar codes.
//!
//! The kernels are the *exact* LLR-domain forms (boxplus via tanh, path
//! metric via `ln(1 + e^-x)`), not the min-sum hardware approximations.
//! With exact kernels the accumulated path metric of a complete path is
//! the exact negative log-likelihood of its codeword (up to a common
//! constant), so whenever every candidate of the final step survives into
//! the list, picking the best finished path is maximum-likelihood — the
//! property the exhaustive-oracle tests pin down.

use super::{clip_frame, correlation, encode_polar, DecodeResult, LLR_CLIP};
use crate::codebook::{BitVector, PolarCode};
use crate::{Error, Result};

/// In-place polar butterfly `x -> x * F^(log2 n)` over GF(2), natural bit
/// order (the kernel matrix is lower-triangular: `[[1,0],[1,1]]`).
pub fn polar_transform(bits: &mut [u8]) {
    let n = bits.len();
    assert!(n.is_power_of_two(), "transform length must be a power of two");
    let mut step = 1;
    while step < n {
        for i in 0..n {
            if i & step == 0 {
                bits[i] ^= bits[i + step];
            }
        }
        step <<= 1;
    }
}

/// Exact boxplus: the LLR of the XOR of two bits with LLRs `a` and `b`.
#[inline]
fn boxplus(a: f64, b: f64) -> f64 {
    let product = ((0.5 * a).tanh() * (0.5 * b).tanh()).clamp(-(1.0 - 1e-15), 1.0 - 1e-15);
    2.0 * product.atanh()
}

/// Exact path-metric increment `ln(1 + e^-x)` for `x = (1-2u) * llr`.
#[inline]
fn phi(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// One decoding hypothesis: its metric plus per-depth working arrays for
/// the recursive factor-graph sweep (the node currently being processed at
/// each depth, the kept left-child bits, and finished subtree bits).
#[derive(Debug, Clone)]
struct Path {
    pm: f64,
    alphas: Vec<Vec<f64>>,
    lefts: Vec<Vec<u8>>,
    betas: Vec<Vec<u8>>,
    decisions: Vec<u8>,
}

/// Depth-first sweep over the polar factor graph for the whole list at
/// once. On entry each path's `alphas[depth]` holds the node's input LLRs;
/// on exit each path's `betas[depth]` holds the node's decided bits.
fn sweep(code: &PolarCode, paths: &mut Vec<Path>, list_size: usize, depth: usize, span: usize) {
    if span == 1 {
        let leaf = paths[0].decisions.len();
        if !code.is_info[leaf] {
            for path in paths.iter_mut() {
                let a = path.alphas[depth][0];
                path.pm += phi(a); // frozen bit is 0
                path.betas[depth].clear();
                path.betas[depth].push(0);
                path.decisions.push(0);
            }
            return;
        }
        // Information leaf: fork every path on u in {0, 1}; keep the
        // `list_size` smallest metrics (stable order on ties).
        let mut candidates: Vec<(usize, u8, f64)> = Vec::with_capacity(paths.len() * 2);
        for (p, path) in paths.iter().enumerate() {
            let a = path.alphas[depth][0];
            candidates.push((p, 0, path.pm + phi(a)));
            candidates.push((p, 1, path.pm + phi(-a)));
        }
        if candidates.len() > list_size {
            candidates.sort_by(|x, y| x.2.total_cmp(&y.2));
            candidates.truncate(list_size);
        }
        let survivors: Vec<Path> = candidates
            .into_iter()
            .map(|(p, u, pm)| {
                let mut path = paths[p].clone();
                path.pm = pm;
                path.betas[depth].clear();
                path.betas[depth].push(u);
                path.decisions.push(u);
                path
            })
            .collect();
        *paths = survivors;
        return;
    }

    let half = span / 2;
    // Left child sees the boxplus of the two input halves.
    for path in paths.iter_mut() {
        let (shallow, deep) = path.alphas.split_at_mut(depth + 1);
        let a = &shallow[depth];
        let child = &mut deep[0];
        child.clear();
        child.extend((0..half).map(|i| boxplus(a[i], a[i + half])));
    }
    sweep(code, paths, list_size, depth + 1, half);

    // Right child sees the g-update under the left child's bits.
    for path in paths.iter_mut() {
        path.lefts[depth].clear();
        let left_bits = std::mem::take(&mut path.betas[depth + 1]);
        let (shallow, deep) = path.alphas.split_at_mut(depth + 1);
        let a = &shallow[depth];
        let child = &mut deep[0];
        child.clear();
        child.extend(
            (0..half).map(|i| a[i + half] + (1.0 - 2.0 * f64::from(left_bits[i])) * a[i]),
        );
        path.lefts[depth] = left_bits;
    }
    sweep(code, paths, list_size, depth + 1, half);

    // Combine child bits: (u XOR v, v).
    for path in paths.iter_mut() {
        let right = std::mem::take(&mut path.betas[depth + 1]);
        let left = &path.lefts[depth];
        let beta = &mut path.betas[depth];
        beta.clear();
        beta.extend((0..half).map(|i| left[i] ^ right[i]));
        beta.extend(right.iter().copied());
        path.betas[depth + 1] = right;
    }
}

/// Decodes one shortened polar frame with list successive cancellation.
///
/// The `e_out` received LLRs are extended to the mother length with
/// saturated positive values for the shortened positions (those coded bits
/// are zero by construction); the best finished path's information bits
/// are returned.
pub fn decode_polar_scl(code: &PolarCode, llrs: &[f64], list_size: usize) -> Result<DecodeResult> {
    if llrs.len() != code.e_out {
        return Err(Error::argument(format!(
            "frame has {} LLRs, shortened polar code expects {}",
            llrs.len(),
            code.e_out
        )));
    }
    if list_size == 0 {
        return Err(Error::argument("list size must be at least 1".to_string()));
    }
    let received = clip_frame(llrs)?;
    let mut channel = received.clone();
    channel.resize(code.mother_n, LLR_CLIP);

    let levels = code.mother_n.trailing_zeros() as usize;
    let mut root = Path {
        pm: 0.0,
        alphas: (0..=levels).map(|d| Vec::with_capacity(code.mother_n >> d)).collect(),
        lefts: (0..=levels).map(|d| Vec::with_capacity(code.mother_n >> d)).collect(),
        betas: (0..=levels).map(|d| Vec::with_capacity(code.mother_n >> d)).collect(),
        decisions: Vec::with_capacity(code.mother_n),
    };
    root.alphas[0] = channel;
    let mut paths = vec![root];
    sweep(code, &mut paths, list_size, 0, code.mother_n);

    let best = paths
        .iter()
        .min_by(|a, b| a.pm.total_cmp(&b.pm))
        .expect("list is never empty");
    let message = BitVector::new(
        code.info_set.iter().map(|&i| best.decisions[i]).collect(),
    )?;
    let codeword = encode_polar(code, &message)?;
    let metric = correlation(&codeword, &received);
    Ok(DecodeResult {
        message,
        codeword,
        metric,
        iterations: 1,
        converged: true,
        posterior: None,
    })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::super::tests::{noiseless_llrs, set_for};
    use super::super::{encode, random_message, DecoderConfig};
    use super::*;
    use crate::codebook::{build_polar, PolarSpec, Scheme};
    use crate::rng::DrawExt;

    #[test]
    fn transform_matches_generator_matrix_by_hand() {
        // N = 4 kernel: x0 = u0+u1+u2+u3, x1 = u1+u3, x2 = u2+u3, x3 = u3.
        let mut x = [1u8, 1, 0, 1];
        polar_transform(&mut x);
        assert_eq!(x, [1, 0, 1, 1]);
        let mut zero = [0u8; 8];
        polar_transform(&mut zero);
        assert_eq!(zero, [0; 8]);
    }

    #[test]
    fn shortened_tail_is_zero_before_truncation() {
        let code = build_polar(&PolarSpec { mother_n: 256, k_info: 144, e_out: 150 }).unwrap();
        let mut rng = crate::rng::chacha(101);
        for _ in 0..10 {
            let msg = random_message(code.k, &mut rng);
            let mut u = vec![0u8; code.mother_n];
            for (bit, &pos) in msg.iter().zip(&code.info_set) {
                u[pos] = *bit;
            }
            polar_transform(&mut u);
            assert!(u[code.e_out..].iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn noiseless_recovery_with_list_one() {
        let mut rng = crate::rng::chacha(103);
        for cand in &set_for(Scheme::Polar).candidates {
            let code = match &cand.code {
                crate::codebook::BuiltCode::Polar(c) => c,
                _ => unreachable!(),
            };
            let msg = random_message(cand.message_len, &mut rng);
            let cw = encode(cand, &msg).unwrap();
            let llrs = noiseless_llrs(&cw, 8.0);
            let result = decode_polar_scl(code, &llrs, 1).unwrap();
            assert_eq!(result.message, msg, "{}", cand.label);
            assert_eq!(result.codeword, cw, "{}", cand.label);
        }
    }

    #[test]
    fn default_config_decodes_default_candidates() {
        let mut rng = crate::rng::chacha(105);
        let cfg = DecoderConfig::default();
        for cand in &set_for(Scheme::Polar).candidates {
            let msg = random_message(cand.message_len, &mut rng);
            let cw = encode(cand, &msg).unwrap();
            let llrs = noiseless_llrs(&cw, 8.0);
            let result = super::super::decode(cand, &llrs, &cfg).unwrap();
            assert_eq!(result.message, msg, "{}", cand.label);
        }
    }

    #[test]
    fn toy_code_matches_exhaustive_maximum_likelihood() {
        // N = 8, K = 4: sixteen codewords. Wherever the ML decision is
        // unique, SCL with a list of 8 must return exactly that message.
        let code = build_polar(&PolarSpec { mother_n: 8, k_info: 4, e_out: 8 }).unwrap();
        let mut rng = crate::rng::chacha(107);
        let mut unique_cases = 0;
        for _ in 0..120 {
            let llrs: Vec<f64> = (0..8).map(|_| 6.0 * (rng.uniform() - 0.5)).collect();
            let mut best = f64::NEG_INFINITY;
            let mut best_msg = None;
            let mut unique = true;
            for word in 0..16u8 {
                let msg = BitVector::new((0..4).map(|i| (word >> i) & 1).collect()).unwrap();
                let cw = encode_polar(&code, &msg).unwrap();
                let m = correlation(&cw, &llrs);
                if m > best {
                    best = m;
                    best_msg = Some(msg);
                    unique = true;
                } else if m == best {
                    unique = false;
                }
            }
            if unique {
                unique_cases += 1;
                let result = decode_polar_scl(&code, &llrs, 8).unwrap();
                assert_eq!(result.message, best_msg.unwrap());
            }
        }
        assert!(unique_cases > 100, "random LLRs should rarely tie");
    }

    #[test]
    fn longer_lists_never_hurt_frame_errors() {
        let code = build_polar(&PolarSpec { mother_n: 256, k_info: 144, e_out: 150 }).unwrap();
        let mut rng = crate::rng::chacha(109);
        let sigma = 0.45;
        let (mut fe1, mut fe8) = (0u32, 0u32);
        for _ in 0..150 {
            let msg = random_message(code.k, &mut rng);
            let cw = encode_polar(&code, &msg).unwrap();
            let llrs: Vec<f64> = cw
                .iter()
                .map(|&c| {
                    let y = (1.0 - 2.0 * f64::from(c)) + sigma * rng.gaussian();
                    2.0 * y / (sigma * sigma)
                })
                .collect();
            let one = decode_polar_scl(&code, &llrs, 1).unwrap();
            let eight = decode_polar_scl(&code, &llrs, 8).unwrap();
            fe1 += u32::from(one.message != msg);
            fe8 += u32::from(eight.message != msg);
        }
        assert!(fe8 <= fe1, "list 8 made {fe8} frame errors vs {fe1} for list 1");
        assert!(fe1 > 0, "noise level should produce some list-1 errors");
    }

    #[test]
    fn rejects_bad_arguments() {
        let code = build_polar(&PolarSpec { mother_n: 256, k_info: 144, e_out: 150 }).unwrap();
        assert!(decode_polar_scl(&code, &[0.0; 10], 8).is_err());
        assert!(decode_polar_scl(&code, &vec![0.0; 150], 0).is_err());
    }
}
