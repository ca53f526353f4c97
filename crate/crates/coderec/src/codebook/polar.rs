//! Polar code construction with shortening.
//!
//! Candidates share one mother code (N = 256, K = 144) and differ only in
//! the output length `e_out`: the last `N - e_out` coded bits are never
//! transmitted. With the natural-order transform (lower-triangular
//! kernel), freezing input indices `e_out..N` to zero forces exactly those
//! coded positions to zero, so the receiver reinserts them as known bits.
//! The information set is the `K` most reliable of the remaining indices
//! under the shipped reliability sequence.

use super::tables::parse_int_sequence;
use super::PolarSpec;
use crate::{Error, Result};

const RELIABILITY_256: &str = include_str!("../../data/polar_reliability_256.txt");

/// A constructed polar code.
#[derive(Debug, Clone)]
pub struct PolarCode {
    pub mother_n: usize,
    /// Transmitted codeword length.
    pub e_out: usize,
    pub k: usize,
    /// Information input indices, ascending.
    pub info_set: Vec<usize>,
    /// `is_info[i]` for each input index; frozen indices (including the
    /// shortening-forced tail) carry zero.
    pub is_info: Vec<bool>,
    /// Number of untransmitted coded positions, `mother_n - e_out`.
    pub num_shortened: usize,
}

/// Reliability ordering for mother length `n`: input indices from least to
/// most reliable. Restricting the shipped 256-entry sequence preserves the
/// ordering for any shorter power-of-two length.
pub fn reliability_order(n: usize) -> Result<Vec<usize>> {
    if !n.is_power_of_two() || n < 2 || n > 256 {
        return Err(Error::construction(format!(
            "mother length {n} must be a power of two in 2..=256"
        )));
    }
    let seq = parse_int_sequence("polar reliability", RELIABILITY_256)?;
    if seq.len() != 256 {
        return Err(Error::format(format!(
            "polar reliability table has {} entries, expected 256",
            seq.len()
        )));
    }
    let order: Vec<usize> = seq
        .into_iter()
        .map(|v| v as usize)
        .filter(|&i| i < n)
        .collect();
    if order.len() != n {
        return Err(Error::format(format!(
            "polar reliability table does not cover 0..{n}"
        )));
    }
    Ok(order)
}

/// Builds the information/frozen partition for `spec`.
pub fn build_polar(spec: &PolarSpec) -> Result<PolarCode> {
    let n = spec.mother_n;
    if spec.e_out > n {
        return Err(Error::construction(format!(
            "output length {} exceeds mother length {n}",
            spec.e_out
        )));
    }
    if spec.k_info > spec.e_out {
        return Err(Error::construction(format!(
            "k_info {} exceeds output length {}",
            spec.k_info, spec.e_out
        )));
    }
    let order = reliability_order(n)?;
    // Inputs at e_out.. are forced frozen by shortening; choose the K most
    // reliable of the rest.
    let mut info_set: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| i < spec.e_out)
        .rev()
        .take(spec.k_info)
        .collect();
    info_set.sort_unstable();
    let mut is_info = vec![false; n];
    for &i in &info_set {
        is_info[i] = true;
    }
    Ok(PolarCode {
        mother_n: n,
        e_out: spec.e_out,
        k: spec.k_info,
        info_set,
        is_info,
        num_shortened: n - spec.e_out,
    })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::POLAR_CANDIDATES;

    /// Independent oracle for the reliability rule: the beta-expansion
    /// polarization weight with beta = 2^(1/4).
    fn polarization_weight(i: usize) -> f64 {
        let beta = 2f64.powf(0.25);
        let mut w = 0.0;
        let mut v = i;
        let mut j = 0;
        while v != 0 {
            if v & 1 == 1 {
                w += beta.powi(j);
            }
            v >>= 1;
            j += 1;
        }
        w
    }

    #[test]
    fn shipped_table_matches_weight_rule() {
        let order = reliability_order(256).unwrap();
        for pair in order.windows(2) {
            assert!(
                polarization_weight(pair[0]) < polarization_weight(pair[1]),
                "table out of order at {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn toy_length_8_info_set() {
        let code = build_polar(&PolarSpec { mother_n: 8, k_info: 4, e_out: 8 }).unwrap();
        assert_eq!(code.info_set, vec![3, 5, 6, 7]);
        assert_eq!(code.num_shortened, 0);
    }

    #[test]
    fn candidate_partition_is_consistent() {
        for spec in POLAR_CANDIDATES {
            let code = build_polar(spec).unwrap();
            assert_eq!(code.k, 144);
            assert_eq!(code.info_set.len(), 144);
            let frozen = code.is_info.iter().filter(|&&b| !b).count();
            assert_eq!(frozen, 256 - 144, "e_out {}", spec.e_out);
            assert_eq!(code.num_shortened, 256 - spec.e_out);
            // Information indices never collide with the shortened tail.
            assert!(code.info_set.iter().all(|&i| i < spec.e_out));
        }
    }

    #[test]
    fn rejects_inconsistent_parameters() {
        assert!(build_polar(&PolarSpec { mother_n: 256, k_info: 200, e_out: 150 }).is_err());
        assert!(build_polar(&PolarSpec { mother_n: 256, k_info: 144, e_out: 300 }).is_err());
        assert!(build_polar(&PolarSpec { mother_n: 100, k_info: 10, e_out: 100 }).is_err());
    }
}
