//! Quasi-cyclic LDPC code construction from prototype tables.
//!
//! The candidate codes are the IEEE 802.11n block-length-648 codes: a
//! prototype matrix of cyclic-shift exponents is expanded with Z = 27
//! circulant blocks into the full parity-check matrix, and a systematic
//! generator is derived by GF(2) elimination.

use super::gf2::{gf2_systemize, BinaryMatrix};
use super::tables::parse_int_table;
use super::LdpcSpec;
use crate::{Error, Result};

const TABLE_R12: &str = include_str!("../../data/ldpc_648_r12.txt");
const TABLE_R23: &str = include_str!("../../data/ldpc_648_r23.txt");
const TABLE_R34: &str = include_str!("../../data/ldpc_648_r34.txt");
const TABLE_R56: &str = include_str!("../../data/ldpc_648_r56.txt");

/// A constructed LDPC code: parity checks plus a systematic encoder.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    pub h: BinaryMatrix,
    pub generator: BinaryMatrix,
    /// Codeword positions carrying message bits, ascending.
    pub info_positions: Vec<usize>,
    /// Variable indices of each check row (sparse view of `h`, cached for
    /// the message-passing decoder).
    pub check_neighbors: Vec<Vec<u32>>,
    pub n: usize,
    pub k: usize,
}

/// Returns the shipped prototype table for a supported (rate, n) pair.
fn prototype_for(spec: &LdpcSpec) -> Result<&'static str> {
    if spec.n != 648 || spec.z != 27 {
        return Err(Error::construction(format!(
            "no prototype table for n = {}, Z = {} (supported: n = 648, Z = 27)",
            spec.n, spec.z
        )));
    }
    match spec.rate {
        (1, 2) => Ok(TABLE_R12),
        (2, 3) => Ok(TABLE_R23),
        (3, 4) => Ok(TABLE_R34),
        (5, 6) => Ok(TABLE_R56),
        (a, b) => Err(Error::construction(format!(
            "no prototype table for rate {a}/{b} at n = {}",
            spec.n
        ))),
    }
}

/// Expands a prototype matrix of shift exponents into the binary H.
///
/// Entry `e >= 0` places the identity cyclically shifted by `e` columns
/// (row `i` of the block has its 1 in column `(i + e) mod z`); `-1` places
/// the zero block.
pub fn expand_prototype(proto: &[Vec<i32>], z: usize) -> Result<BinaryMatrix> {
    let block_rows = proto.len();
    let block_cols = proto[0].len();
    let mut h = BinaryMatrix::zeros(block_rows * z, block_cols * z);
    for (br, row) in proto.iter().enumerate() {
        for (bc, &e) in row.iter().enumerate() {
            if e < 0 {
                continue;
            }
            let shift = e as usize % z;
            for i in 0..z {
                h.set(br * z + i, bc * z + (i + shift) % z, 1);
            }
        }
    }
    Ok(h)
}

/// Builds the parity-check matrix and systematic generator for `spec`.
pub fn build_ldpc(spec: &LdpcSpec) -> Result<LdpcCode> {
    let table = prototype_for(spec)?;
    let proto = parse_int_table("ldpc prototype", table)?;
    let expected_cols = spec.n / spec.z;
    if proto[0].len() != expected_cols {
        return Err(Error::construction(format!(
            "prototype has {} block columns, expected {expected_cols}",
            proto[0].len()
        )));
    }
    let k = spec.n * spec.rate.0 / spec.rate.1;
    let expected_rows = (spec.n - k) / spec.z;
    if proto.len() != expected_rows {
        return Err(Error::construction(format!(
            "prototype has {} block rows, expected {expected_rows} for rate {}/{}",
            proto.len(),
            spec.rate.0,
            spec.rate.1
        )));
    }
    let h = expand_prototype(&proto, spec.z)?;
    let sys = gf2_systemize(&h)?;
    let check_neighbors = (0..h.rows())
        .map(|r| {
            h.row(r)
                .iter()
                .enumerate()
                .filter(|&(_, &bit)| bit == 1)
                .map(|(c, _)| c as u32)
                .collect()
        })
        .collect();
    Ok(LdpcCode {
        h,
        generator: sys.generator,
        info_positions: sys.info_positions,
        check_neighbors,
        n: spec.n,
        k,
    })
}

// ---------------------------------------------------------------------------
