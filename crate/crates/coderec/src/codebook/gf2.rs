//! Bit vectors, binary matrices, and GF(2) elimination.

use crate::{Error, Result};

/// A vector of bits stored one byte per bit (values 0 or 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVector {
    bits: Vec<u8>,
}

impl BitVector {
    /// Wraps raw bits, rejecting any value other than 0 or 1.
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::argument(format!(
                "bit vector entry {pos} is {} (must be 0 or 1)",
                bits[pos]
            )));
        }
        Ok(BitVector { bits })
    }

    pub fn zeros(len: usize) -> Self {
        BitVector { bits: vec![0; len] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: u8) {
        debug_assert!(value <= 1);
        self.bits[i] = value;
    }

    pub fn iter(&self) -> std::slice::Iter<'_, u8> {
        self.bits.iter()
    }
}

impl From<BitVector> for Vec<u8> {
    fn from(v: BitVector) -> Vec<u8> {
        v.bits
    }
}

/// A dense binary matrix, row-major, one byte per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BinaryMatrix { rows, cols, data: vec![0; rows * cols] }
    }

    /// Builds a matrix from row slices, checking shape and bit range.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::argument(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            for (j, &b) in row.iter().enumerate() {
                if b > 1 {
                    return Err(Error::argument(format!(
                        "matrix entry ({i},{j}) is {b} (must be 0 or 1)"
                    )));
                }
                data.push(b);
            }
        }
        Ok(BinaryMatrix { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: u8) {
        debug_assert!(value <= 1);
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Matrix-vector product over GF(2): `self * v`.
    pub fn mul_vec(&self, v: &[u8]) -> Result<Vec<u8>> {
        if v.len() != self.cols {
            return Err(Error::argument(format!(
                "vector length {} does not match column count {}",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(0u8, |acc, (&h, &x)| acc ^ (h & x))
            })
            .collect())
    }

    /// Vector-matrix product over GF(2): `u * self`.
    pub fn vec_mul(&self, u: &[u8]) -> Result<Vec<u8>> {
        if u.len() != self.rows {
            return Err(Error::argument(format!(
                "vector length {} does not match row count {}",
                u.len(),
                self.rows
            )));
        }
        let mut out = vec![0u8; self.cols];
        for (r, &bit) in u.iter().enumerate() {
            if bit == 1 {
                for (o, &h) in out.iter_mut().zip(self.row(r)) {
                    *o ^= h;
                }
            }
        }
        Ok(out)
    }
}

/// Result of bringing a parity-check matrix into systematic form.
#[derive(Debug, Clone)]
pub struct Systemized {
    /// Generator matrix, `k x n`, identity on the information positions.
    pub generator: BinaryMatrix,
    /// Codeword positions that carry message bits, ascending.
    pub info_positions: Vec<usize>,
    /// Codeword positions determined by parity, one per check row.
    pub parity_positions: Vec<usize>,
}

/// Derives a systematic generator from a full-row-rank parity-check matrix.
///
/// Pivot columns are chosen right-to-left, so for the usual `[data | parity]`
/// layouts the pivots land in the parity block and the message occupies the
/// first `k = n - rows` codeword positions. Every generator row satisfies all
/// parity checks by construction.
///
/// Returns a construction error naming the offending row if the checks are
/// linearly dependent.
pub fn gf2_systemize(h: &BinaryMatrix) -> Result<Systemized> {
    let (m, n) = (h.rows(), h.cols());
    if m == 0 || n == 0 || m >= n {
        return Err(Error::construction(format!(
            "parity-check matrix must be wider than tall, got {m} x {n}"
        )));
    }
    let mut work = h.clone();
    // pivot_row_of_col[c] = reduced row holding the pivot of column c
    let mut pivot_col_of_row = vec![usize::MAX; m];
    let mut row_is_reduced = vec![false; m];
    let mut parity_positions = Vec::with_capacity(m);

    for col in (0..n).rev() {
        if parity_positions.len() == m {
            break;
        }
        // Find an unreduced row with a 1 in this column.
        let Some(r) = (0..m).find(|&r| !row_is_reduced[r] && work.get(r, col) == 1) else {
            continue;
        };
        // Eliminate the column from every other row.
        for other in 0..m {
            if other != r && work.get(other, col) == 1 {
                for c in 0..n {
                    let v = work.get(other, c) ^ work.get(r, c);
                    work.set(other, c, v);
                }
            }
        }
        row_is_reduced[r] = true;
        pivot_col_of_row[r] = col;
        parity_positions.push(col);
    }

    if let Some(bad) = row_is_reduced.iter().position(|&done| !done) {
        return Err(Error::construction(format!(
            "parity-check row {bad} is linearly dependent on the others"
        )));
    }
    parity_positions.sort_unstable();

    let mut is_parity = vec![false; n];
    for &p in &parity_positions {
        is_parity[p] = true;
    }
    let info_positions: Vec<usize> = (0..n).filter(|&c| !is_parity[c]).collect();
    let k = info_positions.len();

    // Row r of the reduced matrix reads: x[pivot_r] = sum over info columns j
    // of work[r][j] * x[j]. Fill the generator accordingly.
    let mut generator = BinaryMatrix::zeros(k, n);
    for (msg_idx, &pos) in info_positions.iter().enumerate() {
        generator.set(msg_idx, pos, 1);
        for r in 0..m {
            if work.get(r, pos) == 1 {
                generator.set(msg_idx, pivot_col_of_row[r], 1);
            }
        }
    }

    Ok(Systemized { generator, info_positions, parity_positions })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitvector_rejects_non_bits() {
        assert!(BitVector::new(vec![0, 1, 2]).is_err());
        assert!(BitVector::new(vec![0, 1, 1]).is_ok());
    }

    #[test]
    fn systemize_single_parity_check() {
        let h = BinaryMatrix::from_rows(&[vec![1, 1, 1]]).unwrap();
        let s = gf2_systemize(&h).unwrap();
        assert_eq!(s.info_positions, vec![0, 1]);
        assert_eq!(s.parity_positions, vec![2]);
        assert_eq!(s.generator.row(0), &[1, 0, 1]);
        assert_eq!(s.generator.row(1), &[0, 1, 1]);
    }

    #[test]
    fn systemize_hamming_7_4() {
        let h = BinaryMatrix::from_rows(&[
            vec![1, 0, 0, 1, 1, 0, 1],
            vec![0, 1, 0, 1, 0, 1, 1],
            vec![0, 0, 1, 0, 1, 1, 1],
        ])
        .unwrap();
        let s = gf2_systemize(&h).unwrap();
        assert_eq!(s.generator.rows(), 4);
        // Every generator row must satisfy every check.
        for r in 0..4 {
            let syndrome = h.mul_vec(s.generator.row(r)).unwrap();
            assert_eq!(syndrome, vec![0, 0, 0], "row {r}");
        }
        // Identity sub-block on the information positions.
        for (i, &pos) in s.info_positions.iter().enumerate() {
            for r in 0..4 {
                assert_eq!(s.generator.get(r, pos), u8::from(r == i));
            }
        }
    }

    #[test]
    fn systemize_names_dependent_row() {
        let h = BinaryMatrix::from_rows(&[
            vec![1, 1, 0, 0],
            vec![0, 0, 1, 1],
            vec![1, 1, 1, 1], // row 0 + row 1
        ])
        .unwrap();
        let err = gf2_systemize(&h).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("linearly dependent"), "{msg}");
    }

    #[test]
    fn mul_vec_checks_length() {
        let h = BinaryMatrix::from_rows(&[vec![1, 0, 1]]).unwrap();
        assert!(h.mul_vec(&[1, 0]).is_err());
    }

    #[test]
    fn vec_mul_matches_mul_vec_on_transpose() {
        let m = BinaryMatrix::from_rows(&[vec![1, 0, 1, 1], vec![0, 1, 1, 0]]).unwrap();
        let u = [1u8, 1];
        let left = m.vec_mul(&u).unwrap();
        // Manual transpose product.
        let mut expect = vec![0u8; 4];
        for c in 0..4 {
            expect[c] = (m.get(0, c) & u[0]) ^ (m.get(1, c) & u[1]);
        }
        assert_eq!(left, expect);
    }
}
