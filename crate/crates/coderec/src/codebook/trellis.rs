//! Shift-register trellises for convolutional and recursive-systematic codes.
//!
//! A polynomial is a binary mask over the augmented register
//! `(top, s_1, ..., s_m)` where `top` is the newest value, `s_1` the value
//! one step old, and `m` the code memory: bit `m` of the mask taps `top`,
//! bit `m - i` taps `s_i`. For a feed-forward code `top` is the input bit
//! itself; for a recursive-systematic code `top` is the feedback sum
//! `input XOR (feedback taps over s_1..s_m)`. The state packs
//! `(s_1, ..., s_m)` with `s_1` in the highest bit, so the successor state
//! is simply the augmented register shifted right by one.

use crate::{Error, Result};

/// A fully tabulated binary-input trellis.
#[derive(Debug, Clone)]
pub struct Trellis {
    pub memory: usize,
    pub num_states: usize,
    pub outputs_per_branch: usize,
    pub recursive: bool,
    /// `next[2 * state + input]`
    next: Vec<u16>,
    /// `out[2 * state + input]`, bit `j` = output of polynomial `j`.
    out: Vec<u8>,
}

fn check_polynomial(poly: u32, constraint_len: usize, what: &str) -> Result<()> {
    if poly == 0 {
        return Err(Error::construction(format!("{what} polynomial is zero")));
    }
    if poly >> constraint_len != 0 {
        return Err(Error::construction(format!(
            "{what} polynomial {poly:#o} does not fit constraint length {constraint_len}"
        )));
    }
    Ok(())
}

fn check_constraint_len(constraint_len: usize) -> Result<()> {
    if !(2..=16).contains(&constraint_len) {
        return Err(Error::construction(format!(
            "constraint length {constraint_len} out of supported range 2..=16"
        )));
    }
    Ok(())
}

impl Trellis {
    /// Builds the trellis of a feed-forward convolutional code.
    pub fn feedforward(generators: &[u32], constraint_len: usize) -> Result<Trellis> {
        check_constraint_len(constraint_len)?;
        if generators.is_empty() || generators.len() > 8 {
            return Err(Error::construction(format!(
                "need 1..=8 generator polynomials, got {}",
                generators.len()
            )));
        }
        for &g in generators {
            check_polynomial(g, constraint_len, "generator")?;
        }
        let memory = constraint_len - 1;
        let num_states = 1usize << memory;
        let mut next = vec![0u16; num_states * 2];
        let mut out = vec![0u8; num_states * 2];
        for state in 0..num_states {
            for input in 0..2u32 {
                let aug = (input << memory) | state as u32;
                let mut bits = 0u8;
                for (j, &g) in generators.iter().enumerate() {
                    bits |= (((aug & g).count_ones() & 1) as u8) << j;
                }
                next[state * 2 + input as usize] = (aug >> 1) as u16;
                out[state * 2 + input as usize] = bits;
            }
        }
        Ok(Trellis {
            memory,
            num_states,
            outputs_per_branch: generators.len(),
            recursive: false,
            next,
            out,
        })
    }

    /// Builds the trellis of a rate-1 recursive-systematic constituent:
    /// one parity output per input bit, driven by a feedback polynomial.
    ///
    /// The feedback polynomial must tap the newest value (top bit set),
    /// otherwise the recursion would not involve the input at all.
    pub fn recursive_systematic(
        feedback: u32,
        parity: u32,
        constraint_len: usize,
    ) -> Result<Trellis> {
        check_constraint_len(constraint_len)?;
        check_polynomial(feedback, constraint_len, "feedback")?;
        check_polynomial(parity, constraint_len, "parity")?;
        let memory = constraint_len - 1;
        if feedback >> memory != 1 {
            return Err(Error::construction(format!(
                "feedback polynomial {feedback:#o} must have its top bit set"
            )));
        }
        let num_states = 1usize << memory;
        let state_mask = (num_states - 1) as u32;
        let mut next = vec![0u16; num_states * 2];
        let mut out = vec![0u8; num_states * 2];
        for state in 0..num_states {
            for input in 0..2u32 {
                let fb = ((state as u32 & feedback & state_mask).count_ones() & 1) as u32;
                let top = input ^ fb;
                let aug = (top << memory) | state as u32;
                next[state * 2 + input as usize] = (aug >> 1) as u16;
                out[state * 2 + input as usize] = ((aug & parity).count_ones() & 1) as u8;
            }
        }
        Ok(Trellis {
            memory,
            num_states,
            outputs_per_branch: 1,
            recursive: true,
            next,
            out,
        })
    }

    #[inline]
    pub fn next_state(&self, state: usize, input: u8) -> usize {
        self.next[state * 2 + input as usize] as usize
    }

    /// Packed branch output; bit `j` is polynomial `j`'s output.
    #[inline]
    pub fn output(&self, state: usize, input: u8) -> u8 {
        self.out[state * 2 + input as usize]
    }

    #[inline]
    pub fn output_bit(&self, state: usize, input: u8, j: usize) -> u8 {
        (self.output(state, input) >> j) & 1
    }

    /// Runs the encoder from the all-zero state, appending the branch
    /// output bits of each step (polynomial order) to `out_bits`.
    /// Returns the final state.
    pub fn run(&self, inputs: &[u8], out_bits: &mut Vec<u8>) -> usize {
        let mut state = 0usize;
        for &d in inputs {
            debug_assert!(d <= 1);
            let packed = self.output(state, d);
            for j in 0..self.outputs_per_branch {
                out_bits.push((packed >> j) & 1);
            }
            state = self.next_state(state, d);
        }
        state
    }
}

// ---------------------------------------------------------------------------
