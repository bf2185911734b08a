//! Rate-2/3 convolutional code: the constraint-length-7 (171, 133) octal
//! mother code punctured to rate 2/3, zero-terminated, with a soft-input
//! Viterbi decoder.
//!
//! For `k` information bits (`k` even) the encoder appends 6 zero tail bits
//! and emits `3 (k + 6) / 2` coded bits. With `a` and `b` the 171 and 133
//! outputs, each pair of trellis steps emits `a_t, b_t, b_{t+1}`; the other
//! choice of surviving output has free distance 5 instead of 6.

use crate::error::{Error, Result};
use crate::phy::llr::LLR_MAX;

pub const CONSTRAINT_LENGTH: usize = 7;
pub const GENERATORS: [u32; 2] = [0o171, 0o133];
pub const TAIL_BITS: usize = CONSTRAINT_LENGTH - 1;
const STATES: usize = 1 << TAIL_BITS;

/// Coded length for `info_len` information bits.
pub fn coded_len(info_len: usize) -> usize {
    3 * (info_len + TAIL_BITS) / 2
}

fn check_len(info_len: usize) -> Result<()> {
    if info_len == 0 || !info_len.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "rate-2/3 framing needs a positive even number of information bits, got {info_len}"
        )));
    }
    Ok(())
}

/// Outputs `(a, b)` and next state for input `bit` in `state`; the state holds
/// the six previous inputs with the most recent in its top bit.
#[inline]
fn step(state: usize, bit: u8) -> (u8, u8, usize) {
    let reg = ((bit as u32) << TAIL_BITS) | state as u32;
    let a = ((reg & GENERATORS[0]).count_ones() & 1) as u8;
    let b = ((reg & GENERATORS[1]).count_ones() & 1) as u8;
    (a, b, (reg >> 1) as usize)
}

pub fn encode(bits: &[u8]) -> Result<Vec<u8>> {
    check_len(bits.len())?;
    let mut out = Vec::with_capacity(coded_len(bits.len()));
    let mut state = 0usize;
    let padded = bits.iter().copied().chain(std::iter::repeat_n(0, TAIL_BITS));
    for (t, bit) in padded.enumerate() {
        if bit > 1 {
            return Err(Error::InvalidArgument(format!("bit value {bit} is not 0 or 1")));
        }
        let (a, b, next) = step(state, bit);
        if t % 2 == 0 {
            out.push(a);
        }
        out.push(b);
        state = next;
    }
    Ok(out)
}

/// Maximum-likelihood decoding of a terminated codeword from its LLRs
/// (positive favours 0). Returns the `info_len` information bits.
pub fn decode(llrs: &[f64], info_len: usize) -> Result<Vec<u8>> {
    check_len(info_len)?;
    if llrs.len() != coded_len(info_len) {
        return Err(Error::InvalidArgument(format!(
            "expected {} coded LLRs for {info_len} information bits, got {}",
            coded_len(info_len),
            llrs.len()
        )));
    }
    let steps = info_len + TAIL_BITS;

    let mut table = [[(0u8, 0u8, 0usize); 2]; STATES];
    for (s, row) in table.iter_mut().enumerate() {
        for bit in 0..2u8 {
            row[bit as usize] = step(s, bit);
        }
    }

    let mut metric = vec![f64::NEG_INFINITY; STATES];
    metric[0] = 0.0;
    let mut next = vec![f64::NEG_INFINITY; STATES];
    // decisions[t] bit s' = which predecessor (low bit of the previous state) won.
    let mut decisions = vec![0u64; steps];
    let mut pos = 0;
    for (t, dec) in decisions.iter_mut().enumerate() {
        let (la, lb) = if t % 2 == 0 {
            pos += 2;
            (llrs[pos - 2], llrs[pos - 1])
        } else {
            pos += 1;
            (0.0, llrs[pos - 1])
        };
        let (la, lb) = (la.clamp(-LLR_MAX, LLR_MAX), lb.clamp(-LLR_MAX, LLR_MAX));
        let tail = t >= info_len;

        next.fill(f64::NEG_INFINITY);
        for (s, &m) in metric.iter().enumerate() {
            if m == f64::NEG_INFINITY {
                continue;
            }
            for bit in 0..(if tail { 1 } else { 2 }) {
                let (a, b, ns) = table[s][bit];
                let bm = if a == 0 { la } else { -la } + if b == 0 { lb } else { -lb };
                let cand = m + bm;
                if cand > next[ns] {
                    next[ns] = cand;
                    if s & 1 == 1 {
                        *dec |= 1 << ns;
                    } else {
                        *dec &= !(1 << ns);
                    }
                }
            }
        }
        std::mem::swap(&mut metric, &mut next);
    }

    let mut state = 0usize;
    let mut bits = vec![0u8; steps];
    for t in (0..steps).rev() {
        bits[t] = (state >> (TAIL_BITS - 1)) as u8;
        let low = ((decisions[t] >> state) & 1) as usize;
        state = ((state << 1) & (STATES - 1)) | low;
    }
    bits.truncate(info_len);
    Ok(bits)
}
