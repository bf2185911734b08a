//! Uniform midrise LLR quantizer on `[-clip, clip]`.

use crate::error::{Error, Result};

pub const DEFAULT_CLIP: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LlrQuantizer {
    bits: u32,
    clip: f64,
}

impl LlrQuantizer {
    /// `bits` in 1..=8; the backhaul baselines use 2 and 4.
    pub fn new(bits: u32, clip: f64) -> Result<Self> {
        if !(1..=8).contains(&bits) {
            return Err(Error::InvalidArgument(format!("quantizer bits {bits} outside 1..=8")));
        }
        if !(clip > 0.0) || !clip.is_finite() {
            return Err(Error::InvalidArgument(format!("quantizer clip {clip} must be positive")));
        }
        Ok(Self { bits, clip })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    pub fn step(&self) -> f64 {
        2.0 * self.clip / self.levels() as f64
    }

    pub fn quantize(&self, llr: f64) -> u32 {
        let idx = ((llr + self.clip) / self.step()).floor();
        idx.clamp(0.0, (self.levels() - 1) as f64) as u32
    }

    pub fn dequantize(&self, index: u32) -> f64 {
        -self.clip + (index.min(self.levels() - 1) as f64 + 0.5) * self.step()
    }

    pub fn quantize_all(&self, llrs: &[f64]) -> Vec<u32> {
        llrs.iter().map(|&l| self.quantize(l)).collect()
    }

    pub fn dequantize_all(&self, indices: &[u32]) -> Vec<f64> {
        indices.iter().map(|&i| self.dequantize(i)).collect()
    }
}
