//! Soft demapping of network-coded vectors.
//!
//! Sign convention: a positive LLR means bit 0 is more likely. Values are
//! clamped to `±LLR_MAX`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gf2::BinMatrix;
use crate::modem::Constellation;
use crate::sfs::superimpose;

pub const LLR_MAX: f64 = 50.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LlrMethod {
    /// Log-sum-exp over all hypotheses.
    #[default]
    Exact,
    /// Max-log approximation.
    MaxLog,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LlrVector {
    pub values: Vec<f64>,
    /// Bits whose value is the same under every hypothesis.
    pub degenerate: Vec<bool>,
}

impl LlrVector {
    pub fn hard_decisions(&self) -> Vec<u8> {
        self.values.iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}

#[inline]
fn clamp(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-LLR_MAX, LLR_MAX)
    }
}

/// Per-bit LLRs from per-hypothesis log-metrics.
///
/// `labels[p]` packs the `nbits` bits of hypothesis `p`, bit 0 most
/// significant. Writes into `out` and returns whether any bit was degenerate.
pub fn bit_llrs(
    metrics: &[f64],
    labels: &[u64],
    nbits: usize,
    method: LlrMethod,
    out: &mut [f64],
    degenerate: &mut [bool],
) {
    debug_assert_eq!(metrics.len(), labels.len());
    for k in 0..nbits {
        let shift = nbits - 1 - k;
        let mut max0 = f64::NEG_INFINITY;
        let mut max1 = f64::NEG_INFINITY;
        for (&m, &l) in metrics.iter().zip(labels) {
            if (l >> shift) & 1 == 0 {
                max0 = max0.max(m);
            } else {
                max1 = max1.max(m);
            }
        }
        if max0 == f64::NEG_INFINITY || max1 == f64::NEG_INFINITY {
            degenerate[k] = true;
            out[k] = if max1 == f64::NEG_INFINITY { LLR_MAX } else { -LLR_MAX };
            continue;
        }
        degenerate[k] = false;
        out[k] = match method {
            LlrMethod::MaxLog => clamp(max0 - max1),
            LlrMethod::Exact => {
                let (mut s0, mut s1) = (0.0, 0.0);
                for (&m, &l) in metrics.iter().zip(labels) {
                    if (l >> shift) & 1 == 0 {
                        s0 += (m - max0).exp();
                    } else {
                        s1 += (m - max1).exp();
                    }
                }
                clamp(max0 - max1 + s0.ln() - s1.ln())
            }
        };
    }
}

/// Demapper for one access point with a fixed channel and mapping matrix;
/// the superimposed constellation and NCV labels are computed once.
#[derive(Clone, Debug)]
pub struct NcvDemapper {
    values: Vec<Complex64>,
    labels: Vec<u64>,
    nbits: usize,
    method: LlrMethod,
    metrics: Vec<f64>,
}

impl NcvDemapper {
    pub fn new(c: &Constellation, h: &[Complex64], g: &BinMatrix, method: LlrMethod) -> Result<Self> {
        let s = superimpose(c, h)?;
        if g.cols() != s.bits() {
            return Err(Error::DimensionMismatch {
                left_rows: g.rows(),
                left_cols: g.cols(),
                right_rows: s.bits(),
                right_cols: 1,
            });
        }
        let labels = (0..s.values().len()).map(|p| g.apply(p as u64)).collect();
        Ok(Self {
            metrics: vec![0.0; s.values().len()],
            values: s.values().to_vec(),
            labels,
            nbits: g.rows(),
            method,
        })
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    /// LLRs of one observation into `out` (length `nbits`).
    pub fn demap_into(&mut self, y: Complex64, noise_var: f64, out: &mut [f64], degenerate: &mut [bool]) {
        let inv = 1.0 / noise_var;
        for (m, s) in self.metrics.iter_mut().zip(&self.values) {
            *m = -(y - s).norm_sqr() * inv;
        }
        bit_llrs(&self.metrics, &self.labels, self.nbits, self.method, out, degenerate);
    }

    pub fn demap(&mut self, y: Complex64, noise_var: f64) -> LlrVector {
        let mut values = vec![0.0; self.nbits];
        let mut degenerate = vec![false; self.nbits];
        self.demap_into(y, noise_var, &mut values, &mut degenerate);
        LlrVector { values, degenerate }
    }
}

/// LLRs of the network-coded vector `g w` given observation `y` at an access
/// point with channel `h`.
pub fn ncv_llr(
    y: Complex64,
    h: &[Complex64],
    g: &BinMatrix,
    c: &Constellation,
    noise_var: f64,
    method: LlrMethod,
) -> Result<LlrVector> {
    if !(noise_var > 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance {noise_var} must be positive")));
    }
    Ok(NcvDemapper::new(c, h, g, method)?.demap(y, noise_var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::channel::{complex_gaussian, superpose};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn noiseless_point_decodes_to_its_ncv() {
        let c = Constellation::qam(2).unwrap();
        let h = [cx(1.0, 0.0), cx(0.3, 0.9)];
        let g = BinMatrix::from_rows(&[[1u8, 0, 1, 0], [0, 1, 0, 1]]).unwrap();
        for p in 0..16usize {
            let y = superpose(&c, &h, &[p >> 2, p & 3]);
            let l = ncv_llr(y, &h, &g, &c, 1e-3, LlrMethod::Exact).unwrap();
            let want = g.apply(p as u64);
            assert_eq!(l.hard_decisions(), vec![(want >> 1) as u8, (want & 1) as u8]);
        }
    }

    #[test]
    fn flipping_hypothesis_labels_flips_sign() {
        let metrics = [-0.3, -2.0, -1.1, -0.7];
        let labels = [0u64, 1, 0, 1];
        let flipped = [1u64, 0, 1, 0];
        let (mut a, mut b) = ([0.0], [0.0]);
        let mut d = [false];
        bit_llrs(&metrics, &labels, 1, LlrMethod::Exact, &mut a, &mut d);
        bit_llrs(&metrics, &flipped, 1, LlrMethod::Exact, &mut b, &mut d);
        assert!((a[0] + b[0]).abs() < 1e-12 && a[0] != 0.0);
    }

    #[test]
    fn constant_bit_is_flagged() {
        let c = Constellation::qam(2).unwrap();
        let h = [cx(1.0, 0.0), cx(0.5, 0.5)];
        let g = BinMatrix::from_rows(&[[1u8, 0, 0, 0], [0, 0, 0, 0]]).unwrap();
        let l = ncv_llr(cx(0.1, 0.2), &h, &g, &c, 0.1, LlrMethod::Exact).unwrap();
        assert_eq!(l.degenerate, vec![false, true]);
        assert_eq!(l.values[1], LLR_MAX);
    }

    #[test]
    fn max_log_agrees_in_sign_at_high_snr() {
        let c = Constellation::qam(2).unwrap();
        let g = BinMatrix::from_rows(&[[1u8, 1, 0, 1], [0, 1, 1, 0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let var: f64 = 1e-3;
        for _ in 0..10_000 {
            let h = [complex_gaussian(&mut rng), complex_gaussian(&mut rng)];
            let p: usize = rng.random_range(0..16);
            let y = superpose(&c, &h, &[p >> 2, p & 3]) + complex_gaussian(&mut rng) * var.sqrt();
            let exact = ncv_llr(y, &h, &g, &c, var, LlrMethod::Exact).unwrap();
            let maxlog = ncv_llr(y, &h, &g, &c, var, LlrMethod::MaxLog).unwrap();
            for (a, b) in exact.values.iter().zip(&maxlog.values) {
                assert!(a.signum() == b.signum() || a.abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn llrs_are_calibrated() {
        // For a proper LLR L, P(bit wrong | |L|) = 1 / (1 + e^|L|); compare the
        // observed sign-error rate with the rate the magnitudes predict.
        let c = Constellation::qam(2).unwrap();
        let g = BinMatrix::from_rows(&[[1u8, 0, 1, 0], [0, 1, 0, 1]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let var: f64 = 0.5;
        let (mut errors, mut predicted, mut n) = (0.0, 0.0, 0.0);
        for _ in 0..40_000 {
            let h = [complex_gaussian(&mut rng), complex_gaussian(&mut rng)];
            let p: usize = rng.random_range(0..16);
            let y = superpose(&c, &h, &[p >> 2, p & 3]) + complex_gaussian(&mut rng) * var.sqrt();
            let l = ncv_llr(y, &h, &g, &c, var, LlrMethod::Exact).unwrap();
            let truth = g.apply(p as u64);
            for (k, &v) in l.values.iter().enumerate() {
                let bit = (truth >> (1 - k)) & 1;
                if u64::from(v < 0.0) != bit {
                    errors += 1.0;
                }
                predicted += 1.0 / (1.0 + v.abs().exp());
                n += 1.0;
            }
        }
        let (obs, pred) = (errors / n, predicted / n);
        let se = (pred * (1.0 - pred) / n).sqrt();
        assert!((obs - pred).abs() < 4.0 * se, "observed {obs}, predicted {pred}");
    }
}
