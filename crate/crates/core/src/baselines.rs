//! Reference receivers: joint detection with unlimited backhaul, and
//! per-access-point detection with quantized LLR forwarding.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BinMatrix;
use crate::modem::{Constellation, Modulation};
use crate::phy::llr::{bit_llrs, LlrMethod, LlrVector, NcvDemapper};
use crate::phy::quant::LlrQuantizer;
use crate::sfs::superimpose;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    Bmas,
    CompIdeal,
    /// Per-access-point detection with `b`-bit LLR quantization.
    CompQuant(u32),
}

impl Scheme {
    pub fn id(&self) -> String {
        match self {
            Scheme::Bmas => "bmas".into(),
            Scheme::CompIdeal => "comp-ideal".into(),
            Scheme::CompQuant(b) => format!("comp-quant{b}"),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bmas" => Ok(Scheme::Bmas),
            "comp-ideal" => Ok(Scheme::CompIdeal),
            "comp-quant2" => Ok(Scheme::CompQuant(2)),
            "comp-quant4" => Ok(Scheme::CompQuant(4)),
            other => Err(Error::Config(format!(
                "unknown scheme `{other}` (expected bmas, comp-ideal, comp-quant2 or comp-quant4)"
            ))),
        }
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.id()
    }
}

/// Network size and constellation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub modulation: Modulation,
    pub mts: usize,
    pub aps: usize,
}

impl Scenario {
    pub fn message_bits(&self) -> usize {
        self.modulation.bits_per_symbol() * self.mts
    }
}

/// Backhaul bits per channel use; `None` means unlimited.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackhaulBudget {
    pub scheme: Scheme,
    pub per_ap: Option<Vec<usize>>,
    pub total: Option<usize>,
}

/// Backhaul load of a scheme. With an uneven split the extra rows are listed
/// on the lowest-index access points; the total does not depend on the split.
pub fn backhaul_load(scheme: Scheme, scenario: &Scenario) -> BackhaulBudget {
    let bits = scenario.message_bits();
    let per_ap = match scheme {
        Scheme::CompIdeal => None,
        Scheme::Bmas => {
            let n = scenario.aps;
            Some((0..n).map(|j| bits / n + usize::from(j < bits % n)).collect())
        }
        Scheme::CompQuant(b) => Some(vec![bits * b as usize; scenario.aps]),
    };
    let total = per_ap.as_ref().map(|v: &Vec<usize>| v.iter().sum());
    BackhaulBudget { scheme, per_ap, total }
}

fn check_shapes(observations: &[Complex64], channels: &[Vec<Complex64>]) -> Result<usize> {
    let mts = channels.first().map_or(0, Vec::len);
    if observations.len() != channels.len() || mts == 0 || channels.iter().any(|h| h.len() != mts) {
        return Err(Error::InvalidArgument(format!(
            "{} observations for a {}-access-point channel",
            observations.len(),
            channels.len()
        )));
    }
    Ok(mts)
}

/// Joint detector over all access points' observations. Output bit order is
/// terminal 1's bits first, most significant first.
#[derive(Clone, Debug)]
pub struct IdealCompDetector {
    values: Vec<Vec<Complex64>>,
    labels: Vec<u64>,
    nbits: usize,
    method: LlrMethod,
    metrics: Vec<f64>,
}

impl IdealCompDetector {
    pub fn new(c: &Constellation, channels: &[Vec<Complex64>], method: LlrMethod) -> Result<Self> {
        let values = channels
            .iter()
            .map(|h| superimpose(c, h).map(|s| s.values().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let n = values.first().map_or(0, Vec::len);
        let nbits = n.trailing_zeros() as usize;
        Ok(Self {
            values,
            labels: (0..n as u64).collect(),
            nbits,
            method,
            metrics: vec![0.0; n],
        })
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn detect_into(&mut self, ys: &[Complex64], noise_var: f64, out: &mut [f64], degenerate: &mut [bool]) {
        let inv = 1.0 / noise_var;
        self.metrics.fill(0.0);
        for (vals, &y) in self.values.iter().zip(ys) {
            for (m, s) in self.metrics.iter_mut().zip(vals) {
                *m -= (y - s).norm_sqr() * inv;
            }
        }
        bit_llrs(&self.metrics, &self.labels, self.nbits, self.method, out, degenerate);
    }
}

/// Per-bit LLRs of all terminals from the joint posterior over every access
/// point's observation.
pub fn ideal_comp_detect(
    observations: &[Complex64],
    channels: &[Vec<Complex64>],
    c: &Constellation,
    noise_var: f64,
) -> Result<LlrVector> {
    check_shapes(observations, channels)?;
    let mut d = IdealCompDetector::new(c, channels, LlrMethod::Exact)?;
    let mut values = vec![0.0; d.nbits()];
    let mut degenerate = vec![false; d.nbits()];
    d.detect_into(observations, noise_var, &mut values, &mut degenerate);
    Ok(LlrVector { values, degenerate })
}

/// Per-access-point multiuser detection, optional quantization of every LLR,
/// and summation at the central processor.
#[derive(Clone, Debug)]
pub struct NonIdealComp {
    demappers: Vec<NcvDemapper>,
    quantizer: Option<LlrQuantizer>,
    scratch: Vec<f64>,
    flags: Vec<bool>,
}

impl NonIdealComp {
    /// `quantizer = None` forwards unquantized LLRs.
    pub fn new(
        c: &Constellation,
        channels: &[Vec<Complex64>],
        quantizer: Option<LlrQuantizer>,
        method: LlrMethod,
    ) -> Result<Self> {
        let mts = channels.first().map_or(0, Vec::len);
        let id = BinMatrix::identity(c.order() * mts)?;
        let demappers = channels
            .iter()
            .map(|h| NcvDemapper::new(c, h, &id, method))
            .collect::<Result<Vec<_>>>()?;
        let n = c.order() * mts;
        Ok(Self {
            demappers,
            quantizer,
            scratch: vec![0.0; n],
            flags: vec![false; n],
        })
    }

    pub fn nbits(&self) -> usize {
        self.scratch.len()
    }

    pub fn detect_into(&mut self, ys: &[Complex64], noise_var: f64, out: &mut [f64]) {
        out.fill(0.0);
        for (d, &y) in self.demappers.iter_mut().zip(ys) {
            d.demap_into(y, noise_var, &mut self.scratch, &mut self.flags);
            for (o, &l) in out.iter_mut().zip(&self.scratch) {
                *o += match &self.quantizer {
                    Some(q) => q.dequantize(q.quantize(l)),
                    None => l,
                };
            }
        }
    }
}

pub fn nonideal_comp_pipeline(
    observations: &[Complex64],
    channels: &[Vec<Complex64>],
    c: &Constellation,
    noise_var: f64,
    quantizer: Option<LlrQuantizer>,
) -> Result<LlrVector> {
    check_shapes(observations, channels)?;
    let mut p = NonIdealComp::new(c, channels, quantizer, LlrMethod::Exact)?;
    let mut values = vec![0.0; p.nbits()];
    p.detect_into(observations, noise_var, &mut values);
    Ok(LlrVector {
        degenerate: vec![false; values.len()],
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::channel::{complex_gaussian, superpose};
    use crate::phy::llr::ncv_llr;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scenario(mts: usize, aps: usize) -> Scenario {
        Scenario {
            modulation: Modulation::Qam4,
            mts,
            aps,
        }
    }

    #[test]
    fn backhaul_figures() {
        let total = |s, mts, aps| backhaul_load(s, &scenario(mts, aps)).total;
        assert_eq!(total(Scheme::Bmas, 3, 2), Some(6));
        assert_eq!(backhaul_load(Scheme::Bmas, &scenario(3, 2)).per_ap, Some(vec![3, 3]));
        assert_eq!(total(Scheme::Bmas, 3, 3), Some(6));
        assert_eq!(total(Scheme::CompQuant(4), 3, 3), Some(72));
        assert_eq!(total(Scheme::Bmas, 2, 2), Some(4));
        assert_eq!(total(Scheme::CompQuant(2), 2, 2), Some(16));
        assert_eq!(total(Scheme::CompQuant(4), 2, 2), Some(32));
        assert_eq!(total(Scheme::CompIdeal, 2, 2), None);
        assert_eq!(backhaul_load(Scheme::Bmas, &scenario(2, 3)).per_ap, Some(vec![2, 1, 1]));
    }

    #[test]
    fn scheme_ids_round_trip() {
        for id in ["bmas", "comp-ideal", "comp-quant2", "comp-quant4"] {
            assert_eq!(id.parse::<Scheme>().unwrap().id(), id);
        }
        assert!("comp-quant3".parse::<Scheme>().is_err());
    }

    fn draw(rng: &mut ChaCha8Rng, aps: usize, mts: usize) -> Vec<Vec<Complex64>> {
        (0..aps).map(|_| (0..mts).map(|_| complex_gaussian(rng)).collect()).collect()
    }

    #[test]
    fn noiseless_joint_detection_recovers_message() {
        let c = Constellation::qam(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = draw(&mut rng, 2, 2);
        for p in 0..16usize {
            let ys: Vec<Complex64> = h.iter().map(|hj| superpose(&c, hj, &[p >> 2, p & 3])).collect();
            let l = ideal_comp_detect(&ys, &h, &c, 1e-4).unwrap();
            let bits: usize = l.hard_decisions().iter().fold(0, |a, &b| a << 1 | b as usize);
            assert_eq!(bits, p);
        }
    }

    #[test]
    fn single_ap_matches_identity_demapper() {
        let c = Constellation::qam(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let id = BinMatrix::identity(4).unwrap();
        for _ in 0..200 {
            let h = draw(&mut rng, 1, 2);
            let y = complex_gaussian(&mut rng) * 2.0;
            let a = ideal_comp_detect(&[y], &h, &c, 0.3).unwrap();
            let b = ncv_llr(y, &h[0], &id, &c, 0.3, LlrMethod::Exact).unwrap();
            for (x, z) in a.values.iter().zip(&b.values) {
                assert!((x - z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ap_order_does_not_matter() {
        let c = Constellation::qam(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = draw(&mut rng, 3, 2);
        let ys: Vec<Complex64> = (0..3).map(|_| complex_gaussian(&mut rng)).collect();
        let a = ideal_comp_detect(&ys, &h, &c, 0.5).unwrap();
        let hr: Vec<_> = h.iter().rev().cloned().collect();
        let yr: Vec<_> = ys.iter().rev().copied().collect();
        let b = ideal_comp_detect(&yr, &hr, &c, 0.5).unwrap();
        for (x, z) in a.values.iter().zip(&b.values) {
            assert!((x - z).abs() < 1e-9);
        }
    }

    #[test]
    fn unquantized_combining_is_a_sum() {
        let c = Constellation::qam(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let id = BinMatrix::identity(4).unwrap();
        let h = draw(&mut rng, 2, 2);
        let ys: Vec<Complex64> = (0..2).map(|_| complex_gaussian(&mut rng)).collect();
        let sum = nonideal_comp_pipeline(&ys, &h, &c, 0.2, None).unwrap();
        let parts: Vec<LlrVector> = (0..2)
            .map(|j| ncv_llr(ys[j], &h[j], &id, &c, 0.2, LlrMethod::Exact).unwrap())
            .collect();
        for k in 0..4 {
            assert!((sum.values[k] - parts[0].values[k] - parts[1].values[k]).abs() < 1e-12);
        }
        let q = LlrQuantizer::new(2, 8.0).unwrap();
        let quant = nonideal_comp_pipeline(&ys, &h, &c, 0.2, Some(q)).unwrap();
        for k in 0..4 {
            let want = q.dequantize(q.quantize(parts[0].values[k])) + q.dequantize(q.quantize(parts[1].values[k]));
            assert_eq!(quant.values[k], want);
        }
    }

    #[test]
    fn joint_llrs_are_stronger_than_single_ap() {
        let c = Constellation::qam(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let var: f64 = 0.3;
        let (mut joint, mut single) = (0.0, 0.0);
        for _ in 0..5_000 {
            let h = draw(&mut rng, 2, 2);
            let p: usize = rng.random_range(0..16);
            let ys: Vec<Complex64> = h
                .iter()
                .map(|hj| superpose(&c, hj, &[p >> 2, p & 3]) + complex_gaussian(&mut rng) * var.sqrt())
                .collect();
            let j = ideal_comp_detect(&ys, &h, &c, var).unwrap();
            let s = ideal_comp_detect(&ys[..1], &h[..1], &c, var).unwrap();
            joint += j.values.iter().map(|v| v.abs()).sum::<f64>();
            single += s.values.iter().map(|v| v.abs()).sum::<f64>();
        }
        assert!(joint > single, "joint {joint} single {single}");
    }
}
