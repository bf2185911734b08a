//! Gray-labelled square QAM and the joint message / joint symbol sets.
//!
//! Labelling: an `m`-bit label is read most significant bit first; the first
//! `m/2` bits select the in-phase level and the last `m/2` the quadrature
//! level. Each half is Gray-decoded to a level index `i` and mapped to the
//! amplitude `(2^(m/2) - 1 - 2i)`, so the all-zero label sits in the first
//! quadrant. Points are scaled to unit average energy.
//!
//! Joint messages of `u` terminals concatenate the per-terminal labels with
//! terminal 1 in the most significant position; joint message `p` is the
//! integer `p` itself.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BinVector;

/// Largest `m * u` for which joint sets are materialised.
pub const MAX_JOINT_BITS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Modulation {
    Qam4,
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qam4 => 2,
            Modulation::Qam16 => 4,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Modulation::Qam4 => "qam4",
            Modulation::Qam16 => "qam16",
        }
    }

    pub fn from_bits(m: usize) -> Result<Self> {
        match m {
            2 => Ok(Modulation::Qam4),
            4 => Ok(Modulation::Qam16),
            other => Err(Error::UnsupportedOrder(other as u32)),
        }
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qam4" => Ok(Modulation::Qam4),
            "qam16" => Ok(Modulation::Qam16),
            other => Err(Error::UnknownModulation(other.to_string())),
        }
    }
}

impl TryFrom<String> for Modulation {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Modulation> for String {
    fn from(m: Modulation) -> String {
        m.id().to_string()
    }
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

/// `2^m` labelled points with unit average energy; `points[label]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    modulation: Modulation,
    points: Vec<Complex64>,
}

impl Constellation {
    /// Square Gray QAM for `m` in {2, 4}.
    pub fn qam(m: usize) -> Result<Self> {
        let modulation = Modulation::from_bits(m)?;
        let half = m / 2;
        let levels = 1usize << half;
        let mask = levels - 1;
        let raw: Vec<Complex64> = (0..1usize << m)
            .map(|label| {
                let i = gray_decode(label >> half);
                let q = gray_decode(label & mask);
                Complex64::new(
                    (levels - 1) as f64 - 2.0 * i as f64,
                    (levels - 1) as f64 - 2.0 * q as f64,
                )
            })
            .collect();
        let energy = raw.iter().map(|p| p.norm_sqr()).sum::<f64>() / raw.len() as f64;
        let scale = energy.sqrt().recip();
        Ok(Self {
            modulation,
            points: raw.into_iter().map(|p| p * scale).collect(),
        })
    }

    pub fn new(modulation: Modulation) -> Self {
        Self::qam(modulation.bits_per_symbol()).expect("supported order")
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    /// Bits per symbol.
    pub fn order(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    #[inline]
    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn modulate(&self, bits: &BinVector) -> Result<Complex64> {
        if bits.len() != self.order() {
            return Err(Error::InvalidArgument(format!(
                "expected {} bits per symbol, got {}",
                self.order(),
                bits.len()
            )));
        }
        Ok(self.points[bits.word() as usize])
    }

    /// Inverse lookup; exact for points produced by [`Self::modulate`].
    pub fn bits_of(&self, point: Complex64) -> Option<BinVector> {
        self.points
            .iter()
            .position(|&p| (p - point).norm() < 1e-12)
            .map(|label| BinVector::from_word(self.order(), label as u64).expect("m <= 4"))
    }

    /// Average symbol energy (1 up to rounding).
    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    /// Symbol label of terminal `mt` (0-based) inside joint message `p`.
    #[inline]
    pub fn label_in_joint(&self, p: usize, mt: usize, mts: usize) -> usize {
        let m = self.order();
        (p >> (m * (mts - 1 - mt))) & ((1 << m) - 1)
    }
}

/// All `2^(m u)` binary joint messages of `u` terminals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JointMessageSet {
    pub mts: usize,
    pub bits_per_symbol: usize,
}

impl JointMessageSet {
    pub fn new(mts: usize, bits_per_symbol: usize) -> Result<Self> {
        let total = mts * bits_per_symbol;
        if mts == 0 || total == 0 || total > MAX_JOINT_BITS {
            return Err(Error::InvalidArgument(format!(
                "joint message length m*u = {total} must be in 1..={MAX_JOINT_BITS}"
            )));
        }
        Ok(Self {
            mts,
            bits_per_symbol,
        })
    }

    pub fn bits(&self) -> usize {
        self.mts * self.bits_per_symbol
    }

    pub fn len(&self) -> usize {
        1 << self.bits()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vector(&self, p: usize) -> BinVector {
        BinVector::from_word(self.bits(), p as u64).expect("length checked")
    }

    pub fn iter(&self) -> impl Iterator<Item = BinVector> + '_ {
        (0..self.len()).map(|p| self.vector(p))
    }
}

/// Per-terminal symbol tuples aligned with [`JointMessageSet`] order.
pub fn joint_symbols(c: &Constellation, mts: usize) -> Result<Vec<Vec<Complex64>>> {
    if mts < 2 {
        return Err(Error::InvalidArgument("joint symbols need at least two terminals".into()));
    }
    let set = JointMessageSet::new(mts, c.order())?;
    Ok((0..set.len())
        .map(|p| (0..mts).map(|l| c.point(c.label_in_joint(p, l, mts))).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn qam4_points() {
        let c = Constellation::qam(2).unwrap();
        let expected = [
            Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
            Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
        ];
        for (p, e) in c.points().iter().zip(expected) {
            assert!((p - e).norm() < 1e-15);
        }
        let zero = BinVector::from_bits(&[0, 0]).unwrap();
        assert!((c.modulate(&zero).unwrap() - expected[0]).norm() < 1e-15);
    }

    #[test]
    fn unit_energy() {
        for m in [2, 4] {
            let c = Constellation::qam(m).unwrap();
            assert_eq!(c.size(), 1 << m);
            assert!((c.average_energy() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unsupported_orders_rejected() {
        for m in [0, 1, 3, 6] {
            assert!(matches!(Constellation::qam(m), Err(Error::UnsupportedOrder(_))));
        }
        assert!("psk8".parse::<Modulation>().is_err());
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        for m in [2, 4] {
            let c = Constellation::qam(m).unwrap();
            let pts = c.points();
            let dmin = (0..pts.len())
                .flat_map(|a| (0..pts.len()).filter(move |&b| b != a).map(move |b| (a, b)))
                .map(|(a, b)| (pts[a] - pts[b]).norm())
                .fold(f64::INFINITY, f64::min);
            for a in 0..pts.len() {
                for b in 0..pts.len() {
                    if a != b && (pts[a] - pts[b]).norm() < dmin + 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "m={m} labels {a} {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn modulate_round_trip_and_length_check() {
        for m in [2, 4] {
            let c = Constellation::qam(m).unwrap();
            let mut seen = Vec::new();
            for label in 0..1u64 << m {
                let bits = BinVector::from_word(m, label).unwrap();
                let s = c.modulate(&bits).unwrap();
                assert_eq!(c.bits_of(s), Some(bits));
                assert!(seen.iter().all(|&t: &Complex64| (t - s).norm() > 1e-6));
                seen.push(s);
            }
            let wrong = BinVector::from_word(m + 1, 0).unwrap();
            assert!(c.modulate(&wrong).is_err());
        }
    }

    #[test]
    fn joint_symbols_follow_joint_message_order() {
        let c = Constellation::qam(2).unwrap();
        let js = joint_symbols(&c, 2).unwrap();
        assert_eq!(js.len(), 16);
        let s00 = c.point(0);
        assert_eq!(js[0], vec![s00, s00]);
        let set = JointMessageSet::new(2, 2).unwrap();
        for (p, w) in set.iter().enumerate() {
            let bits = w.to_bits();
            for l in 0..2 {
                let label = BinVector::from_bits(&bits[2 * l..2 * l + 2]).unwrap();
                assert_eq!(js[p][l], c.modulate(&label).unwrap());
            }
        }
        assert_eq!(joint_symbols(&Constellation::qam(4).unwrap(), 2).unwrap().len(), 256);
        assert!(joint_symbols(&c, 1).is_err());
    }
}
