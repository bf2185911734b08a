//! Rayleigh block fading and additive complex Gaussian noise.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::modem::Constellation;

/// One draw of `CN(0, 1)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Noise variance per complex sample for a per-terminal Es/N0 in dB, with
/// unit symbol energy.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Quasi-static channel: `coeffs[j][l]` is the gain from terminal `l` to
/// access point `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub coeffs: Vec<Vec<Complex64>>,
    pub noise_var: f64,
}

impl ChannelRealization {
    pub fn new(coeffs: Vec<Vec<Complex64>>, noise_var: f64) -> Result<Self> {
        let mts = coeffs.first().map_or(0, Vec::len);
        if coeffs.is_empty() || mts == 0 || coeffs.iter().any(|r| r.len() != mts) {
            return Err(Error::InvalidArgument("channel must be a non-empty n x u matrix".into()));
        }
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::InvalidArgument(format!("noise variance {noise_var} must be positive")));
        }
        Ok(Self { coeffs, noise_var })
    }

    pub fn aps(&self) -> usize {
        self.coeffs.len()
    }

    pub fn mts(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn ap(&self, j: usize) -> &[Complex64] {
        &self.coeffs[j]
    }
}

/// i.i.d. unit-variance Rayleigh coefficients, `aps x mts`, drawn from `rng`.
pub fn draw_coefficients<R: Rng + ?Sized>(rng: &mut R, aps: usize, mts: usize) -> Vec<Vec<Complex64>> {
    (0..aps)
        .map(|_| (0..mts).map(|_| complex_gaussian(rng)).collect())
        .collect()
}

/// Seeded channel draw; the same seed always gives the same realization.
pub fn draw_channel(seed: u64, aps: usize, mts: usize, noise_var: f64) -> Result<ChannelRealization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ChannelRealization::new(draw_coefficients(&mut rng, aps, mts), noise_var)
}

/// Noiseless superposition `sum_l h_l s_l` of labelled symbols.
pub fn superpose(c: &Constellation, h: &[Complex64], labels: &[usize]) -> Complex64 {
    h.iter().zip(labels).map(|(&g, &l)| g * c.point(l)).sum()
}

/// One received sample: superposition plus `CN(0, noise_var)` noise.
pub fn receive<R: Rng + ?Sized>(
    c: &Constellation,
    h: &[Complex64],
    labels: &[usize],
    noise_var: f64,
    rng: &mut R,
) -> Result<Complex64> {
    if h.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} channel coefficients for {} symbols",
            h.len(),
            labels.len()
        )));
    }
    let clean = superpose(c, h, labels);
    if noise_var == 0.0 {
        return Ok(clean);
    }
    Ok(clean + complex_gaussian(rng) * noise_var.sqrt())
}
