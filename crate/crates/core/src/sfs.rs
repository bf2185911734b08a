//! Singular fade states, clash partitions and cluster distances.
//!
//! For two terminals with channel `[1, v]` the superimposed symbol of a joint
//! message is `s1 + v s2`. A state `v` is singular when two distinct symbol
//! pairs land on the same superimposed value, which happens exactly when
//! `v = (s1 - s1') / (s2' - s2)` with both differences nonzero.
//!
//! A binary map `G` sends joint message `w` to `G w`. Because `G` is linear,
//! two messages share a network-coded vector iff their XOR lies in the kernel
//! of `G`, so every distance statistic needed to score `G` can be tabulated
//! once per XOR pattern in a [`DistanceProfile`].

use num_complex::Complex64;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gf2::BinMatrix;
use crate::modem::{Constellation, JointMessageSet};
use crate::phy::channel::complex_gaussian;
use crate::stats::{wilson_interval, Z95};

/// Two superimposed values closer than this coincide.
pub const COINCIDENCE_TOL: f64 = 1e-9;

/// Default relative neighbourhood radius for activity.
pub const DEFAULT_ACTIVITY_RADIUS: f64 = 0.05;

/// Minimum Monte-Carlo trial count for [`estimate_activity`].
pub const MIN_ACTIVITY_TRIALS: u64 = 10_000;

/// Labels `(s1, s2, s1', s2')` satisfying `s1 + v s2 = s1' + v s2'`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Witness {
    pub s1: usize,
    pub s2: usize,
    pub s1_alt: usize,
    pub s2_alt: usize,
}

impl Witness {
    /// Re-checks the clash equation at `v`.
    pub fn holds(&self, c: &Constellation, v: Complex64) -> bool {
        let a = c.point(self.s1) + v * c.point(self.s2);
        let b = c.point(self.s1_alt) + v * c.point(self.s2_alt);
        self.s1 != self.s1_alt && self.s2 != self.s2_alt && (a - b).norm() <= COINCIDENCE_TOL
    }
}

/// Groups of joint-message indices with coinciding superimposed values,
/// ordered by smallest member; members ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClashPartition {
    groups: Vec<Vec<usize>>,
}

impl ClashPartition {
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn clash_count(&self) -> usize {
        self.groups.iter().filter(|g| g.len() > 1).count()
    }

    pub fn has_clash(&self) -> bool {
        self.clash_count() > 0
    }

    /// Group index of every member.
    pub fn labels(&self) -> Vec<usize> {
        let n: usize = self.groups.iter().map(Vec::len).sum();
        let mut out = vec![0; n];
        for (k, g) in self.groups.iter().enumerate() {
            for &p in g {
                out[p] = k;
            }
        }
        out
    }

    /// Short stable digest of the group structure.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for g in &self.groups {
            for p in g {
                h.update(p.to_string().as_bytes());
                h.update(b",");
            }
            h.update(b";");
        }
        hex::encode(&h.finalize()[..8])
    }
}

/// Superimposed values `sum_l h_l M(w_l)` for every joint message, in joint
/// message order.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperimposedSet {
    channel: Vec<Complex64>,
    bits: usize,
    values: Vec<Complex64>,
}

impl SuperimposedSet {
    pub fn channel(&self) -> &[Complex64] {
        &self.channel
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Joint message length `m * u`.
    pub fn bits(&self) -> usize {
        self.bits
    }
}

pub fn superimpose(c: &Constellation, h: &[Complex64]) -> Result<SuperimposedSet> {
    let mts = h.len();
    let set = JointMessageSet::new(mts, c.order())?;
    let values = (0..set.len())
        .map(|p| {
            h.iter()
                .enumerate()
                .map(|(l, &g)| g * c.point(c.label_in_joint(p, l, mts)))
                .sum()
        })
        .collect();
    Ok(SuperimposedSet {
        channel: h.to_vec(),
        bits: set.bits(),
        values,
    })
}

pub fn partition_clashes(s: &SuperimposedSet) -> ClashPartition {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (p, &v) in s.values.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|g| (s.values[g[0]] - v).norm() <= COINCIDENCE_TOL)
        {
            Some(g) => g.push(p),
            None => groups.push(vec![p]),
        }
    }
    ClashPartition { groups }
}

/// A singular fade state of a two-terminal channel `[1, v]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularFadeState {
    pub value: Complex64,
    pub witness: Witness,
    pub partition: ClashPartition,
}

fn snap(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        0.0
    } else {
        x
    }
}

/// Sort key for the canonical order of SFS values (real part, then imaginary).
pub fn canonical_key(v: Complex64) -> (i64, i64) {
    ((v.re * 1e6).round() as i64, (v.im * 1e6).round() as i64)
}

/// All distinct singular fade states of `c` for two terminals, in
/// canonical value order, each with a witness and its clash partition.
pub fn enumerate_sfs(c: &Constellation) -> Vec<SingularFadeState> {
    let n = c.size();
    // Distinct nonzero differences s - s' with one labelled witness each.
    let mut diffs: Vec<(Complex64, usize, usize)> = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let d = c.point(a) - c.point(b);
            if !diffs.iter().any(|(e, _, _)| (e - d).norm() <= COINCIDENCE_TOL) {
                diffs.push((d, a, b));
            }
        }
    }
    // v = (s1 - s1') / (s2' - s2): numerator d1 = s1 - s1', denominator d2 = s2' - s2.
    let mut found: Vec<(Complex64, Witness)> = Vec::new();
    for &(d1, s1, s1_alt) in &diffs {
        for &(d2, s2_alt, s2) in &diffs {
            let v = d1 / d2;
            if !found.iter().any(|(u, _)| (u - v).norm() <= COINCIDENCE_TOL) {
                found.push((
                    Complex64::new(snap(v.re), snap(v.im)),
                    Witness {
                        s1,
                        s2,
                        s1_alt,
                        s2_alt,
                    },
                ));
            }
        }
    }
    found.sort_by_key(|(v, _)| canonical_key(*v));
    found
        .into_iter()
        .map(|(value, witness)| {
            let s = superimpose(c, &[Complex64::new(1.0, 0.0), value]).expect("two terminals");
            SingularFadeState {
                value,
                witness,
                partition: partition_clashes(&s),
            }
        })
        .collect()
}

/// Score of a binary map against a superimposed set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MappingScore {
    /// Minimum squared distance between values mapped to different vectors;
    /// zero when some clash is split.
    pub dmin: f64,
    /// Number of coinciding pairs that the map sends to different vectors.
    pub unresolved: u32,
    /// Minimum squared distance over non-coinciding pairs mapped apart.
    pub residual: f64,
}

impl MappingScore {
    pub fn is_consistent(&self) -> bool {
        self.unresolved == 0
    }

    /// Ranking order: fewer split clashes first, then larger residual distance.
    pub fn rank_cmp(&self, other: &MappingScore) -> std::cmp::Ordering {
        self.unresolved
            .cmp(&other.unresolved)
            .then_with(|| other.residual.total_cmp(&self.residual))
    }
}

/// Per-XOR-pattern distance table of a superimposed set.
#[derive(Clone, Debug)]
pub struct DistanceProfile {
    bits: usize,
    /// Smallest squared distance over non-coinciding pairs `(p, p ^ d)`.
    separated: Vec<f64>,
    /// Number of coinciding pairs `(p, p ^ d)`, counted once per unordered pair.
    clashes: Vec<u32>,
    /// Patterns with at least one coinciding pair.
    clash_patterns: Vec<usize>,
    /// Nonzero patterns sorted by `separated`, ascending.
    by_distance: Vec<usize>,
}

impl DistanceProfile {
    pub fn new(s: &SuperimposedSet) -> Self {
        let n = s.values.len();
        let mut separated = vec![f64::INFINITY; n];
        let mut clashes = vec![0u32; n];
        for d in 1..n {
            for p in 0..n {
                let q = p ^ d;
                if q < p {
                    continue;
                }
                let dist = (s.values[p] - s.values[q]).norm_sqr();
                if dist.sqrt() <= COINCIDENCE_TOL {
                    clashes[d] += 1;
                } else if dist < separated[d] {
                    separated[d] = dist;
                }
            }
        }
        let clash_patterns = (1..n).filter(|&d| clashes[d] > 0).collect();
        let mut by_distance: Vec<usize> = (1..n).collect();
        by_distance.sort_by(|&a, &b| separated[a].total_cmp(&separated[b]).then(a.cmp(&b)));
        Self {
            bits: s.bits,
            separated,
            clashes,
            clash_patterns,
            by_distance,
        }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// XOR patterns of coinciding pairs; a consistent map must annihilate all.
    pub fn clash_patterns(&self) -> &[usize] {
        &self.clash_patterns
    }

    /// Dimension of the span of the clash patterns.
    pub fn clash_span_rank(&self) -> usize {
        let mut basis = [0usize; 64];
        let mut rank = 0;
        for &d in &self.clash_patterns {
            let mut x = d;
            while x != 0 {
                let lead = usize::BITS as usize - 1 - x.leading_zeros() as usize;
                if basis[lead] == 0 {
                    basis[lead] = x;
                    rank += 1;
                    break;
                }
                x ^= basis[lead];
            }
        }
        rank
    }

    /// Scores a map given membership in its kernel.
    pub fn score_with<F: Fn(usize) -> bool>(&self, in_kernel: F) -> MappingScore {
        let unresolved = self
            .clash_patterns
            .iter()
            .filter(|&&d| !in_kernel(d))
            .map(|&d| self.clashes[d])
            .sum::<u32>();
        let residual = self
            .by_distance
            .iter()
            .find(|&&d| !in_kernel(d))
            .map_or(f64::INFINITY, |&d| self.separated[d]);
        MappingScore {
            dmin: if unresolved > 0 { 0.0 } else { residual },
            unresolved,
            residual,
        }
    }

    pub fn score(&self, g: &BinMatrix) -> Result<MappingScore> {
        if g.cols() != self.bits {
            return Err(Error::DimensionMismatch {
                left_rows: g.rows(),
                left_cols: g.cols(),
                right_rows: self.bits,
                right_cols: 1,
            });
        }
        Ok(self.score_with(|d| g.apply(d as u64) == 0))
    }
}

/// Minimum squared distance between superimposed values mapped to different
/// network-coded vectors by `g`; zero when a clash is split, infinite when
/// `g` maps everything to one vector.
pub fn cluster_dmin(s: &SuperimposedSet, g: &BinMatrix) -> Result<f64> {
    Ok(DistanceProfile::new(s).score(g)?.dmin)
}

/// Probability that the channel ratio of two i.i.d. Rayleigh gains falls in
/// the disk `|h2/h1 - v| < radius |v|`.
///
/// The ratio of two independent `CN(0,1)` variables is the stereographic
/// image of a uniform point on the sphere, and disks map to spherical caps,
/// so the probability is a cap fraction `(1 - cos t) / 2` with angular
/// radius `t = atan(|v|(1+r)) - atan(|v|(1-r))`.
pub fn activity_exact(v: Complex64, radius: f64) -> f64 {
    if radius <= 0.0 || v.norm() == 0.0 {
        return 0.0;
    }
    let a = v.norm() * (1.0 - radius);
    let b = v.norm() * (1.0 + radius);
    let t = b.atan() - a.atan();
    (1.0 - t.cos()) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivityEstimate {
    pub probability: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub hits: u64,
    pub trials: u64,
}

/// Monte-Carlo activity of state `v` under i.i.d. Rayleigh fading.
pub fn estimate_activity<R: Rng + ?Sized>(
    v: Complex64,
    trials: u64,
    radius: f64,
    rng: &mut R,
) -> Result<ActivityEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("activity estimate needs at least one trial".into()));
    }
    if trials < MIN_ACTIVITY_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "activity estimate needs at least {MIN_ACTIVITY_TRIALS} trials, got {trials}"
        )));
    }
    let limit = radius * v.norm();
    let hits = (0..trials)
        .filter(|_| {
            let h1 = complex_gaussian(rng);
            let h2 = complex_gaussian(rng);
            (h2 / h1 - v).norm() < limit
        })
        .count() as u64;
    let (ci_lo, ci_hi) = wilson_interval(hits, trials, Z95);
    Ok(ActivityEstimate {
        probability: hits as f64 / trials as f64,
        ci_lo,
        ci_hi,
        hits,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn non_singular_channel_has_only_singletons() {
        let q = Constellation::qam(2).unwrap();
        let s = superimpose(&q, &[c(1.0, 0.0), c(0.0, 0.5)]).unwrap();
        assert_eq!(partition_clashes(&s).len(), 16);
    }

    #[test]
    fn erased_second_terminal_collapses() {
        let q = Constellation::qam(2).unwrap();
        let s = superimpose(&q, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let part = partition_clashes(&s);
        assert_eq!(part.len(), 4);
        assert!(part.groups().iter().all(|g| g.len() == 4));
    }

    #[test]
    fn equal_gains_are_symmetric() {
        let q = Constellation::qam(2).unwrap();
        let s = superimpose(&q, &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(s.values()[a << 2 | b], s.values()[b << 2 | a]);
            }
        }
    }

    #[test]
    fn v_one_partition_shape() {
        let q = Constellation::qam(2).unwrap();
        let s = superimpose(&q, &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let part = partition_clashes(&s);
        // (A, A) singletons, {(A, B), (B, A)} for adjacent A, B, and all four
        // (A, -A) pairs summing to zero.
        assert_eq!(part.len(), 9);
        assert_eq!(part.clash_count(), 5);
        let mut sizes: Vec<usize> = part.groups().iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 1, 1, 1, 2, 2, 2, 2, 4]);
    }

    #[test]
    fn xor_map_resolves_v_one_and_copy_map_does_not() {
        let q = Constellation::qam(2).unwrap();
        let s = superimpose(&q, &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let xor = BinMatrix::from_rows(&[[1u8, 0, 1, 0], [0, 1, 0, 1]]).unwrap();
        let copy = BinMatrix::from_rows(&[[1u8, 0, 0, 0], [0, 1, 0, 0]]).unwrap();
        assert!(cluster_dmin(&s, &xor).unwrap() > 0.0);
        assert_eq!(cluster_dmin(&s, &copy).unwrap(), 0.0);
    }

    #[test]
    fn dmin_scales_with_channel_gain() {
        let q = Constellation::qam(2).unwrap();
        let h = [c(0.8, -0.3), c(0.1, 1.1)];
        let g = BinMatrix::from_rows(&[[1u8, 1, 0, 1], [0, 1, 1, 0]]).unwrap();
        let k = c(0.4, 1.3);
        let base = cluster_dmin(&superimpose(&q, &h).unwrap(), &g).unwrap();
        let scaled = cluster_dmin(&superimpose(&q, &[h[0] * k, h[1] * k]).unwrap(), &g).unwrap();
        assert!((scaled - base * k.norm_sqr()).abs() < 1e-12 * scaled.max(1.0));
    }

    #[test]
    fn activity_closed_form_matches_small_disk_density() {
        // Ratio density 1/(pi (1+|z|^2)^2) times disk area for a tiny disk.
        let r = 1e-3;
        for v in [c(1.0, 0.0), c(0.5, 0.5), c(2.0, -1.0)] {
            let rho = r * v.norm();
            let approx = rho * rho / (1.0 + v.norm_sqr()).powi(2);
            assert!((activity_exact(v, r) / approx - 1.0).abs() < 1e-3);
        }
        assert_eq!(activity_exact(c(1.0, 0.0), 0.0), 0.0);
    }

    #[test]
    fn activity_estimate_errors_and_zero_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(estimate_activity(c(1.0, 0.0), 0, 0.05, &mut rng).is_err());
        assert!(estimate_activity(c(1.0, 0.0), 100, 0.05, &mut rng).is_err());
        let e = estimate_activity(c(1.0, 0.0), 10_000, 0.0, &mut rng).unwrap();
        assert_eq!(e.hits, 0);
    }
}
