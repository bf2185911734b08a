//! Independent re-checks of a candidate table: checksum, state set,
//! stored scores, brute-force optimality and end-to-end decode identity.

use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bmas::atlas::verify_checksum;
use crate::bmas::offline::candidate_cmp;
use crate::bmas::{online_select, CandidateTable};
use crate::gf2::{enumerate_matrices, BinMatrix};
use crate::modem::Constellation;
use crate::phy::channel::complex_gaussian;
use crate::sfs::{activity_exact, enumerate_sfs, partition_clashes, superimpose, DistanceProfile, COINCIDENCE_TOL};

/// Largest matrix size, in bits, that the optimality check enumerates.
pub const BRUTE_FORCE_BITS: u32 = 16;

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// Random channel draws for the decode-identity check.
    pub decode_draws: usize,
    pub seed: u64,
    pub brute_force_bits: u32,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            decode_draws: 1000,
            seed: 1,
            brute_force_bits: BRUTE_FORCE_BITS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Skipped(String),
    Fail(Vec<String>),
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub outcome: Outcome,
    pub note: String,
}

impl Check {
    fn from_failures(name: &'static str, failures: Vec<String>, note: String) -> Self {
        let outcome = if failures.is_empty() {
            Outcome::Pass
        } else {
            Outcome::Fail(failures)
        };
        Self { name, outcome, note }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| !matches!(c.outcome, Outcome::Fail(_)))
    }

    pub fn failures(&self) -> impl Iterator<Item = (&'static str, &str)> {
        self.checks.iter().flat_map(|c| match &c.outcome {
            Outcome::Fail(f) => f.iter().map(|s| (c.name, s.as_str())).collect(),
            _ => Vec::new(),
        })
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 10;
        for c in &self.checks {
            match &c.outcome {
                Outcome::Pass => writeln!(f, "PASS {}: {}", c.name, c.note)?,
                Outcome::Skipped(why) => writeln!(f, "SKIP {}: {why}", c.name)?,
                Outcome::Fail(list) => {
                    writeln!(f, "FAIL {}: {} problem(s)", c.name, list.len())?;
                    for msg in list.iter().take(SHOWN) {
                        writeln!(f, "  {msg}")?;
                    }
                    if list.len() > SHOWN {
                        writeln!(f, "  ... {} more", list.len() - SHOWN)?;
                    }
                }
            }
        }
        write!(f, "{}", if self.passed() { "all checks passed" } else { "verification FAILED" })
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn label(t: &CandidateTable, entry: usize) -> String {
    let e = &t.entries[entry];
    format!("sfs #{} ({:+.6}{:+.6}j)", e.index, e.value.re, e.value.im)
}

/// Verifies serialized atlas text, starting with its checksum.
pub fn verify_atlas_text(text: &str, opts: &VerifyOptions) -> Report {
    let mut report = Report::default();
    let body = verify_checksum(text);
    let table = body.and_then(|_| CandidateTable::from_atlas_str(text));
    match table {
        Ok(t) => {
            report.checks.push(Check {
                name: "checksum",
                outcome: Outcome::Pass,
                note: "stored digest matches".into(),
            });
            report.checks.extend(verify_table(&t, opts).checks);
        }
        Err(e) => report.checks.push(Check {
            name: "checksum",
            outcome: Outcome::Fail(vec![e.to_string()]),
            note: String::new(),
        }),
    }
    report
}

/// Verifies an in-memory table.
pub fn verify_table(t: &CandidateTable, opts: &VerifyOptions) -> Report {
    Report {
        checks: vec![
            check_states(t),
            check_scores(t),
            check_optimality(t, opts),
            check_decode(t, opts),
        ],
    }
}

fn check_states(t: &CandidateTable) -> Check {
    let c = t.constellation();
    let all = enumerate_sfs(&c);
    let mut failures = Vec::new();
    if t.total_sfs != all.len() {
        failures.push(format!("header lists {} states, enumeration finds {}", t.total_sfs, all.len()));
    }
    for (k, e) in t.entries.iter().enumerate() {
        let Some(s) = all.get(e.index) else {
            failures.push(format!("{}: index out of range", label(t, k)));
            continue;
        };
        if (s.value - e.value).norm() > COINCIDENCE_TOL {
            failures.push(format!("{}: value differs from enumerated state {}", label(t, k), s.value));
        }
        if !s.witness.holds(&c, e.value) {
            failures.push(format!("{}: no coinciding symbol pair at this value", label(t, k)));
        }
        let part = partition_clashes(&superimpose(&c, &[Complex64::new(1.0, 0.0), e.value]).expect("two terminals"));
        if part.digest() != e.partition_hash {
            failures.push(format!("{}: partition hash mismatch", label(t, k)));
        }
        if !close(activity_exact(e.value, t.settings.delta), e.activity) {
            failures.push(format!("{}: stored activity {} is wrong", label(t, k), e.activity));
        }
        if e.list >= t.lists.len() {
            failures.push(format!("{}: list {} does not exist", label(t, k), e.list));
        }
    }
    // The kept states must be the most active ones.
    let mut order: Vec<usize> = (0..all.len()).collect();
    let act: Vec<f64> = all.iter().map(|s| activity_exact(s.value, t.settings.delta)).collect();
    order.sort_by(|&a, &b| act[b].total_cmp(&act[a]).then(a.cmp(&b)));
    let mut expected: Vec<usize> = order.into_iter().take(t.settings.keep.unwrap_or(all.len())).collect();
    expected.sort_unstable();
    let kept: Vec<usize> = t.entries.iter().map(|e| e.index).collect();
    if kept != expected {
        failures.push(format!("kept states {kept:?} are not the {} most active", expected.len()));
    }
    let note = format!("{} of {} states, witnesses and partitions re-derived", t.entries.len(), all.len());
    Check::from_failures("states", failures, note)
}

fn check_scores(t: &CandidateTable) -> Check {
    let c = t.constellation();
    let cols = t.pair_bits();
    let mut failures = Vec::new();
    let mut scored = 0usize;
    for (k, e) in t.entries.iter().enumerate() {
        let Some(list) = t.lists.get(e.list) else { continue };
        if list.is_empty() {
            failures.push(format!("{}: empty candidate list", label(t, k)));
            continue;
        }
        let profile =
            DistanceProfile::new(&superimpose(&c, &[Complex64::new(1.0, 0.0), e.value]).expect("two terminals"));
        for (i, cand) in list.iter().enumerate() {
            let g = &cand.matrix;
            if g.rows() != t.rows || g.cols() != cols {
                failures.push(format!("{}: candidate {i} has shape {}x{}", label(t, k), g.rows(), g.cols()));
                continue;
            }
            if !g.is_full_row_rank() {
                failures.push(format!("{}: candidate {i} is rank deficient", label(t, k)));
            }
            let s = profile.score(g).expect("shape checked");
            let stored = cand.score;
            if !close(s.dmin, stored.dmin) || s.unresolved != stored.unresolved || !close(s.residual, stored.residual) {
                failures.push(format!(
                    "{}: candidate {i} stores dmin {} / unresolved {} / residual {}, recomputed {} / {} / {}",
                    label(t, k),
                    stored.dmin,
                    stored.unresolved,
                    stored.residual,
                    s.dmin,
                    s.unresolved,
                    s.residual
                ));
            }
            scored += 1;
        }
        if list.windows(2).any(|w| candidate_cmp(&w[0], &w[1]).is_gt()) {
            failures.push(format!("{}: list is not in rank order", label(t, k)));
        }
    }
    Check::from_failures("scores", failures, format!("{scored} stored scores recomputed"))
}

/// Squared distance between the closest pair of superimposed values mapped to
/// different vectors, zero if any such pair coincides.
fn pairwise_dmin(values: &[Complex64], g: &BinMatrix) -> f64 {
    let mut best = f64::INFINITY;
    for (p, a) in values.iter().enumerate() {
        for (q, b) in values.iter().enumerate().skip(p + 1) {
            if g.apply(p as u64) != g.apply(q as u64) {
                let d = (a - b).norm_sqr();
                best = best.min(if d.sqrt() <= COINCIDENCE_TOL { 0.0 } else { d });
            }
        }
    }
    best
}

fn check_optimality(t: &CandidateTable, opts: &VerifyOptions) -> Check {
    let bits = (t.rows * t.pair_bits()) as u32;
    if bits > opts.brute_force_bits {
        return Check {
            name: "optimality",
            outcome: Outcome::Skipped(format!(
                "{bits}-bit matrices exceed the brute-force limit of {}",
                opts.brute_force_bits
            )),
            note: String::new(),
        };
    }
    let c = t.constellation();
    let full_rank: Vec<BinMatrix> = enumerate_matrices(t.rows, t.pair_bits(), bits)
        .expect("within budget")
        .filter(BinMatrix::is_full_row_rank)
        .collect();
    let mut failures = Vec::new();
    for (k, e) in t.entries.iter().enumerate() {
        let Some(top) = t.lists.get(e.list).and_then(|l| l.first()) else { continue };
        let s = superimpose(&c, &[Complex64::new(1.0, 0.0), e.value]).expect("two terminals");
        let best = full_rank
            .iter()
            .map(|g| pairwise_dmin(s.values(), g))
            .fold(0.0, f64::max);
        let top_actual = pairwise_dmin(s.values(), &top.matrix);
        if !close(top.score.dmin, best) || !close(top_actual, best) {
            failures.push(format!(
                "{}: top candidate stores dmin {} (actual {top_actual}), exhaustive optimum is {best}",
                label(t, k),
                top.score.dmin
            ));
        }
    }
    let note = format!("{} full-rank matrices scanned per state", full_rank.len());
    Check::from_failures("optimality", failures, note)
}

fn check_decode(t: &CandidateTable, opts: &VerifyOptions) -> Check {
    let c = Constellation::new(t.modulation);
    let total = t.mts * c.order();
    if !total.is_multiple_of(t.rows) {
        return Check {
            name: "decode",
            outcome: Outcome::Skipped(format!("{total} message bits do not split into blocks of {}", t.rows)),
            note: String::new(),
        };
    }
    let aps = total / t.rows;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut failures = Vec::new();
    let mut degraded = 0usize;
    for draw in 0..opts.decode_draws {
        let channels: Vec<Vec<Complex64>> = (0..aps)
            .map(|_| (0..t.mts).map(|_| complex_gaussian(&mut rng)).collect())
            .collect();
        let a = match online_select(std::slice::from_ref(t), &channels) {
            Ok(a) => a,
            Err(e) => {
                failures.push(format!("draw {draw}: selection failed: {e}"));
                continue;
            }
        };
        degraded += usize::from(a.degraded);
        let identity = a.inverse.mul(&a.global).ok() == BinMatrix::identity(total).ok();
        let bad = (0..1u64 << total).find(|&p| a.recover(a.encode(p)) != p);
        if !identity || bad.is_some() {
            failures.push(format!("draw {draw}: global matrix does not decode (message {bad:?})"));
        }
    }
    let note = format!(
        "{} draws over {aps} access points decode every message; {degraded} used the fallback",
        opts.decode_draws
    );
    Check::from_failures("decode", failures, note)
}
