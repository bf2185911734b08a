//! On-line selection of per-access-point mapping matrices.

use num_complex::Complex64;

use super::offline::CandidateTable;
use super::pairing::{pair_mts, PairingPlan};
use crate::error::{Error, Result};
use crate::gf2::{stack_rows, BinMatrix};
use crate::modem::Constellation;
use crate::sfs::{superimpose, DistanceProfile, MappingScore};

/// Rows per access point: `m u / n` each, with the remainder going one row
/// at a time to the access points of largest total received power.
pub fn allocate_rows(total_bits: usize, channels: &[Vec<Complex64>]) -> Result<Vec<usize>> {
    let n = channels.len();
    if n == 0 || n > total_bits {
        return Err(Error::InvalidArgument(format!(
            "cannot split {total_bits} message bits over {n} access points"
        )));
    }
    let mut rows = vec![total_bits / n; n];
    let mut order: Vec<usize> = (0..n).collect();
    let power: Vec<f64> = channels.iter().map(|h| h.iter().map(|g| g.norm_sqr()).sum()).collect();
    order.sort_by(|&a, &b| power[b].total_cmp(&power[a]).then(a.cmp(&b)));
    for &j in order.iter().take(total_bits % n) {
        rows[j] += 1;
    }
    Ok(rows)
}

/// Retained state nearest to `ratio` in relative distance `|ratio - v| / |v|`,
/// with that distance. Ties go to the earlier entry.
pub fn nearest_sfs(table: &CandidateTable, ratio: Complex64) -> Result<(usize, f64)> {
    if table.entries.is_empty() {
        return Err(Error::InvalidArgument("candidate table has no states".into()));
    }
    if !ratio.is_finite() {
        // A vanished first gain: the largest state is the closest in angle.
        let i = (0..table.entries.len())
            .max_by(|&a, &b| {
                table.entries[a]
                    .value
                    .norm()
                    .total_cmp(&table.entries[b].value.norm())
                    .then(b.cmp(&a))
            })
            .expect("non-empty");
        return Ok((i, f64::INFINITY));
    }
    let mut best = (0, f64::INFINITY);
    for (i, e) in table.entries.iter().enumerate() {
        let d = (ratio - e.value).norm() / e.value.norm();
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

/// Places a pair matrix (`2 m` columns) on the columns of terminals `a` and
/// `b` of an `m u`-column matrix.
pub fn embed_pair(g: &BinMatrix, pair: (usize, usize), m: usize, mts: usize) -> Result<BinMatrix> {
    if g.cols() != 2 * m || pair.0 >= mts || pair.1 >= mts || pair.0 == pair.1 {
        return Err(Error::InvalidArgument(format!(
            "cannot embed {}x{} matrix on terminals {:?} of {mts}",
            g.rows(),
            g.cols(),
            pair
        )));
    }
    let mut out = BinMatrix::zeros(g.rows(), m * mts)?;
    for i in 0..g.rows() {
        for c in 0..2 * m {
            let (mt, k) = if c < m { (pair.0, c) } else { (pair.1, c - m) };
            out.set(i, mt * m + k, g.get(i, c));
        }
    }
    Ok(out)
}

/// The per-access-point choice made for one channel realization.
#[derive(Clone, Debug, PartialEq)]
pub struct ApChoice {
    pub pair: (usize, usize),
    /// Entry of the nearest state in the table, when a table was consulted.
    pub sfs: Option<usize>,
    /// Block over all `m u` message bits.
    pub matrix: BinMatrix,
    /// Score at the actual channel.
    pub score: MappingScore,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub aps: Vec<ApChoice>,
    pub global: BinMatrix,
    pub inverse: BinMatrix,
    /// Smallest actual-channel distance over access points.
    pub global_dmin: f64,
    /// No invertible combination existed in the table; an identity split was used.
    pub degraded: bool,
    /// Terminal pairing fell back to round-robin.
    pub pairing_fallback: bool,
}

impl Assignment {
    pub fn blocks(&self) -> Vec<&BinMatrix> {
        self.aps.iter().map(|a| &a.matrix).collect()
    }

    /// Stacked network-coded word of joint message `p`.
    pub fn encode(&self, p: u64) -> u64 {
        self.global.apply(p)
    }

    /// Joint message from the stacked network-coded word.
    pub fn recover(&self, ncv: u64) -> u64 {
        self.inverse.apply(ncv)
    }
}

/// Access-point options after re-scoring at the actual channel.
struct Options {
    items: Vec<(BinMatrix, MappingScore)>,
}

fn identity_split(rows: &[usize], bits: usize) -> Result<Vec<BinMatrix>> {
    let id = BinMatrix::identity(bits)?;
    let mut start = 0;
    rows.iter()
        .map(|&r| {
            let block = BinMatrix::from_row_words(r, bits, id.row_words()[start..start + r].to_vec());
            start += r;
            block
        })
        .collect()
}

/// Incremental GF(2) basis with leading-bit reduction.
#[derive(Clone)]
struct Basis {
    lead: Vec<u64>,
}

impl Basis {
    fn new(bits: usize) -> Self {
        Self { lead: vec![0; bits] }
    }

    /// Adds all rows; false when any row is dependent.
    fn extend(&mut self, rows: &[u64]) -> bool {
        for &r in rows {
            let mut x = r;
            loop {
                if x == 0 {
                    return false;
                }
                let k = 63 - x.leading_zeros() as usize;
                if self.lead[k] == 0 {
                    self.lead[k] = x;
                    break;
                }
                x ^= self.lead[k];
            }
        }
        true
    }
}

struct Search<'a> {
    options: &'a [Options],
    best: f64,
    best_pick: Option<Vec<usize>>,
    pick: Vec<usize>,
}

impl Search<'_> {
    fn run(&mut self, ap: usize, bound: f64, basis: &Basis) {
        if ap == self.options.len() {
            if self.best_pick.is_none() || bound > self.best {
                self.best = bound;
                self.best_pick = Some(self.pick.clone());
            }
            return;
        }
        for (i, (g, s)) in self.options[ap].items.iter().enumerate() {
            let b = bound.min(s.dmin);
            // Lists are sorted by descending distance, so later items cannot do better.
            if self.best_pick.is_some() && b <= self.best {
                break;
            }
            let mut next = basis.clone();
            if !next.extend(g.row_words()) {
                continue;
            }
            self.pick[ap] = i;
            self.run(ap + 1, b, &next);
        }
    }
}

fn table_for(tables: &[CandidateTable], rows: usize) -> Result<&CandidateTable> {
    tables.iter().find(|t| t.rows == rows).ok_or_else(|| {
        Error::Config(format!("no candidate table with {rows} rows per access point"))
    })
}

/// Retained states ordered by relative distance from `ratio`, nearest first.
fn states_by_distance(table: &CandidateTable, ratio: Complex64) -> Vec<usize> {
    let nearest = nearest_sfs(table, ratio).map_or(0, |(i, _)| i);
    let mut order: Vec<usize> = (0..table.entries.len()).collect();
    let dist = |i: usize| (ratio - table.entries[i].value).norm() / table.entries[i].value.norm();
    order.sort_by(|&a, &b| {
        (b == nearest)
            .cmp(&(a == nearest))
            .then(dist(a).total_cmp(&dist(b)))
            .then(a.cmp(&b))
    });
    order
}

/// Picks one candidate per access point so that the stacked matrix is
/// invertible and the smallest actual-channel distance is as large as
/// possible.
///
/// Each access point looks up the state nearest to its pair's channel ratio
/// and re-scores that state's list at its actual channel. A depth-first
/// search over the ranked lists visits the greedy choice first and prunes
/// branches that cannot beat the best complete assembly.
///
/// Candidates consistent with one state all annihilate its clash patterns,
/// so two access points near the same state may find no complementary pair
/// in its list. The search then widens every access point's options to the
/// lists of its 2, 4, 8, ... nearest states. When no invertible combination
/// exists in the whole table, the identity split is returned with
/// `degraded` set.
pub fn online_select(tables: &[CandidateTable], channels: &[Vec<Complex64>]) -> Result<Assignment> {
    let first = tables
        .first()
        .ok_or_else(|| Error::Config("no candidate table supplied".into()))?;
    let modulation = first.modulation;
    if tables.iter().any(|t| t.modulation != modulation) {
        return Err(Error::Config("candidate tables disagree on the constellation".into()));
    }
    let c = Constellation::new(modulation);
    let m = c.order();
    let mts = channels.first().map_or(0, Vec::len);
    if mts < 2 || channels.iter().any(|h| h.len() != mts) {
        return Err(Error::InvalidArgument("channel must be n x u with u >= 2".into()));
    }
    let bits = m * mts;
    let rows = allocate_rows(bits, channels)?;
    let plan: PairingPlan = pair_mts(channels)?;

    // Per access point: retained states by distance from its ratio, and a
    // re-scored option list that grows as more states are consulted.
    let mut by_distance = Vec::with_capacity(channels.len());
    let mut profiles = Vec::with_capacity(channels.len());
    let mut options: Vec<Options> = Vec::with_capacity(channels.len());
    for (j, h) in channels.iter().enumerate() {
        let table = table_for(tables, rows[j])?;
        let pair = plan.pairs[j];
        by_distance.push(states_by_distance(table, h[pair.1] / h[pair.0]));
        profiles.push(DistanceProfile::new(&superimpose(&c, h)?));
        options.push(Options { items: Vec::new() });
    }
    let refs: Vec<usize> = by_distance.iter().map(|d| d[0]).collect();
    let most = by_distance.iter().map(Vec::len).max().unwrap_or(1);

    let mut consulted = 0;
    let mut want = 1;
    let pick = loop {
        for (j, opts) in options.iter_mut().enumerate() {
            let table = table_for(tables, rows[j])?;
            for &entry in by_distance[j].iter().take(want).skip(consulted) {
                for cand in table.list_of(entry) {
                    let g = embed_pair(&cand.matrix, plan.pairs[j], m, mts)?;
                    if opts.items.iter().any(|(x, _)| *x == g) {
                        continue;
                    }
                    let s = profiles[j].score(&g)?;
                    opts.items.push((g, s));
                }
            }
            opts.items.sort_by(|a, b| b.1.dmin.total_cmp(&a.1.dmin));
        }
        consulted = want;
        let mut search = Search {
            options: &options,
            best: f64::NEG_INFINITY,
            best_pick: None,
            pick: vec![0; options.len()],
        };
        search.run(0, f64::INFINITY, &Basis::new(64));
        if search.best_pick.is_some() || consulted >= most {
            break search.best_pick;
        }
        want = (want * 2).min(most);
    };

    let (aps, degraded) = match pick {
        Some(pick) => (
            pick.iter()
                .enumerate()
                .map(|(j, &i)| ApChoice {
                    pair: plan.pairs[j],
                    sfs: Some(refs[j]),
                    matrix: options[j].items[i].0.clone(),
                    score: options[j].items[i].1,
                })
                .collect::<Vec<_>>(),
            false,
        ),
        None => (identity_choices(&c, channels, &rows, &plan, Some(&refs))?, true),
    };
    assemble(aps, degraded, plan.fallback)
}

/// Stacks per-access-point blocks and precomputes the inverse.
pub fn assemble(aps: Vec<ApChoice>, degraded: bool, pairing_fallback: bool) -> Result<Assignment> {
    let blocks: Vec<BinMatrix> = aps.iter().map(|a| a.matrix.clone()).collect();
    let global = stack_rows(&blocks)?;
    let inverse = global
        .try_invert()?
        .ok_or_else(|| Error::Internal("assembled global matrix is singular".into()))?;
    let global_dmin = aps.iter().map(|a| a.score.dmin).fold(f64::INFINITY, f64::min);
    Ok(Assignment {
        aps,
        global,
        inverse,
        global_dmin,
        degraded,
        pairing_fallback,
    })
}

fn identity_choices(
    c: &Constellation,
    channels: &[Vec<Complex64>],
    rows: &[usize],
    plan: &PairingPlan,
    refs: Option<&[usize]>,
) -> Result<Vec<ApChoice>> {
    let bits = channels[0].len() * c.order();
    identity_split(rows, bits)?
        .into_iter()
        .enumerate()
        .map(|(j, g)| {
            let score = DistanceProfile::new(&superimpose(c, &channels[j])?).score(&g)?;
            Ok(ApChoice {
                pair: plan.pairs[j],
                sfs: refs.map(|r| r[j]),
                matrix: g,
                score,
            })
        })
        .collect()
}

/// The degraded assignment used when no table is available: an identity
/// split of the message bits across access points.
pub fn fallback_assignment(c: &Constellation, channels: &[Vec<Complex64>]) -> Result<Assignment> {
    let mts = channels.first().map_or(0, Vec::len);
    let rows = allocate_rows(c.order() * mts, channels)?;
    let plan = pair_mts(channels)?;
    let aps = identity_choices(c, channels, &rows, &plan, None)?;
    assemble(aps, true, plan.fallback)
}
