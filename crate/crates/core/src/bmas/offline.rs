//! Off-line candidate search over singular fade states.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{enumerate_row_spaces, BinMatrix, DEFAULT_ENUM_BUDGET};
use crate::modem::{Constellation, Modulation};
use crate::sfs::{
    activity_exact, enumerate_sfs, superimpose, DistanceProfile, MappingScore, DEFAULT_ACTIVITY_RADIUS,
};

pub const DEFAULT_LIST_CAP: usize = 32;

/// Pruning and size limits for the off-line search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneSettings {
    /// Keep only this many most active states; `None` keeps all.
    pub keep: Option<usize>,
    /// Relative radius of the activity disk around each state.
    pub delta: f64,
    /// Maximum candidates stored per state.
    pub cap: usize,
    /// Largest number of free matrix bits the search may enumerate.
    pub budget: u32,
}

impl Default for PruneSettings {
    fn default() -> Self {
        Self {
            keep: None,
            delta: DEFAULT_ACTIVITY_RADIUS,
            cap: DEFAULT_LIST_CAP,
            budget: DEFAULT_ENUM_BUDGET,
        }
    }
}

impl PruneSettings {
    fn validate(&self) -> Result<()> {
        if self.keep == Some(0) {
            return Err(Error::InvalidArgument("keep must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("activity radius {} outside (0, 1)", self.delta)));
        }
        if self.cap == 0 {
            return Err(Error::InvalidArgument("candidate cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// A mapping matrix over the two paired terminals with its score at the state.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub matrix: BinMatrix,
    pub score: MappingScore,
}

/// One retained singular fade state.
#[derive(Clone, Debug, PartialEq)]
pub struct SfsEntry {
    /// Position in the full canonical enumeration.
    pub index: usize,
    pub value: Complex64,
    pub activity: f64,
    pub partition_hash: String,
    /// Index into the table's candidate lists.
    pub list: usize,
}

/// Ranked candidates per singular fade state for one constellation and one
/// block height.
///
/// Matrices act on the joint message of a terminal pair (`2 m` columns); with
/// more than two terminals they are embedded into each access point's pair.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateTable {
    pub modulation: Modulation,
    /// Number of terminals in the scenario the table serves.
    pub mts: usize,
    /// Rows per access point.
    pub rows: usize,
    pub settings: PruneSettings,
    /// States before pruning.
    pub total_sfs: usize,
    /// Retained states in canonical order.
    pub entries: Vec<SfsEntry>,
    pub lists: Vec<Vec<Candidate>>,
}

impl CandidateTable {
    pub fn pair_bits(&self) -> usize {
        2 * self.modulation.bits_per_symbol()
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.modulation)
    }

    pub fn list_of(&self, entry: usize) -> &[Candidate] {
        &self.lists[self.entries[entry].list]
    }

    /// States for which no candidate keeps every clash together.
    pub fn unresolved_sfs(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| !self.lists[e.list].first().is_some_and(|c| c.score.is_consistent()))
            .count()
    }

    /// Distinct matrices over all lists.
    pub fn distinct_matrices(&self) -> usize {
        let mut all: Vec<&BinMatrix> = self.lists.iter().flatten().map(|c| &c.matrix).collect();
        all.sort_by_key(|m| m.row_words().to_vec());
        all.dedup();
        all.len()
    }
}

/// Ranking order of candidates: score first, then canonical matrix order.
pub fn candidate_cmp(a: &Candidate, b: &Candidate) -> Ordering {
    a.score
        .rank_cmp(&b.score)
        .then_with(|| a.matrix.row_words().cmp(b.matrix.row_words()))
}

struct Ranked {
    score: MappingScore,
    key: usize,
    words: Vec<u64>,
}

impl Ranked {
    fn cmp_rank(&self, other: &Self) -> Ordering {
        self.score.rank_cmp(&other.score).then_with(|| self.words.cmp(&other.words))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_rank(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    // Worst candidate is the heap maximum.
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_rank(other)
    }
}

/// Row-space representatives with their kernels as bitsets over XOR patterns.
struct KernelTable {
    matrices: Vec<BinMatrix>,
    kernels: Vec<Vec<u64>>,
}

impl KernelTable {
    fn new(rows: usize, cols: usize) -> Result<Self> {
        let matrices = enumerate_row_spaces(rows, cols)?;
        let n = 1usize << cols;
        let words = n.div_ceil(64);
        let kernels = matrices
            .par_iter()
            .map(|g| {
                let mut k = vec![0u64; words];
                for d in 0..n {
                    if g.apply(d as u64) == 0 {
                        k[d / 64] |= 1 << (d % 64);
                    }
                }
                k
            })
            .collect();
        Ok(Self { matrices, kernels })
    }

    fn rank_for(&self, profile: &DistanceProfile, cap: usize) -> Vec<Candidate> {
        let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(cap + 1);
        for (i, k) in self.kernels.iter().enumerate() {
            let score = profile.score_with(|d| (k[d / 64] >> (d % 64)) & 1 == 1);
            if heap.len() == cap {
                let worst = heap.peek().expect("cap >= 1");
                if score.rank_cmp(&worst.score) == Ordering::Greater {
                    continue;
                }
            }
            heap.push(Ranked {
                score,
                key: i,
                words: self.matrices[i].row_words().to_vec(),
            });
            if heap.len() > cap {
                heap.pop();
            }
        }
        heap.into_sorted_vec()
            .into_iter()
            .map(|r| Candidate {
                matrix: self.matrices[r.key].clone(),
                score: r.score,
            })
            .collect()
    }
}

/// Builds the candidate table for `mts` terminals and `rows` rows per access
/// point.
///
/// Scores depend only on the row space of a matrix, so one reduced echelon
/// representative per row space is scored. Each list holds the best `cap`
/// representatives: matrices that keep every clash together come first, by
/// descending distance, followed by the least-splitting ones when fewer than
/// `cap` consistent matrices exist.
pub fn offline_search(
    c: &Constellation,
    mts: usize,
    rows: usize,
    settings: &PruneSettings,
) -> Result<CandidateTable> {
    settings.validate()?;
    if mts < 2 {
        return Err(Error::InvalidArgument(format!("need at least two terminals, got {mts}")));
    }
    let pair_bits = 2 * c.order();
    if rows == 0 || rows > pair_bits {
        return Err(Error::InvalidArgument(format!(
            "rows per access point must be in 1..={pair_bits}, got {rows}"
        )));
    }
    let bits = (rows * pair_bits) as u32;
    if bits > settings.budget {
        return Err(Error::BudgetExceeded {
            bits,
            budget: settings.budget,
        });
    }

    let all = enumerate_sfs(c);
    let total_sfs = all.len();
    let mut order: Vec<usize> = (0..total_sfs).collect();
    let activity: Vec<f64> = all.iter().map(|s| activity_exact(s.value, settings.delta)).collect();
    order.sort_by(|&a, &b| activity[b].total_cmp(&activity[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = order
        .into_iter()
        .take(settings.keep.unwrap_or(total_sfs))
        .collect();
    kept.sort_unstable();

    let kernels = KernelTable::new(rows, pair_bits)?;
    let one = Complex64::new(1.0, 0.0);
    let ranked: Vec<Vec<Candidate>> = kept
        .par_iter()
        .map(|&i| {
            let s = superimpose(c, &[one, all[i].value]).expect("pair of terminals");
            kernels.rank_for(&DistanceProfile::new(&s), settings.cap)
        })
        .collect();

    let mut lists: Vec<Vec<Candidate>> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut entries = Vec::with_capacity(kept.len());
    for (&i, list) in kept.iter().zip(ranked) {
        if list.is_empty() {
            return Err(Error::Internal(format!(
                "no full-rank {rows}x{pair_bits} matrix for state {} ({})",
                i, all[i].value
            )));
        }
        let key = list_key(&list);
        let id = *seen.entry(key).or_insert_with(|| {
            lists.push(list);
            lists.len() - 1
        });
        entries.push(SfsEntry {
            index: i,
            value: all[i].value,
            activity: activity[i],
            partition_hash: all[i].partition.digest(),
            list: id,
        });
    }

    Ok(CandidateTable {
        modulation: c.modulation(),
        mts,
        rows,
        settings: *settings,
        total_sfs,
        entries,
        lists,
    })
}

fn list_key(list: &[Candidate]) -> String {
    list.iter()
        .map(|c| {
            format!(
                "{} {} {} {}",
                c.matrix.to_text(),
                c.score.dmin,
                c.score.unresolved,
                c.score.residual
            )
        })
        .collect::<Vec<_>>()
        .join(";")
}
