//! Terminal pairing for more than two terminals.
//!
//! Each access point resolves the singular fades of one pair of terminals and
//! treats the rest as noise. The plan picks one pair per access point so
//! that every terminal is covered.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairingPlan {
    /// Per access point, the paired terminals in increasing index order.
    pub pairs: Vec<(usize, usize)>,
    /// Set when no covering assignment existed and round-robin was used.
    pub fallback: bool,
}

impl PairingPlan {
    /// Terminals outside the pair of access point `ap`.
    pub fn interferers(&self, ap: usize, mts: usize) -> Vec<usize> {
        let (a, b) = self.pairs[ap];
        (0..mts).filter(|&l| l != a && l != b).collect()
    }
}

/// The two strongest terminals by received power, ties to the lower index.
pub fn strongest_pair(powers: &[f64]) -> Result<(usize, usize)> {
    if powers.len() < 2 {
        return Err(Error::InvalidArgument("pairing needs at least two terminals".into()));
    }
    let mut idx: Vec<usize> = (0..powers.len()).collect();
    idx.sort_by(|&a, &b| powers[b].total_cmp(&powers[a]).then(a.cmp(&b)));
    let (a, b) = (idx[0], idx[1]);
    Ok((a.min(b), a.max(b)))
}

fn all_pairs(mts: usize) -> Vec<(usize, usize)> {
    (0..mts)
        .flat_map(|a| ((a + 1)..mts).map(move |b| (a, b)))
        .collect()
}

/// Chooses a pair per access point.
///
/// Candidate plans assign pairs to access points, distinct pairs when there
/// are at least as many pairs as access points. Among plans covering every
/// terminal, the one maximizing the product over access points of the weaker
/// paired power wins; ties go to the first plan in lexicographic order. With
/// two terminals every access point takes the only pair.
pub fn pair_mts(channels: &[Vec<Complex64>]) -> Result<PairingPlan> {
    let n = channels.len();
    let mts = channels.first().map_or(0, Vec::len);
    if n == 0 || mts < 2 || channels.iter().any(|h| h.len() != mts) {
        return Err(Error::InvalidArgument(
            "pairing needs a non-empty n x u channel with u >= 2".into(),
        ));
    }
    let pairs = all_pairs(mts);
    let distinct = n <= pairs.len();
    let weight: Vec<Vec<f64>> = channels
        .iter()
        .map(|h| {
            pairs
                .iter()
                .map(|&(a, b)| h[a].norm_sqr().min(h[b].norm_sqr()).max(f64::MIN_POSITIVE).ln())
                .collect()
        })
        .collect();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut choice = vec![0usize; n];
    search(&pairs, &weight, distinct, mts, 0, 0.0, &mut choice, &mut best);

    Ok(match best {
        Some((_, c)) => PairingPlan {
            pairs: c.into_iter().map(|i| pairs[i]).collect(),
            fallback: false,
        },
        None => PairingPlan {
            pairs: (0..n).map(|j| pairs[j % pairs.len()]).collect(),
            fallback: true,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn search(
    pairs: &[(usize, usize)],
    weight: &[Vec<f64>],
    distinct: bool,
    mts: usize,
    ap: usize,
    acc: f64,
    choice: &mut Vec<usize>,
    best: &mut Option<(f64, Vec<usize>)>,
) {
    if ap == choice.len() {
        let mut covered = vec![false; mts];
        for &i in choice.iter() {
            covered[pairs[i].0] = true;
            covered[pairs[i].1] = true;
        }
        if covered.iter().all(|&c| c) && best.as_ref().is_none_or(|(b, _)| acc > *b) {
            *best = Some((acc, choice.clone()));
        }
        return;
    }
    for i in 0..pairs.len() {
        if distinct && choice[..ap].contains(&i) {
            continue;
        }
        choice[ap] = i;
        search(pairs, weight, distinct, mts, ap + 1, acc + weight[ap][i], choice, best);
    }
}
