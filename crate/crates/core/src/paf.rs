//! The PAF(T) recommender.
//!
//! Step 1 ranks every row by the number of commonly observed columns on which it
//! agrees with the target user and keeps the top `T` (the user's own row included).
//! Step 2 recommends, among the candidate columns, the one with the most 1s inside
//! the selected rows. Ties in both steps are broken uniformly at random from a
//! caller-supplied seed.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::matrix::ObservedMatrix;
use crate::seed::rng_from_seed;

/// Outcome of one recommendation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    /// Recommended column.
    pub item: usize,
    /// 1-votes for `item` among the selected rows.
    pub vote_ones: usize,
    /// 0-votes for `item` among the selected rows.
    pub vote_zeros: usize,
    /// Selected neighbour rows.
    pub neighbors: Vec<usize>,
    /// Number of eligible columns.
    pub candidate_count: usize,
}

/// Agreement count between rows `i` and `j`: columns observed in both rows with
/// equal values. Computed by merging the two sorted supports.
pub fn similarity(y: &ObservedMatrix, i: usize, j: usize) -> Result<usize> {
    check_index("row", i, y.n_rows())?;
    check_index("row", j, y.n_rows())?;
    let (a, b) = (y.row(i), y.row(j));
    let (mut x, mut z) = (0, 0);
    let mut agree = 0;
    while x < a.indices.len() && z < b.indices.len() {
        match a.indices[x].cmp(&b.indices[z]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => z += 1,
            std::cmp::Ordering::Equal => {
                agree += (a.bits[x] == b.bits[z]) as usize;
                x += 1;
                z += 1;
            }
        }
    }
    Ok(agree)
}

/// Agreement counts between `user` and every row, accumulated through the column index.
pub fn similarities_to(y: &ObservedMatrix, user: usize) -> Result<Vec<u32>> {
    check_index("row", user, y.n_rows())?;
    let mut sims = vec![0u32; y.n_rows()];
    for (c, bit) in y.row(user).iter() {
        let col = y.col(c);
        for (&r, &b) in col.indices.iter().zip(col.bits) {
            sims[r as usize] += (b == bit) as u32;
        }
    }
    Ok(sims)
}

/// The `t` rows most similar to `user`, the user's own row first. Rows tied at the
/// cutoff are sampled uniformly.
pub fn top_neighbors(y: &ObservedMatrix, user: usize, t: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = rng_from_seed(seed);
    top_neighbors_with(y, user, t, &mut rng)
}

pub(crate) fn top_neighbors_with(y: &ObservedMatrix, user: usize, t: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if t == 0 || t > y.n_rows() {
        return Err(Error::Parameter(format!(
            "T={t} must lie in [1, {}]",
            y.n_rows()
        )));
    }
    let mut sims = similarities_to(y, user)?;
    // The user's own score is maximal; pinning it keeps self in the selection even
    // when other rows tie with it.
    sims[user] = u32::MAX;
    Ok(select_top(&sims, t, rng))
}

/// Indices of the `t` largest scores, uniform among ties at the cutoff. Output is
/// ordered by decreasing score, ties in index order.
pub(crate) fn select_top(scores: &[u32], t: usize, rng: &mut impl Rng) -> Vec<usize> {
    debug_assert!(t >= 1 && t <= scores.len());
    let mut sorted = scores.to_vec();
    let nth = scores.len() - t;
    let (_, cutoff, _) = sorted.select_nth_unstable(nth);
    let cutoff = *cutoff;
    let mut chosen: Vec<usize> = Vec::with_capacity(t);
    let mut tied: Vec<usize> = Vec::new();
    for (i, &s) in scores.iter().enumerate() {
        if s > cutoff {
            chosen.push(i);
        } else if s == cutoff {
            tied.push(i);
        }
    }
    let need = t - chosen.len();
    if need == tied.len() {
        chosen.extend_from_slice(&tied);
    } else {
        let mut picked: Vec<usize> = index::sample(rng, tied.len(), need).into_iter().map(|i| tied[i]).collect();
        picked.sort_unstable();
        chosen.extend(picked);
    }
    chosen.sort_by(|&a, &b| scores[b].cmp(&scores[a]).then(a.cmp(&b)));
    chosen
}

/// Per-column 1 and 0 counts among `rows`, restricted to columns flagged in `mask`.
fn column_votes(y: &ObservedMatrix, rows: &[usize], mask: &[bool]) -> (Vec<u32>, Vec<u32>) {
    let mut ones = vec![0u32; y.n_cols()];
    let mut zeros = vec![0u32; y.n_cols()];
    for &r in rows {
        for (c, b) in y.row(r).iter() {
            if mask[c] {
                if b {
                    ones[c] += 1;
                } else {
                    zeros[c] += 1;
                }
            }
        }
    }
    (ones, zeros)
}

pub(crate) fn resolve_candidates(y: &ObservedMatrix, user: usize, candidates: Option<&[usize]>) -> Result<Vec<usize>> {
    check_index("row", user, y.n_rows())?;
    let list = match candidates {
        Some(c) => {
            let mut c = c.to_vec();
            for &item in &c {
                check_index("column", item, y.n_cols())?;
            }
            c.sort_unstable();
            c.dedup();
            c
        }
        None => y.erased_in_row(user)?,
    };
    if list.is_empty() {
        return Err(Error::NoCandidates(user));
    }
    Ok(list)
}

/// PAF(T) recommendation for `user`.
///
/// `candidates` defaults to the columns erased in the user's row. The same seeded
/// stream drives the Step-1 and Step-2 tie breaks.
pub fn recommend(
    y: &ObservedMatrix,
    user: usize,
    t: usize,
    candidates: Option<&[usize]>,
    seed: u64,
) -> Result<Recommendation> {
    let candidates = resolve_candidates(y, user, candidates)?;
    let mut rng = rng_from_seed(seed);
    let neighbors = top_neighbors_with(y, user, t, &mut rng)?;
    Ok(vote(y, neighbors, &candidates, &mut rng))
}

/// Step 2 on an already selected neighbour set. `candidates` must be non-empty.
pub(crate) fn vote(y: &ObservedMatrix, neighbors: Vec<usize>, candidates: &[usize], rng: &mut impl Rng) -> Recommendation {
    let mut mask = vec![false; y.n_cols()];
    for &c in candidates {
        mask[c] = true;
    }
    let (ones, zeros) = column_votes(y, &neighbors, &mask);
    let best = candidates.iter().map(|&c| ones[c]).max().expect("non-empty candidates");
    let winners: Vec<usize> = candidates.iter().copied().filter(|&c| ones[c] == best).collect();
    let item = if winners.len() == 1 {
        winners[0]
    } else {
        winners[rng.random_range(0..winners.len())]
    };
    Recommendation {
        item,
        vote_ones: ones[item] as usize,
        vote_zeros: zeros[item] as usize,
        neighbors,
        candidate_count: candidates.len(),
    }
}

/// Global popularity: PAF with every row selected.
pub fn recommend_global(y: &ObservedMatrix, user: usize, candidates: Option<&[usize]>, seed: u64) -> Result<Recommendation> {
    recommend(y, user, y.n_rows(), candidates, seed)
}

/// Value predicted when the neighbours' votes tie or none of them observed the item.
pub const DEFAULT_TIE_FALLBACK: bool = true;

/// Majority bit among the top-`t` neighbours' observations of `item`, falling back to 1.
pub fn predict_entry(y: &ObservedMatrix, user: usize, item: usize, t: usize, seed: u64) -> Result<bool> {
    predict_entry_with_fallback(y, user, item, t, seed, DEFAULT_TIE_FALLBACK)
}

pub fn predict_entry_with_fallback(
    y: &ObservedMatrix,
    user: usize,
    item: usize,
    t: usize,
    seed: u64,
    fallback: bool,
) -> Result<bool> {
    check_index("column", item, y.n_cols())?;
    let neighbors = top_neighbors(y, user, t, seed)?;
    Ok(majority_vote(y, &neighbors, item, fallback))
}

/// Majority of the observed bits of column `item` over `rows`.
pub fn majority_vote(y: &ObservedMatrix, rows: &[usize], item: usize, fallback: bool) -> bool {
    let col = y.col(item);
    let (mut ones, mut zeros) = (0usize, 0usize);
    for &r in rows {
        match col.get(r) {
            Some(true) => ones += 1,
            Some(false) => zeros += 1,
            None => {}
        }
    }
    match ones.cmp(&zeros) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => fallback,
    }
}
