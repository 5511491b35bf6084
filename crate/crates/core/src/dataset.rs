//! Real rating data: loading, quantisation, the hide-30% split, the popular-item
//! filter and BER/RMSE evaluation.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use crate::cluster::{estimate_partition, recommend_by_cluster, Axis};
use crate::error::{Error, Result};
use crate::harness::TrialStats;
use crate::matrix::ObservedMatrix;
use crate::paf::{majority_vote, recommend, top_neighbors, DEFAULT_TIE_FALLBACK};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatingFormat {
    /// `UserID::MovieID::Rating::Timestamp`
    MovieLensDat,
    /// `user,item,rating[,timestamp]`, optional header line.
    Csv,
}

/// One rating with dense user/item indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub user: usize,
    pub item: usize,
    /// Raw rating in `1..=5`.
    pub rating: u8,
    pub timestamp: Option<i64>,
}

/// Parsed ratings plus the original ids behind the dense indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingSet {
    pub records: Vec<RatingRecord>,
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
    /// Repeated (user, item) pairs dropped in favour of the last occurrence.
    pub duplicates: usize,
}

impl RatingSet {
    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }
}

/// `{4, 5} → 1`, `{1, 2, 3} → 0`.
pub fn quantize_rating(rating: u8) -> bool {
    rating >= 4
}

/// Binary view of a rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryRating {
    pub user: usize,
    pub item: usize,
    pub liked: bool,
    pub raw: u8,
}

pub fn quantize(records: &[RatingRecord]) -> Vec<BinaryRating> {
    records
        .iter()
        .map(|r| BinaryRating {
            user: r.user,
            item: r.item,
            liked: quantize_rating(r.rating),
            raw: r.rating,
        })
        .collect()
}

pub fn load_ratings(path: &Path, format: RatingFormat) -> Result<RatingSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_ratings(std::io::BufReader::new(file), format)
}

/// Parses ratings and re-indexes users and items densely in order of appearance.
pub fn parse_ratings<R: BufRead>(reader: R, format: RatingFormat) -> Result<RatingSet> {
    let mut users: HashMap<u64, usize> = HashMap::new();
    let mut items: HashMap<u64, usize> = HashMap::new();
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    let mut records: Vec<RatingRecord> = Vec::new();
    let mut position: HashMap<(usize, usize), usize> = HashMap::new();
    let mut duplicates = 0;

    for (n, line) in reader.lines().enumerate() {
        let lineno = n + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = match format {
            RatingFormat::MovieLensDat => line.split("::").collect(),
            RatingFormat::Csv => line.split(',').map(str::trim).collect(),
        };
        if format == RatingFormat::Csv && n == 0 && fields[0].parse::<u64>().is_err() {
            continue;
        }
        if fields.len() < 3 || fields.len() > 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 3 or 4 fields, got {}", fields.len()),
            });
        }
        let bad = |what: &str| Error::Parse {
            line: lineno,
            message: what.to_string(),
        };
        let user: u64 = fields[0].parse().map_err(|_| bad("user id is not an integer"))?;
        let item: u64 = fields[1].parse().map_err(|_| bad("item id is not an integer"))?;
        let rating: u8 = fields[2].parse().map_err(|_| bad("rating is not an integer"))?;
        if !(1..=5).contains(&rating) {
            return Err(bad(&format!("rating {rating} outside 1..=5")));
        }
        let timestamp = match fields.get(3) {
            Some(s) => Some(s.parse::<i64>().map_err(|_| bad("timestamp is not an integer"))?),
            None => None,
        };
        let u = *users.entry(user).or_insert_with(|| {
            user_ids.push(user);
            user_ids.len() - 1
        });
        let i = *items.entry(item).or_insert_with(|| {
            item_ids.push(item);
            item_ids.len() - 1
        });
        let record = RatingRecord {
            user: u,
            item: i,
            rating,
            timestamp,
        };
        match position.get(&(u, i)) {
            Some(&pos) => {
                log::warn!("line {lineno}: duplicate rating for user {user} item {item}, keeping the last");
                records[pos] = record;
                duplicates += 1;
            }
            None => {
                position.insert((u, i), records.len());
                records.push(record);
            }
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset("no ratings in input".into()));
    }
    Ok(RatingSet {
        records,
        user_ids,
        item_ids,
        duplicates,
    })
}

/// A held-out rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestEntry {
    pub user: usize,
    pub item: usize,
    pub liked: bool,
    pub raw: u8,
}

/// Binary training matrix plus hidden test ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: ObservedMatrix,
    /// Sorted by (user, item).
    pub test: Vec<TestEntry>,
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
}

impl SplitDataset {
    /// Test entries of each user.
    pub fn test_by_user(&self) -> Vec<&[TestEntry]> {
        let mut out = vec![&self.test[0..0]; self.train.n_rows()];
        let mut start = 0;
        while start < self.test.len() {
            let u = self.test[start].user;
            let end = start + self.test[start..].iter().take_while(|e| e.user == u).count();
            out[u] = &self.test[start..end];
            start = end;
        }
        out
    }
}

/// Hides `⌊hide_frac · count⌋` uniformly chosen ratings of every user.
pub fn split_train_test(ratings: &RatingSet, hide_frac: f64, seed: u64) -> Result<SplitDataset> {
    if !(hide_frac > 0.0 && hide_frac < 1.0) {
        return Err(Error::Parameter(format!("hide fraction {hide_frac} must lie in (0, 1)")));
    }
    let binary = quantize(&ratings.records);
    let mut per_user: Vec<Vec<BinaryRating>> = vec![Vec::new(); ratings.n_users()];
    for r in binary {
        per_user[r.user].push(r);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (u, list) in per_user.iter().enumerate() {
        let hide = (hide_frac * list.len() as f64 + 1e-9).floor() as usize;
        let mut rng = rng_from_seed(derive_seed(seed, u as u64));
        let mut hidden = vec![false; list.len()];
        for i in index::sample(&mut rng, list.len(), hide) {
            hidden[i] = true;
        }
        for (r, h) in list.iter().zip(hidden) {
            if h {
                test.push(TestEntry {
                    user: r.user,
                    item: r.item,
                    liked: r.liked,
                    raw: r.raw,
                });
            } else {
                train.push((r.user, r.item, r.liked));
            }
        }
    }
    test.sort_unstable_by_key(|e| (e.user, e.item));
    Ok(SplitDataset {
        train: ObservedMatrix::from_entries(ratings.n_users(), ratings.n_items(), train)?,
        test,
        user_ids: ratings.user_ids.clone(),
        item_ids: ratings.item_ids.clone(),
    })
}

/// Drops items whose share of 1s among their training ratings exceeds `threshold`
/// and re-indexes the surviving items. Items with no training rating are kept.
pub fn filter_popular(dataset: &SplitDataset, threshold: f64) -> Result<SplitDataset> {
    let n_items = dataset.train.n_cols();
    let keep: Vec<bool> = (0..n_items)
        .map(|c| {
            let col = dataset.train.col(c);
            if col.is_empty() {
                return true;
            }
            let ones = col.bits.iter().filter(|&&b| b).count();
            ones as f64 / col.len() as f64 <= threshold
        })
        .collect();
    let mut remap = vec![usize::MAX; n_items];
    let mut item_ids = Vec::new();
    for c in 0..n_items {
        if keep[c] {
            remap[c] = item_ids.len();
            item_ids.push(dataset.item_ids[c]);
        }
    }
    if item_ids.is_empty() {
        return Err(Error::EmptyDataset(format!("every item exceeds the popularity threshold {threshold}")));
    }
    let train = ObservedMatrix::from_entries(
        dataset.train.n_rows(),
        item_ids.len(),
        dataset
            .train
            .entries()
            .filter(|&(_, c, _)| keep[c])
            .map(|(r, c, b)| (r, remap[c], b)),
    )?;
    let mut test: Vec<TestEntry> = dataset
        .test
        .iter()
        .filter(|e| keep[e.item])
        .map(|e| TestEntry { item: remap[e.item], ..*e })
        .collect();
    test.sort_unstable_by_key(|e| (e.user, e.item));
    Ok(SplitDataset {
        train,
        test,
        user_ids: dataset.user_ids.clone(),
        item_ids,
    })
}

/// Recommender evaluated on real data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecommenderKind {
    Paf { t: usize },
    /// PAF with every user selected.
    Global,
    /// k-nearest clustering recommender.
    Cluster { k: usize },
}

/// Which items a user may be recommended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateProtocol {
    /// Only the user's hidden test items, so every recommendation can be checked.
    Hidden,
    /// Every item the user has not rated in training; uncheckable picks are skipped.
    AllUnrated,
}

/// BER over users plus the count of users whose recommendation could not be checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub stats: TrialStats,
    pub users_without_test: u64,
    pub unchecked: u64,
}

/// One recommendation per user with hidden ratings; an error is a recommended item
/// whose hidden rating quantises to 0. User `u` uses seed `derive_seed(seed, u)`.
pub fn eval_ber(dataset: &SplitDataset, recommender: RecommenderKind, protocol: CandidateProtocol, seed: u64) -> Result<EvalStats> {
    let y = &dataset.train;
    if y.n_rows() == 0 || dataset.test.is_empty() {
        return Err(Error::EmptyDataset("no hidden ratings to evaluate".into()));
    }
    let partitions = match recommender {
        RecommenderKind::Cluster { k } => Some((
            estimate_partition(y, k, Axis::Rows)?,
            estimate_partition(y, k.min(y.n_cols()), Axis::Columns)?,
        )),
        _ => None,
    };
    let by_user = dataset.test_by_user();
    // Per user: None = no hidden ratings, Some(None) = unchecked, Some(Some(err)).
    let results: Vec<Option<Option<bool>>> = (0..y.n_rows())
        .into_par_iter()
        .map(|u| -> Result<Option<Option<bool>>> {
            let tests = by_user[u];
            if tests.is_empty() {
                return Ok(None);
            }
            let hidden: Vec<usize> = tests.iter().map(|e| e.item).collect();
            let candidates = match protocol {
                CandidateProtocol::Hidden => Some(hidden.as_slice()),
                CandidateProtocol::AllUnrated => None,
            };
            let s = derive_seed(seed, u as u64);
            let rec = match (recommender, &partitions) {
                (RecommenderKind::Paf { t }, _) => recommend(y, u, t.min(y.n_rows()), candidates, s),
                (RecommenderKind::Global, _) => recommend(y, u, y.n_rows(), candidates, s),
                (RecommenderKind::Cluster { .. }, Some((rows, cols))) => recommend_by_cluster(y, rows, cols, u, candidates, s),
                (RecommenderKind::Cluster { .. }, None) => unreachable!("partitions are built for the cluster recommender"),
            };
            let rec = match rec {
                Ok(r) => r,
                Err(Error::NoCandidates(_)) => return Ok(Some(None)),
                Err(e) => return Err(e),
            };
            Ok(Some(
                tests.binary_search_by_key(&rec.item, |e| e.item).ok().map(|pos| !tests[pos].liked),
            ))
        })
        .collect::<Result<_>>()?;

    let (mut trials, mut errors, mut without, mut unchecked) = (0u64, 0u64, 0u64, 0u64);
    for r in results {
        match r {
            None => without += 1,
            Some(None) => unchecked += 1,
            Some(Some(e)) => {
                trials += 1;
                errors += e as u64;
            }
        }
    }
    Ok(EvalStats {
        stats: TrialStats::from_counts(trials, errors),
        users_without_test: without,
        unchecked,
    })
}

/// Rating scale value of a binary prediction: 0 → 2.0, 1 → 4.5.
pub fn binary_to_scale(liked: bool) -> f64 {
    if liked {
        4.5
    } else {
        2.0
    }
}

/// RMSE of PAF(T) majority predictions on every hidden rating.
pub fn eval_rmse(dataset: &SplitDataset, t: usize, seed: u64) -> Result<f64> {
    let y = &dataset.train;
    if dataset.test.is_empty() {
        return Err(Error::EmptyDataset("no hidden ratings to evaluate".into()));
    }
    let t = t.min(y.n_rows());
    let by_user = dataset.test_by_user();
    let per_user: Vec<f64> = (0..y.n_rows())
        .into_par_iter()
        .map(|u| -> Result<f64> {
            let tests = by_user[u];
            if tests.is_empty() {
                return Ok(0.0);
            }
            let neighbors = top_neighbors(y, u, t, derive_seed(seed, u as u64))?;
            Ok(tests
                .iter()
                .map(|e| {
                    let guess = binary_to_scale(majority_vote(y, &neighbors, e.item, DEFAULT_TIE_FALLBACK));
                    (guess - e.raw as f64).powi(2)
                })
                .sum())
        })
        .collect::<Result<_>>()?;
    Ok((per_user.iter().sum::<f64>() / dataset.test.len() as f64).sqrt())
}

/// RMSE of fixed scale predictions against raw ratings.
pub fn rmse(predicted: &[f64], truth: &[u8]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if predicted.is_empty() {
        return 0.0;
    }
    let s: f64 = predicted.iter().zip(truth).map(|(p, &t)| (p - t as f64).powi(2)).sum();
    (s / predicted.len() as f64).sqrt()
}
