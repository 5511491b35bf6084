//! Exhaustive re-implementation of the two PAF steps on tiny ternary matrices.
//!
//! Every matrix with at most 3 rows, 4 columns and 6 stored entries is checked for
//! every user and every `T`: each returned (neighbour set, item, votes) must be an
//! outcome the exhaustive model allows. Outcome frequencies over 10⁴ seeds are then
//! compared with the exact distribution by χ², once per equivalence class under
//! row (other than the user) and column permutations.

use std::collections::{BTreeMap, HashMap};

use paf::paf::recommend;
use paf::seed::derive_seed;
use paf::ObservedMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub const SEEDS_PER_CLASS: u64 = 10_000;
const SUPPORT_SEEDS: u64 = 3;
const MAX_STORED: usize = 6;

/// Cell value: `None` erased.
type Cell = Option<bool>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Outcome {
    neighbors: Vec<usize>,
    item: usize,
    ones: usize,
    zeros: usize,
}

fn k_subsets(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if items.len() < k {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in k_subsets(&items[i + 1..], k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Exact outcome distribution of PAF(T) for `user`, candidates = the user's erased
/// columns. `None` when the user has no erased column.
fn exact_distribution(m: &[Vec<Cell>], user: usize, t: usize) -> Option<BTreeMap<Outcome, f64>> {
    let cols = m[0].len();
    let candidates: Vec<usize> = (0..cols).filter(|&j| m[user][j].is_none()).collect();
    if candidates.is_empty() {
        return None;
    }
    let sim = |i: usize| -> usize {
        (0..cols)
            .filter(|&j| matches!((m[user][j], m[i][j]), (Some(a), Some(b)) if a == b))
            .count()
    };
    let others: Vec<usize> = (0..m.len()).filter(|&i| i != user).collect();
    let need = t - 1;
    let mut scores: Vec<usize> = others.iter().map(|&i| sim(i)).collect();
    scores.sort_unstable_by(|a, b| b.cmp(a));
    let mut selections: Vec<Vec<usize>> = Vec::new();
    if need == 0 {
        selections.push(Vec::new());
    } else {
        let cutoff = scores[need - 1];
        let above: Vec<usize> = others.iter().copied().filter(|&i| sim(i) > cutoff).collect();
        let tied: Vec<usize> = others.iter().copied().filter(|&i| sim(i) == cutoff).collect();
        for pick in k_subsets(&tied, need - above.len()) {
            let mut s = above.clone();
            s.extend(pick);
            selections.push(s);
        }
    }
    let mut dist = BTreeMap::new();
    let p_sel = 1.0 / selections.len() as f64;
    for mut sel in selections {
        sel.push(user);
        sel.sort_unstable();
        let count = |j: usize, v: bool| sel.iter().filter(|&&i| m[i][j] == Some(v)).count();
        let best = candidates.iter().map(|&j| count(j, true)).max().unwrap();
        let winners: Vec<usize> = candidates.iter().copied().filter(|&j| count(j, true) == best).collect();
        for &j in &winners {
            let o = Outcome {
                neighbors: sel.clone(),
                item: j,
                ones: count(j, true),
                zeros: count(j, false),
            };
            *dist.entry(o).or_insert(0.0) += p_sel / winners.len() as f64;
        }
    }
    Some(dist)
}

fn to_observed(m: &[Vec<Cell>]) -> ObservedMatrix {
    ObservedMatrix::from_dense(m).expect("valid dense matrix")
}

fn run(y: &ObservedMatrix, user: usize, t: usize, seed: u64) -> Outcome {
    let rec = recommend(y, user, t, None, seed).expect("user has erased columns");
    let mut neighbors = rec.neighbors;
    neighbors.sort_unstable();
    Outcome {
        neighbors,
        item: rec.item,
        ones: rec.vote_ones,
        zeros: rec.vote_zeros,
    }
}

fn encode(m: &[Vec<Cell>], rows: &[usize], cols: &[usize]) -> u64 {
    let mut code = 0u64;
    for &i in rows {
        for &j in cols {
            code = code * 3
                + match m[i][j] {
                    None => 0,
                    Some(false) => 1,
                    Some(true) => 2,
                };
        }
    }
    code
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Smallest encoding over permutations of non-user rows and of columns.
fn canonical(m: &[Vec<Cell>], user: usize, col_perms: &[Vec<usize>]) -> u64 {
    let others: Vec<usize> = (0..m.len()).filter(|&i| i != user).collect();
    let mut best = u64::MAX;
    for rp in permutations(&others) {
        let mut rows = vec![user];
        rows.extend(rp);
        for cp in col_perms {
            best = best.min(encode(m, &rows, cp));
        }
    }
    best
}

pub struct Report {
    pub matrices: u64,
    pub configurations: u64,
    pub support_violations: u64,
    pub classes: u64,
    pub random_classes: u64,
    pub pooled_stat: f64,
    pub pooled_df: f64,
    pub pooled_p: f64,
    pub min_class_p: f64,
    pub first_violation: Option<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.support_violations == 0
            && self.pooled_p > 0.01
            && (self.random_classes == 0 || self.min_class_p > 0.01 / self.random_classes as f64)
    }
}

struct Class {
    matrix: Vec<Vec<Cell>>,
    user: usize,
    t: usize,
    dist: BTreeMap<Outcome, f64>,
}

pub fn run_brute_force() -> Report {
    let mut report = Report {
        matrices: 0,
        configurations: 0,
        support_violations: 0,
        classes: 0,
        random_classes: 0,
        pooled_stat: 0.0,
        pooled_df: 0.0,
        pooled_p: 1.0,
        min_class_p: 1.0,
        first_violation: None,
    };
    let mut classes: HashMap<(usize, usize, usize, u64), Class> = HashMap::new();
    let mut counter = 0u64;
    for rows in 1..=3usize {
        for cols in 1..=4usize {
            let col_perms = permutations(&(0..cols).collect::<Vec<_>>());
            let cells = rows * cols;
            for code in 0..3u64.pow(cells as u32) {
                let mut digits = Vec::with_capacity(cells);
                let mut c = code;
                for _ in 0..cells {
                    digits.push(match c % 3 {
                        0 => None,
                        1 => Some(false),
                        _ => Some(true),
                    });
                    c /= 3;
                }
                if digits.iter().filter(|d| d.is_some()).count() > MAX_STORED {
                    continue;
                }
                let m: Vec<Vec<Cell>> = digits.chunks(cols).map(|r| r.to_vec()).collect();
                report.matrices += 1;
                let y = to_observed(&m);
                for user in 0..rows {
                    for t in 1..=rows {
                        let Some(dist) = exact_distribution(&m, user, t) else {
                            continue;
                        };
                        report.configurations += 1;
                        for s in 0..SUPPORT_SEEDS {
                            counter += 1;
                            let o = run(&y, user, t, derive_seed(0x5EED, counter));
                            if !dist.contains_key(&o) {
                                report.support_violations += 1;
                                report.first_violation.get_or_insert_with(|| {
                                    format!("{m:?} user {user} T {t} seed #{s}: {o:?} not in {:?}", dist.keys())
                                });
                            }
                        }
                        if dist.len() > 1 {
                            let key = (rows, cols, t, canonical(&m, user, &col_perms));
                            classes.entry(key).or_insert_with(|| Class {
                                matrix: m.clone(),
                                user,
                                t,
                                dist,
                            });
                        }
                    }
                }
            }
        }
    }
    let mut keys: Vec<_> = classes.keys().copied().collect();
    keys.sort_unstable();
    report.classes = keys.len() as u64;
    for (idx, key) in keys.iter().enumerate() {
        let class = &classes[key];
        let y = to_observed(&class.matrix);
        let base = derive_seed(0xC41, idx as u64);
        let mut counts: BTreeMap<Outcome, u64> = BTreeMap::new();
        for s in 0..SEEDS_PER_CLASS {
            *counts.entry(run(&y, class.user, class.t, derive_seed(base, s))).or_insert(0) += 1;
        }
        if counts.keys().any(|o| !class.dist.contains_key(o)) {
            report.support_violations += 1;
            continue;
        }
        let stat: f64 = class
            .dist
            .iter()
            .map(|(o, &p)| {
                let expected = p * SEEDS_PER_CLASS as f64;
                let seen = *counts.get(o).unwrap_or(&0) as f64;
                (seen - expected).powi(2) / expected
            })
            .sum();
        let df = (class.dist.len() - 1) as f64;
        let p = ChiSquared::new(df).unwrap().sf(stat);
        report.random_classes += 1;
        report.min_class_p = report.min_class_p.min(p);
        report.pooled_stat += stat;
        report.pooled_df += df;
    }
    if report.pooled_df > 0.0 {
        report.pooled_p = ChiSquared::new(report.pooled_df).unwrap().sf(report.pooled_stat);
    }
    report
}
