//! Cluster-based recommenders.
//!
//! Given row and column partitions, the recommender picks the column cluster whose
//! block against the user's row cluster holds the most observed 1s and returns a
//! random unseen item from it. With the true partitions this is the oracle
//! recommender; with partitions estimated by [`estimate_partition`] it is the
//! clustering recommender.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::error::{check_index, Error, Result};
use crate::matrix::ObservedMatrix;
use crate::paf::{resolve_candidates, Recommendation};
use crate::seed::rng_from_seed;
use crate::synthetic::LatentModel;

/// Which side of the matrix to cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Rows,
    Columns,
}

/// Assignment of indices to dense cluster ids `0..cluster_count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    cluster_count: usize,
    /// Set when the input carried no information and everything was put in one cluster.
    pub degenerate: bool,
}

impl Partition {
    /// Relabels arbitrary ids densely in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let assignment: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Partition {
            cluster_count: map.len(),
            assignment,
            degenerate: false,
        }
    }

    pub fn single(len: usize) -> Self {
        Partition {
            assignment: vec![0; len],
            cluster_count: usize::from(len > 0),
            degenerate: false,
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn cluster_of(&self, index: usize) -> usize {
        self.assignment[index]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignment[i] == cluster).collect()
    }

    /// Lines `index cluster_id`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, c) in self.assignment.iter().enumerate() {
            writeln!(w, "{i} {c}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Parse {
                line: n + 1,
                message: "expected `index cluster_id`".into(),
            };
            let mut it = line.split_whitespace();
            let i: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let c: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if it.next().is_some() {
                return Err(bad());
            }
            pairs.push((i, c));
        }
        pairs.sort_unstable();
        if pairs.iter().enumerate().any(|(pos, &(i, _))| pos != i) {
            return Err(Error::Parse {
                line: 0,
                message: "indices must cover 0..len exactly once".into(),
            });
        }
        let labels: Vec<usize> = pairs.into_iter().map(|(_, c)| c).collect();
        let p = Partition::from_labels(&labels);
        if p.assignment != labels {
            return Err(Error::Parse {
                line: 0,
                message: "cluster ids must be dense in order of first appearance".into(),
            });
        }
        Ok(p)
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Clusters rows (or columns) from their k-nearest similarity sets.
///
/// Pairwise scores are signed agreement (agreements minus disagreements on
/// co-observed entries). Each index keeps itself plus its `k − 1` best matches, and
/// these sets are sharpened once by shared-neighbour counts. Pairs that pick each
/// other are joined; connected components become clusters, and components larger
/// than `2k` are split greedily by seeding a cluster at the lowest unassigned index
/// with its unassigned nearest set. A few rounds of reassignment to the best
/// matching cluster profile follow. Ties always resolve towards lower indices. A
/// matrix without any observation yields one cluster flagged `degenerate`.
pub fn estimate_partition(y: &ObservedMatrix, k: usize, axis: Axis) -> Result<Partition> {
    let transposed;
    let y = match axis {
        Axis::Rows => y,
        Axis::Columns => {
            transposed = y.transpose();
            &transposed
        }
    };
    let n = y.n_rows();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("k={k} must lie in [1, {n}]")));
    }
    if y.nnz() == 0 {
        log::warn!("all-erased matrix: returning a single cluster");
        let mut p = Partition::single(n);
        p.degenerate = true;
        return Ok(p);
    }

    let signed: Vec<Vec<i64>> = (0..n).map(|i| signed_similarities(y, i)).collect();
    let first: Vec<Vec<usize>> = (0..n).map(|i| select_top_deterministic(&signed[i], i, k)).collect();
    let mut member = vec![false; n];
    let nearest: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            for &j in &first[i] {
                member[j] = true;
            }
            // Shared-neighbour count dominates; signed score breaks ties.
            let span = 4 * y.n_cols() as i64 + 2;
            let scores: Vec<i64> = (0..n)
                .map(|j| {
                    let shared = first[j].iter().filter(|&&x| member[x]).count() as i64;
                    shared * span + signed[i][j]
                })
                .collect();
            for &j in &first[i] {
                member[j] = false;
            }
            select_top_deterministic(&scores, i, k)
        })
        .collect();
    drop(signed);

    let mut is_near: Vec<Vec<usize>> = nearest.clone();
    for set in &mut is_near {
        set.sort_unstable();
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for &j in &nearest[i] {
            if j != i && is_near[j].binary_search(&i).is_ok() {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();

    let mut label = vec![usize::MAX; n];
    let mut next_label = 0;
    let mut by_root: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &r) in roots.iter().enumerate() {
        by_root.entry(r).or_default().push(i);
    }
    for members in by_root.values() {
        if members.len() <= 2 * k {
            for &i in members {
                label[i] = next_label;
            }
            next_label += 1;
            continue;
        }
        for &seed in members {
            if label[seed] != usize::MAX {
                continue;
            }
            label[seed] = next_label;
            for &j in &nearest[seed] {
                if label[j] == usize::MAX && roots[j] == roots[seed] {
                    label[j] = next_label;
                }
            }
            next_label += 1;
        }
    }
    let target = n.div_ceil(k);
    reconcile(y, &mut label, target);
    refine(y, &mut label, REFINE_ROUNDS);
    rebalance(y, &mut label, k, target);
    resplit_close_pairs(y, &mut label);
    Ok(Partition::from_labels(&label))
}

/// While some cluster exceeds `3k/2` members, folds the smallest cluster into its
/// closest profile (unless clusters are already too few), halves the largest, and re-runs the reassignment passes. Stops
/// when the size spread no longer shrinks.
fn rebalance(y: &ObservedMatrix, label: &mut [usize], k: usize, target: usize) {
    let spread = |label: &[usize]| -> (usize, usize) {
        let count = label.iter().max().map_or(0, |&x| x + 1);
        let mut size = vec![0usize; count];
        for &l in label {
            size[l] += 1;
        }
        let max = size.iter().copied().max().unwrap_or(0);
        (max, size.iter().map(|&s| s.abs_diff(k)).sum())
    };
    for _ in 0..target {
        let count = densify(label);
        let (max, before) = spread(label);
        if 2 * max <= 3 * k || count < 2 {
            return;
        }
        let previous = label.to_vec();
        if count < target {
            reconcile(y, label, target);
        } else {
            let (prof, size) = profiles(y, label, count);
            let small = (0..count).min_by(|&a, &b| size[a].cmp(&size[b]).then(a.cmp(&b))).unwrap();
            let into = (0..count)
                .filter(|&c| c != small)
                .max_by(|&a, &b| {
                    cosine(&prof[small], &prof[a])
                        .total_cmp(&cosine(&prof[small], &prof[b]))
                        .then(b.cmp(&a))
                })
                .unwrap();
            for l in label.iter_mut() {
                if *l == small {
                    *l = into;
                }
            }
            let count = densify(label);
            reconcile(y, label, count + 1);
        }
        refine(y, label, REFINE_ROUNDS);
        if spread(label).1 >= before {
            label.copy_from_slice(&previous);
            return;
        }
    }
}

/// `Σ_c ‖Σ_{i∈c} row_i‖² / |c|`: larger when clusters are internally consistent.
fn objective(y: &ObservedMatrix, label: &[usize]) -> f64 {
    let count = label.iter().max().map_or(0, |&x| x + 1);
    let (prof, size) = profiles(y, label, count);
    prof.iter()
        .zip(&size)
        .map(|(row, &sz)| sz as f64 * row.iter().map(|x| x * x).sum::<f64>())
        .sum()
}

/// For the closest cluster pairs by profile, pools both clusters and splits them
/// again along the leading principal direction of their centred ±1 rows, keeping
/// the result whenever the objective improves after reassignment.
fn resplit_close_pairs(y: &ObservedMatrix, label: &mut [usize]) {
    let count = densify(label);
    if count < 2 {
        return;
    }
    let (prof, _) = profiles(y, label, count);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..count {
        for b in a + 1..count {
            pairs.push((cosine(&prof[a], &prof[b]), a, b));
        }
    }
    pairs.sort_by(|x, z| z.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(z.1, z.2))));
    pairs.truncate(count);
    let mut best = objective(y, label);
    for &(_, a, b) in &pairs {
        let pooled: Vec<usize> = (0..label.len()).filter(|&i| label[i] == a || label[i] == b).collect();
        let Some(side) = principal_split(y, &pooled) else { continue };
        let mut trial = label.to_vec();
        for (&i, &s) in pooled.iter().zip(&side) {
            trial[i] = if s { b } else { a };
        }
        refine(y, &mut trial, REFINE_ROUNDS);
        let score = objective(y, &trial);
        if score > best + 1e-9 && densify(&mut trial.clone()) == count {
            best = score;
            label.copy_from_slice(&trial);
        }
    }
    densify(label);
}

/// Sign of each member's coordinate on the top singular vector of the centred
/// member × column ±1 matrix (power iteration from a fixed start).
fn principal_split(y: &ObservedMatrix, members: &[usize]) -> Option<Vec<bool>> {
    if members.len() < 2 {
        return None;
    }
    let m = y.n_cols();
    let mut mean = vec![0.0f64; m];
    let mut seen = vec![0.0f64; m];
    for &i in members {
        for (v, bit) in y.row(i).iter() {
            mean[v] += if bit { 1.0 } else { -1.0 };
            seen[v] += 1.0;
        }
    }
    for (x, s) in mean.iter_mut().zip(&seen) {
        if *s > 0.0 {
            *x /= s;
        }
    }
    let centred = |i: usize| y.row(i).iter().map(|(v, bit)| (v, if bit { 1.0 } else { -1.0 } - mean[v]));
    let mut u: Vec<f64> = (0..members.len()).map(|j| if j % 2 == 0 { 1.0 } else { -0.5 }).collect();
    for _ in 0..100 {
        let mut w = vec![0.0f64; m];
        for (j, &i) in members.iter().enumerate() {
            for (v, x) in centred(i) {
                w[v] += u[j] * x;
            }
        }
        let next: Vec<f64> = members.iter().map(|&i| centred(i).map(|(v, x)| x * w[v]).sum()).collect();
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return None;
        }
        u = next.into_iter().map(|x| x / norm).collect();
    }
    let side: Vec<bool> = u.iter().map(|&x| x > 0.0).collect();
    (side.iter().any(|&s| s) && side.iter().any(|&s| !s)).then_some(side)
}

/// Relabels to dense ids `0..count` in order of first appearance.
fn densify(label: &mut [usize]) -> usize {
    let p = Partition::from_labels(label);
    label.copy_from_slice(&p.assignment);
    p.cluster_count
}

/// Mean ±1 profile of every cluster over the columns, with its Euclidean norm.
fn profiles(y: &ObservedMatrix, label: &[usize], clusters: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let m = y.n_cols();
    let mut sum = vec![vec![0.0f64; m]; clusters];
    let mut size = vec![0usize; clusters];
    for (i, &l) in label.iter().enumerate() {
        size[l] += 1;
        for (c, bit) in y.row(i).iter() {
            sum[l][c] += if bit { 1.0 } else { -1.0 };
        }
    }
    for (row, &sz) in sum.iter_mut().zip(&size) {
        for x in row.iter_mut() {
            *x /= sz.max(1) as f64;
        }
    }
    (sum, size)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa * bb).sqrt()
    }
}

/// Brings the cluster count to `target`: the two clusters with the most similar
/// profiles merge while there are too many, and the largest cluster is halved
/// while there are too few.
fn reconcile(y: &ObservedMatrix, label: &mut [usize], target: usize) {
    let mut count = densify(label);
    if count > target {
        let (mut prof, mut size) = profiles(y, label, count);
        let mut alive = vec![true; count];
        let mut sim = vec![vec![f64::NEG_INFINITY; count]; count];
        for a in 0..count {
            for b in a + 1..count {
                sim[a][b] = cosine(&prof[a], &prof[b]);
                sim[b][a] = sim[a][b];
            }
        }
        let mut forward: Vec<usize> = (0..count).collect();
        while count > target {
            let mut best = (0, 0, f64::NEG_INFINITY);
            for a in (0..alive.len()).filter(|&a| alive[a]) {
                for b in (a + 1..alive.len()).filter(|&b| alive[b]) {
                    if sim[a][b] > best.2 {
                        best = (a, b, sim[a][b]);
                    }
                }
            }
            let (a, b, _) = best;
            let total = (size[a] + size[b]) as f64;
            for v in 0..prof[a].len() {
                prof[a][v] = (prof[a][v] * size[a] as f64 + prof[b][v] * size[b] as f64) / total;
            }
            size[a] += size[b];
            alive[b] = false;
            forward[b] = a;
            for c in (0..alive.len()).filter(|&c| alive[c] && c != a) {
                sim[a][c] = cosine(&prof[a], &prof[c]);
                sim[c][a] = sim[a][c];
            }
            count -= 1;
        }
        for l in label.iter_mut() {
            while forward[*l] != *l {
                *l = forward[*l];
            }
        }
        densify(label);
    }
    while count < target {
        let (_, size) = profiles(y, label, count);
        let largest = (0..count).max_by(|&a, &b| size[a].cmp(&size[b]).then(b.cmp(&a))).unwrap_or(0);
        if size[largest] < 2 {
            break;
        }
        bisect(y, label, largest, count);
        count += 1;
    }
}

/// Splits cluster `c` in two (new id `fresh`) by 2-means on ±1 rows, seeded with
/// its lowest-index member and the member least similar to it.
fn bisect(y: &ObservedMatrix, label: &mut [usize], c: usize, fresh: usize) {
    let members: Vec<usize> = (0..label.len()).filter(|&i| label[i] == c).collect();
    let first = members[0];
    let s = signed_similarities(y, first);
    let second = *members[1..].iter().min_by(|&&a, &&b| s[a].cmp(&s[b]).then(a.cmp(&b))).unwrap();
    label[second] = fresh;
    let m = y.n_cols();
    let mut centre = [vec![0.0f64; m], vec![0.0f64; m]];
    for (side, &i) in [first, second].iter().enumerate() {
        for (v, bit) in y.row(i).iter() {
            centre[side][v] = if bit { 1.0 } else { -1.0 };
        }
    }
    for _ in 0..REFINE_ROUNDS {
        for &i in &members {
            let score = |side: usize| -> f64 {
                y.row(i).iter().map(|(v, bit)| if bit { centre[side][v] } else { -centre[side][v] }).sum()
            };
            label[i] = if score(1) > score(0) { fresh } else { c };
        }
        let mut sum = [vec![0.0f64; m], vec![0.0f64; m]];
        let mut size = [0usize; 2];
        for &i in &members {
            let side = usize::from(label[i] == fresh);
            size[side] += 1;
            for (v, bit) in y.row(i).iter() {
                sum[side][v] += if bit { 1.0 } else { -1.0 };
            }
        }
        if size[0] == 0 || size[1] == 0 {
            break;
        }
        for side in 0..2 {
            for x in sum[side].iter_mut() {
                *x /= size[side] as f64;
            }
        }
        centre = sum;
    }
    if members.iter().all(|&i| label[i] == c) || members.iter().all(|&i| label[i] == fresh) {
        // Degenerate split: peel off the second seed alone.
        for &i in &members {
            label[i] = c;
        }
        label[second] = fresh;
    }
}

const REFINE_ROUNDS: usize = 10;

/// Agreements minus disagreements between row `i` and every row.
fn signed_similarities(y: &ObservedMatrix, i: usize) -> Vec<i64> {
    let mut out = vec![0i64; y.n_rows()];
    for (c, bit) in y.row(i).iter() {
        for (r, other) in y.col(c).iter() {
            out[r] += if other == bit { 1 } else { -1 };
        }
    }
    out
}

/// Lloyd-style passes: each index moves to the cluster whose mean ±1 profile best
/// matches its observed entries. Empty clusters disappear.
fn refine(y: &ObservedMatrix, label: &mut [usize], rounds: usize) {
    let m = y.n_cols();
    for _ in 0..rounds {
        let clusters = label.iter().max().map_or(0, |&x| x + 1);
        let mut sum = vec![0.0f64; clusters * m];
        let mut size = vec![0usize; clusters];
        for (i, &l) in label.iter().enumerate() {
            size[l] += 1;
            for (c, bit) in y.row(i).iter() {
                sum[l * m + c] += if bit { 1.0 } else { -1.0 };
            }
        }
        let mut changed = false;
        for (i, l) in label.iter_mut().enumerate() {
            let mut best = (*l, f64::NEG_INFINITY);
            for (c, &sz) in size.iter().enumerate() {
                if sz == 0 {
                    continue;
                }
                let own = usize::from(c == *l) as f64;
                let score: f64 = y
                    .row(i)
                    .iter()
                    .map(|(v, bit)| {
                        let s = if bit { 1.0 } else { -1.0 };
                        // Leave-one-out profile so an index does not vote for itself.
                        s * (sum[c * m + v] - own * s) / (sz as f64 - own).max(1.0)
                    })
                    .sum();
                if score > best.1 + 1e-12 {
                    best = (c, score);
                }
            }
            if best.0 != *l {
                changed = true;
                *l = best.0;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Top-`k` indices with `me` first and remaining ties resolved towards lower indices.
fn select_top_deterministic(scores: &[i64], me: usize, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).filter(|&j| j != me).collect();
    order.sort_by(|&a, &b| scores[b].cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k - 1);
    order.insert(0, me);
    order
}

/// Fraction of indices correctly grouped under a one-to-one matching of estimated
/// to true clusters, chosen greedily by decreasing overlap.
pub fn partition_accuracy(estimated: &Partition, truth: &Partition) -> f64 {
    assert_eq!(estimated.len(), truth.len());
    if estimated.is_empty() {
        return 1.0;
    }
    let mut overlap = std::collections::HashMap::<(usize, usize), usize>::new();
    for i in 0..estimated.len() {
        *overlap.entry((estimated.cluster_of(i), truth.cluster_of(i))).or_default() += 1;
    }
    let mut pairs: Vec<((usize, usize), usize)> = overlap.into_iter().collect();
    pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut used_est = vec![false; estimated.cluster_count()];
    let mut used_true = vec![false; truth.cluster_count()];
    let mut matched = 0;
    for ((e, t), count) in pairs {
        if !used_est[e] && !used_true[t] {
            used_est[e] = true;
            used_true[t] = true;
            matched += count;
        }
    }
    matched as f64 / estimated.len() as f64
}

/// Recommends from the column cluster with the most observed 1s in the block
/// `rows(user) × cluster`. Only clusters containing a candidate compete; cluster
/// ties and the item inside the winning cluster are drawn uniformly.
pub fn recommend_by_cluster(
    y: &ObservedMatrix,
    rows: &Partition,
    cols: &Partition,
    user: usize,
    candidates: Option<&[usize]>,
    seed: u64,
) -> Result<Recommendation> {
    if rows.len() != y.n_rows() || cols.len() != y.n_cols() {
        return Err(Error::Parameter("partitions do not cover the matrix".into()));
    }
    check_index("row", user, y.n_rows())?;
    let candidates = resolve_candidates(y, user, candidates)?;
    let mut rng = rng_from_seed(seed);

    let block_rows = rows.members(rows.cluster_of(user));
    let mut ones = vec![0usize; cols.cluster_count()];
    let mut zeros = vec![0usize; cols.cluster_count()];
    for &r in &block_rows {
        for (c, b) in y.row(r).iter() {
            let cluster = cols.cluster_of(c);
            if b {
                ones[cluster] += 1;
            } else {
                zeros[cluster] += 1;
            }
        }
    }

    let mut per_cluster: Vec<Vec<usize>> = vec![Vec::new(); cols.cluster_count()];
    for &c in &candidates {
        per_cluster[cols.cluster_of(c)].push(c);
    }
    let eligible: Vec<usize> = (0..cols.cluster_count()).filter(|&b| !per_cluster[b].is_empty()).collect();
    let best = eligible.iter().map(|&b| ones[b]).max().expect("candidates map to clusters");
    let winners: Vec<usize> = eligible.into_iter().filter(|&b| ones[b] == best).collect();
    let cluster = winners[rng.random_range(0..winners.len())];
    let pool = &per_cluster[cluster];
    let item = pool[rng.random_range(0..pool.len())];

    Ok(Recommendation {
        item,
        vote_ones: ones[cluster],
        vote_zeros: zeros[cluster],
        neighbors: block_rows,
        candidate_count: candidates.len(),
    })
}

/// The true row and column partitions of a latent model.
pub fn true_partitions(model: &LatentModel) -> (Partition, Partition) {
    (
        Partition::from_labels(model.row_partition()),
        Partition::from_labels(model.col_partition()),
    )
}

/// Cluster recommender told the true partitions.
pub fn oracle_recommend(
    model: &LatentModel,
    y: &ObservedMatrix,
    user: usize,
    candidates: Option<&[usize]>,
    seed: u64,
) -> Result<Recommendation> {
    let (rows, cols) = true_partitions(model);
    recommend_by_cluster(y, &rows, &cols, user, candidates, seed)
}
