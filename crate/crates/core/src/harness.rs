//! Monte Carlo BER estimation.
//!
//! A trial draws a latent model and an observation from a per-trial seed, asks a
//! recommender for an item for user 0 among the columns erased in its row, and
//! scores an error when the latent value of that item is 0. Trial `i` of a run with
//! base seed `s` uses `derive_seed(s, i)`; a trial that has to be re-drawn (no
//! erased column, or the optional all-zero-row filter) moves on to
//! `derive_seed(derive_seed(s, i), attempt)`. Results depend only on the seeds, so
//! they are identical for any number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::cluster::{estimate_partition, oracle_recommend, recommend_by_cluster, Axis};
use crate::error::{Error, Result};
use crate::paf::{recommend, Recommendation};
use crate::seed::{derive_seed, stream};
use crate::synthetic::{generate, LatentModel, ModelParams};
use crate::theory::{predict_paf, BerPrediction, PhaseLabel};

/// 97.5% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Re-draws allowed per trial before it is given up.
const MAX_ATTEMPTS: u64 = 1000;

/// Tolerance used when classifying sweep points into phases.
pub const PHASE_TOLERANCE: f64 = 1e-3;

/// Recommender evaluated in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// PAF with `T` neighbours.
    Paf { t: usize },
    /// Cluster recommender told the true partitions.
    Oracle,
    /// Cluster recommender on k-nearest estimated partitions.
    Clustered { k: usize },
}

impl Method {
    fn recommend(&self, latent: &LatentModel, y: &crate::ObservedMatrix, seed: u64) -> Result<Recommendation> {
        match *self {
            Method::Paf { t } => recommend(y, 0, t, None, seed),
            Method::Oracle => oracle_recommend(latent, y, 0, None, seed),
            Method::Clustered { k } => {
                let rows = estimate_partition(y, k, Axis::Rows)?;
                let cols = estimate_partition(y, k, Axis::Columns)?;
                recommend_by_cluster(y, &rows, &cols, 0, None, seed)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOptions {
    /// Re-draw trials whose latent row 0 has no 1 (conditioning for `r = Θ(1)` runs).
    pub require_nonzero_row: bool,
}

/// Result of a scored trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub error: bool,
    /// Fraction of the selected rows that share user 0's row cluster.
    pub purity: f64,
    /// Unerased votes in the recommended column.
    pub votes: usize,
    pub item: usize,
}

/// Why a draw was not scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Skip {
    NoCandidates,
    AllZeroRow,
}

fn outcome(latent: &LatentModel, rec: &Recommendation) -> TrialOutcome {
    let own = latent.row_partition()[0];
    let good = rec.neighbors.iter().filter(|&&r| latent.row_partition()[r] == own).count();
    TrialOutcome {
        error: !latent.value(0, rec.item),
        purity: if rec.neighbors.is_empty() {
            0.0
        } else {
            good as f64 / rec.neighbors.len() as f64
        },
        votes: rec.vote_ones + rec.vote_zeros,
        item: rec.item,
    }
}

/// One draw scored by every method on the same observation.
pub fn run_trial_methods(
    params: &ModelParams,
    methods: &[Method],
    seed: u64,
    opts: &TrialOptions,
) -> Result<std::result::Result<Vec<TrialOutcome>, Skip>> {
    let (latent, y) = generate(params, seed)?;
    if opts.require_nonzero_row && latent.row_all_zero(0) {
        return Ok(Err(Skip::AllZeroRow));
    }
    if y.row(0).len() == y.n_cols() {
        return Ok(Err(Skip::NoCandidates));
    }
    let rec_seed = derive_seed(seed, stream::RECOMMEND);
    let mut out = Vec::with_capacity(methods.len());
    for m in methods {
        let rec = m.recommend(&latent, &y, rec_seed)?;
        out.push(outcome(&latent, &rec));
    }
    Ok(Ok(out))
}

/// One PAF(T) trial.
pub fn run_trial(
    params: &ModelParams,
    t: usize,
    seed: u64,
    opts: &TrialOptions,
) -> Result<std::result::Result<TrialOutcome, Skip>> {
    Ok(run_trial_methods(params, &[Method::Paf { t }], seed, opts)?.map(|mut v| v.remove(0)))
}

/// Aggregated Monte Carlo result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_purity: f64,
    pub mean_votes: f64,
    /// Draws discarded because nothing was erased in row 0.
    pub redrawn_no_candidates: u64,
    /// Draws discarded by the all-zero-row filter.
    pub redrawn_zero_row: u64,
    /// Trials abandoned after too many re-draws.
    pub abandoned: u64,
}

impl TrialStats {
    pub fn from_counts(trials: u64, errors: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, trials);
        TrialStats {
            trials,
            errors,
            ber: if trials == 0 { 0.0 } else { errors as f64 / trials as f64 },
            ci_low,
            ci_high,
            mean_purity: 0.0,
            mean_votes: 0.0,
            redrawn_no_candidates: 0,
            redrawn_zero_row: 0,
            abandoned: 0,
        }
    }

    /// Binomial standard error `√(ber(1−ber)/trials)`.
    pub fn std_error(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        (self.ber * (1.0 - self.ber) / self.trials as f64).sqrt()
    }
}

/// Standard error of the difference of two independent BER estimates.
pub fn diff_std_error(a: &TrialStats, b: &TrialStats) -> f64 {
    (a.std_error().powi(2) + b.std_error().powi(2)).sqrt()
}

/// Wilson score 95% interval for `successes / trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0).min(phat), (center + half).min(1.0).max(phat))
}

struct TrialRecord {
    outcomes: Option<Vec<TrialOutcome>>,
    no_candidates: u64,
    zero_row: u64,
}

fn run_with_redraws(params: &ModelParams, methods: &[Method], trial_seed: u64, opts: &TrialOptions) -> Result<TrialRecord> {
    let mut rec = TrialRecord {
        outcomes: None,
        no_candidates: 0,
        zero_row: 0,
    };
    for attempt in 0..MAX_ATTEMPTS {
        let seed = if attempt == 0 {
            trial_seed
        } else {
            derive_seed(derive_seed(trial_seed, stream::REDRAW), attempt)
        };
        match run_trial_methods(params, methods, seed, opts)? {
            Ok(v) => {
                rec.outcomes = Some(v);
                break;
            }
            Err(Skip::NoCandidates) => rec.no_candidates += 1,
            Err(Skip::AllZeroRow) => rec.zero_row += 1,
        }
    }
    Ok(rec)
}

/// Estimates the BER of every method over the same `trials` draws.
pub fn estimate_ber_methods(
    params: &ModelParams,
    methods: &[Method],
    trials: u64,
    base_seed: u64,
    opts: &TrialOptions,
) -> Result<Vec<TrialStats>> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    params.validate()?;
    if let Some(t) = methods.iter().find_map(|m| match m {
        Method::Paf { t } if *t == 0 || *t > params.n_rows => Some(*t),
        _ => None,
    }) {
        return Err(Error::Parameter(format!("T={t} must lie in [1, {}]", params.n_rows)));
    }
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|i| run_with_redraws(params, methods, derive_seed(base_seed, i), opts))
        .collect::<Result<_>>()?;

    let mut stats = Vec::with_capacity(methods.len());
    for m in 0..methods.len() {
        let (mut scored, mut errors) = (0u64, 0u64);
        let (mut purity, mut votes) = (0.0f64, 0.0f64);
        let (mut nc, mut zr, mut abandoned) = (0u64, 0u64, 0u64);
        for r in &records {
            nc += r.no_candidates;
            zr += r.zero_row;
            match &r.outcomes {
                Some(o) => {
                    scored += 1;
                    errors += o[m].error as u64;
                    purity += o[m].purity;
                    votes += o[m].votes as f64;
                }
                None => abandoned += 1,
            }
        }
        let mut s = TrialStats::from_counts(scored, errors);
        if scored > 0 {
            s.mean_purity = purity / scored as f64;
            s.mean_votes = votes / scored as f64;
        }
        s.redrawn_no_candidates = nc;
        s.redrawn_zero_row = zr;
        s.abandoned = abandoned;
        stats.push(s);
    }
    Ok(stats)
}

/// BER of PAF(T).
pub fn estimate_ber(params: &ModelParams, t: usize, trials: u64, base_seed: u64, opts: &TrialOptions) -> Result<TrialStats> {
    Ok(estimate_ber_methods(params, &[Method::Paf { t }], trials, base_seed, opts)?.remove(0))
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub swept_value: f64,
    pub stats: Option<TrialStats>,
    pub theory: Option<BerPrediction>,
    pub phase: Option<PhaseLabel>,
    /// Parameter error for this point, if any.
    pub error: Option<String>,
}

/// How `T` is chosen at each α.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TRule {
    /// `T = k`.
    ClusterSize,
    Fixed(usize),
}

/// BER across α values with the PAF(k) theory overlay.
pub fn sweep_alpha(
    base: &ModelParams,
    alphas: &[f64],
    rule: TRule,
    trials: u64,
    base_seed: u64,
    opts: &TrialOptions,
) -> Vec<SweepRow> {
    alphas
        .iter()
        .map(|&alpha| {
            let t = match rule {
                TRule::ClusterSize => base.k,
                TRule::Fixed(t) => t,
            };
            let point = base.with_alpha(alpha).and_then(|params| {
                let stats = estimate_ber(&params, t, trials, base_seed, opts)?;
                let (phase, theory) = predict_paf(params.n(), params.k, params.p, alpha, PHASE_TOLERANCE)?;
                Ok((stats, phase, theory))
            });
            match point {
                Ok((stats, phase, theory)) => SweepRow {
                    swept_value: alpha,
                    stats: Some(stats),
                    theory,
                    phase: Some(phase),
                    error: None,
                },
                Err(e) => SweepRow {
                    swept_value: alpha,
                    stats: None,
                    theory: None,
                    phase: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// BER across `T` values on common draws. The theory column carries the PAF(k)
/// prediction, which only applies at `T = k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TSweep {
    pub rows: Vec<SweepRow>,
    /// Index into `rows` of the smallest BER.
    pub argmin: Option<usize>,
}

pub fn sweep_t(params: &ModelParams, t_grid: &[usize], trials: u64, base_seed: u64, opts: &TrialOptions) -> Result<TSweep> {
    params.validate()?;
    let (phase, theory) = predict_paf(params.n(), params.k, params.p, params.alpha, PHASE_TOLERANCE)?;
    let valid: Vec<usize> = t_grid.iter().copied().filter(|&t| t >= 1 && t <= params.n_rows).collect();
    let methods: Vec<Method> = valid.iter().map(|&t| Method::Paf { t }).collect();
    let mut stats = if methods.is_empty() {
        Vec::new()
    } else {
        estimate_ber_methods(params, &methods, trials, base_seed, opts)?
    }
    .into_iter();
    let rows: Vec<SweepRow> = t_grid
        .iter()
        .map(|&t| {
            if t >= 1 && t <= params.n_rows {
                SweepRow {
                    swept_value: t as f64,
                    stats: stats.next(),
                    theory: (t == params.k).then_some(theory).flatten(),
                    phase: Some(phase),
                    error: None,
                }
            } else {
                SweepRow {
                    swept_value: t as f64,
                    stats: None,
                    theory: None,
                    phase: None,
                    error: Some(format!("T={t} must lie in [1, {}]", params.n_rows)),
                }
            }
        })
        .collect();
    let argmin = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.stats.as_ref().map(|s| (i, s.ber)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    Ok(TSweep { rows, argmin })
}

/// CSV header for sweep output.
pub const SWEEP_CSV_HEADER: &str = "swept_value,trials,errors,ber,ci_low,ci_high,theory_low,theory_high,phase";

/// Renders rows as CSV. Rows with a parameter error keep the swept value and leave
/// the remaining fields empty.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}", fmt_num(r.swept_value));
        match &r.stats {
            Some(s) => {
                let _ = write!(out, ",{},{},{:.6},{:.6},{:.6}", s.trials, s.errors, s.ber, s.ci_low, s.ci_high);
            }
            None => out.push_str(",,,,,"),
        }
        match &r.theory {
            Some(t) => {
                let _ = write!(out, ",{:.6},{:.6}", t.lower, t.upper);
            }
            None => out.push_str(",,"),
        }
        match r.phase {
            Some(p) => {
                let _ = write!(out, ",{p}");
            }
            None => out.push(','),
        }
        out.push('\n');
    }
    out
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        let s = format!("{x:.6}");
        s.trim_end_matches('0').to_string()
    }
}
