use std::fmt::Write as _;
use std::io::Cursor;

use paf::cluster::true_partitions;
use paf::dataset::{self, CandidateProtocol, RatingFormat, RecommenderKind};
use paf::harness::{self, Method, TRule, TrialOptions, TrialStats, PHASE_TOLERANCE};
use paf::synthetic::{generate as draw, ModelParams};
use paf::theory::{self, BerPrediction, PhaseLabel};

use crate::grid::parse_grid;
use crate::manifest::RunOutput;
use crate::{
    CandidatesArg, CliError, EvalArgs, FormatArg, GenerateArgs, MethodArg, ModelArgs, RecommenderArg, SimulateArgs,
    SweepArgs, SweepMode, TheoryArgs,
};

type CmdResult = Result<(), CliError>;

fn model_params(m: &ModelArgs) -> Result<ModelParams, CliError> {
    Ok(ModelParams::rectangular(m.n, m.n_cols.unwrap_or(m.n), m.k, m.p, m.c, m.alpha)?)
}

fn check_trials(trials: u64) -> Result<(), CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    Ok(())
}

pub fn generate(a: &GenerateArgs) -> CmdResult {
    let params = model_params(&a.model)?;
    let (latent, y) = draw(&params, a.seed)?;
    let (rows, cols) = true_partitions(&latent);
    let mut out = RunOutput::create(&a.out)?;
    out.write("observed.txt", y.to_text().as_bytes())?;
    let mut buf = Vec::new();
    rows.write_text(&mut buf)?;
    out.write("row_clusters.txt", &buf)?;
    buf.clear();
    cols.write_text(&mut buf)?;
    out.write("col_clusters.txt", &buf)?;
    let mut values = String::new();
    for i in 0..latent.row_clusters() {
        let line: String = (0..latent.col_clusters())
            .map(|j| if latent.cluster_value(i, j) { '1' } else { '0' })
            .collect();
        values.push_str(&line);
        values.push('\n');
    }
    out.write("cluster_values.txt", values.as_bytes())?;
    out.finish("generate", a)?;
    println!("{} x {} matrix, {} observed entries", y.n_rows(), y.n_cols(), y.nnz());
    Ok(())
}

fn fmt_prediction(p: Option<BerPrediction>) -> String {
    match p {
        Some(p) => format!("{:.9},{:.9}", p.lower, p.upper),
        None => ",".into(),
    }
}

/// Limit for the cluster oracle: pooling `k²` samples per block, `γ = α − 2 ln k / ln n`.
fn optimal_prediction(n: usize, k: usize, p: f64, alpha: f64, tol: f64) -> Result<Option<BerPrediction>, CliError> {
    if alpha >= 0.5 - tol {
        return Ok(None);
    }
    let gamma = alpha - 2.0 * (k as f64).ln() / (n as f64).ln();
    if gamma <= tol {
        return Ok(Some(BerPrediction::point(0.0)));
    }
    Ok(Some(theory::optimal_limit_ber(p, gamma)?))
}

const SIMULATE_HEADER: &str = "method,T,trials,errors,ber,ci_low,ci_high,std_error,mean_purity,mean_votes,\
redrawn_no_candidates,redrawn_zero_row,abandoned,theory_low,theory_high,phase";

fn stats_fields(s: &TrialStats) -> String {
    format!(
        "{},{},{:.6},{:.6},{:.6},{:.6}",
        s.trials,
        s.errors,
        s.ber,
        s.ci_low,
        s.ci_high,
        s.std_error()
    )
}

pub fn simulate(a: &SimulateArgs) -> CmdResult {
    let params = model_params(&a.model)?;
    check_trials(a.trials)?;
    let t = a.t.unwrap_or(params.k);
    let mut methods = Vec::new();
    for m in &a.methods {
        let method = match m {
            MethodArg::Paf => Method::Paf { t },
            MethodArg::Oracle => Method::Oracle,
            MethodArg::Clustered => Method::Clustered { k: params.k },
        };
        if !methods.contains(&method) {
            methods.push(method);
        }
    }
    let opts = TrialOptions {
        require_nonzero_row: a.require_nonzero_row,
    };
    let stats = harness::estimate_ber_methods(&params, &methods, a.trials, a.seed, &opts)?;
    let n = params.n();
    let phase = theory::phase_classify(n, params.k, params.alpha, PHASE_TOLERANCE);
    let (_, paf_theory) = theory::predict_paf(n, params.k, params.p, params.alpha, PHASE_TOLERANCE)?;

    let mut csv = String::from(SIMULATE_HEADER);
    csv.push('\n');
    for (m, s) in methods.iter().zip(&stats) {
        let (name, t_field, prediction) = match *m {
            Method::Paf { t } => ("paf", t.to_string(), if t == params.k { paf_theory } else { None }),
            Method::Oracle => (
                "oracle",
                String::new(),
                optimal_prediction(n, params.k, params.p, params.alpha, PHASE_TOLERANCE)?,
            ),
            Method::Clustered { .. } => ("clustered", String::new(), None),
        };
        let _ = writeln!(
            csv,
            "{name},{t_field},{},{:.6},{:.6},{},{},{},{},{phase}",
            stats_fields(s),
            s.mean_purity,
            s.mean_votes,
            s.redrawn_no_candidates,
            s.redrawn_zero_row,
            s.abandoned,
            fmt_prediction(prediction),
        );
        println!(
            "{name}: BER {:.4} [{:.4}, {:.4}] over {} trials",
            s.ber, s.ci_low, s.ci_high, s.trials
        );
    }
    let mut out = RunOutput::create(&a.out)?;
    out.write("results.csv", csv.as_bytes())?;
    out.finish("simulate", a)?;
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> CmdResult {
    let params = model_params(&a.model)?;
    check_trials(a.trials)?;
    let grid = parse_grid(&a.grid).map_err(CliError::Usage)?;
    let opts = TrialOptions {
        require_nonzero_row: a.require_nonzero_row,
    };
    let csv = match a.mode {
        SweepMode::Alpha => {
            let rule = a.t.map_or(TRule::ClusterSize, TRule::Fixed);
            let rows = harness::sweep_alpha(&params, &grid, rule, a.trials, a.seed, &opts);
            for r in &rows {
                match (&r.stats, &r.error) {
                    (Some(s), _) => println!("alpha {}: BER {:.4}", r.swept_value, s.ber),
                    (None, Some(e)) => println!("alpha {}: skipped ({e})", r.swept_value),
                    (None, None) => {}
                }
            }
            harness::sweep_csv(&rows)
        }
        SweepMode::T => {
            let mut ts = Vec::with_capacity(grid.len());
            for &v in &grid {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(CliError::Usage(format!("T grid value {v} is not a positive integer")));
                }
                ts.push(v as usize);
            }
            let sweep = harness::sweep_t(&params, &ts, a.trials, a.seed, &opts)?;
            if let Some(i) = sweep.argmin {
                println!("minimum BER at T={}", sweep.rows[i].swept_value);
            }
            harness::sweep_csv(&sweep.rows)
        }
    };
    let mut out = RunOutput::create(&a.out)?;
    out.write("sweep.csv", csv.as_bytes())?;
    out.finish("sweep", a)?;
    Ok(())
}

const THEORY_HEADER: &str = "n,k,p,alpha,gamma,phase,paf_low,paf_high,paf_exact,optimal_low,optimal_high";

pub fn theory(a: &TheoryArgs) -> CmdResult {
    if a.n < 2 || a.k == 0 || a.k > a.n {
        return Err(CliError::Usage(format!("need n >= 2 and 1 <= k <= n, got n={} k={}", a.n, a.k)));
    }
    if !(0.0..0.5).contains(&a.p) {
        return Err(CliError::Usage(format!("p={} must lie in [0, 1/2)", a.p)));
    }
    if !(a.alpha >= 0.0) || !(a.tol >= 0.0) {
        return Err(CliError::Usage("alpha and tol must be non-negative".into()));
    }
    let phase = theory::phase_classify(a.n, a.k, a.alpha, a.tol);
    let gamma = a.gamma.unwrap_or_else(|| theory::gamma_of(a.n, a.k, a.alpha));
    let paf = match a.gamma {
        Some(g) => Some(theory::paf_limit_ber(a.p, g)?),
        None => theory::predict_paf(a.n, a.k, a.p, a.alpha, a.tol)?.1,
    };
    let optimal = match a.gamma {
        Some(g) => Some(theory::optimal_limit_ber(a.p, g)?),
        None => optimal_prediction(a.n, a.k, a.p, a.alpha, a.tol)?,
    };
    let exact = paf.map_or(String::new(), |p| p.exact.to_string());
    let row = format!(
        "{},{},{},{},{:.9},{},{},{},{}",
        a.n,
        a.k,
        a.p,
        a.alpha,
        gamma,
        phase,
        fmt_prediction(paf),
        exact,
        fmt_prediction(optimal)
    );
    println!("phase {phase}{}", if phase == PhaseLabel::Boundary { " (no prediction)" } else { "" });
    println!("gamma {gamma:.9}");
    if let Some(p) = paf {
        println!("paf limit BER [{:.9}, {:.9}]", p.lower, p.upper);
    }
    if let Some(o) = optimal {
        println!("oracle limit BER [{:.9}, {:.9}]", o.lower, o.upper);
    }
    let mut out = RunOutput::create(&a.out)?;
    out.write("theory.csv", format!("{THEORY_HEADER}\n{row}\n").as_bytes())?;
    out.finish("theory", a)?;
    Ok(())
}

const EVAL_HEADER: &str = "recommender,T,trials,errors,ber,ci_low,ci_high,std_error,users_without_test,unchecked,rmse";

pub fn eval(a: &EvalArgs) -> CmdResult {
    let bytes = std::fs::read(&a.data).map_err(|e| CliError::Usage(format!("{}: {e}", a.data.display())))?;
    let format = match a.format {
        FormatArg::Movielens => RatingFormat::MovieLensDat,
        FormatArg::Csv => RatingFormat::Csv,
    };
    let ratings = dataset::parse_ratings(Cursor::new(&bytes), format)?;
    let mut split = dataset::split_train_test(&ratings, a.hide_frac, a.seed)?;
    if let Some(th) = a.filter_popular {
        if !(0.0..=1.0).contains(&th) {
            return Err(CliError::Usage(format!("popularity threshold {th} must lie in [0, 1]")));
        }
        split = dataset::filter_popular(&split, th)?;
    }
    if a.t.iter().any(|&t| t == 0) {
        return Err(CliError::Usage("T values must be at least 1".into()));
    }
    let protocol = match a.candidates {
        CandidatesArg::Hidden => CandidateProtocol::Hidden,
        CandidatesArg::All => CandidateProtocol::AllUnrated,
    };
    log::info!(
        "{} users, {} items, {} training and {} test ratings",
        split.train.n_rows(),
        split.train.n_cols(),
        split.train.nnz(),
        split.test.len()
    );

    let mut runs: Vec<(RecommenderKind, String, String)> = Vec::new();
    for r in &a.recommenders {
        match r {
            RecommenderArg::Paf => {
                for &t in &a.t {
                    runs.push((RecommenderKind::Paf { t }, "paf".into(), t.to_string()));
                }
            }
            RecommenderArg::Global => runs.push((RecommenderKind::Global, "global".into(), String::new())),
            RecommenderArg::Cluster => runs.push((RecommenderKind::Cluster { k: a.k }, "cluster".into(), String::new())),
        }
    }
    let mut csv = String::from(EVAL_HEADER);
    csv.push('\n');
    for (kind, name, t_field) in runs {
        let e = dataset::eval_ber(&split, kind, protocol, a.seed)?;
        let rmse = match kind {
            RecommenderKind::Paf { t } if a.rmse => Some(dataset::eval_rmse(&split, t, a.seed)?),
            _ => None,
        };
        let _ = writeln!(
            csv,
            "{name},{t_field},{},{},{},{}",
            stats_fields(&e.stats),
            e.users_without_test,
            e.unchecked,
            rmse.map_or(String::new(), |r| format!("{r:.6}"))
        );
        let label = if t_field.is_empty() { name.clone() } else { format!("{name}({t_field})") };
        print!("{label}: BER {:.4} over {} users", e.stats.ber, e.stats.trials);
        match rmse {
            Some(r) => println!(", RMSE {r:.4}"),
            None => println!(),
        }
    }
    let mut out = RunOutput::create(&a.out)?;
    let label = a.data.file_name().map_or_else(|| a.data.display().to_string(), |f| f.to_string_lossy().into_owned());
    out.record_input(&label, &bytes);
    out.write("eval.csv", csv.as_bytes())?;
    out.finish("eval", a)?;
    Ok(())
}
