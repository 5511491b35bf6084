//! Bound domination on random parameter sets, Monte Carlo agreement of the exact
//! tails, and the moderate-deviation ratio.

use paf::seed::rng_from_seed;
use paf::tail_bounds::{self as tb, HypergeomParams};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};

pub const INSTANCES: usize = 500;
pub const MC_SAMPLES: u64 = 1_000_000;

/// Outcome of one bound's domination sweep.
pub struct BoundCheck {
    pub name: &'static str,
    pub instances: usize,
    pub violations: usize,
    pub worst: Option<String>,
}

impl BoundCheck {
    fn new(name: &'static str) -> Self {
        BoundCheck {
            name,
            instances: 0,
            violations: 0,
            worst: None,
        }
    }

    /// Records `bound` against the quantity it must dominate; the first failure is
    /// kept as the example.
    fn record(&mut self, bound: f64, exact: f64, label: impl FnOnce() -> String) {
        self.instances += 1;
        if bound < exact * (1.0 - 1e-9) - 1e-15 {
            self.violations += 1;
            if self.worst.is_none() {
                self.worst = Some(format!("{}: bound {bound:.3e} < exact {exact:.3e}", label()));
            }
        }
    }
}

fn random_hypergeom(rng: &mut impl Rng) -> HypergeomParams {
    let population = rng.random_range(2..=3000u64);
    let successes = rng.random_range(1..population);
    let draws = rng.random_range(1..=population);
    HypergeomParams::new(population, successes, draws).unwrap()
}

/// `⌈x⌉` that ignores float dust just above an integer.
fn ceil_eps(x: f64) -> u64 {
    (x - 1e-9).ceil().max(0.0) as u64
}

fn floor_eps(x: f64) -> u64 {
    (x + 1e-9).floor().max(0.0) as u64
}

pub fn domination_checks(seed: u64) -> Vec<BoundCheck> {
    let mut rng = rng_from_seed(seed);
    let mut upper = BoundCheck::new("chvatal_upper (printed form)");
    let mut upper_strict = BoundCheck::new("chvatal_upper_strict");
    let mut lower = BoundCheck::new("chvatal_lower (printed form)");
    let mut lower_strict = BoundCheck::new("chvatal_lower_strict");
    let mut simple = BoundCheck::new("simple_tail (concentration lower bound)");
    let mut binom_low = BoundCheck::new("binom_tail_low_mean_bound");
    let mut hyper_low = BoundCheck::new("hypergeom_tail_low_mean_bound");

    while upper.instances < INSTANCES {
        let hp = random_hypergeom(&mut rng);
        let p = hp.success_fraction();
        let t = rng.random_range(0.0..(1.0 - p));
        let x = (p + t) * hp.draws as f64;
        let exact = tb::hypergeom_tail_exact(&hp, ceil_eps(x));
        let label = || format!("{hp:?} t={t:.4}");
        upper.record(tb::chvatal_upper(&hp, t).unwrap(), exact, label);
        upper_strict.record(tb::chvatal_upper_strict(&hp, t).unwrap(), exact, label);
    }
    while lower.instances < INSTANCES {
        let hp = random_hypergeom(&mut rng);
        let p = hp.success_fraction();
        let t = rng.random_range(0.0..p);
        let x = (p - t) * hp.draws as f64;
        let exact = tb::hypergeom_lower_tail_exact(&hp, floor_eps(x));
        let label = || format!("{hp:?} t={t:.4}");
        lower.record(tb::chvatal_lower(&hp, t).unwrap(), exact, label);
        lower_strict.record(tb::chvatal_lower_strict(&hp, t).unwrap(), exact, label);
    }
    while simple.instances < INSTANCES {
        let hp = random_hypergeom(&mut rng);
        let delta = rng.random_range(0.0..=1.0);
        // 1 − bound ≤ Pr[|X − E| < δE]  ⇔  bound ≥ Pr[|X − E| ≥ δE].
        let outside = tb::hypergeom_two_sided_exact(&hp, delta);
        simple.record(tb::simple_tail(&hp, delta).unwrap(), outside, || format!("{hp:?} delta={delta:.4}"));
    }
    while binom_low.instances < INSTANCES {
        let n = rng.random_range(1..=5000u64);
        let p = rng.random_range(0.0..0.05);
        let gate = 2.0 * std::f64::consts::E * n as f64 * p;
        let t = gate + rng.random_range(1e-6..20.0);
        if t >= n as f64 {
            continue;
        }
        let exact = tb::binom_tail_exact(n, p, t.floor() as u64 + 1).unwrap();
        binom_low.record(tb::binom_tail_low_mean_bound(n, p, t).unwrap(), exact, || {
            format!("n={n} p={p:.5} t={t:.3}")
        });
    }
    while hyper_low.instances < INSTANCES {
        let population = rng.random_range(10..=3000u64);
        let successes = rng.random_range(1..=population / 20 + 1);
        let draws = rng.random_range(1..=population);
        let hp = HypergeomParams::new(population, successes, draws).unwrap();
        let t = 2.0 * std::f64::consts::E * hp.mean() + rng.random_range(1e-6..20.0);
        if t >= draws as f64 {
            continue;
        }
        let exact = tb::hypergeom_tail_exact(&hp, t.floor() as u64 + 1);
        hyper_low.record(tb::hypergeom_tail_low_mean_bound(&hp, t).unwrap(), exact, || {
            format!("{hp:?} t={t:.3}")
        });
    }
    vec![upper, upper_strict, lower, lower_strict, simple, binom_low, hyper_low]
}

/// `(label, exact, empirical, sigma)` for each grid point.
pub fn monte_carlo(seed: u64) -> Vec<(String, f64, f64, f64)> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::new();
    let within = |exact: f64, hits: u64| {
        let emp = hits as f64 / MC_SAMPLES as f64;
        let sigma = (exact * (1.0 - exact) / MC_SAMPLES as f64).sqrt();
        (emp, sigma)
    };
    for (n, p, t) in [(50u64, 0.3, 20u64), (1000, 0.01, 15), (200, 0.5, 110), (10, 0.01, 2)] {
        let d = Binomial::new(n, p).unwrap();
        let hits = (0..MC_SAMPLES).filter(|_| d.sample(&mut rng) >= t).count() as u64;
        let exact = tb::binom_tail_exact(n, p, t).unwrap();
        let (emp, sigma) = within(exact, hits);
        out.push((format!("B({n},{p}) >= {t}"), exact, emp, sigma));
    }
    for (big_n, m, n, t) in [(100u64, 30u64, 20u64, 9u64), (1000, 50, 200, 15), (60, 30, 30, 18), (10, 5, 4, 3)] {
        let d = Hypergeometric::new(big_n, m, n).unwrap();
        let hits = (0..MC_SAMPLES).filter(|_| d.sample(&mut rng) >= t).count() as u64;
        let hp = HypergeomParams::new(big_n, m, n).unwrap();
        let exact = tb::hypergeom_tail_exact(&hp, t);
        let (emp, sigma) = within(exact, hits);
        out.push((format!("H({big_n},{m},{n}) >= {t}"), exact, emp, sigma));
    }
    out
}

/// `Pr[X > np + 2√(np(1−p))] / Q(2)` for `n = 10⁵`, `p = 0.3`.
pub fn moderate_deviation_ratio() -> f64 {
    tb::binom_standardized_tail(100_000, 0.3, 2.0).unwrap() / tb::moderate_deviation_q(2.0)
}
