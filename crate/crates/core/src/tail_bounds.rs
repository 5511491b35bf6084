//! Exact binomial and hypergeometric tails and the concentration bounds used with them.
//!
//! Exact pmfs are tabulated in log space by the ratio recurrence, so populations up
//! to ~10⁶ stay finite and normalised.
//! Every bound returns a probability clamped to `[0, 1]`.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// `log(Σ exp(terms))` without overflow.
fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn check_prob(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Parameter(format!("probability {p} outside [0, 1]")))
    }
}

/// Normalised log-pmf over `lo..=hi`, built outward from `mode` with the ratio
/// `ln f(t+1) − ln f(t)`. Avoids the cancellation of differences of log-factorials.
fn ln_pmf_table(lo: u64, hi: u64, mode: u64, ln_ratio: impl Fn(u64) -> f64) -> Vec<f64> {
    let mode = mode.clamp(lo, hi);
    let mut table = vec![0.0; (hi - lo + 1) as usize];
    let at = |t: u64| (t - lo) as usize;
    for t in mode..hi {
        table[at(t + 1)] = table[at(t)] + ln_ratio(t);
    }
    for t in (lo..mode).rev() {
        table[at(t)] = table[at(t + 1)] - ln_ratio(t);
    }
    let total = log_sum_exp(table.iter().copied());
    for v in &mut table {
        *v -= total;
    }
    table
}

/// Log-pmf of `B(n, p)` indexed by outcome, `-inf` off the support.
fn binom_ln_table(n: u64, p: f64) -> Vec<f64> {
    if p == 0.0 || p == 1.0 {
        let mut t = vec![f64::NEG_INFINITY; n as usize + 1];
        t[if p == 0.0 { 0 } else { n as usize }] = 0.0;
        return t;
    }
    let odds = (p / (1.0 - p)).ln();
    let mode = ((n + 1) as f64 * p).floor() as u64;
    ln_pmf_table(0, n, mode, |i| ((n - i) as f64).ln() - ((i + 1) as f64).ln() + odds)
}

/// `Σ exp(table[t..])` or `1 − Σ exp(table[..t])`, whichever side is lighter.
fn tail_from_table(table: &[f64], t: usize, mean: f64) -> f64 {
    if t == 0 {
        return 1.0;
    }
    if t >= table.len() {
        return 0.0;
    }
    let v = if t as f64 > mean {
        table[t..].iter().map(|x| x.exp()).sum::<f64>()
    } else {
        1.0 - table[..t].iter().map(|x| x.exp()).sum::<f64>()
    };
    v.clamp(0.0, 1.0)
}

/// `Pr[X = i]` for `X ~ B(n, p)`.
pub fn binom_pmf(n: u64, p: f64, i: u64) -> f64 {
    if i > n || !(0.0..=1.0).contains(&p) {
        return 0.0;
    }
    binom_ln_table(n, p)[i as usize].exp()
}

/// `Pr[X ≥ t]` for `X ~ B(n, p)` by direct summation.
pub fn binom_tail_exact(n: u64, p: f64, t: u64) -> Result<f64> {
    check_prob(p)?;
    if t > n {
        return Ok(0.0);
    }
    Ok(tail_from_table(&binom_ln_table(n, p), t as usize, n as f64 * p))
}

/// Low-mean binomial tail: `Pr[X > t] ≤ 2^(−t)` whenever `t > 2e·np`.
pub fn binom_tail_low_mean_bound(n: u64, p: f64, t: f64) -> Result<f64> {
    check_prob(p)?;
    low_mean_bound(n as f64 * p, t)
}

fn low_mean_bound(mean: f64, t: f64) -> Result<f64> {
    let gate = 2.0 * std::f64::consts::E * mean;
    if !(t > gate) {
        return Err(Error::Domain(format!("t={t} must exceed 2e*E[X]={gate}")));
    }
    Ok(2f64.powf(-t).min(1.0))
}

/// Hypergeometric `(N, m, n)`: `n` draws without replacement from `N` items of which
/// `m` are successes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HypergeomParams {
    pub population: u64,
    pub successes: u64,
    pub draws: u64,
}

impl HypergeomParams {
    pub fn new(population: u64, successes: u64, draws: u64) -> Result<Self> {
        if successes > population || draws > population {
            return Err(Error::Parameter(format!(
                "hypergeometric needs m <= N and n <= N, got N={population} m={successes} n={draws}"
            )));
        }
        Ok(HypergeomParams {
            population,
            successes,
            draws,
        })
    }

    /// `p = m / N`.
    pub fn success_fraction(&self) -> f64 {
        if self.population == 0 {
            0.0
        } else {
            self.successes as f64 / self.population as f64
        }
    }

    pub fn mean(&self) -> f64 {
        self.draws as f64 * self.success_fraction()
    }

    /// Smallest and largest attainable values.
    pub fn support(&self) -> (u64, u64) {
        let lo = (self.draws + self.successes).saturating_sub(self.population);
        (lo, self.draws.min(self.successes))
    }

    /// Log-pmf over the support, starting at `support().0`.
    fn ln_table(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        let (big_n, m, n) = (self.population, self.successes, self.draws);
        let mode = ((n + 1) as f64 * (m + 1) as f64 / (big_n + 2) as f64).floor() as u64;
        ln_pmf_table(lo, hi, mode, |t| {
            ((m - t) as f64).ln() + ((n - t) as f64).ln()
                - ((t + 1) as f64).ln()
                - ((big_n + t + 1 - m - n) as f64).ln()
        })
    }
}

/// `h(N, m, n, t) = C(m, t) C(N−m, n−t) / C(N, n)`; zero outside the support.
pub fn hypergeom_pmf(hp: &HypergeomParams, t: u64) -> f64 {
    let (lo, hi) = hp.support();
    if t < lo || t > hi {
        return 0.0;
    }
    hp.ln_table()[(t - lo) as usize].exp()
}

/// `Pr[X ≥ t]`.
pub fn hypergeom_tail_exact(hp: &HypergeomParams, t: u64) -> f64 {
    let (lo, hi) = hp.support();
    if t <= lo {
        return 1.0;
    }
    if t > hi {
        return 0.0;
    }
    tail_from_table(&hp.ln_table(), (t - lo) as usize, hp.mean() - lo as f64)
}

/// `Pr[X ≤ t]`.
pub fn hypergeom_lower_tail_exact(hp: &HypergeomParams, t: u64) -> f64 {
    1.0 - hypergeom_tail_exact(hp, t + 1)
}

fn check_upper(hp: &HypergeomParams, t: f64) -> Result<f64> {
    let p = hp.success_fraction();
    if !(t >= 0.0) || !(t < 1.0 - p) {
        return Err(Error::Domain(format!("need 0 <= t < 1 - p = {}, got t={t}", 1.0 - p)));
    }
    Ok(p)
}

fn check_lower(hp: &HypergeomParams, t: f64) -> Result<f64> {
    let p = hp.success_fraction();
    if !(t >= 0.0) || !(t < p) {
        return Err(Error::Domain(format!("need 0 <= t < p = {p}, got t={t}")));
    }
    Ok(p)
}

/// `x^y` with `0^0 = 1`.
fn pow0(x: f64, y: f64) -> f64 {
    if y == 0.0 {
        1.0
    } else {
        x.powf(y)
    }
}

/// Upper tail `Pr[X ≥ (p+t)n]` bounded by `((p/(p+t)) · ((1−p)/(1−p−t)))ⁿ`, the form
/// without the `p+t` and `1−p−t` exponents inside the product. Clamped to 1.
///
/// This form is not a valid bound in general: for `p < 1/2` and small `t` the base
/// drops below the Kullback–Leibler rate and the expression undershoots the tail.
/// [`chvatal_upper_strict`] is the dependable version.
pub fn chvatal_upper(hp: &HypergeomParams, t: f64) -> Result<f64> {
    let p = check_upper(hp, t)?;
    if t == 0.0 {
        return Ok(1.0);
    }
    let base = (p / (p + t)) * ((1.0 - p) / (1.0 - p - t));
    Ok(base.powf(hp.draws as f64).min(1.0))
}

/// Chvátal's bound `Pr[X ≥ (p+t)n] ≤ ((p/(p+t))^(p+t) ((1−p)/(1−p−t))^(1−p−t))ⁿ`.
pub fn chvatal_upper_strict(hp: &HypergeomParams, t: f64) -> Result<f64> {
    let p = check_upper(hp, t)?;
    let q = p + t;
    let base = pow0(p / q, q) * pow0((1.0 - p) / (1.0 - q), 1.0 - q);
    Ok(base.powf(hp.draws as f64).min(1.0))
}

/// Lower tail `Pr[X ≤ (p−t)n]` bounded by `((p/(p−t)) · ((1−p)/(1−p+t)))ⁿ`, the mirror
/// of [`chvatal_upper`] with the same caveat. Clamped to 1.
pub fn chvatal_lower(hp: &HypergeomParams, t: f64) -> Result<f64> {
    let p = check_lower(hp, t)?;
    if t == 0.0 {
        return Ok(1.0);
    }
    let base = (p / (p - t)) * ((1.0 - p) / (1.0 - p + t));
    Ok(base.powf(hp.draws as f64).min(1.0))
}

/// Mirror of [`chvatal_upper_strict`] for the lower tail.
pub fn chvatal_lower_strict(hp: &HypergeomParams, t: f64) -> Result<f64> {
    let p = check_lower(hp, t)?;
    let q = p - t;
    let base = pow0(p / q, q) * pow0((1.0 - p) / (1.0 - q), 1.0 - q);
    Ok(base.powf(hp.draws as f64).min(1.0))
}

/// Two-sided concentration: `Pr[|X − E[X]| ≥ δ·E[X]] ≤ 2·exp(−E[X]δ²/3)`, clamped to 1.
/// Holds for `δ ∈ [0, 1]`.
pub fn simple_tail(hp: &HypergeomParams, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain(format!("delta={delta} must lie in [0, 1]")));
    }
    Ok((2.0 * (-hp.mean() * delta * delta / 3.0).exp()).min(1.0))
}

/// Exact `Pr[|X − E[X]| ≥ δ·E[X]]`.
pub fn hypergeom_two_sided_exact(hp: &HypergeomParams, delta: f64) -> f64 {
    let mean = hp.mean();
    let (lo, hi) = hp.support();
    let low_cut = mean * (1.0 - delta);
    let high_cut = mean * (1.0 + delta);
    let table = hp.ln_table();
    (lo..=hi)
        .filter(|&x| (x as f64) <= low_cut || (x as f64) >= high_cut)
        .map(|x| table[(x - lo) as usize].exp())
        .sum::<f64>()
        .min(1.0)
}

/// Hypergeometric version of the low-mean bound: `Pr[X > t] ≤ 2^(−t)` for `t > 2e·E[X]`.
pub fn hypergeom_tail_low_mean_bound(hp: &HypergeomParams, t: f64) -> Result<f64> {
    low_mean_bound(hp.mean(), t)
}

/// Standard normal upper tail `Q(t) = erfc(t/√2)/2`.
pub fn moderate_deviation_q(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

/// `Pr[X > np + t·√(np(1−p))]` for `X ~ B(n, p)`, the left side of the moderate
/// deviation approximation by [`moderate_deviation_q`].
pub fn binom_standardized_tail(n: u64, p: f64, t: f64) -> Result<f64> {
    let mean = n as f64 * p;
    let sd = (mean * (1.0 - p)).sqrt();
    let cut = mean + t * sd;
    // X > cut  <=>  X >= floor(cut) + 1
    let first = if cut < 0.0 { 0 } else { cut.floor() as u64 + 1 };
    binom_tail_exact(n, p, first)
}
