//! Limiting bit error rates and the phase diagram.
//!
//! With `ε = 1 − c/n^α` and cluster size `k = n^(α − γ)`, PAF(k) has three regimes as
//! `n → ∞`: BER → 0 (α < 1/2, γ ≤ 0), BER → a constant in (0, 1/2) that depends on
//! `⌊1/γ⌋` (α < 1/2, γ > 0), and BER → 1/2 (α > 1/2). The finite-size corrections
//! `g_n`, `γ_n` are taken as zero.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether `1/γ` is an integer.
pub const INTEGER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseLabel {
    PhaseI,
    PhaseII,
    PhaseIII,
    Boundary,
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseLabel::PhaseI => "I",
            PhaseLabel::PhaseII => "II",
            PhaseLabel::PhaseIII => "III",
            PhaseLabel::Boundary => "boundary",
        })
    }
}

/// Limiting BER, either exact (`lower == upper`) or an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPrediction {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

impl BerPrediction {
    pub fn point(v: f64) -> Self {
        BerPrediction {
            lower: v,
            upper: v,
            exact: true,
        }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        let (lower, upper) = if a <= b { (a, b) } else { (b, a) };
        BerPrediction {
            lower,
            upper,
            exact: lower == upper,
        }
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        x >= self.lower - slack && x <= self.upper + slack
    }
}

/// `γ = α − ln k / ln n`.
pub fn gamma_of(n: usize, k: usize, alpha: f64) -> f64 {
    alpha - (k as f64).ln() / (n as f64).ln()
}

/// Phase of `(n, k, α)`.
pub fn phase_classify(n: usize, k: usize, alpha: f64, tol: f64) -> PhaseLabel {
    let gamma = gamma_of(n, k, alpha);
    if alpha > 0.5 + tol {
        PhaseLabel::PhaseIII
    } else if alpha < 0.5 - tol {
        if gamma <= tol {
            PhaseLabel::PhaseI
        } else {
            PhaseLabel::PhaseII
        }
    } else {
        PhaseLabel::Boundary
    }
}

/// `pˣ / (pˣ + (1−p)ˣ)`: posterior that the latent bit is 0 after `x` net 1-votes.
pub fn vote_error(p: f64, x: f64) -> f64 {
    if p == 0.0 {
        return if x > 0.0 { 0.0 } else { 0.5 };
    }
    1.0 / (1.0 + ((1.0 - p) / p).powf(x))
}

fn near_integer(x: f64) -> Option<f64> {
    let r = x.round();
    ((x - r).abs() <= INTEGER_TOLERANCE * x.abs().max(1.0)).then_some(r)
}

fn floor_tol(x: f64) -> f64 {
    near_integer(x).unwrap_or_else(|| x.floor())
}

fn ceil_tol(x: f64) -> f64 {
    near_integer(x).unwrap_or_else(|| x.ceil())
}

fn check_p_gamma(p: f64, gamma: f64) -> Result<()> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::Parameter(format!("p={p} must lie in [0, 1/2)")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain(format!("gamma={gamma} must be positive")));
    }
    Ok(())
}

/// Limit of PAF(k)'s BER for `k = n^(α − γ)`, `α < 1/2`.
///
/// Exact when `1/γ` is not an integer; otherwise the interval
/// `[f(1/γ), f(1/γ − 1)]`.
pub fn paf_limit_ber(p: f64, gamma: f64) -> Result<BerPrediction> {
    check_p_gamma(p, gamma)?;
    let inv = 1.0 / gamma;
    Ok(match near_integer(inv) {
        Some(m) => BerPrediction::interval(vote_error(p, m), vote_error(p, m - 1.0)),
        None => BerPrediction::point(vote_error(p, inv.floor())),
    })
}

/// Limiting BER of the best recommender for `k² = n^(α − γ)`:
/// `[f(⌊1/γ⌋), f(⌈1/γ − 1⌉)]`, a single value unless `1/γ` is an integer.
pub fn optimal_limit_ber(p: f64, gamma: f64) -> Result<BerPrediction> {
    check_p_gamma(p, gamma)?;
    let inv = 1.0 / gamma;
    let lo = vote_error(p, floor_tol(inv));
    let hi = vote_error(p, ceil_tol(inv - 1.0));
    Ok(BerPrediction::interval(lo, hi))
}

/// Phase and PAF(k) prediction for a parameter point. `Boundary` has no prediction.
pub fn predict_paf(n: usize, k: usize, p: f64, alpha: f64, tol: f64) -> Result<(PhaseLabel, Option<BerPrediction>)> {
    let phase = phase_classify(n, k, alpha, tol);
    let prediction = match phase {
        PhaseLabel::PhaseI => Some(BerPrediction::point(0.0)),
        PhaseLabel::PhaseII => Some(paf_limit_ber(p, gamma_of(n, k, alpha))?),
        PhaseLabel::PhaseIII => Some(BerPrediction::point(0.5)),
        PhaseLabel::Boundary => None,
    };
    Ok((phase, prediction))
}
