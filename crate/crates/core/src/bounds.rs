//! Simultaneous Clopper-Pearson probability bounds from vote counts.
//!
//! From one set of vote counts this derives, at confidence `1 - alpha_effective`,
//! a lower bound on the top label's probability and upper bounds on all other
//! labels, splitting the error budget `alpha_effective / c` per label. The
//! per-example budget itself comes from a Bonferroni split of the run-level
//! `alpha` across test examples, so all bounds hold simultaneously.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_CF_ITER: usize = 400;
const QUANTILE_TOL: f64 = 1e-12;

/// Simultaneous bounds for one test example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityBounds {
    /// Label with the most votes (smallest index on ties).
    pub top_label: usize,
    /// Label with the second most votes (smallest index on ties).
    pub runner_up: usize,
    /// Lower confidence bound on the top label's probability.
    pub p_lower: f64,
    /// Upper confidence bound on every other label's probability.
    pub p_upper_runner: f64,
    /// Error budget this example's bounds were computed at.
    pub alpha_effective: f64,
    /// True when the bounds cannot separate top from runner-up.
    pub abstain: bool,
}

/// Bonferroni split of the error budget across `e` test examples.
pub fn bonferroni_alpha(alpha: f64, e: usize) -> Result<f64> {
    if e == 0 {
        return Err(Error::Domain("cannot split alpha across zero test examples".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must be in (0, 1), got {alpha}")));
    }
    Ok(alpha / e as f64)
}

/// Natural log of the gamma function (Lanczos approximation, g = 7).
#[allow(clippy::excessive_precision)] // published coefficient values
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let pi = std::f64::consts::PI;
        return pi.ln() - (pi * x).sin().abs().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (z + i as f64 + 1.0);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the regularized incomplete beta function
/// (modified Lentz method).
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let tiny = 1e-30;
    let eps = f64::EPSILON;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = 1.0 / d;
    let mut f = d;
    for m in 1..=MAX_CF_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let even = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + even * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + even / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        f *= d * c;
        let odd = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + odd * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = 1.0 + odd / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        f *= delta;
        if (delta - 1.0).abs() < eps {
            return Ok(f);
        }
    }
    Err(Error::Domain(format!(
        "incomplete beta continued fraction did not converge for x={x}, a={a}, b={b}"
    )))
}

/// Regularized incomplete beta function `I_x(a, b)` for `a, b > 0`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("beta shapes must be positive, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x must be in [0, 1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_prefix = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    // symmetry keeps the continued fraction in its fast-convergence region
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok((ln_prefix.exp() / a) * beta_cf(x, a, b)?)
    } else {
        Ok(1.0 - (ln_prefix.exp() / b) * beta_cf(1.0 - x, b, a)?)
    }
}

/// The `beta`-quantile of the Beta distribution with shapes `lambda`, `theta`.
///
/// Inversion is bracketed bisection refined with a derivative step; the
/// result satisfies `I_x(lambda, theta) = beta` to absolute tolerance 1e-10.
/// Degenerate shapes follow the point-mass convention: `lambda = 0` gives 0,
/// `theta = 0` gives 1.
pub fn beta_quantile(beta: f64, lambda: f64, theta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("quantile level must be in (0, 1), got {beta}")));
    }
    if lambda < 0.0 || theta < 0.0 {
        return Err(Error::Domain(format!(
            "beta shapes must be non-negative, got ({lambda}, {theta})"
        )));
    }
    match (lambda == 0.0, theta == 0.0) {
        (true, true) => {
            return Err(Error::Domain("Beta(0, 0) has no quantiles".into()));
        }
        (true, false) => return Ok(0.0),
        (false, true) => return Ok(1.0),
        _ => {}
    }

    let ln_norm = ln_beta(lambda, theta);
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut x = 0.5f64;
    let mut residual = f64::MAX;
    for _ in 0..300 {
        residual = regularized_incomplete_beta(x, lambda, theta)? - beta;
        if residual.abs() <= QUANTILE_TOL {
            break;
        }
        if residual > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= f64::EPSILON * x.max(f64::MIN_POSITIVE) {
            break;
        }
        // Newton step on the CDF, falling back to the bracket midpoint
        let ln_pdf = (lambda - 1.0) * x.ln() + (theta - 1.0) * (1.0 - x).ln() - ln_norm;
        let mut next = x - residual / ln_pdf.exp();
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        x = next;
    }
    if residual.abs() > 1e-10 {
        return Err(Error::Domain(format!(
            "quantile inversion stalled at residual {residual} for ({beta}, {lambda}, {theta})"
        )));
    }
    Ok(x)
}

/// Clopper-Pearson lower bound on the success probability at level `alpha`
/// after observing `successes` of `trials`.
pub fn clopper_pearson_lower(alpha: f64, successes: u64, trials: u64) -> Result<f64> {
    beta_quantile(alpha, successes as f64, (trials - successes) as f64 + 1.0)
}

/// Upper bound companion. A zero count makes the written Beta shape
/// degenerate, so it substitutes the standard zero-count bound
/// `1 - alpha^(1/N)`, which is conservative.
pub fn clopper_pearson_upper(alpha: f64, successes: u64, trials: u64) -> Result<f64> {
    if successes == 0 {
        Ok(1.0 - alpha.powf(1.0 / trials as f64))
    } else {
        beta_quantile(1.0 - alpha, successes as f64, (trials - successes) as f64 + 1.0)
    }
}

/// Simultaneous estimation of the top-label lower bound and runner-up upper
/// bound from one vote-count row, at per-example budget `alpha_effective`.
///
/// The per-label quantile level is `alpha_effective / c`. The runner-up upper
/// bound is clamped by `1 - p_lower` so the two bounds always describe a
/// feasible probability vector. Equal top counts can never separate, so they
/// abstain.
pub fn simuem(counts: &[u64], num_classifiers: usize, alpha_effective: f64) -> Result<ProbabilityBounds> {
    let c = counts.len();
    if c < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 labels to certify, got {c}"
        )));
    }
    if num_classifiers == 0 {
        return Err(Error::Validation("number of classifiers N must be at least 1".into()));
    }
    let total: u64 = counts.iter().sum();
    if total != num_classifiers as u64 {
        return Err(Error::Validation(format!(
            "counts sum to {total}, expected N = {num_classifiers}"
        )));
    }
    if !(alpha_effective > 0.0 && alpha_effective < 1.0) {
        return Err(Error::Domain(format!(
            "alpha_effective must be in (0, 1), got {alpha_effective}"
        )));
    }

    let top_label = argmax_u64(counts, None);
    let runner_up = argmax_u64(counts, Some(top_label));
    let n = num_classifiers as u64;
    let level = alpha_effective / c as f64;

    let p_lower = clopper_pearson_lower(level, counts[top_label], n)?;
    let mut max_upper = 0.0f64;
    for (j, &count) in counts.iter().enumerate() {
        if j == top_label {
            continue;
        }
        max_upper = max_upper.max(clopper_pearson_upper(level, count, n)?);
    }
    let p_upper_runner = max_upper.min(1.0 - p_lower);

    Ok(ProbabilityBounds {
        top_label,
        runner_up,
        p_lower,
        p_upper_runner,
        alpha_effective,
        abstain: p_lower <= p_upper_runner,
    })
}

fn argmax_u64(counts: &[u64], skip: Option<usize>) -> usize {
    let mut best = usize::MAX;
    for (i, &v) in counts.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        if best == usize::MAX || v > counts[best] {
            best = i;
        }
    }
    best
}
