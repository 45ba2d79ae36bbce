//! Certified poisoning sizes.
//!
//! Everything here is exact: probabilities are interpreted as the exact
//! rational values of their binary floats, powers like `(n'/n)^k` are
//! big-integer ratios, and every constraint comparison is a rational sign
//! test. `n^k` overflows any machine float and the residuals are below machine
//! epsilon, so exact arithmetic is what makes certificates deterministic.
//!
//! The certified size for the general attacker (modify + delete + insert) is
//! the largest `r` for which
//!
//! ```text
//! max over n' in [n-r, n+r] of
//!   (n'/n)^k - 2 ((max(n, n') - r)/n)^k + 1 - (p_lower - p_upper - dl - ds)  <  0
//! ```
//!
//! found by binary search over `r` (the maximum is monotone in `r`), with the
//! inner maximum located analytically: at most two integer candidates around
//! `x_root = r / (1 - (1/2)^(1/(k-1)))`, clamped to `[n, n+r]`. Attackers
//! restricted to one edit type admit closed forms; those are evaluated with
//! exact ceiling tests so they agree with the search to the integer.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bonferroni_alpha, simuem};
use crate::ensemble::VoteTable;
use crate::error::{Error, Result};

/// Threat models an attacker may be restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackModel {
    /// Any mix of modification, deletion and insertion.
    General,
    Modify,
    Delete,
    Insert,
}

pub const ALL_ATTACKS: [AttackModel; 4] = [
    AttackModel::General,
    AttackModel::Modify,
    AttackModel::Delete,
    AttackModel::Insert,
];

impl AttackModel {
    pub fn name(self) -> &'static str {
        match self {
            AttackModel::General => "general",
            AttackModel::Modify => "modify",
            AttackModel::Delete => "delete",
            AttackModel::Insert => "insert",
        }
    }
}

impl std::str::FromStr for AttackModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            // "all" is the attacker free to modify, delete and insert
            "all" | "general" => Ok(AttackModel::General),
            "modify" => Ok(AttackModel::Modify),
            "delete" => Ok(AttackModel::Delete),
            "insert" => Ok(AttackModel::Insert),
            other => Err(Error::Validation(format!(
                "unknown attack model `{other}` (expected all, modify, delete or insert)"
            ))),
        }
    }
}

/// Inputs to a single certification: training size, subsample size, and the
/// two probability bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertInputs {
    pub n: u64,
    pub k: u32,
    pub p_lower: f64,
    pub p_upper_runner: f64,
}

impl CertInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 {
            return Err(Error::Validation("n and k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_lower) || !(0.0..=1.0).contains(&self.p_upper_runner) {
            return Err(Error::Validation("probability bounds must lie in [0, 1]".into()));
        }
        if self.p_lower + self.p_upper_runner > 1.0 {
            return Err(Error::Validation(format!(
                "bounds are infeasible: {} + {} > 1",
                self.p_lower, self.p_upper_runner
            )));
        }
        if self.p_lower <= self.p_upper_runner {
            return Err(Error::Validation(
                "cannot certify abstaining bounds (p_lower <= p_upper_runner)".into(),
            ));
        }
        Ok(())
    }

    fn exact_bounds(&self) -> Result<(BigRational, BigRational)> {
        Ok((
            rational_from_probability(self.p_lower)?,
            rational_from_probability(self.p_upper_runner)?,
        ))
    }
}

/// Rounding gaps aligning the probability bounds to the `1/n^k` grid of the
/// subsample measure. Both lie in `[0, 1/n^k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub delta_l: BigRational,
    pub delta_s: BigRational,
}

pub(crate) fn rational_from_probability(p: f64) -> Result<BigRational> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    BigRational::from_float(p).ok_or_else(|| Error::Domain(format!("{p} is not finite")))
}

pub(crate) fn bigint_pow(base: u64, k: u32) -> BigInt {
    BigInt::from(base).pow(k)
}

/// `delta_l = p_lower - floor(p_lower n^k)/n^k` and
/// `delta_s = ceil(p_upper n^k)/n^k - p_upper`, computed on exact rationals.
pub fn residuals_exact(p_lower: &BigRational, p_upper: &BigRational, n: u64, k: u32) -> Residuals {
    let nk = BigRational::from_integer(bigint_pow(n, k));
    let delta_l = p_lower - (p_lower * &nk).floor() / &nk;
    let delta_s = (p_upper * &nk).ceil() / &nk - p_upper;
    Residuals { delta_l, delta_s }
}

/// Residuals with the floats interpreted as their exact binary values.
pub fn residuals(p_lower: f64, p_upper_runner: f64, n: u64, k: u32) -> Result<Residuals> {
    if n == 0 || k == 0 {
        return Err(Error::Validation("n and k must be at least 1".into()));
    }
    let pl = rational_from_probability(p_lower)?;
    let ps = rational_from_probability(p_upper_runner)?;
    Ok(residuals_exact(&pl, &ps, n, k))
}

fn adjusted_gap_exact(p_lower: &BigRational, p_upper: &BigRational, n: u64, k: u32) -> BigRational {
    let res = residuals_exact(p_lower, p_upper, n, k);
    p_lower - p_upper - res.delta_l - res.delta_s
}

/// Exact value of the constraint left-hand side
/// `L(n') = (n'/n)^k - 2 (m/n)^k + 1 - adjusted_gap` with `m = max(n, n') - r`.
pub fn constraint_lhs(
    n: u64,
    k: u32,
    r: u64,
    n_prime: u64,
    adjusted_gap: &BigRational,
) -> Result<BigRational> {
    if n_prime + r < n || n_prime > n + r {
        return Err(Error::Domain(format!(
            "n' = {n_prime} outside [{}, {}]",
            n.saturating_sub(r),
            n + r
        )));
    }
    let largest = n.max(n_prime);
    if largest < r {
        return Err(Error::Domain(format!(
            "shared size max(n, n') - r would be negative ({largest} < {r})"
        )));
    }
    let m = largest - r;
    let numerator = bigint_pow(n_prime, k) - BigInt::from(2) * bigint_pow(m, k);
    let ratio = BigRational::new(numerator, bigint_pow(n, k));
    Ok(ratio + BigRational::one() - adjusted_gap)
}

/// Where `L(n')` can attain its maximum over `[n-r, n+r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NPrimeCandidates {
    /// At most two integer candidates, sorted and deduplicated.
    pub candidates: Vec<u64>,
    /// True when rounding stepped outside `[n, n+r]` and was clamped back;
    /// the interval endpoints should then be checked as well.
    pub clamped: bool,
    /// Stationary point `r / (1 - (1/2)^(1/(k-1)))` of the upper branch,
    /// absent for `k = 1` where the branch is monotone.
    pub x_root: Option<f64>,
}

/// Analytical maximizer candidates for `L(n')`.
///
/// `L` is strictly increasing on `[n-r, n]`. On `[n, n+r]` it rises to
/// `x_root` and falls after it, so the discrete maximum sits at the floor or
/// ceiling of `x_root`, clamped into the interval: clamping to `n` is the
/// small-`r` regime where the maximum is at `n'= n`, clamping to `n+r` the
/// large-`r` regime where it is at `n' = n+r`. For `k = 1` the upper branch
/// is monotone and both endpoints are returned.
pub fn argmax_nprime(n: u64, k: u32, r: u64) -> NPrimeCandidates {
    if k <= 1 {
        let mut candidates = vec![n, n + r];
        candidates.dedup();
        return NPrimeCandidates { candidates, clamped: false, x_root: None };
    }
    let denom = 1.0 - 0.5f64.powf(1.0 / (k as f64 - 1.0));
    let x_root = r as f64 / denom;
    let lo = n as f64;
    let hi = (n + r) as f64;
    let mut clamped = false;
    let mut candidates: Vec<u64> = [x_root.floor(), x_root.ceil()]
        .into_iter()
        .map(|v| {
            if v < lo || v > hi {
                clamped = true;
            }
            v.clamp(lo, hi) as u64
        })
        .collect();
    candidates.sort_unstable();
    candidates.dedup();
    NPrimeCandidates { candidates, clamped, x_root: Some(x_root) }
}

/// Candidate poisoned sizes whose maximum over `L` equals the maximum over
/// the whole interval: the analytical candidates, plus the endpoints when
/// rounding had to be clamped.
fn candidate_n_primes(n: u64, k: u32, r: u64) -> Vec<u64> {
    let analysis = argmax_nprime(n, k, r);
    let mut candidates = analysis.candidates;
    if analysis.clamped {
        candidates.push(n);
        candidates.push(n + r);
        candidates.sort_unstable();
        candidates.dedup();
    }
    candidates
}

/// Exact maximum of `L(n')` over the whole interval `n-r <= n' <= n+r`,
/// evaluated only at the analytical candidates (plus the endpoints whenever
/// rounding was clamped).
pub fn max_constraint(n: u64, k: u32, r: u64, adjusted_gap: &BigRational) -> Result<BigRational> {
    let mut best: Option<BigRational> = None;
    for n_prime in candidate_n_primes(n, k, r) {
        let value = constraint_lhs(n, k, r, n_prime, adjusted_gap)?;
        best = Some(match best {
            Some(current) if current >= value => current,
            _ => value,
        });
    }
    Ok(best.expect("candidate set is never empty"))
}

/// Largest `r` in `[0, n]` whose constraint maximum is negative, on exact
/// rational bounds. Returns 0 when even `r = 0` fails, meaning the prediction
/// is certified only for the unpoisoned dataset.
pub fn certified_size_general_exact(
    n: u64,
    k: u32,
    p_lower: &BigRational,
    p_upper: &BigRational,
) -> Result<u64> {
    let gap = adjusted_gap_exact(p_lower, p_upper, n, k);
    let nk = bigint_pow(n, k);
    // Same sign test as max_constraint < 0, cleared of denominators:
    // L(n') < 0  <=>  (n'^k - 2 m^k + n^k) * den(gap) < num(gap) * n^k.
    // The left side is non-negative (m <= n'), so a non-positive gap fails.
    let den = gap.denom().clone();
    let rhs = gap.numer() * &nk;
    let feasible = |r: u64| -> bool {
        candidate_n_primes(n, k, r).into_iter().all(|n_prime| {
            let m = n.max(n_prime) - r;
            let lhs = (bigint_pow(n_prime, k) - BigInt::from(2) * bigint_pow(m, k) + &nk) * &den;
            lhs < rhs
        })
    };
    if !feasible(0) {
        return Ok(0);
    }
    if feasible(n) {
        return Ok(n);
    }
    // invariant: feasible(lo), !feasible(hi); the max is monotone in r
    let (mut lo, mut hi) = (0u64, n);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Binary search for the general attacker on float bounds.
pub fn certified_size_general(inputs: &CertInputs) -> Result<u64> {
    inputs.validate()?;
    let (pl, ps) = inputs.exact_bounds()?;
    certified_size_general_exact(inputs.n, inputs.k, &pl, &ps)
}

/// Exact ceiling of `n (1 - t) - 1` where `t^k = target`, given the predicate
/// `z <= q  <=>  n-1-q <= 0  or  ((n-1-q)/n)^k <= target`.
fn ceil_shrinking_root(n: u64, k: u32, target: &BigRational, guess: f64) -> u64 {
    let nk = bigint_pow(n, k);
    let target_num = target.numer();
    let target_den = target.denom();
    // z <= q ?
    let reached = |q: i64| -> bool {
        let remaining = n as i64 - 1 - q;
        if remaining <= 0 {
            return true;
        }
        bigint_pow(remaining as u64, k) * target_den <= target_num * &nk
    };
    let mut q = guess.max(-1.0).min(n as f64) as i64 - 2;
    if q < -1 {
        q = -1;
    }
    while !reached(q) {
        q += 1;
    }
    while q > -1 && reached(q - 1) {
        q -= 1;
    }
    q.max(0) as u64
}

/// Exact ceiling of `n (u - 1) - 1` where `u^k = target >= 1`, via
/// `z <= q  <=>  target <= ((n+1+q)/n)^k`.
fn ceil_growing_root(n: u64, k: u32, target: &BigRational, guess: f64) -> u64 {
    let nk = bigint_pow(n, k);
    let target_num = target.numer();
    let target_den = target.denom();
    let reached = |q: i64| -> bool {
        let reach = n as i64 + 1 + q;
        debug_assert!(reach >= 0);
        target_num * &nk <= bigint_pow(reach as u64, k) * target_den
    };
    let mut q = guess.max(-1.0).min(2.0 * n as f64) as i64 - 2;
    if q < -1 {
        q = -1;
    }
    while !reached(q) {
        q += 1;
    }
    while q > -1 && reached(q - 1) {
        q -= 1;
    }
    q.max(0) as u64
}

/// Modification-only closed form
/// `r* = ceil(n (1 - (1 - gap/2)^(1/k)) - 1)`, clamped below at 0.
pub fn closed_form_modify_exact(n: u64, k: u32, adjusted_gap: &BigRational) -> u64 {
    if !adjusted_gap.is_positive() {
        return 0;
    }
    let target = BigRational::one() - adjusted_gap / BigInt::from(2);
    let g = adjusted_gap.to_f64().unwrap_or(0.0);
    let guess = n as f64 * (1.0 - (1.0 - g / 2.0).powf(1.0 / k as f64)) - 1.0;
    ceil_shrinking_root(n, k, &target, guess.ceil())
}

/// Deletion-only closed form `r* = ceil(n (1 - (1 - gap)^(1/k)) - 1)`.
pub fn closed_form_delete_exact(n: u64, k: u32, adjusted_gap: &BigRational) -> u64 {
    if !adjusted_gap.is_positive() {
        return 0;
    }
    let target = BigRational::one() - adjusted_gap;
    let g = adjusted_gap.to_f64().unwrap_or(0.0);
    let guess = n as f64 * (1.0 - (1.0 - g).max(0.0).powf(1.0 / k as f64)) - 1.0;
    ceil_shrinking_root(n, k, &target, guess.ceil())
}

/// Insertion-only closed form `r* = ceil(n ((1 + gap)^(1/k) - 1) - 1)`.
pub fn closed_form_insert_exact(n: u64, k: u32, adjusted_gap: &BigRational) -> u64 {
    if !adjusted_gap.is_positive() {
        return 0;
    }
    let target = BigRational::one() + adjusted_gap;
    let g = adjusted_gap.to_f64().unwrap_or(0.0);
    let guess = n as f64 * ((1.0 + g).powf(1.0 / k as f64) - 1.0) - 1.0;
    ceil_growing_root(n, k, &target, guess.ceil())
}

fn with_exact_gap(inputs: &CertInputs, f: impl FnOnce(u64, u32, &BigRational) -> u64) -> Result<u64> {
    inputs.validate()?;
    let (pl, ps) = inputs.exact_bounds()?;
    let gap = adjusted_gap_exact(&pl, &ps, inputs.n, inputs.k);
    Ok(f(inputs.n, inputs.k, &gap))
}

pub fn closed_form_modify(inputs: &CertInputs) -> Result<u64> {
    with_exact_gap(inputs, closed_form_modify_exact)
}

pub fn closed_form_delete(inputs: &CertInputs) -> Result<u64> {
    with_exact_gap(inputs, closed_form_delete_exact)
}

pub fn closed_form_insert(inputs: &CertInputs) -> Result<u64> {
    with_exact_gap(inputs, closed_form_insert_exact)
}

/// Certified poisoning size under the chosen attack model.
pub fn certified_size(inputs: &CertInputs, attack: AttackModel) -> Result<u64> {
    match attack {
        AttackModel::General => certified_size_general(inputs),
        AttackModel::Modify => closed_form_modify(inputs),
        AttackModel::Delete => closed_form_delete(inputs),
        AttackModel::Insert => closed_form_insert(inputs),
    }
}

/// Certification result for one test example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub id: usize,
    /// Predicted label, or `None` for ABSTAIN.
    pub label: Option<usize>,
    pub p_lower: f64,
    pub p_upper_runner: f64,
    pub r_general: Option<u64>,
    pub r_modify: Option<u64>,
    pub r_delete: Option<u64>,
    pub r_insert: Option<u64>,
}

impl Certificate {
    pub fn abstained(&self) -> bool {
        self.label.is_none()
    }

    pub fn radius(&self, attack: AttackModel) -> Option<u64> {
        match attack {
            AttackModel::General => self.r_general,
            AttackModel::Modify => self.r_modify,
            AttackModel::Delete => self.r_delete,
            AttackModel::Insert => self.r_insert,
        }
    }
}

fn certify_one(
    record_id: usize,
    counts: &[u64],
    votes: &VoteTable,
    alpha_effective: f64,
    attacks: &[AttackModel],
) -> Result<Certificate> {
    let bounds = simuem(counts, votes.num_classifiers, alpha_effective)?;
    let mut cert = Certificate {
        id: record_id,
        label: None,
        p_lower: bounds.p_lower,
        p_upper_runner: bounds.p_upper_runner,
        r_general: None,
        r_modify: None,
        r_delete: None,
        r_insert: None,
    };
    if bounds.abstain {
        return Ok(cert);
    }
    cert.label = Some(bounds.top_label);
    let inputs = CertInputs {
        n: votes.n as u64,
        k: votes.k as u32,
        p_lower: bounds.p_lower,
        p_upper_runner: bounds.p_upper_runner,
    };
    for &attack in attacks {
        let r = certified_size(&inputs, attack)?;
        match attack {
            AttackModel::General => cert.r_general = Some(r),
            AttackModel::Modify => cert.r_modify = Some(r),
            AttackModel::Delete => cert.r_delete = Some(r),
            AttackModel::Insert => cert.r_insert = Some(r),
        }
    }
    Ok(cert)
}

/// Shared validation; returns the per-example budget `alpha / e`.
fn check_certify_inputs(votes: &VoteTable, alpha: f64, attacks: &[AttackModel]) -> Result<f64> {
    votes.validate()?;
    if votes.c < 2 {
        return Err(Error::Validation("need at least 2 labels to certify".into()));
    }
    if votes.examples.is_empty() {
        return Err(Error::Validation("votes table has no examples".into()));
    }
    if attacks.is_empty() {
        return Err(Error::Validation("no attack models requested".into()));
    }
    bonferroni_alpha(alpha, votes.examples.len())
}

/// Runs SimuEM and the certifier on every vote row, splitting `alpha` across
/// the test examples so the certificates hold simultaneously at level
/// `1 - alpha`: the probability that any non-abstaining certificate overstates
/// its radius is at most `alpha`.
///
/// Examples are processed on the rayon pool when the `parallel` feature is
/// enabled; output order follows the vote rows either way.
pub fn certify_all(votes: &VoteTable, alpha: f64, attacks: &[AttackModel]) -> Result<Vec<Certificate>> {
    #[cfg(feature = "parallel")]
    {
        let alpha_effective = check_certify_inputs(votes, alpha, attacks)?;
        votes
            .examples
            .par_iter()
            .map(|rec| certify_one(rec.id, &rec.counts, votes, alpha_effective, attacks))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        certify_all_serial(votes, alpha, attacks)
    }
}

/// Single-threaded certification; the fallback behind the `parallel` flag.
pub fn certify_all_serial(
    votes: &VoteTable,
    alpha: f64,
    attacks: &[AttackModel],
) -> Result<Vec<Certificate>> {
    let alpha_effective = check_certify_inputs(votes, alpha, attacks)?;
    votes
        .examples
        .iter()
        .map(|rec| certify_one(rec.id, &rec.counts, votes, alpha_effective, attacks))
        .collect()
}

/// Fraction of examples predicted correctly with certified size at least `r`
/// under `attack`; abstentions count as incorrect.
pub fn certified_accuracy(
    certificates: &[Certificate],
    truth: &[usize],
    r: u64,
    attack: AttackModel,
) -> Result<f64> {
    if certificates.len() != truth.len() {
        return Err(Error::Validation(format!(
            "{} certificates but {} ground-truth labels",
            certificates.len(),
            truth.len()
        )));
    }
    if certificates.is_empty() {
        return Err(Error::Validation("no certificates to score".into()));
    }
    let mut hits = 0usize;
    for (cert, &label) in certificates.iter().zip(truth) {
        if cert.label != Some(label) {
            continue;
        }
        let radius = cert.radius(attack).ok_or_else(|| {
            Error::Validation(format!(
                "certificate {} has no {} radius",
                cert.id,
                attack.name()
            ))
        })?;
        if radius >= r {
            hits += 1;
        }
    }
    Ok(hits as f64 / certificates.len() as f64)
}

const CERT_HEADER: [&str; 9] = [
    "id",
    "predicted_label",
    "abstain",
    "p_lower",
    "p_upper_runner",
    "r_general",
    "r_modify",
    "r_delete",
    "r_insert",
];
const ABSTAIN: &str = "ABSTAIN";

/// Writes certificates as CSV. ABSTAIN rows carry the literal `ABSTAIN` in
/// the label and radius columns; radii that were not requested stay empty.
pub fn write_certificates_csv(certificates: &[Certificate], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let fail = |e: csv::Error| Error::Format(format!("cannot write certificates: {e}"));
    writer.write_record(CERT_HEADER).map_err(fail)?;
    for cert in certificates {
        let radius_cell = |r: Option<u64>| match (cert.abstained(), r) {
            (true, _) => ABSTAIN.to_string(),
            (false, Some(v)) => v.to_string(),
            (false, None) => String::new(),
        };
        writer
            .write_record([
                cert.id.to_string(),
                cert.label.map_or(ABSTAIN.to_string(), |l| l.to_string()),
                cert.abstained().to_string(),
                cert.p_lower.to_string(),
                cert.p_upper_runner.to_string(),
                radius_cell(cert.r_general),
                radius_cell(cert.r_modify),
                radius_cell(cert.r_delete),
                radius_cell(cert.r_insert),
            ])
            .map_err(fail)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_certificates_csv(path: &Path) -> Result<Vec<Certificate>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("cannot read certificate header: {e}")))?;
    if headers.iter().ne(CERT_HEADER) {
        return Err(Error::Format(format!(
            "unexpected certificate columns: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut certificates = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let parse_err = |msg: String| Error::Parse { line, msg };
        let id: usize = field(0)
            .parse()
            .map_err(|_| parse_err(format!("bad id `{}`", field(0))))?;
        let label = match field(1) {
            ABSTAIN => None,
            s => Some(s.parse::<usize>().map_err(|_| parse_err(format!("bad label `{s}`")))?),
        };
        let p_lower: f64 = field(3)
            .parse()
            .map_err(|_| parse_err(format!("bad p_lower `{}`", field(3))))?;
        let p_upper_runner: f64 = field(4)
            .parse()
            .map_err(|_| parse_err(format!("bad p_upper_runner `{}`", field(4))))?;
        let radius = |i: usize| -> Result<Option<u64>> {
            match field(i) {
                "" | ABSTAIN => Ok(None),
                s => s
                    .parse::<u64>()
                    .map(Some)
                    .map_err(|_| parse_err(format!("bad radius `{s}`"))),
            }
        };
        certificates.push(Certificate {
            id,
            label,
            p_lower,
            p_upper_runner,
            r_general: radius(5)?,
            r_modify: radius(6)?,
            r_delete: radius(7)?,
            r_insert: radius(8)?,
        });
    }
    Ok(certificates)
}

/// Writes the certified-accuracy curve `r,certified_accuracy` for
/// `r = 0..=r_max`.
pub fn write_curve_csv(
    certificates: &[Certificate],
    truth: &[usize],
    r_max: u64,
    attack: AttackModel,
    path: &Path,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut emit = |s: String| out.write_all(s.as_bytes()).map_err(|e| Error::io(path, e));
    emit("r,certified_accuracy\n".into())?;
    for r in 0..=r_max {
        let ca = certified_accuracy(certificates, truth, r, attack)?;
        emit(format!("{r},{ca}\n"))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
