//! Exhaustive tiny-scale verification.
//!
//! At toy sizes the `n^k` ordered subsamples can be enumerated outright, which
//! turns the probabilistic statements into exact rational arithmetic: label
//! probabilities by full enumeration, soundness by re-predicting on every
//! poisoned dataset within the certified radius, and tightness by explicitly
//! constructing the adversarial learner that defeats any radius beyond it.
//!
//! Everything here is single-threaded by contract and budgeted: enumeration
//! refuses to start when the state count exceeds the caller's budget.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::certifier::{bigint_pow, certified_size_general_exact};
use crate::dataset::{Dataset, Example, Subsample};
use crate::error::{Error, Result};
use crate::learners::{fit, BaseLearnerSpec};

/// Default enumeration budget: total ordered tuples an operation may visit.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

fn checked_pow(base: u64, k: u32) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..k {
        acc = acc.checked_mul(base as u128)?;
    }
    Some(acc)
}

fn space_within_budget(base: u64, k: u32, budget: u64) -> Result<u64> {
    match checked_pow(base, k) {
        Some(size) if size <= budget as u128 => Ok(size as u64),
        Some(size) => Err(Error::BudgetExceeded { needed: size, budget: budget as u128 }),
        None => Err(Error::BudgetExceeded { needed: u128::MAX, budget: budget as u128 }),
    }
}

/// Exact label probabilities: each `p_j` is an integer multiple of `1/n^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub p: Vec<BigRational>,
}

impl ExactDistribution {
    /// Label with the largest probability, smallest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, v) in self.p.iter().enumerate().skip(1) {
            if v > &self.p[best] {
                best = j;
            }
        }
        best
    }

    /// True when another label matches the maximum probability exactly.
    pub fn has_tied_max(&self) -> bool {
        let best = self.argmax();
        self.p
            .iter()
            .enumerate()
            .any(|(j, v)| j != best && v == &self.p[best])
    }

    /// Probability of the largest non-top label.
    pub fn runner_up_probability(&self) -> BigRational {
        let best = self.argmax();
        self.p
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != best)
            .map(|(_, v)| v.clone())
            .max()
            .unwrap_or_else(BigRational::zero)
    }
}

/// Enumerates all `n^k` ordered subsamples, trains on each, and tallies the
/// predictions into exact label probabilities.
pub fn exact_label_probabilities(
    dataset: &Dataset,
    spec: &BaseLearnerSpec,
    k: u32,
    x: &[f64],
    budget: u64,
) -> Result<ExactDistribution> {
    if k == 0 {
        return Err(Error::Validation("subsample size k must be at least 1".into()));
    }
    if !spec.kind.is_deterministic() {
        return Err(Error::Validation(
            "exact enumeration supports deterministic learners only".into(),
        ));
    }
    let n = dataset.len();
    space_within_budget(n as u64, k, budget)?;

    let mut counts = vec![0u64; dataset.label_count()];
    let mut indices = vec![0usize; k as usize];
    'odometer: loop {
        let subsample = Subsample::from_indices(indices.clone(), n)?;
        let classifier = fit(spec, dataset, &subsample)?;
        counts[classifier.predict(x)?] += 1;

        let mut pos = indices.len();
        loop {
            if pos == 0 {
                break 'odometer;
            }
            pos -= 1;
            indices[pos] += 1;
            if indices[pos] < n {
                break;
            }
            indices[pos] = 0;
        }
    }

    let total = bigint_pow(n as u64, k);
    let p = counts
        .into_iter()
        .map(|c| BigRational::new(BigInt::from(c), total.clone()))
        .collect();
    Ok(ExactDistribution { p })
}

/// The label the full ensemble would predict: argmax of the exact label
/// probabilities, smallest index on ties.
pub fn exact_ensemble_prediction(
    dataset: &Dataset,
    spec: &BaseLearnerSpec,
    k: u32,
    x: &[f64],
    budget: u64,
) -> Result<usize> {
    Ok(exact_label_probabilities(dataset, spec, k, x, budget)?.argmax())
}

/// How ties in a two-label majority vote are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicy {
    SmallestLabel,
    LargestLabel,
}

/// Closed-form label probability for the majority-vote learner on a two-label
/// dataset: a binomial sum over subsample label counts, with the tie mass
/// assigned per policy. Independent of the enumeration path.
pub fn binomial_reference(
    dataset: &Dataset,
    k: u32,
    label: usize,
    tie: TiePolicy,
) -> Result<BigRational> {
    if dataset.label_count() != 2 {
        return Err(Error::Validation(format!(
            "binomial reference requires exactly 2 labels, got {}",
            dataset.label_count()
        )));
    }
    if label > 1 {
        return Err(Error::Validation(format!("label {label} out of range")));
    }
    if k == 0 {
        return Err(Error::Validation("subsample size k must be at least 1".into()));
    }
    let n = dataset.len() as u64;
    let ours = dataset.examples().iter().filter(|ex| ex.label == label).count() as u64;
    let theirs = n - ours;
    let tie_wins = match tie {
        TiePolicy::SmallestLabel => label == 0,
        TiePolicy::LargestLabel => label == 1,
    };

    let mut numerator = BigInt::zero();
    for t in 0..=k as u64 {
        let majority = 2 * t > k as u64;
        let tied = 2 * t == k as u64;
        if majority || (tied && tie_wins) {
            numerator += binomial(k as u64, t) * bigint_pow(ours, t as u32)
                * bigint_pow(theirs, k - t as u32);
        }
    }
    Ok(BigRational::new(numerator, bigint_pow(n, k)))
}

fn binomial(n: u64, t: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..t.min(n - t) {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// A finite set of distinct labeled examples the poisoner may draw from.
#[derive(Debug, Clone)]
pub struct ExampleUniverse {
    items: Vec<Example>,
    label_count: usize,
}

impl ExampleUniverse {
    /// All binary feature vectors of dimension `dim` crossed with all labels.
    pub fn binary(dim: usize, labels: usize) -> Result<Self> {
        if dim == 0 || dim > 16 {
            return Err(Error::Validation(format!("universe dimension {dim} out of range")));
        }
        if labels < 2 {
            return Err(Error::Validation("universe needs at least 2 labels".into()));
        }
        let mut items = Vec::new();
        for bits in 0..(1usize << dim) {
            let features: Vec<f64> = (0..dim)
                .map(|j| if bits >> j & 1 == 1 { 1.0 } else { 0.0 })
                .collect();
            for label in 0..labels {
                items.push(Example::new(features.clone(), label));
            }
        }
        Ok(ExampleUniverse { items, label_count: labels })
    }

    pub fn items(&self) -> &[Example] {
        &self.items
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn index_of(&self, example: &Example) -> Option<usize> {
        self.items.iter().position(|item| item == example)
    }

    /// Multiset counts over universe items representing a dataset.
    pub fn counts_of(&self, dataset: &Dataset) -> Result<Vec<usize>> {
        let mut counts = vec![0usize; self.items.len()];
        for (i, ex) in dataset.examples().iter().enumerate() {
            let idx = self.index_of(ex).ok_or_else(|| {
                Error::Validation(format!("dataset example {i} is not in the universe"))
            })?;
            counts[idx] += 1;
        }
        Ok(counts)
    }

    /// Builds the dataset with `counts[i]` copies of universe item `i`.
    pub fn dataset_from_counts(&self, counts: &[usize]) -> Result<Dataset> {
        if counts.len() != self.items.len() {
            return Err(Error::Validation("counts length does not match universe".into()));
        }
        let mut examples = Vec::new();
        for (item, &count) in self.items.iter().zip(counts) {
            for _ in 0..count {
                examples.push(item.clone());
            }
        }
        Dataset::new(examples, Some(self.label_count))
    }
}

/// A poisoned dataset that changed the exact prediction (or tied it).
#[derive(Debug, Clone, PartialEq)]
pub struct SoundnessViolation {
    /// Multiset counts over the universe items.
    pub universe_counts: Vec<usize>,
    pub n_prime: usize,
    pub predicted: usize,
    pub tie: bool,
}

/// Result of enumerating every poisoned dataset within a radius.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundnessReport {
    pub baseline_label: usize,
    pub radius: u64,
    pub datasets_checked: u64,
    pub tuples_enumerated: u64,
    pub violations: Vec<SoundnessViolation>,
}

impl SoundnessReport {
    /// Passes only when every poisoned dataset keeps the baseline label
    /// strictly on top (a tie counts as a violation).
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Enumerates every dataset reachable from `dataset` by at most `r` edits
/// over the universe (multiset distance, deduplicated by construction) and
/// re-derives the exact ensemble prediction on each.
pub fn verify_soundness(
    dataset: &Dataset,
    spec: &BaseLearnerSpec,
    k: u32,
    x: &[f64],
    r: u64,
    universe: &ExampleUniverse,
    budget: u64,
) -> Result<SoundnessReport> {
    let baseline = exact_label_probabilities(dataset, spec, k, x, budget)?;
    if baseline.has_tied_max() {
        return Err(Error::Validation(
            "baseline prediction is tied; certification abstains".into(),
        ));
    }
    let baseline_label = baseline.argmax();
    let n = dataset.len();
    let d_counts = universe.counts_of(dataset)?;

    let mut tuples_used = checked_pow(n as u64, k).unwrap_or(u128::MAX) as u64;
    let mut checked = 0u64;
    let mut violations = Vec::new();

    for_each_counts_within(&d_counts, n, r as usize, &mut |counts, n_prime| {
        let space = match checked_pow(n_prime as u64, k) {
            Some(s) => s,
            None => {
                return Err(Error::BudgetExceeded { needed: u128::MAX, budget: budget as u128 })
            }
        };
        if tuples_used as u128 + space > budget as u128 {
            return Err(Error::BudgetExceeded {
                needed: tuples_used as u128 + space,
                budget: budget as u128,
            });
        }
        tuples_used += space as u64;
        checked += 1;

        let poisoned = universe.dataset_from_counts(counts)?;
        let dist = exact_label_probabilities(&poisoned, spec, k, x, budget)?;
        let predicted = dist.argmax();
        let tie = dist.has_tied_max();
        if predicted != baseline_label || tie {
            violations.push(SoundnessViolation {
                universe_counts: counts.to_vec(),
                n_prime,
                predicted,
                tie,
            });
        }
        Ok(())
    })?;

    Ok(SoundnessReport {
        baseline_label,
        radius: r,
        datasets_checked: checked,
        tuples_enumerated: tuples_used,
        violations,
    })
}

/// Visits every multiset-count vector within edit distance `r` of `d`
/// (non-empty, at most `n + r` elements). Distance is
/// `max(n, n') - sum_i min(d_i, d'_i)`.
fn for_each_counts_within(
    d: &[usize],
    n: usize,
    r: usize,
    visit: &mut impl FnMut(&[usize], usize) -> Result<()>,
) -> Result<()> {
    let cells = d.len();
    // suffix sums of d for pruning
    let mut suffix = vec![0usize; cells + 1];
    for i in (0..cells).rev() {
        suffix[i] = suffix[i + 1] + d[i];
    }
    let mut current = vec![0usize; cells];

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        d: &[usize],
        suffix: &[usize],
        current: &mut Vec<usize>,
        i: usize,
        sum: usize,
        common: usize,
        n: usize,
        r: usize,
        visit: &mut impl FnMut(&[usize], usize) -> Result<()>,
    ) -> Result<()> {
        if i == d.len() {
            if sum == 0 {
                return Ok(());
            }
            let dist = n.max(sum) - common;
            if dist <= r {
                visit(current, sum)?;
            }
            return Ok(());
        }
        // even a perfect match on the remaining cells cannot close the gap
        let best_common = common + suffix[i];
        if n > best_common + r || sum > best_common + r {
            return Ok(());
        }
        for v in 0..=(n + r - sum) {
            current[i] = v;
            recurse(d, suffix, current, i + 1, sum + v, common + v.min(d[i]), n, r, visit)?;
        }
        current[i] = 0;
        Ok(())
    }

    recurse(d, &suffix, &mut current, 0, 0, 0, n, r, visit)
}

/// The subsample space of an original/poisoned dataset pair, split into the
/// tuples drawn only from the original (`b`), only from the poisoned set
/// (`c`), and entirely from the shared part (`e`). Tuples mixing
/// original-only and poisoned-only items have probability zero under both
/// samplers and are outside the space.
#[derive(Debug, Clone)]
pub struct RegionPartition {
    pub n: u64,
    pub n_prime: u64,
    /// Size of the shared part `max(n, n') - r`.
    pub shared: u64,
    pub k: u32,
    /// Distinct items across both datasets.
    pub universe_size: u64,
    /// Tuple codes (base `universe_size` digit strings) per region.
    pub b: Vec<u64>,
    pub c: Vec<u64>,
    pub e: Vec<u64>,
}

impl RegionPartition {
    /// Enumerates and classifies the joint subsample space for a pair at
    /// sizes `n`, `n_prime` sharing exactly `max(n, n') - r` items.
    pub fn build(n: u64, n_prime: u64, r: u64, k: u32, budget: u64) -> Result<Self> {
        if n == 0 || n_prime == 0 || k == 0 {
            return Err(Error::Validation("n, n' and k must be at least 1".into()));
        }
        let largest = n.max(n_prime);
        if largest < r {
            return Err(Error::Validation(format!(
                "shared size max(n, n') - r would be negative ({largest} < {r})"
            )));
        }
        let shared = largest - r;
        if n_prime < shared {
            return Err(Error::Validation(format!(
                "n' = {n_prime} smaller than the shared part {shared}"
            )));
        }
        let fresh = n_prime - shared; // items only in the poisoned set
        let universe_size = n + fresh;
        let space = space_within_budget(universe_size, k, budget)?;

        // item ids: [0, shared) shared, [shared, n) original-only,
        // [n, n + fresh) poisoned-only
        let mut b = Vec::new();
        let mut c = Vec::new();
        let mut e = Vec::new();
        for code in 0..space {
            let mut has_original_only = false;
            let mut has_poisoned_only = false;
            let mut rest = code;
            for _ in 0..k {
                let item = rest % universe_size;
                rest /= universe_size;
                if item >= n {
                    has_poisoned_only = true;
                } else if item >= shared {
                    has_original_only = true;
                }
            }
            match (has_original_only, has_poisoned_only) {
                (false, false) => e.push(code),
                (true, false) => b.push(code),
                (false, true) => c.push(code),
                (true, true) => {} // zero measure under both samplers
            }
        }
        Ok(RegionPartition { n, n_prime, shared, k, universe_size, b, c, e })
    }

    pub fn omega_size(&self) -> usize {
        self.b.len() + self.c.len() + self.e.len()
    }

    /// Probability that a uniform size-`k` sample of the original dataset
    /// lands in a region of `count` tuples drawn from it.
    pub fn pr_x(&self, count: usize) -> BigRational {
        BigRational::new(BigInt::from(count), bigint_pow(self.n, self.k))
    }

    pub fn pr_y(&self, count: usize) -> BigRational {
        BigRational::new(BigInt::from(count), bigint_pow(self.n_prime, self.k))
    }

    /// True when the tuple is a sample of the poisoned dataset.
    fn code_in_poisoned(&self, code: u64) -> bool {
        let mut rest = code;
        for _ in 0..self.k {
            let item = rest % self.universe_size;
            rest /= self.universe_size;
            if item >= self.shared && item < self.n {
                return false;
            }
        }
        true
    }

    /// True when the tuple is a sample of the original dataset.
    fn code_in_original(&self, code: u64) -> bool {
        let mut rest = code;
        for _ in 0..self.k {
            let item = rest % self.universe_size;
            rest /= self.universe_size;
            if item >= self.n {
                return false;
            }
        }
        true
    }
}

/// The constructed adversarial assignment and its exact measures.
#[derive(Debug, Clone)]
pub struct TightnessWitness {
    pub n_prime: u64,
    /// Probability the adversarial learner keeps the certified label under
    /// the poisoned sampler.
    pub pr_y_top: BigRational,
    /// Probability it outputs the runner-up label instead.
    pub pr_y_runner: BigRational,
    /// Exact top-label probability under the original sampler (must equal
    /// the lower bound used for certification).
    pub pr_x_top: BigRational,
    /// Largest non-top label probability under the original sampler.
    pub max_pr_x_other: BigRational,
}

impl TightnessWitness {
    /// The adversarial learner defeats the certificate when the runner-up's
    /// poisoned probability at least matches the top label's.
    pub fn defeats_certificate(&self) -> bool {
        self.pr_y_top <= self.pr_y_runner
    }
}

/// Outcome of a tightness probe at radius `r`.
#[derive(Debug, Clone)]
pub struct WitnessReport {
    pub r_star: u64,
    pub requested_r: u64,
    pub witness: Option<TightnessWitness>,
    /// Why no witness was constructed, when `witness` is empty.
    pub note: String,
}

/// For `r` beyond the certified size (and bounds that sit exactly on the
/// `1/n^k` grid so both residuals vanish), constructs a poisoned dataset size
/// and a learner consistent with the bounds whose majority flips or ties.
///
/// Requires `p_lower + p_upper <= 1` and `p_lower + (c-1) p_upper >= 1` so the
/// non-top mass can be spread without exceeding the runner-up bound anywhere.
pub fn tightness_witness(
    n: u64,
    k: u32,
    c: usize,
    p_lower: &BigRational,
    p_upper: &BigRational,
    r: u64,
    budget: u64,
) -> Result<WitnessReport> {
    if n == 0 || k == 0 {
        return Err(Error::Validation("n and k must be at least 1".into()));
    }
    if c < 2 {
        return Err(Error::Validation("need at least 2 labels".into()));
    }
    if r > n {
        return Err(Error::Validation(format!("radius {r} exceeds n = {n}")));
    }
    if p_lower.is_negative() || p_upper.is_negative() || p_lower > &BigRational::one() {
        return Err(Error::Validation("bounds must lie in [0, 1]".into()));
    }
    if p_lower < p_upper {
        return Err(Error::Validation("top bound below runner-up bound".into()));
    }
    if p_lower + p_upper > BigRational::one() {
        return Err(Error::Validation("bounds must satisfy p_lower + p_upper <= 1".into()));
    }
    let spread = p_lower + BigRational::from_integer(BigInt::from(c as u64 - 1)) * p_upper;
    if spread < BigRational::one() {
        return Err(Error::Validation(
            "bounds must satisfy p_lower + (c-1) p_upper >= 1".into(),
        ));
    }
    let nk_rat = BigRational::from_integer(bigint_pow(n, k));
    let top_mass = (p_lower * &nk_rat).to_integer();
    let runner_mass = (p_upper * &nk_rat).to_integer();
    if &BigRational::new(top_mass.clone(), bigint_pow(n, k)) != p_lower
        || &BigRational::new(runner_mass.clone(), bigint_pow(n, k)) != p_upper
    {
        return Err(Error::Validation(
            "bounds must be integer multiples of 1/n^k (zero residuals)".into(),
        ));
    }

    let r_star = certified_size_general_exact(n, k, p_lower, p_upper)?;
    if r <= r_star {
        return Ok(WitnessReport {
            r_star,
            requested_r: r,
            witness: None,
            note: format!("r = {r} does not exceed the certified size {r_star}"),
        });
    }

    // Most violating poisoned size: argmax of the constraint value with zero
    // residuals, ties to the smallest n'.
    let gap = p_lower - p_upper;
    let mut best: Option<(u64, BigRational)> = None;
    for n_prime in n.saturating_sub(r).max(1)..=n + r {
        let m = n.max(n_prime) - r;
        let value = BigRational::new(
            bigint_pow(n_prime, k) - BigInt::from(2) * bigint_pow(m, k),
            bigint_pow(n, k),
        ) + BigRational::one()
            - &gap;
        if !value.is_negative() && best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((n_prime, value));
        }
    }
    let Some((n_prime, _)) = best else {
        return Ok(WitnessReport {
            r_star,
            requested_r: r,
            witness: None,
            note: "no poisoned size violates the certification constraint".into(),
        });
    };

    let partition = RegionPartition::build(n, n_prime, r, k, budget)?;
    let top_count = top_mass
        .to_u64()
        .ok_or_else(|| Error::Validation("top mass too large".into()))? as usize;
    let runner_count = runner_mass
        .to_u64()
        .ok_or_else(|| Error::Validation("runner mass too large".into()))? as usize;

    // Assign the top label to a region of exactly `top_count` tuples of the
    // original sampler: all of `b` padded from `e`, or a prefix of `b` when
    // the bound is smaller than the original-only region. The leftover
    // positive-mass tuples form the pool for the other labels.
    let (top_region, pool): (Vec<u64>, Vec<u64>) = if top_count >= partition.b.len() {
        let from_e = top_count - partition.b.len();
        let region = partition.b.iter().chain(&partition.e[..from_e]).copied().collect();
        (region, partition.e[from_e..].to_vec())
    } else {
        let region = partition.b[..top_count].to_vec();
        let rest = partition.b[top_count..].iter().chain(&partition.e).copied().collect();
        (region, rest)
    };

    // Runner-up gets every poisoned-only tuple (zero mass under the original
    // sampler) plus up to `runner_count` pool tuples; the rest of the pool is
    // chunked over the remaining labels, each chunk within the runner bound.
    let runner_take = runner_count.min(pool.len());
    let mut regions: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut runner_region = partition.c.clone();
    runner_region.extend_from_slice(&pool[..runner_take]);
    regions.push((1, runner_region));
    let mut rest = &pool[runner_take..];
    let mut next_label = 2;
    while !rest.is_empty() {
        if next_label >= c || runner_count == 0 {
            return Err(Error::Validation(
                "cannot spread remaining mass within the runner-up bound".into(),
            ));
        }
        let take = runner_count.min(rest.len());
        regions.push((next_label, rest[..take].to_vec()));
        rest = &rest[take..];
        next_label += 1;
    }

    // Exact consistency of the constructed learner with the bounds. A
    // region's original-sampler mass counts only its tuples drawn from the
    // original dataset; poisoned-only tuples contribute nothing.
    debug_assert_eq!(top_region.len(), top_count);
    let x_count = |region: &[u64]| {
        region
            .iter()
            .filter(|&&code| partition.code_in_original(code))
            .count()
    };
    let pr_x_top = partition.pr_x(x_count(&top_region));
    let mut max_pr_x_other = BigRational::zero();
    for (_, region) in &regions {
        let mass = partition.pr_x(x_count(region));
        if mass > max_pr_x_other {
            max_pr_x_other = mass;
        }
    }
    if &pr_x_top != p_lower || &max_pr_x_other > p_upper {
        return Err(Error::Validation(
            "constructed learner is inconsistent with the bounds".into(),
        ));
    }

    let y_count = |region: &[u64]| {
        region
            .iter()
            .filter(|&&code| partition.code_in_poisoned(code))
            .count()
    };
    let pr_y_top = partition.pr_y(y_count(&top_region));
    let pr_y_runner = partition.pr_y(y_count(&regions[0].1));

    Ok(WitnessReport {
        r_star,
        requested_r: r,
        witness: Some(TightnessWitness {
            n_prime,
            pr_y_top,
            pr_y_runner,
            pr_x_top,
            max_pr_x_other,
        }),
        note: String::new(),
    })
}
