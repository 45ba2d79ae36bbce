//! The default tiny-scale verification suite behind `bagcert oracle`.
//!
//! Three sections: exact enumeration against the closed-form binomial
//! reference, certified-radius soundness by enumerating every poisoned
//! dataset in the ball, and tightness witnesses one step beyond the radius.

use anyhow::Result;
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use bagcert_core::certifier::certified_size_general_exact;
use bagcert_core::dataset::{Dataset, Example};
use bagcert_core::learners::BaseLearnerSpec;
use bagcert_core::oracle::{
    binomial_reference, exact_label_probabilities, tightness_witness, verify_soundness,
    ExampleUniverse, TiePolicy,
};

#[derive(Debug, Serialize)]
pub struct SectionReport {
    pub name: String,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SectionReport {
    fn new(name: &str) -> Self {
        SectionReport { name: name.to_string(), checks: 0, failures: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub budget: u64,
    pub sections: Vec<SectionReport>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.sections.iter().all(SectionReport::passed)
    }
}

fn two_label_dataset(zeros: usize, ones: usize) -> Dataset {
    let examples = (0..zeros)
        .map(|_| Example::new(vec![0.0], 0))
        .chain((0..ones).map(|_| Example::new(vec![1.0], 1)))
        .collect();
    Dataset::new(examples, Some(2)).unwrap()
}

/// Exact enumeration must reproduce the binomial closed form for the
/// majority-vote learner on every two-label dataset up to n = 8, k = 5.
fn agreement_section(budget: u64) -> SectionReport {
    let mut section = SectionReport::new("exact enumeration vs binomial reference");
    let spec = BaseLearnerSpec::majority();
    for n in 2..=8usize {
        for zeros in 0..=n {
            let dataset = two_label_dataset(zeros, n - zeros);
            for k in 1..=5u32 {
                section.checks += 1;
                let enumerated =
                    match exact_label_probabilities(&dataset, &spec, k, &[0.0], budget) {
                        Ok(dist) => dist,
                        Err(e) => {
                            section.failures.push(format!("n={n} zeros={zeros} k={k}: {e}"));
                            continue;
                        }
                    };
                for label in 0..2usize {
                    let reference =
                        binomial_reference(&dataset, k, label, TiePolicy::SmallestLabel).unwrap();
                    if enumerated.p[label] != reference {
                        section.failures.push(format!(
                            "n={n} zeros={zeros} k={k} label={label}: enumeration {} != binomial {}",
                            enumerated.p[label], reference
                        ));
                    }
                }
            }
        }
    }
    section
}

/// Certify each tiny instance from its exact label probabilities, then check
/// that no dataset within the certified radius flips or ties the prediction.
fn soundness_section(budget: u64) -> SectionReport {
    let mut section = SectionReport::new("soundness within the certified radius");
    let universe = ExampleUniverse::binary(1, 2).unwrap();
    let spec = BaseLearnerSpec::majority();
    let x = [0.0];

    for n in 3..=6usize {
        for_each_counts_summing(universe.len(), n, &mut |counts| {
            let dataset = universe.dataset_from_counts(counts).unwrap();
            for k in 1..=3u32 {
                let exact = match exact_label_probabilities(&dataset, &spec, k, &x, budget) {
                    Ok(dist) => dist,
                    Err(e) => {
                        section.failures.push(format!("{counts:?} k={k}: {e}"));
                        continue;
                    }
                };
                if exact.has_tied_max() {
                    continue; // the pipeline abstains on ties
                }
                let top = exact.argmax();
                let p_lower = exact.p[top].clone();
                let p_upper = exact.runner_up_probability();
                let radius =
                    match certified_size_general_exact(n as u64, k, &p_lower, &p_upper) {
                        Ok(r) => r,
                        Err(e) => {
                            section.failures.push(format!("{counts:?} k={k}: {e}"));
                            continue;
                        }
                    };
                section.checks += 1;
                match verify_soundness(&dataset, &spec, k, &x, radius, &universe, budget) {
                    Ok(report) if report.passed() => {}
                    Ok(report) => {
                        let v = &report.violations[0];
                        section.failures.push(format!(
                            "{counts:?} k={k} r*={radius}: {} violations, e.g. counts {:?} -> {} (tie: {})",
                            report.violations.len(),
                            v.universe_counts,
                            v.predicted,
                            v.tie
                        ));
                    }
                    Err(e) => section.failures.push(format!("{counts:?} k={k}: {e}")),
                }
            }
        });
    }
    section
}

/// Beyond the certified radius an adversarial learner consistent with the
/// bounds must flip or tie the prediction; construct it and check the exact
/// measures for a battery of on-grid bound pairs.
fn tightness_section(budget: u64) -> SectionReport {
    let mut section = SectionReport::new("tightness witnesses beyond the radius");
    let mut configs: Vec<(u64, u32, usize, BigRational, BigRational)> = Vec::new();
    let rational = |num: u64, den: u64| {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    };

    // two labels: the assumptions force the bounds to the complementary pair
    for (n, k) in [(3u64, 2u32), (4, 2), (5, 2), (6, 2), (3, 3), (4, 3)] {
        let space = n.pow(k);
        let mut numerators = vec![space / 2 + 1, (3 * space) / 4, space - 1];
        numerators.dedup();
        for top in numerators {
            configs.push((n, k, 2, rational(top, space), rational(space - top, space)));
        }
    }
    // three labels: runner-up bound ranges between (1 - top)/2 and 1 - top
    for (n, k, top, runners) in [
        (4u64, 2u32, 10u64, vec![3u64, 4, 5, 6]),
        (4, 2, 8, vec![4, 5, 6, 7]),
        (5, 2, 15, vec![5, 6, 8, 10]),
    ] {
        let space = n.pow(k);
        for runner in runners {
            configs.push((n, k, 3, rational(top, space), rational(runner, space)));
        }
    }

    for (n, k, c, p_lower, p_upper) in configs {
        section.checks += 1;
        let label = format!("n={n} k={k} c={c} bounds {p_lower}/{p_upper}");
        let report = match tightness_witness(n, k, c, &p_lower, &p_upper, 0, budget) {
            Ok(r) => r,
            Err(e) => {
                section.failures.push(format!("{label}: {e}"));
                continue;
            }
        };
        let probe_r = report.r_star + 1;
        if probe_r > n {
            continue; // nothing to probe: the radius already spans the dataset
        }
        match tightness_witness(n, k, c, &p_lower, &p_upper, probe_r, budget) {
            Ok(report) => match report.witness {
                Some(witness) if witness.defeats_certificate() => {}
                Some(witness) => section.failures.push(format!(
                    "{label} r={probe_r}: witness does not defeat the certificate \
                     ({} > {})",
                    witness.pr_y_top, witness.pr_y_runner
                )),
                None => section
                    .failures
                    .push(format!("{label} r={probe_r}: no witness ({})", report.note)),
            },
            Err(e) => section.failures.push(format!("{label} r={probe_r}: {e}")),
        }
    }
    section
}

fn for_each_counts_summing(cells: usize, total: usize, visit: &mut impl FnMut(&[usize])) {
    fn recurse(
        counts: &mut Vec<usize>,
        cell: usize,
        cells: usize,
        remaining: usize,
        visit: &mut impl FnMut(&[usize]),
    ) {
        if cell == cells - 1 {
            counts[cell] = remaining;
            visit(counts);
            return;
        }
        for v in 0..=remaining {
            counts[cell] = v;
            recurse(counts, cell + 1, cells, remaining - v, visit);
        }
    }
    let mut counts = vec![0usize; cells];
    recurse(&mut counts, 0, cells, total, visit);
}

/// Runs the full suite. A zero budget yields an empty (passing) report.
pub fn run(budget: u64) -> Result<OracleReport> {
    let mut report = OracleReport { budget, sections: Vec::new() };
    if budget == 0 {
        return Ok(report);
    }
    report.sections.push(agreement_section(budget));
    report.sections.push(soundness_section(budget));
    report.sections.push(tightness_section(budget));
    Ok(report)
}
