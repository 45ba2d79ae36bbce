//! Monte Carlo vote collection: train `N` base classifiers on `N` independent
//! subsamples and tally their predictions per test example.
//!
//! Each classifier draws its subsample from a seed derived from the master
//! seed by a counter-based split, so the vote table is identical no matter how
//! the `N` training tasks are scheduled. With the `parallel` feature (default)
//! the tasks run on the rayon pool; [`train_votes_serial`] is the
//! single-threaded fallback and always produces the same table.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{draw_subsample, Dataset};
use crate::error::{Error, Result};
use crate::learners::{fit, BaseLearnerSpec};

/// Vote counts for one test example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub id: usize,
    pub counts: Vec<u64>,
}

/// Per-example vote counts over `c` labels from `N` trained base classifiers,
/// with the metadata needed to certify them later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteTable {
    /// Training set size.
    pub n: usize,
    /// Subsample size.
    pub k: usize,
    /// Number of base classifiers.
    #[serde(rename = "N")]
    pub num_classifiers: usize,
    /// Label-space size.
    pub c: usize,
    /// Master seed the per-classifier seeds were split from.
    pub seed: u64,
    pub learner: BaseLearnerSpec,
    pub examples: Vec<VoteRecord>,
}

impl VoteTable {
    /// Checks the persisted-file invariants: per-example counts over exactly
    /// `c` labels summing to `N`, ids in order.
    pub fn validate(&self) -> Result<()> {
        if self.num_classifiers == 0 || self.k == 0 || self.n == 0 {
            return Err(Error::Validation("n, k and N must all be at least 1".into()));
        }
        for (pos, record) in self.examples.iter().enumerate() {
            if record.id != pos {
                return Err(Error::Validation(format!(
                    "vote record at position {pos} has id {}",
                    record.id
                )));
            }
            if record.counts.len() != self.c {
                return Err(Error::Validation(format!(
                    "example {pos} has {} counts, expected c = {}",
                    record.counts.len(),
                    self.c
                )));
            }
            let total: u64 = record.counts.iter().sum();
            if total != self.num_classifiers as u64 {
                return Err(Error::Validation(format!(
                    "example {pos} counts sum to {total}, expected N = {}",
                    self.num_classifiers
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self)
            .map_err(|e| Error::Format(format!("cannot serialize votes: {e}")))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let table: VoteTable = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        table.validate()?;
        Ok(table)
    }
}

/// Derives the subsample seed for classifier `index` from the master seed.
///
/// SplitMix64 with the golden-ratio increment: a counter-based split, so any
/// classifier's seed can be computed independently of the others.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_train_inputs(
    dataset: &Dataset,
    spec: &BaseLearnerSpec,
    k: usize,
    num_classifiers: usize,
    testset: &Dataset,
) -> Result<()> {
    if num_classifiers == 0 {
        return Err(Error::Validation("number of classifiers N must be at least 1".into()));
    }
    if k == 0 {
        return Err(Error::Validation("subsample size k must be at least 1".into()));
    }
    spec.validate()?;
    // The majority learner never looks at features; everything else does.
    if spec.kind != crate::learners::LearnerKind::Majority && testset.dim() != dataset.dim() {
        return Err(Error::Validation(format!(
            "test set dimension {} does not match training dimension {}",
            testset.dim(),
            dataset.dim()
        )));
    }
    Ok(())
}

/// One classifier's predictions over the whole test set.
fn classifier_predictions(
    dataset: &Dataset,
    spec: &BaseLearnerSpec,
    k: usize,
    seed: u64,
    testset: &Dataset,
) -> Result<Vec<usize>> {
    let subsample = draw_subsample(dataset, k, seed)?;
    let classifier = fit(spec, dataset, &subsample)?;
    testset
        .examples()
        .iter()
        .map(|ex| classifier.predict(&ex.features))
        .collect()
}

fn accumulate(counts: &mut [Vec<u64>], predictions: &[usize]) {
    for (row, &label) in counts.iter_mut().zip(predictions) {
        row[label] += 1;
    }
}

fn table_from_counts(
    dataset: &Dataset,
    spec: &BaseLearnerSpec,
    k: usize,
    num_classifiers: usize,
    master_seed: u64,
    counts: Vec<Vec<u64>>,
) -> VoteTable {
    VoteTable {
        n: dataset.len(),
        k,
        num_classifiers,
        c: dataset.label_count(),
        seed: master_seed,
        learner: spec.clone(),
        examples: counts
            .into_iter()
            .enumerate()
            .map(|(id, counts)| VoteRecord { id, counts })
            .collect(),
    }
}

/// Trains `N` classifiers and tallies votes, one count row per test example.
///
/// Runs on the rayon pool when the `parallel` feature is enabled; the output
/// is independent of scheduling and bit-identical to [`train_votes_serial`].
pub fn train_votes(
    dataset: &Dataset,
    spec: &BaseLearnerSpec,
    k: usize,
    num_classifiers: usize,
    master_seed: u64,
    testset: &Dataset,
) -> Result<VoteTable> {
    #[cfg(feature = "parallel")]
    {
        check_train_inputs(dataset, spec, k, num_classifiers, testset)?;
        let c = dataset.label_count();
        let e = testset.len();
        let counts = (0..num_classifiers as u64)
            .into_par_iter()
            .map(|o| classifier_predictions(dataset, spec, k, split_seed(master_seed, o), testset))
            .try_fold(
                || vec![vec![0u64; c]; e],
                |mut acc, predictions: Result<Vec<usize>>| {
                    accumulate(&mut acc, &predictions?);
                    Ok(acc)
                },
            )
            .try_reduce(
                || vec![vec![0u64; c]; e],
                |mut a, b| {
                    for (ra, rb) in a.iter_mut().zip(b) {
                        for (x, y) in ra.iter_mut().zip(rb) {
                            *x += y;
                        }
                    }
                    Ok(a)
                },
            )?;
        Ok(table_from_counts(dataset, spec, k, num_classifiers, master_seed, counts))
    }
    #[cfg(not(feature = "parallel"))]
    {
        train_votes_serial(dataset, spec, k, num_classifiers, master_seed, testset)
    }
}

/// Single-threaded vote collection; the fallback behind the `parallel` flag.
pub fn train_votes_serial(
    dataset: &Dataset,
    spec: &BaseLearnerSpec,
    k: usize,
    num_classifiers: usize,
    master_seed: u64,
    testset: &Dataset,
) -> Result<VoteTable> {
    check_train_inputs(dataset, spec, k, num_classifiers, testset)?;
    let c = dataset.label_count();
    let e = testset.len();
    let mut counts = vec![vec![0u64; c]; e];
    for o in 0..num_classifiers as u64 {
        let predictions =
            classifier_predictions(dataset, spec, k, split_seed(master_seed, o), testset)?;
        accumulate(&mut counts, &predictions);
    }
    Ok(table_from_counts(dataset, spec, k, num_classifiers, master_seed, counts))
}
