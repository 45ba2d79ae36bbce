//! Pluggable base learning algorithms: fit a classifier on a subsample,
//! predict labels for test examples.
//!
//! The certification math is learner-agnostic, so the built-ins are
//! deterministic desk-scale learners rather than neural networks. Fitting
//! canonicalizes the subsample by sorting its indices, which makes the fitted
//! state an exact function of the selected multiset (floating-point sums do
//! not depend on draw order).

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Subsample};
use crate::error::{Error, Result};

/// Which base learning algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    /// Predicts the most common label of the subsample, ignoring the input.
    /// Exists to admit closed-form label probabilities for oracle checks.
    Majority,
    /// Nearest class centroid under Euclidean distance.
    Centroid,
    /// Multinomial naive Bayes with additive smoothing.
    Nb,
}

impl LearnerKind {
    /// All built-in learners are pure functions of the subsample multiset.
    pub fn is_deterministic(self) -> bool {
        true
    }

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Majority => "majority",
            LearnerKind::Centroid => "centroid",
            LearnerKind::Nb => "nb",
        }
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "majority" => Ok(LearnerKind::Majority),
            "centroid" => Ok(LearnerKind::Centroid),
            "nb" => Ok(LearnerKind::Nb),
            other => Err(Error::Validation(format!(
                "unknown learner `{other}` (expected centroid, nb or majority)"
            ))),
        }
    }
}

/// Base learner selection plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseLearnerSpec {
    pub kind: LearnerKind,
    /// Additive smoothing for naive Bayes likelihoods; ignored otherwise.
    pub smoothing: f64,
    /// Seed for randomized learners; the built-ins ignore it.
    pub seed: Option<u64>,
}

impl BaseLearnerSpec {
    pub fn majority() -> Self {
        BaseLearnerSpec { kind: LearnerKind::Majority, smoothing: 0.0, seed: None }
    }

    pub fn centroid() -> Self {
        BaseLearnerSpec { kind: LearnerKind::Centroid, smoothing: 0.0, seed: None }
    }

    pub fn nb(smoothing: f64) -> Self {
        BaseLearnerSpec { kind: LearnerKind::Nb, smoothing, seed: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.smoothing.is_nan() || self.smoothing < 0.0 {
            return Err(Error::Validation(format!(
                "naive Bayes smoothing must be non-negative, got {}",
                self.smoothing
            )));
        }
        Ok(())
    }
}

/// Immutable fitted state; prediction is a pure function of `(state, input)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedClassifier {
    Majority {
        label: usize,
    },
    Centroid {
        /// `(label, centroid)` pairs sorted by label.
        centroids: Vec<(usize, Vec<f64>)>,
        dim: usize,
    },
    Nb {
        classes: Vec<NbClass>,
        dim: usize,
    },
}

/// Per-class naive Bayes tables: log prior and per-feature log likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct NbClass {
    pub label: usize,
    pub log_prior: f64,
    pub log_likelihood: Vec<f64>,
}

/// Trains a classifier on exactly the `k` multiset-selected examples.
pub fn fit(spec: &BaseLearnerSpec, dataset: &Dataset, subsample: &Subsample) -> Result<FittedClassifier> {
    spec.validate()?;
    let n = dataset.len();
    let c = dataset.label_count();
    if let Some(&bad) = subsample.indices().iter().find(|&&i| i >= n) {
        return Err(Error::Validation(format!(
            "subsample index {bad} out of range for dataset of size {n}"
        )));
    }
    // Canonical order: the fitted state depends only on the selected multiset.
    let mut selected: Vec<usize> = subsample.indices().to_vec();
    selected.sort_unstable();
    if let Some(&i) = selected.iter().find(|&&i| dataset.example(i).label >= c) {
        return Err(Error::Validation(format!(
            "subsampled example {i} has label {} >= c = {c}",
            dataset.example(i).label
        )));
    }

    match spec.kind {
        LearnerKind::Majority => {
            let mut counts = vec![0usize; c];
            for &i in &selected {
                counts[dataset.example(i).label] += 1;
            }
            let label = argmax_usize(&counts);
            Ok(FittedClassifier::Majority { label })
        }
        LearnerKind::Centroid => {
            let dim = dataset.dim();
            let mut sums: Vec<Option<(Vec<f64>, usize)>> = vec![None; c];
            for &i in &selected {
                let ex = dataset.example(i);
                let entry = sums[ex.label].get_or_insert_with(|| (vec![0.0; dim], 0));
                for (s, &f) in entry.0.iter_mut().zip(&ex.features) {
                    *s += f;
                }
                entry.1 += 1;
            }
            let centroids = sums
                .into_iter()
                .enumerate()
                .filter_map(|(label, slot)| {
                    slot.map(|(mut sum, count)| {
                        for s in &mut sum {
                            *s /= count as f64;
                        }
                        (label, sum)
                    })
                })
                .collect();
            Ok(FittedClassifier::Centroid { centroids, dim })
        }
        LearnerKind::Nb => {
            let dim = dataset.dim();
            if let Some(&i) = selected
                .iter()
                .find(|&&i| dataset.example(i).features.iter().any(|&f| f < 0.0))
            {
                return Err(Error::Validation(format!(
                    "multinomial naive Bayes requires non-negative features (example {i})"
                )));
            }
            let k = selected.len() as f64;
            let mut classes = Vec::new();
            for label in 0..c {
                let members: Vec<usize> = selected
                    .iter()
                    .copied()
                    .filter(|&i| dataset.example(i).label == label)
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let mut feature_sums = vec![0.0; dim];
                for &i in &members {
                    for (s, &f) in feature_sums.iter_mut().zip(&dataset.example(i).features) {
                        *s += f;
                    }
                }
                let total: f64 = feature_sums.iter().sum();
                let denom = total + spec.smoothing * dim as f64;
                let log_likelihood = feature_sums
                    .iter()
                    .map(|&s| {
                        if denom > 0.0 {
                            ((s + spec.smoothing) / denom).ln()
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect();
                classes.push(NbClass {
                    label,
                    log_prior: (members.len() as f64 / k).ln(),
                    log_likelihood,
                });
            }
            Ok(FittedClassifier::Nb { classes, dim })
        }
    }
}

impl FittedClassifier {
    /// Predicts a label in `[0, c)`; score ties break to the smallest label.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        match self {
            FittedClassifier::Majority { label } => Ok(*label),
            FittedClassifier::Centroid { centroids, dim } => {
                check_dim(x, *dim)?;
                let mut best = centroids[0].0;
                let mut best_dist = squared_distance(x, &centroids[0].1);
                for (label, centroid) in &centroids[1..] {
                    let dist = squared_distance(x, centroid);
                    if dist < best_dist {
                        best_dist = dist;
                        best = *label;
                    }
                }
                Ok(best)
            }
            FittedClassifier::Nb { classes, dim } => {
                check_dim(x, *dim)?;
                let mut best = classes[0].label;
                let mut best_score = nb_score(&classes[0], x);
                for class in &classes[1..] {
                    let score = nb_score(class, x);
                    if score > best_score {
                        best_score = score;
                        best = class.label;
                    }
                }
                Ok(best)
            }
        }
    }
}

fn check_dim(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Validation(format!(
            "input has {} features, classifier was trained on {dim}",
            x.len()
        )));
    }
    Ok(())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nb_score(class: &NbClass, x: &[f64]) -> f64 {
    let mut score = class.log_prior;
    for (&xi, &ll) in x.iter().zip(&class.log_likelihood) {
        // 0 * ln(0) counts as 0 so zero-probability features only veto
        // classes when the feature is actually present.
        if xi != 0.0 {
            score += xi * ll;
        }
    }
    score
}

fn argmax_usize(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in counts.iter().enumerate().skip(1) {
        if v > counts[best] {
            best = i;
        }
    }
    best
}
