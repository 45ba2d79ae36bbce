//! Provable robustness guarantees for bagging ensembles under training-data
//! poisoning.
//!
//! Train `N` base classifiers on size-`k` subsamples drawn with replacement,
//! tally their votes per test example, bound the top and runner-up label
//! probabilities simultaneously with Clopper-Pearson intervals, and solve an
//! exact discrete optimization for the certified poisoning size: the largest
//! number of training-set edits (modifications, deletions, insertions) that
//! provably cannot change the ensemble's prediction.
//!
//! Modules:
//! - [`dataset`]: data model, CSV/IDX ingestion, with-replacement subsampling
//! - [`learners`]: deterministic built-in base learners
//! - [`ensemble`]: Monte Carlo vote collection (rayon-parallel by default)
//! - [`bounds`]: simultaneous Clopper-Pearson bounds from vote counts
//! - [`certifier`]: exact-rational certification and certified accuracy
//! - [`oracle`]: exhaustive tiny-scale soundness and tightness verification

pub mod bounds;
pub mod certifier;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod learners;
pub mod oracle;

pub use bounds::{beta_quantile, bonferroni_alpha, simuem, ProbabilityBounds};
pub use certifier::{
    certified_accuracy, certified_size, certify_all, AttackModel, CertInputs, Certificate,
    ALL_ATTACKS,
};
pub use dataset::{draw_subsample, load_csv, load_idx, save_csv, Dataset, Example, Subsample};
pub use ensemble::{train_votes, train_votes_serial, VoteRecord, VoteTable};
pub use error::{Error, Result};
pub use learners::{fit, BaseLearnerSpec, FittedClassifier, LearnerKind};
