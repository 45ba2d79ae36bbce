//! Implementations behind the `train`, `certify`, `curve` and `oracle`
//! subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};

use bagcert_core::certifier::{
    certify_all, read_certificates_csv, write_certificates_csv, write_curve_csv, AttackModel,
    Certificate, ALL_ATTACKS,
};
use bagcert_core::dataset::{load_csv, load_idx, Dataset};
use bagcert_core::ensemble::{train_votes, VoteTable};
use bagcert_core::learners::{BaseLearnerSpec, LearnerKind};

use crate::oracle_suite;

/// A dataset argument: either a CSV path or an `IMAGES,LABELS` IDX pair.
pub fn load_dataset_arg(spec: &str, classes: Option<usize>) -> Result<Dataset> {
    let mut dataset = match spec.split_once(',') {
        Some((images, labels)) => load_idx(Path::new(images.trim()), Path::new(labels.trim()))?,
        None => load_csv(Path::new(spec))?,
    };
    if let Some(c) = classes {
        dataset.set_label_count(c)?;
    }
    Ok(dataset)
}

pub struct TrainConfig {
    pub dataset: String,
    pub test: String,
    pub learner: LearnerKind,
    pub nb_smoothing: f64,
    pub k: usize,
    pub n_classifiers: usize,
    pub seed: u64,
    pub classes: Option<usize>,
    pub out: PathBuf,
}

pub fn cmd_train(config: &TrainConfig) -> Result<()> {
    let dataset = load_dataset_arg(&config.dataset, config.classes)
        .with_context(|| format!("loading --dataset {}", config.dataset))?;
    let test = load_dataset_arg(&config.test, config.classes)
        .with_context(|| format!("loading --test {}", config.test))?;
    let spec = match config.learner {
        LearnerKind::Majority => BaseLearnerSpec::majority(),
        LearnerKind::Centroid => BaseLearnerSpec::centroid(),
        LearnerKind::Nb => BaseLearnerSpec::nb(config.nb_smoothing),
    };

    let started = Instant::now();
    let votes = train_votes(
        &dataset,
        &spec,
        config.k,
        config.n_classifiers,
        config.seed,
        &test,
    )?;
    votes.save(&config.out)?;
    println!(
        "trained N={} classifiers (k={}, learner={}, seed={}) on n={} examples in {:.2}s",
        config.n_classifiers,
        config.k,
        config.learner.name(),
        config.seed,
        dataset.len(),
        started.elapsed().as_secs_f64()
    );
    println!("votes for {} test examples -> {}", test.len(), config.out.display());
    Ok(())
}

pub struct CertifyConfig {
    pub votes: PathBuf,
    pub alpha: f64,
    pub attacks: Vec<AttackModel>,
    pub out: PathBuf,
}

pub fn cmd_certify(config: &CertifyConfig) -> Result<()> {
    let votes = VoteTable::load(&config.votes)?;
    let started = Instant::now();
    let certificates = certify_all(&votes, config.alpha, &config.attacks)?;
    write_certificates_csv(&certificates, &config.out)?;
    let abstained = certificates.iter().filter(|c| c.abstained()).count();
    println!(
        "certified {} examples ({} abstained) at alpha={} in {:.2}s",
        certificates.len(),
        abstained,
        config.alpha,
        started.elapsed().as_secs_f64()
    );
    println!("certificates -> {}", config.out.display());
    Ok(())
}

pub struct CurveConfig {
    pub certificates: PathBuf,
    pub truth: PathBuf,
    pub r_max: Option<u64>,
    pub attack: AttackModel,
    pub out: PathBuf,
}

/// Ground-truth labels: a dataset CSV (labels column) or one label per line.
pub fn load_truth(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read truth file {}", path.display()))?;
    let first = text.lines().next().unwrap_or("");
    if first.split(',').next() == Some("label") {
        let dataset = load_csv(path)?;
        return Ok(dataset.examples().iter().map(|ex| ex.label).collect());
    }
    text.lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| {
            line.trim()
                .parse::<usize>()
                .with_context(|| format!("bad label line `{line}` in {}", path.display()))
        })
        .collect()
}

pub fn cmd_curve(config: &CurveConfig) -> Result<()> {
    let certificates = read_certificates_csv(&config.certificates)?;
    let truth = load_truth(&config.truth)?;
    if certificates.len() != truth.len() {
        bail!(
            "{} certificates but {} ground-truth labels",
            certificates.len(),
            truth.len()
        );
    }
    for (position, cert) in certificates.iter().enumerate() {
        if cert.id != position {
            bail!("certificate id {} at row {position}: files do not line up", cert.id);
        }
    }
    let r_max = config.r_max.unwrap_or_else(|| max_radius(&certificates, config.attack));
    write_curve_csv(&certificates, &truth, r_max, config.attack, &config.out)?;
    println!(
        "certified accuracy over r=0..={r_max} ({} attack) -> {}",
        config.attack.name(),
        config.out.display()
    );
    Ok(())
}

fn max_radius(certificates: &[Certificate], attack: AttackModel) -> u64 {
    certificates
        .iter()
        .filter_map(|c| c.radius(attack))
        .max()
        .unwrap_or(0)
}

pub struct OracleConfig {
    pub budget: u64,
    pub out: Option<PathBuf>,
}

/// Runs the verification suite; returns whether every check passed.
pub fn cmd_oracle(config: &OracleConfig) -> Result<bool> {
    if config.budget == 0 {
        println!("warning: budget is 0, nothing verified");
    }
    let report = oracle_suite::run(config.budget)?;
    for section in &report.sections {
        let status = if section.passed() { "pass" } else { "FAIL" };
        println!("[{status}] {} ({} checks)", section.name, section.checks);
        for failure in &section.failures {
            println!("    {failure}");
        }
    }
    if let Some(path) = &config.out {
        let json = serde_json::to_string_pretty(&report)?;
        std::fs::write(path, json + "\n")
            .with_context(|| format!("cannot write report to {}", path.display()))?;
        println!("report -> {}", path.display());
    }
    Ok(report.passed())
}

/// Parses repeated/comma-separated `--attack` values into a deduplicated
/// list in canonical order; defaults to every model.
pub fn parse_attacks(raw: &[String]) -> Result<Vec<AttackModel>> {
    if raw.is_empty() {
        return Ok(ALL_ATTACKS.to_vec());
    }
    let mut requested = Vec::new();
    for chunk in raw.iter().flat_map(|s| s.split(',')) {
        let attack: AttackModel = chunk.trim().parse()?;
        if !requested.contains(&attack) {
            requested.push(attack);
        }
    }
    Ok(ALL_ATTACKS
        .iter()
        .copied()
        .filter(|a| requested.contains(a))
        .collect())
}
