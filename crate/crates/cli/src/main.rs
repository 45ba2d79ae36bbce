//! `bagcert`: train subsampled ensembles, certify them against training-data
//! poisoning, and verify the certification math at tiny scale.
//!
//! Exit codes: 0 success, 1 verification failure (`oracle`), 2 usage or
//! input errors.

mod commands;
mod config;
mod oracle_suite;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bagcert_core::learners::LearnerKind;
use bagcert_core::oracle::DEFAULT_BUDGET;
use commands::{
    cmd_certify, cmd_curve, cmd_oracle, cmd_train, parse_attacks, CertifyConfig, CurveConfig,
    OracleConfig, TrainConfig,
};
use config::FileConfig;

#[derive(Parser)]
#[command(
    name = "bagcert",
    version,
    about = "Certified robustness of bagging ensembles against training-data poisoning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train N base classifiers on random subsamples and write the votes file
    Train(TrainArgs),
    /// Turn a votes file into per-example certificates (CSV)
    Certify(CertifyArgs),
    /// Emit the certified-accuracy curve CA_r from certificates
    Curve(CurveArgs),
    /// Run the exhaustive tiny-scale verification suite
    Oracle(OracleArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Flat `key = value` config file; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training data: a CSV path, or `IMAGES,LABELS` for an IDX pair
    #[arg(long)]
    dataset: Option<String>,
    /// Test data, same forms as --dataset
    #[arg(long)]
    test: Option<String>,
    /// Base learner: centroid, nb or majority
    #[arg(long)]
    learner: Option<LearnerKind>,
    /// Additive smoothing for the nb learner
    #[arg(long)]
    nb_smoothing: Option<f64>,
    /// Subsample size
    #[arg(long)]
    k: Option<usize>,
    /// Number of base classifiers N
    #[arg(long)]
    n_classifiers: Option<usize>,
    /// Master seed for subsample draws
    #[arg(long)]
    seed: Option<u64>,
    /// Label-space size when the data does not exhibit every label
    #[arg(long)]
    classes: Option<usize>,
    /// Output votes file (JSON)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Votes file produced by `bagcert train`
    #[arg(long)]
    votes: Option<PathBuf>,
    /// Simultaneous error budget over all test examples
    #[arg(long)]
    alpha: Option<f64>,
    /// Attack models (repeat or comma-separate): all, modify, delete, insert
    #[arg(long)]
    attack: Vec<String>,
    /// Output certificates file (CSV)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Certificates CSV from `bagcert certify`
    #[arg(long)]
    certificates: Option<PathBuf>,
    /// Ground truth: a dataset CSV or one label per line
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Largest radius to report (defaults to the largest certified radius)
    #[arg(long)]
    r_max: Option<u64>,
    /// Attack model the curve is computed for
    #[arg(long)]
    attack: Option<String>,
    /// Output curve file (CSV)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Enumeration budget in visited tuples (0 skips everything)
    #[arg(long)]
    budget: Option<u64>,
    /// Optional JSON report path
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Train(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let config = TrainConfig {
                dataset: file.resolve_required(args.dataset, "dataset")?,
                test: file.resolve_required(args.test, "test")?,
                learner: file.resolve(args.learner, "learner", LearnerKind::Centroid)?,
                nb_smoothing: file.resolve(args.nb_smoothing, "nb-smoothing", 1.0)?,
                k: file.resolve(args.k, "k", 30)?,
                n_classifiers: file.resolve(args.n_classifiers, "n-classifiers", 1000)?,
                seed: file.resolve(args.seed, "seed", 1)?,
                classes: file.resolve_opt(args.classes, "classes")?,
                out: file.resolve(args.out, "out", PathBuf::from("votes.json"))?,
            };
            cmd_train(&config)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Certify(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let attack_flags = if args.attack.is_empty() {
                file.resolve_opt::<String>(None, "attack")?
                    .map(|s| vec![s])
                    .unwrap_or_default()
            } else {
                args.attack
            };
            let config = CertifyConfig {
                votes: file.resolve_required(args.votes, "votes")?,
                alpha: file.resolve(args.alpha, "alpha", 0.001)?,
                attacks: parse_attacks(&attack_flags)?,
                out: file.resolve(args.out, "out", PathBuf::from("certificates.csv"))?,
            };
            cmd_certify(&config)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Curve(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let attack = file
                .resolve_opt(args.attack, "attack")?
                .map(|s: String| s.parse())
                .transpose()?
                .unwrap_or(bagcert_core::AttackModel::General);
            let config = CurveConfig {
                certificates: file.resolve_required(args.certificates, "certificates")?,
                truth: file.resolve_required(args.truth, "truth")?,
                r_max: file.resolve_opt(args.r_max, "r-max")?,
                attack,
                out: file.resolve(args.out, "out", PathBuf::from("curve.csv"))?,
            };
            cmd_curve(&config)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle(args) => {
            let file = FileConfig::load(args.config.as_deref())?;
            let config = OracleConfig {
                budget: file.resolve(args.budget, "budget", DEFAULT_BUDGET)?,
                out: args.out,
            };
            if cmd_oracle(&config)? {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
