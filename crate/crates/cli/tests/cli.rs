//! Command-line behavior: exit codes, flag/config-file plumbing, and file
//! schema round trips through the binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bagcert(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bagcert"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn bagcert")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no exit code")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn write_blobs(path: &Path, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("label,f0,f1\n");
    for _ in 0..n {
        let label = rng.gen_range(0..2usize);
        let center = 1.0 + label as f64 * 2.0;
        csv.push_str(&format!(
            "{label},{},{}\n",
            center + rng.gen_range(-0.8..0.8),
            center + rng.gen_range(-0.8..0.8)
        ));
    }
    fs::write(path, csv).unwrap();
}

fn trained_fixture(dir: &Path) {
    write_blobs(&dir.join("train.csv"), 120, 1);
    write_blobs(&dir.join("test.csv"), 20, 2);
    let out = bagcert(
        dir,
        &[
            "train",
            "--dataset",
            "train.csv",
            "--test",
            "test.csv",
            "--k",
            "8",
            "--n-classifiers",
            "200",
            "--seed",
            "3",
            "--out",
            "votes.json",
        ],
    );
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
}

#[test]
fn missing_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bagcert(dir.path(), &["train", "--dataset", "nope.csv", "--test", "nope.csv"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("nope.csv"));
}

#[test]
fn unknown_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = bagcert(dir.path(), &["train", "--no-such-flag"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn malformed_votes_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("votes.json"), "{\"n\": 3}").unwrap();
    let out = bagcert(dir.path(), &["certify", "--votes", "votes.json"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    write_blobs(&dir.path().join("train.csv"), 60, 4);
    write_blobs(&dir.path().join("test.csv"), 10, 5);
    fs::write(
        dir.path().join("run.cfg"),
        "dataset = train.csv\ntest = test.csv\nk = 5 # inline comment\nn-classifiers = 50\nseed = 11\nout = from_config.json\n",
    )
    .unwrap();

    let out = bagcert(dir.path(), &["train", "--config", "run.cfg"]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let votes: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("from_config.json")).unwrap())
            .unwrap();
    assert_eq!(votes["k"], 5);
    assert_eq!(votes["N"], 50);
    assert_eq!(votes["seed"], 11);

    // an explicit flag wins over the file value
    let out = bagcert(
        dir.path(),
        &["train", "--config", "run.cfg", "--k", "7", "--out", "override.json"],
    );
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let votes: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("override.json")).unwrap())
            .unwrap();
    assert_eq!(votes["k"], 7);

    // unknown keys are rejected
    fs::write(dir.path().join("bad.cfg"), "datasett = x.csv\n").unwrap();
    let out = bagcert(dir.path(), &["train", "--config", "bad.cfg"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("datasett"));
}

#[test]
fn certify_attack_subsets_and_alpha_monotonicity() {
    let dir = tempfile::tempdir().unwrap();
    trained_fixture(dir.path());

    let out = bagcert(
        dir.path(),
        &["certify", "--votes", "votes.json", "--attack", "modify", "--out", "m.csv"],
    );
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "id,predicted_label,abstain,p_lower,p_upper_runner,r_general,r_modify,r_delete,r_insert"
    );
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[2] == "false" {
            assert!(fields[5].is_empty(), "general not requested: {line}");
            assert!(!fields[6].is_empty(), "modify requested: {line}");
        }
    }

    // looser alpha never shrinks radii
    for (alpha, name) in [("0.001", "tight.csv"), ("0.5", "loose.csv")] {
        let out = bagcert(
            dir.path(),
            &["certify", "--votes", "votes.json", "--alpha", alpha, "--out", name],
        );
        assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    }
    let parse_radii = |name: &str| -> Vec<Option<u64>> {
        fs::read_to_string(dir.path().join(name))
            .unwrap()
            .lines()
            .skip(1)
            .map(|line| line.split(',').nth(5).unwrap().parse::<u64>().ok())
            .collect()
    };
    for (tight, loose) in parse_radii("tight.csv").iter().zip(parse_radii("loose.csv")) {
        if let (Some(t), Some(l)) = (tight, loose) {
            assert!(t <= &l, "tight alpha radius {t} exceeds loose {l}");
        }
    }
}

#[test]
fn curve_requires_consistent_truth() {
    let dir = tempfile::tempdir().unwrap();
    trained_fixture(dir.path());
    let out = bagcert(dir.path(), &["certify", "--votes", "votes.json", "--out", "c.csv"]);
    assert_eq!(exit_code(&out), 0);

    // plain label lines work as truth
    let labels = "0\n1\n0\n1\n0\n1\n0\n1\n0\n1\n0\n1\n0\n1\n0\n1\n0\n1\n0\n1\n";
    fs::write(dir.path().join("labels.txt"), labels).unwrap();
    let out = bagcert(
        dir.path(),
        &["curve", "--certificates", "c.csv", "--truth", "labels.txt", "--r-max", "5", "--out", "k.csv"],
    );
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let curve = fs::read_to_string(dir.path().join("k.csv")).unwrap();
    assert_eq!(curve.lines().count(), 7); // header + r = 0..=5

    // wrong number of labels is an input error
    fs::write(dir.path().join("short.txt"), "0\n1\n").unwrap();
    let out = bagcert(
        dir.path(),
        &["curve", "--certificates", "c.csv", "--truth", "short.txt", "--out", "x.csv"],
    );
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn oracle_reports_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // budget 0: warning, empty report, success
    let out = bagcert(dir.path(), &["oracle", "--budget", "0"]);
    assert_eq!(exit_code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("warning"));

    // a small but nonzero budget cannot fit the suite: enumeration refuses
    // to start, which surfaces as an input error rather than a bad verdict
    let out = bagcert(dir.path(), &["oracle", "--budget", "10", "--out", "report.json"]);
    assert_eq!(exit_code(&out), 1);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["budget"], 10);
    assert!(!report["sections"].as_array().unwrap().is_empty());

    // the real run passes
    let out = bagcert(dir.path(), &["oracle", "--out", "full.json"]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("full.json")).unwrap()).unwrap();
    for section in report["sections"].as_array().unwrap() {
        assert_eq!(section["failures"].as_array().unwrap().len(), 0);
        assert!(section["checks"].as_u64().unwrap() > 0);
    }
}
