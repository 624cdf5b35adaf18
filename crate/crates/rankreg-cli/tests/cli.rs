//! Integration tests driving the `rankreg` binary and the library entry
//! points behind it.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rankreg"))
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let out = bin().args(args).current_dir(dir).output().expect("spawn");
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str], dir: &Path) -> Output {
    let out = bin().args(args).current_dir(dir).output().expect("spawn");
    assert!(
        !out.status.success(),
        "command {:?} unexpectedly succeeded",
        args
    );
    out
}

fn gen_small(dir: &Path, name: &str) {
    run_ok(
        &[
            "gen-data", "--dim", "2", "--n-neg", "400", "--ratio", "40", "--seed", "5", "--out",
            name,
        ],
        dir,
    );
}

#[test]
fn gen_data_row_counts_match_ratio() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "gen-data", "--dim", "2", "--n-neg", "5000", "--ratio", "100", "--seed", "1", "--out",
            "d.csv",
        ],
        dir.path(),
    );
    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert_eq!(text.lines().count(), 5051); // 5050 rows + header

    run_ok(
        &[
            "gen-data", "--dim", "2", "--n-neg", "5000", "--ratio", "200", "--seed", "1", "--out",
            "d200.csv",
        ],
        dir.path(),
    );
    let text = fs::read_to_string(dir.path().join("d200.csv")).unwrap();
    assert_eq!(text.lines().count(), 5026); // 5025 rows + header
}

#[test]
fn gen_data_requires_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_err(&["gen-data", "--dim", "2"], dir.path());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--out"), "diagnostic should name --out: {stderr}");
}

#[test]
fn unknown_loss_and_strategy_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "d.csv");
    let out = run_err(
        &[
            "train", "--data", "d.csv", "--base-loss", "hinge", "--out-model", "m.txt",
        ],
        dir.path(),
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("hinge"));

    run_err(
        &[
            "train", "--data", "d.csv", "--buffer-strategy", "lifo", "--out-model", "m.txt",
        ],
        dir.path(),
    );
    run_err(
        &[
            "train", "--data", "d.csv", "--penalty", "quartic", "--out-model", "m.txt",
        ],
        dir.path(),
    );
    run_err(&["ablate", "--ablation", "dropout", "--out-dir", "x"], dir.path());
}

#[test]
fn train_defaults_depend_on_rankreg_flag() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "d.csv");

    let out = run_ok(
        &[
            "train", "--data", "d.csv", "--rankreg", "--epochs", "2", "--out-model", "m.txt",
            "--out-history", "h.txt",
        ],
        dir.path(),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("batch 32, buffer 32"), "{stdout}");
    let history = fs::read_to_string(dir.path().join("h.txt")).unwrap();
    assert!(history.starts_with("# rankreg-history/v1\n"));
    assert!(history.contains("# lambda 1"));
    assert!(history.contains("# penalty square"));

    let out = run_ok(
        &[
            "train", "--data", "d.csv", "--epochs", "2", "--out-model", "m2.txt",
        ],
        dir.path(),
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("batch 64, buffer 0"), "{stdout}");
}

#[test]
fn eval_restricts_betas_and_exports_roc() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "d.csv");
    run_ok(
        &[
            "train", "--data", "d.csv", "--epochs", "3", "--out-model", "m.txt",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "eval", "--model", "m.txt", "--data", "d.csv", "--tpr", "0.98,0.95", "--out-report",
            "r.toml", "--out-roc", "roc.txt",
        ],
        dir.path(),
    );

    let doc = rankreg_cli::report::ResultDoc::load(dir.path().join("r.toml")).unwrap();
    assert_eq!(doc.arms.len(), 1);
    let keys: Vec<&String> = doc.arms[0].fpr.keys().collect();
    assert_eq!(keys, ["fpr@0.95", "fpr@0.98"]);

    // ROC rows: one per distinct score plus the two endpoints.
    let model = rankreg::Mlp::load(dir.path().join("m.txt")).unwrap();
    let data = rankreg::load_table(dir.path().join("d.csv")).unwrap();
    let (scores, _) = model.forward(&data.feature_rows()).unwrap();
    let mut distinct = scores.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let roc = fs::read_to_string(dir.path().join("roc.txt")).unwrap();
    assert_eq!(roc.lines().count(), distinct.len() + 2);

    // Determinism: evaluating twice writes identical bytes.
    run_ok(
        &[
            "eval", "--model", "m.txt", "--data", "d.csv", "--tpr", "0.98,0.95", "--out-report",
            "r2.toml",
        ],
        dir.path(),
    );
    let a = fs::read_to_string(dir.path().join("r.toml")).unwrap();
    let b = fs::read_to_string(dir.path().join("r2.toml")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn eval_missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_err(
        &["eval", "--model", "nope.txt", "--data", "also-nope.csv"],
        dir.path(),
    );
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn compare_one_loss_one_seed_has_two_fair_arms() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "d.csv");
    run_ok(
        &[
            "compare", "--data", "d.csv", "--losses", "bce", "--seeds", "1", "--epochs", "2",
            "--out-dir", "out",
        ],
        dir.path(),
    );
    let doc = rankreg_cli::report::ResultDoc::load(dir.path().join("out/result.toml")).unwrap();
    assert_eq!(doc.arms.len(), 2);
    let ids: Vec<&str> = doc.arms.iter().map(|a| a.id.as_str()).collect();
    assert!(ids.contains(&"bce-baseline-seed0"));
    assert!(ids.contains(&"bce-rankreg-seed0"));
    // Same seed means the same test split for both arms.
    assert_eq!(doc.arms[0].n_pos, doc.arms[1].n_pos);
    assert_eq!(doc.arms[0].n_neg, doc.arms[1].n_neg);
    // Per-arm ROC tables exist.
    for arm in &doc.arms {
        let roc = arm.roc_file.as_ref().unwrap();
        assert!(dir.path().join("out").join(roc).exists());
    }
    // Summary carries the averaged improvement row.
    let summary = doc.summary.unwrap();
    assert!(summary.avg_delta_baseline_minus_rankreg.is_some());
    assert_eq!(summary.groups.len(), 2);
}

#[test]
fn ensemble_k1_reports_member_and_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "d.csv");
    run_ok(
        &[
            "ensemble", "--data", "d.csv", "--rankreg", "--k", "1", "--epochs", "2", "--out-dir",
            "ens",
        ],
        dir.path(),
    );
    let doc = rankreg_cli::report::ResultDoc::load(dir.path().join("ens/result.toml")).unwrap();
    let ids: Vec<&str> = doc.arms.iter().map(|a| a.id.as_str()).collect();
    assert_eq!(ids, ["member0", "ensemble"]);
    // A single member ensembles to itself.
    assert_eq!(doc.arms[0].auc, doc.arms[1].auc);
    assert_eq!(doc.arms[0].fpr, doc.arms[1].fpr);
    assert!(dir.path().join("ens/roc_ensemble.txt").exists());
}

#[test]
fn result_files_embed_full_config() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "d.csv");
    run_ok(
        &[
            "compare", "--data", "d.csv", "--losses", "bce", "--seeds", "1", "--epochs", "2",
            "--gamma", "1500", "--out-dir", "out",
        ],
        dir.path(),
    );
    let doc = rankreg_cli::report::ResultDoc::load(dir.path().join("out/result.toml")).unwrap();
    for key in [
        "base-loss", "gamma", "lambda", "penalty", "epochs", "seed", "lr", "momentum", "hidden",
        "tpr", "losses", "seeds", "data", "buffer-strategy",
    ] {
        assert!(doc.config.contains_key(key), "config echo missing {key}");
    }
    assert_eq!(doc.config["gamma"], "1500");
    assert_eq!(doc.schema, "rankreg-result/v1");
}
