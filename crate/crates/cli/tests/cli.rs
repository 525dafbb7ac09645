use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_domain-bridge"));
    cmd.env("RUST_LOG", "warn").env_remove("DOMAIN_BRIDGE_SEED");
    cmd
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["synth", "--out", "syn", "--train-size", "120", "--dev-size", "40", "--test-size", "60"];
    args.extend_from_slice(extra);
    let out = run(&args, dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("syn")
}

fn train_args(out: &str) -> Vec<&str> {
    vec![
        "train",
        "--source-emb",
        "syn/source.emb",
        "--target-emb",
        "syn/target.emb",
        "--train",
        "syn/train.txt",
        "--dev",
        "syn/dev.txt",
        "--test",
        "syn/target_test.txt",
        "--lexicon",
        "syn/lexicon.txt",
        "--epochs",
        "4",
        "--batch-size",
        "20",
        "--lr",
        "0.01",
        "--out",
        out,
    ]
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let syn = synth(dir.path(), &[]);
    for name in ["source.emb", "target.emb", "train.txt", "dev.txt", "test.txt", "target_test.txt", "lexicon.txt", "synth.json", "manifest.json"] {
        assert!(syn.join(name).is_file(), "{name}");
    }
    assert_eq!(fs::read_to_string(syn.join("train.txt")).unwrap().lines().count(), 120);
    assert_eq!(json(&syn.join("manifest.json"))["seed"], 42);
}

#[test]
fn train_writes_model_reports_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let out = run(&train_args("run"), dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = dir.path().join("run");
    for name in ["model.json", "train_report.json", "train_report.txt", "predictions.txt", "eval.json", "eval.txt", "manifest.json"] {
        assert!(run_dir.join(name).is_file(), "{name}");
    }
    let manifest = json(&run_dir.join("manifest.json"));
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["config"]["epochs"], 4);
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 6);
    assert!(inputs.iter().all(|i| i["sha256"].as_str().unwrap().len() == 64));
    assert_eq!(json(&run_dir.join("train_report.json"))["joint_loss"].as_array().unwrap().len(), 4);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    assert_eq!(code(&run(&train_args("a"), dir.path())), 0);
    assert_eq!(code(&run(&train_args("b"), dir.path())), 0);
    for name in ["model.json", "train_report.json", "predictions.txt", "eval.json"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn alpha_out_of_range_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let mut args = train_args("run");
    args.extend(["--alpha", "1.5"]);
    assert_eq!(code(&run(&args, dir.path())), 1);
    assert!(!dir.path().join("run").exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["eval", "--bogus"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--bogus"));
}

#[test]
fn missing_file_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let mut args = train_args("run");
    args[2] = "syn/missing.emb";
    let out = run(&args, dir.path());
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("syn/missing.emb"));
}

#[test]
fn config_file_merges_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    fs::write(dir.path().join("cfg.json"), r#"{"epochs": 2, "alpha": 0.25, "seed": 5}"#).unwrap();
    let mut args: Vec<&str> = train_args("run").into_iter().filter(|a| *a != "--epochs" && *a != "4").collect();
    args.extend(["--config", "cfg.json", "--alpha", "0.75"]);
    let out = run(&args, dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = json(&dir.path().join("run/manifest.json"));
    assert_eq!(manifest["config"]["epochs"], 2);
    assert_eq!(manifest["config"]["alpha"], 0.75);
    assert_eq!(manifest["seed"], 5);
}

#[test]
fn config_with_unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    fs::write(dir.path().join("cfg.json"), r#"{"no-such-flag": 1}"#).unwrap();
    let mut args = train_args("run");
    args.extend(["--config", "cfg.json"]);
    assert_eq!(code(&run(&args, dir.path())), 1);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let out = bin()
        .args(train_args("run"))
        .env("DOMAIN_BRIDGE_SEED", "7")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(json(&dir.path().join("run/manifest.json"))["seed"], 7);
}

#[test]
fn predict_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    assert_eq!(code(&run(&train_args("run"), dir.path())), 0);
    let out = run(
        &["predict", "--model", "run/model.json", "--target-emb", "syn/target.emb", "--test", "syn/target_test.txt", "--out", "pred"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read(dir.path().join("pred/predictions.txt")).unwrap(),
        fs::read(dir.path().join("run/predictions.txt")).unwrap()
    );
    let out = run(
        &["eval", "--predictions", "pred/predictions.txt", "--test", "syn/target_test.txt", "--out", "ev"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("ev/eval.txt").is_file());
    assert_eq!(json(&dir.path().join("ev/eval.json"))["evaluated"], 60);
}

#[test]
fn eval_drops_unlabeled_and_rejects_length_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("gold.txt"), "pos\tgood\nneg\tbad\npos\tfine\nneg\tawful\n").unwrap();
    fs::write(d.join("pred.txt"), "pos\nunlabeled\nneg\nneg\n").unwrap();
    let out = run(&["eval", "--predictions", "pred.txt", "--test", "gold.txt", "--out", "ev"], d);
    assert_eq!(code(&out), 0);
    let doc = json(&d.join("ev/eval.json"));
    assert_eq!(doc["evaluated"], 3);
    assert_eq!(doc["skipped"], 1);
    assert_eq!(doc["report"]["positive"]["error_rate"], 0.5);

    fs::write(d.join("short.txt"), "pos\n").unwrap();
    let out = run(&["eval", "--predictions", "short.txt", "--test", "gold.txt", "--out", "ev2"], d);
    assert_eq!(code(&out), 2);
}

#[test]
fn divergence_over_three_corpora_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let out = run(
        &["divergence", "--corpus", "syn/train.txt", "--corpus", "syn/dev.txt", "--corpus", "target=syn/target_test.txt", "--out", "div"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("div/divergence.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["domain", "train", "dev", "target"]);
    assert_eq!(rows.len(), 4);
    for (i, row) in rows.iter().enumerate().skip(1) {
        assert_eq!(row.len(), 4);
        assert_eq!(row[i], "0.0");
        for (j, value) in row.iter().enumerate().skip(1) {
            assert_eq!(*value, rows[j][i]);
        }
    }
}

#[test]
fn similarity_needs_jensen_shannon() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let out = run(
        &["divergence", "--corpus", "syn/train.txt", "--corpus", "syn/dev.txt", "--mode", "similarity", "--variant", "symmetrized_kl", "--out", "div"],
        dir.path(),
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn lexicon_strategies() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &[]);
    let out = run(
        &["lexicon", "--strategy", "frequency", "--corpus", "syn/train.txt", "--k", "25", "--out", "freq"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(dir.path().join("freq/lexicon.txt")).unwrap().lines().count(), 25);

    let out = run(
        &[
            "lexicon",
            "--strategy",
            "mi",
            "--train",
            "syn/train.txt",
            "--source-unlabeled",
            "syn/train.txt",
            "--target-unlabeled",
            "syn/target_test.txt",
            "--min-count",
            "2",
            "--top-m",
            "30",
            "--source-emb",
            "syn/source.emb",
            "--target-emb",
            "syn/target.emb",
            "--out",
            "mi",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pivots = fs::read_to_string(dir.path().join("mi/pivots.tsv")).unwrap();
    assert_eq!(pivots.lines().count(), 31);
    // Bigram pivots have no embedding and are filtered out.
    let lexicon = fs::read_to_string(dir.path().join("mi/lexicon.txt")).unwrap();
    assert!(lexicon.lines().all(|l| !l.contains('_')));

    let out = run(&["lexicon", "--strategy", "mi", "--out", "bad"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn baseline_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--target-sentiment", "disjoint"]);
    let base = |test: &str, out: &str, target: &str| {
        run(
            &["baseline", "--train", "syn/train.txt", "--dev", "syn/dev.txt", "--test", test, "--target-name", target, "--out", out],
            dir.path(),
        )
    };
    assert_eq!(code(&base("syn/test.txt", "in", "source")), 0);
    assert_eq!(code(&base("syn/target_test.txt", "cross", "target")), 0);
    let in_domain = json(&dir.path().join("in/eval.json"))["report"]["accuracy"].as_f64().unwrap();
    let cross = json(&dir.path().join("cross/eval.json"))["report"]["accuracy"].as_f64().unwrap();
    assert!(in_domain > cross);

    let out = run(&["plot-data", "--report", "in/eval.json", "--report", "cross/eval.json", "--out", "plot"], dir.path());
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("plot/plot_data.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 10);
    assert!(csv.contains(&format!("noad,source,source,accuracy,{in_domain}")));

    let out = run(&["plot-data", "--out", "empty"], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(dir.path().join("empty/plot_data.csv")).unwrap(), "system,source,target,metric,value\n");

    let out = run(&["plot-data", "--report", "in/manifest.json", "--out", "bad"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--help"], dir.path());
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("plot-data"));
}
