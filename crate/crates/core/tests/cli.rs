mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::fixture;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wikisvd"))
        .args(args)
        .current_dir(cwd)
        .env_remove("WIKISVD_OUT_DIR")
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn fx(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

#[test]
fn sweep_from_config_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = run(&["sweep", "--config", &fx("sweep.conf"), "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("sparsity,variant,seed,rmse,mae,"));
    assert!(out.join("report.txt").exists());
    assert!(fs::read_to_string(out.join("report_meta.txt")).unwrap().contains("epochs=10"));

    let again = dir.path().join("again");
    let o2 = run(&["sweep", "--config", &fx("sweep.conf"), "--out", again.to_str().unwrap()], dir.path());
    assert_eq!(o2.status.code(), Some(0));
    assert_eq!(csv, fs::read_to_string(again.join("report.csv")).unwrap());

    let r = run(&["report", "--input", out.join("report.csv").to_str().unwrap()], dir.path());
    assert_eq!(r.status.code(), Some(0), "{}", text(&r.stderr));
    assert_eq!(text(&r.stdout), fs::read_to_string(out.join("report.txt")).unwrap());
}

#[test]
fn link_sim_augment_train_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let common = ["--ratings", &fx("u.data"), "--titles", &fx("u.item"), "--wiki-index", &fx("wiki_index.tsv")];
    let with = |cmd: &str, extra: &[&str]| {
        let mut args = vec![cmd];
        args.extend(common);
        args.extend(extra);
        args.extend(["--out", "out"]);
        run(&args, d)
    };

    let o = with("link", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("matched 8 of 10 items"));
    assert!(fs::read_to_string(d.join("out/match_report.csv")).unwrap().contains("6,no-exact-match,,"));

    let o = with("sim", &["--categories", "out/item_categories.tsv"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let sim = fs::read_to_string(d.join("out/similarity.tsv")).unwrap();
    assert!(sim.lines().any(|l| l == "2\t9\t3"), "{sim}");

    let o = with("augment", &["--sim-file", "out/similarity.tsv", "--fraction", "0.5", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let aug = fs::read_to_string(d.join("out/artificial.tsv")).unwrap();
    assert!(aug.starts_with("# seed=3"));

    let o = with(
        "train",
        &["--variant", "B", "--aug-file", "out/artificial.tsv", "--fraction", "0.5", "--seed", "3", "--factors", "3", "--epochs", "4"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let stdout = text(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("epoch")).count(), 4);
    assert!(stdout.contains("test rmse"));

    fs::write(d.join("pairs.tsv"), "1\t1\n2\t10\n8\t3\n").unwrap();
    fs::write(d.join("empty.tsv"), "").unwrap();
    let o = with("predict", &["--model", "out/model.bin", "--pairs", "pairs.tsv", "--fraction", "0.5"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let lines: Vec<String> = text(&o.stdout).lines().map(String::from).collect();
    assert_eq!(lines.len(), 3);
    for l in &lines {
        let v: f64 = l.split('\t').nth(2).unwrap().parse().unwrap();
        assert!((1.0..=5.0).contains(&v));
    }

    let o = with("train", &["--variant", "F", "--sim-file", "out/similarity.tsv", "--epochs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let o = with("predict", &["--model", "out/model.bin", "--pairs", "pairs.tsv"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let bare = run(&["predict", "--ratings", &fx("u.data"), "--model", "out/model.bin", "--pairs", "pairs.tsv"], d);
    assert_eq!(bare.status.code(), Some(1));
    assert!(text(&bare.stderr).contains("sim-file"));
    let other = run(
        &["predict", "--ratings", &fx("u.data"), "--model", "out/model.bin", "--pairs", "pairs.tsv", "--sim-file", "empty.tsv"],
        d,
    );
    assert_eq!(other.status.code(), Some(1));
    assert!(text(&other.stderr).contains("differs"));
}

#[test]
fn failures_exit_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let o = run(&["train", "--ratings", "nowhere/u.data"], d);
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o.stderr);
    assert!(err.starts_with("error: ") && err.contains("nowhere/u.data"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);

    let o = run(&["train", "--ratings", &fx("u.data"), "--variant", "F"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("similarity"));

    let o = run(&["train", "--ratings", &fx("u.data"), "--gamma", "0.001", "--gamma-art", "0.01"], d);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["frobnicate"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).starts_with("error: usage:"));

    let o = run(&["train", "--factors", "many"], d);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["--help"], d);
    assert_eq!(o.status.code(), Some(0));
    let help = text(&o.stdout);
    for cmd in ["link", "sim", "augment", "train", "predict", "sweep", "report"] {
        assert!(help.contains(cmd));
    }
    let o = run(&["train", "--help"], d);
    let help = text(&o.stdout);
    for default in ["default: 50", "default: 0.005", "default: 0.00005", "default: 0.02", "default: 30", "default: 0.5"] {
        assert!(help.contains(default), "missing {default}");
    }
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_wikisvd"))
        .args(["link", "--titles", &fx("u.item"), "--wiki-index", &fx("wiki_index.tsv")])
        .current_dir(dir.path())
        .env("WIKISVD_OUT_DIR", dir.path().join("envout"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert!(dir.path().join("envout/item_categories.tsv").exists());
}
