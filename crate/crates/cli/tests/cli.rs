//! End-to-end behaviour of the `lungnet` binary: exit codes, outputs and
//! determinism of each subcommand.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lungnet::metrics::{compute_report, confusion};

fn lungnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lungnet")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn total_params(arch: &str) -> usize {
    let out = lungnet(&["params", "--arch", arch, "--classes", "3", "--width", "1.0"]);
    assert_eq!(code(&out), 0);
    stdout(&out).lines().find_map(|l| l.strip_prefix("total ")).unwrap().trim().parse().unwrap()
}

/// Small synthetic set plus its split index.
fn small_corpus(dir: &Path, per_class: usize) -> std::path::PathBuf {
    let root = dir.join("data");
    let index = dir.join("index.csv");
    let synth = ["synth", "--out", s(&root), "--per-class", &per_class.to_string(), "--size", "32", "--seed", "1"];
    assert_eq!(code(&lungnet(&synth)), 0);
    assert_eq!(code(&lungnet(&["split", "--root", s(&root), "--seed", "0", "--out", s(&index)])), 0);
    index
}

fn mini_config(dir: &Path, index: &Path, out_dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    let text = format!(
        "index = {}\narch = mobilenet_lung\nwidth_multiplier = 0.25\ninput_size = 32\nbatch_size = 8\nout_dir = {}\n{extra}",
        index.display(),
        out_dir.display()
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(code(&lungnet(&[])), 1);
    assert_eq!(code(&lungnet(&["frobnicate"])), 1);
    assert_eq!(code(&lungnet(&["params", "--arch", "resnet"])), 1);
    assert_eq!(code(&lungnet(&["--help"])), 0);
    assert_eq!(code(&lungnet(&["train", "--help"])), 0);
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(code(&lungnet(&["train", "--config", s(&cfg)])), 1);
    fs::write(&cfg, format!("root = {}\nbatch_size = 0\n", dir.path().display())).unwrap();
    assert_eq!(code(&lungnet(&["train", "--config", s(&cfg)])), 1);
    assert_eq!(code(&lungnet(&["train", "--config", s(&dir.path().join("missing.cfg"))])), 1);
}

#[test]
fn missing_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    assert_eq!(code(&lungnet(&["split", "--root", s(&missing), "--out", s(&dir.path().join("i.csv"))])), 2);
    assert_eq!(code(&lungnet(&["stats", "--index", s(&dir.path().join("none.csv"))])), 2);
}

#[test]
fn split_of_thirty_files_is_24_3_3() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("tree");
    fs::create_dir_all(root.join("only")).unwrap();
    fs::create_dir_all(root.join("other")).unwrap();
    for i in 0..30 {
        fs::write(root.join("only").join(format!("{i}.png")), b"").unwrap();
        fs::write(root.join("other").join(format!("{i}.png")), b"").unwrap();
    }
    fs::write(root.join("only").join("notes.txt"), b"x").unwrap();
    let index = dir.path().join("i.csv");
    let out = lungnet(&["split", "--root", s(&root), "--seed", "3", "--out", s(&index)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["only", "24", "3", "3"]), "{text}");
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["total", "48", "6", "6"]), "{text}");
    assert!(!fs::read_to_string(&index).unwrap().contains("notes.txt"));
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(code(&lungnet(&["synth", "--out", s(out), "--per-class", "3", "--size", "16", "--seed", "9"])), 0);
    }
    let mut files: Vec<_> = walk(&a);
    files.sort();
    assert_eq!(files.len(), 9);
    for f in files {
        let rel = f.strip_prefix(&a).unwrap();
        assert_eq!(fs::read(&f).unwrap(), fs::read(b.join(rel)).unwrap(), "{}", rel.display());
    }
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn se_adds_exactly_its_parameters() {
    // Stem width 32 at width 1.0, reduction 16: 2·32·2 + 2 + 32.
    assert_eq!(total_params("mobilenet_lung") - total_params("mobilenet_v2"), 162);
}

#[test]
fn zero_epochs_writes_header_only_log() {
    let dir = tempfile::tempdir().unwrap();
    let index = small_corpus(dir.path(), 10);
    let out_dir = dir.path().join("run");
    let cfg = mini_config(dir.path(), &index, &out_dir, "max_epochs = 0\n");
    let out = lungnet(&["train", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(out_dir.join("log.csv")).unwrap().trim(), "epoch,lr,train_loss,train_acc,val_loss,val_acc");
    assert!(!out_dir.join("best.nncp").exists());
}

#[test]
fn train_then_eval_is_consistent_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let index = small_corpus(dir.path(), 20);
    let out_dir = dir.path().join("run");
    let cfg = mini_config(dir.path(), &index, &out_dir, "max_epochs = 2\nseed = 4\n");
    let out = lungnet(&["train", "--config", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["log.csv", "best.nncp", "report.csv"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }

    let preds = dir.path().join("preds.csv");
    let eval = |report: &Path| {
        lungnet(&[
            "eval", "--checkpoint", s(&out_dir.join("best.nncp")), "--index", s(&index), "--config", s(&cfg),
            "--split", "test", "--report", s(report), "--predictions", s(&preds),
        ])
    };
    let (r1, r2) = (dir.path().join("r1.csv"), dir.path().join("r2.csv"));
    let (first, second) = (eval(&r1), eval(&r2));
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(stdout(&first), stdout(&second));
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());
    // The best checkpoint evaluated on test reproduces the training report.
    assert_eq!(fs::read(&r1).unwrap(), fs::read(out_dir.join("report.csv")).unwrap());

    let text = fs::read_to_string(&preds).unwrap();
    let rows: Vec<(usize, usize)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<usize> = l.split(',').map(|v| v.parse().unwrap()).collect();
            (f[1], f[2])
        })
        .collect();
    assert_eq!(rows.len(), 6);
    let (labels, predictions): (Vec<usize>, Vec<usize>) = rows.into_iter().unzip();
    let report = compute_report(&confusion(&predictions, &labels, 3).unwrap(), 0.0).unwrap();
    let accuracy = format!("{:.4}", report.accuracy);
    assert!(stdout(&first).contains(&accuracy), "{} lacks accuracy {accuracy}", stdout(&first));
}

#[test]
fn eval_without_checkpoint_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let index = small_corpus(dir.path(), 10);
    let out = lungnet(&[
        "eval", "--checkpoint", s(&dir.path().join("none.nncp")), "--index", s(&index), "--arch", "mobilenet_lung",
        "--width", "0.25", "--input-size", "32",
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
