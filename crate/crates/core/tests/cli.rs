use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use exist_cascade::corpus::{load_tsv, write_tsv, Task1Label, Task2Label};
use exist_cascade::pipeline::{parse_predictions, write_predictions, PredictionRow};

const SMALL: &str = "epochs = 2\nd_model = 16\nn_heads = 2\nn_layers = 1\nd_ff = 32\nmax_len = 24\n";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exist-cascade"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

/// Synthetic data plus one trained model directory, shared by every test.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        std::fs::write(root.join("small.conf"), SMALL).unwrap();
        ok(&[
            "synth",
            "--out",
            s(&root.join("data")),
            "--per-language",
            "80",
            "--seed",
            "3",
        ]);
        let train_log = ok(&[
            "train",
            "--config",
            s(&root.join("small.conf")),
            "--train",
            s(&root.join("data/train.tsv")),
            "--out",
            s(&root.join("models")),
        ]);
        assert!(train_log.contains("task1 en seed=1 epoch=1 "), "{train_log}");
        Fixture { _dir: dir, root }
    })
}

#[test]
fn train_writes_eight_checkpoints_and_manifests() {
    let f = fixture();
    let mut names: Vec<String> = std::fs::read_dir(f.path("models"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names.iter().filter(|n| n.ends_with(".ckpt")).count(), 8);
    for want in [
        "task1.en.manifest",
        "task2.es.manifest",
        "vocab.en.txt",
        "vocab.es.txt",
        "run.config",
    ] {
        assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
    }
    let manifest = std::fs::read_to_string(f.path("models/task2.en.manifest")).unwrap();
    assert_eq!(manifest.lines().filter(|l| l.starts_with("member")).count(), 1);
}

#[test]
fn epoch_lines_come_in_seed_order() {
    let f = fixture();
    let log = ok(&[
        "train",
        "--config",
        s(&f.path("small.conf")),
        "--set",
        "seeds=9,4",
        "--train",
        s(&f.path("data/train.tsv")),
        "--out",
        s(&f.path("models-order")),
    ]);
    let seeds: Vec<&str> = log
        .lines()
        .filter(|l| l.starts_with("task1 en seed=") && l.contains(" epoch="))
        .map(|l| &l["task1 en ".len()..l.find(" epoch=").unwrap()])
        .collect();
    assert_eq!(seeds, ["seed=9", "seed=9", "seed=4", "seed=4"]);
}

#[test]
fn predictions_cover_every_row_and_respect_the_cascade() {
    let f = fixture();
    let input = load_tsv(f.path("data/test.tsv"), true).unwrap();
    let ten = &input[..10];
    std::fs::write(f.path("ten.tsv"), write_tsv(ten, false).unwrap()).unwrap();
    ok(&[
        "predict",
        "--models",
        s(&f.path("models")),
        "--input",
        s(&f.path("ten.tsv")),
        "--out",
        s(&f.path("pred10")),
    ]);
    let rows = parse_predictions(&std::fs::read_to_string(f.path("pred10/predictions.tsv")).unwrap()).unwrap();
    assert_eq!(
        rows.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(),
        ten.iter().map(|r| r.id.as_str()).collect::<Vec<_>>()
    );
    for r in rows {
        assert_eq!(r.task1 == Task1Label::NonSexist, r.task2 == Task2Label::NonSexist);
    }
}

#[test]
fn unreadable_checkpoint_fails_without_output() {
    let f = fixture();
    let broken = f.path("broken-models");
    std::fs::create_dir_all(&broken).unwrap();
    for e in std::fs::read_dir(f.path("models")).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), broken.join(e.file_name())).unwrap();
    }
    std::fs::write(broken.join("task1.es.seed2.ckpt"), b"garbage").unwrap();
    let out_dir = f.path("pred-broken");
    let out = run(&[
        "predict",
        "--models",
        s(&broken),
        "--input",
        s(&f.path("data/test.tsv")),
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("task1.es.seed2.ckpt"));
    assert!(!out_dir.join("predictions.tsv").exists());
}

#[test]
fn perfect_predictions_score_one_and_row_order_is_irrelevant() {
    let f = fixture();
    let gold = load_tsv(f.path("data/test.tsv"), true).unwrap();
    let mut rows: Vec<PredictionRow> = gold
        .iter()
        .map(|r| PredictionRow {
            id: r.id.clone(),
            task1: r.task1.unwrap(),
            task2: r.task2.unwrap(),
        })
        .collect();
    std::fs::write(f.path("perfect.tsv"), write_predictions(&rows)).unwrap();
    let report = ok(&[
        "evaluate",
        "--gold",
        s(&f.path("data/test.tsv")),
        "--predictions",
        s(&f.path("perfect.tsv")),
    ]);
    assert!(report.starts_with("task=task1\naccuracy=1.000000\n"), "{report}");
    assert!(report.contains("task=task2\naccuracy=1.000000\n"));
    assert!(report.contains("slice=en\n") && report.contains("slice=es\n"));

    rows.reverse();
    std::fs::write(f.path("perfect-rev.tsv"), write_predictions(&rows)).unwrap();
    let again = ok(&[
        "evaluate",
        "--gold",
        s(&f.path("data/test.tsv")),
        "--predictions",
        s(&f.path("perfect-rev.tsv")),
    ]);
    assert_eq!(report, again);
}

#[test]
fn evaluate_json_and_alignment_errors() {
    let f = fixture();
    let pred_dir = f.path("pred-json");
    ok(&[
        "predict",
        "--models",
        s(&f.path("models")),
        "--input",
        s(&f.path("data/test.tsv")),
        "--out",
        s(&pred_dir),
    ]);
    let preds = pred_dir.join("predictions.tsv");
    let json = ok(&[
        "evaluate",
        "--gold",
        s(&f.path("data/test.tsv")),
        "--predictions",
        s(&preds),
        "--format",
        "json",
        "--out",
        s(&f.path("report")),
    ]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["task2"]["labels"].as_array().unwrap().len(), 6);
    assert!(v["task1"]["slices"]["es"]["accuracy"].is_f64());
    assert_eq!(std::fs::read_to_string(f.path("report/report.json")).unwrap(), json);

    let mut text = std::fs::read_to_string(&preds).unwrap();
    text.push_str("stray\tsexist\tobjectification\n");
    std::fs::write(f.path("stray.tsv"), text).unwrap();
    let out = run(&[
        "evaluate",
        "--gold",
        s(&f.path("data/test.tsv")),
        "--predictions",
        s(&f.path("stray.tsv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stray"));
}

#[test]
fn missing_task2_labels_are_reported() {
    let f = fixture();
    let tsv = std::fs::read_to_string(f.path("data/train.tsv")).unwrap();
    let mut lines: Vec<String> = tsv.lines().map(String::from).collect();
    // blank the task2 field of the first data row
    let mut fields: Vec<&str> = lines[1].split('\t').collect();
    let t2 = lines[0].split('\t').position(|c| c == "task2").unwrap();
    fields[t2] = "";
    lines[1] = fields.join("\t");
    std::fs::write(f.path("unlabeled.tsv"), lines.join("\n") + "\n").unwrap();
    let out = run(&[
        "train",
        "--train",
        s(&f.path("unlabeled.tsv")),
        "--out",
        s(&f.path("never")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("task2"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!f.path("never").exists());
}

#[test]
fn simulate_table() {
    let a = ok(&["simulate", "--k", "1,3,5", "--trials", "20000", "--seed", "4"]);
    assert_eq!(a, ok(&["simulate", "--k", "1,3,5", "--trials", "20000", "--seed", "4"]));
    let rows: Vec<Vec<f64>> = a
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[1][1] >= w[0][1] - 0.01));

    let shared = ok(&[
        "simulate",
        "--k",
        "1,3,5,7",
        "--correlation",
        "1",
        "--p",
        "0.6",
        "--trials",
        "20000",
    ]);
    for line in shared.lines().skip(1) {
        let est: f64 = line.split('\t').nth(1).unwrap().parse().unwrap();
        assert!((est - 0.6).abs() < 0.02, "{line}");
    }

    let even = run(&["simulate", "--k", "1,4"]);
    assert_eq!(even.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&even.stderr).contains("odd"));
}

#[test]
fn config_errors_exit_with_one() {
    let f = fixture();
    for args in [
        vec!["simulate", "--set", "colour=red"],
        vec!["simulate", "--set", "trials=lots"],
        vec!["train", "--out", "x"],
        vec![
            "predict",
            "--models",
            "/nonexistent/models",
            "--input",
            "x",
            "--out",
            "y",
        ],
        vec!["frobnicate"],
    ] {
        assert_eq!(run(&args).status.code(), Some(1), "{args:?}");
    }
    std::fs::write(f.path("bad.conf"), "epochs = 2\nepochs = 3\n").unwrap();
    assert_eq!(
        run(&["simulate", "--config", s(&f.path("bad.conf"))]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
