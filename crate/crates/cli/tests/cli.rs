mod common;

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use common::{checked, read_csv, write_json, write_observations, xdep};
use ndarray::Array2;
use serde_json::json;
use xdep_core::corpus::{Corpus, REPORT_ROWS};
use xdep_core::extremes::DependenceTensor;
use xdep_core::rng::StreamKey;
use xdep_core::sim::{simulate, CorrelationModel, MaxStableKind, ProcessSpec, SiteSet};

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn code(out: &std::process::Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tiny_train_config(epochs: usize) -> serde_json::Value {
    let mut cfg = common::small_simulate(15, 25, 25, 150);
    cfg["train"] = json!({
        "dense_units": [32, 16],
        "learning_rate": 0.001,
        "batch_size": 8,
        "max_epochs": epochs,
        "patience": 100
    });
    cfg
}

/// A 50-dataset corpus on 15 sites, shared by the train/evaluate/predict tests.
fn tiny_corpus() -> &'static Path {
    static DIR: OnceLock<std::path::PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = scratch("tiny");
        let cfg = write_json(&dir, "config.json", &tiny_train_config(6));
        checked(xdep(["simulate", "--config", cfg.to_str().unwrap(), "--seed", "11", "--out", dir.to_str().unwrap()]));
        dir
    })
}

/// A model trained on [`tiny_corpus`].
fn tiny_model() -> &'static Path {
    static DIR: OnceLock<std::path::PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let corpus = tiny_corpus().join("corpus");
        let dir = scratch("tiny-model");
        let cfg = write_json(&dir, "config.json", &tiny_train_config(6));
        checked(xdep([
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "3",
            "--corpus",
            corpus.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ]));
        dir
    })
}

fn field(spec: &ProcessSpec, sites: &SiteSet, n: usize, seed: u64) -> Array2<f64> {
    simulate(spec, sites, n, StreamKey::new(seed, 0)).unwrap().values
}

#[test]
fn missing_seed_is_a_config_error_naming_the_field() {
    let dir = scratch("no-seed");
    let out = xdep(["simulate", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("`seed`"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&xdep(["bogus"])), 2);
    assert_eq!(code(&xdep(["train", "--threads", "many"])), 2);
    assert_eq!(code(&xdep(["--help"])), 0);
    let dir = scratch("bad-config");
    let cfg = write_json(&dir, "c.json", &json!({"simulate": {"scenaro": 3}}));
    let out = xdep(["simulate", "--config", cfg.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn missing_files_exit_3() {
    let dir = scratch("missing");
    let out = xdep(["train", "--seed", "1", "--corpus", dir.join("nowhere").to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let out = xdep([
        "predict",
        "--model",
        dir.join("none.xnn").to_str().unwrap(),
        "--observations",
        dir.join("none.csv").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn diverging_training_is_a_numerical_failure() {
    let corpus = tiny_corpus().join("corpus");
    let dir = scratch("diverge");
    let mut cfg = tiny_train_config(3);
    cfg["train"]["learning_rate"] = json!(1e300);
    let cfg = write_json(&dir, "c.json", &cfg);
    let out = xdep(["train", "--config", cfg.to_str().unwrap(), "--seed", "1", "--corpus", corpus.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn simulate_is_reproducible_and_lists_the_grid() {
    let a = tiny_corpus().join("corpus");
    let dir = scratch("tiny-again");
    let cfg = write_json(&dir, "config.json", &tiny_train_config(6));
    let out = checked(xdep(["simulate", "--config", cfg.to_str().unwrap(), "--seed", "11", "--out", dir.to_str().unwrap()]));
    let b = dir.join("corpus");
    for file in ["manifest.json", "tensors.bin"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("scale: 0.1, 0.3, 0.5, 0.7, 0.9, 1"), "{stdout}");
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    let grid = &manifest["spec"]["parameters"];
    assert_eq!(grid["scale"].as_array().unwrap().len(), 6);
    assert_eq!(grid["smoothness"].as_array().unwrap().len(), 10);
    let resolved: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("resolved-config.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 11);
    assert_eq!(resolved["simulate"]["threshold"], 0.975);
}

#[test]
fn train_writes_model_and_history() {
    let dir = tiny_model();
    assert_eq!(&fs::read(dir.join("model.xnn")).unwrap()[..4], b"XNN1");
    let (header, rows) = read_csv(&dir.join("history.csv"));
    assert_eq!(header, ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]);
    assert_eq!(rows.len(), 6);
    let loss = |r: &Vec<String>| r[1].parse::<f64>().unwrap();
    assert!(loss(&rows[5]) < loss(&rows[0]), "{rows:?}");
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let corpus = tiny_corpus().join("corpus");
    let dir = scratch("resume");
    let run = |sub: &str, epochs: usize, resume: bool| {
        let out_dir = dir.join(sub);
        let cfg = write_json(&dir, &format!("{sub}-{epochs}.json"), &tiny_train_config(epochs));
        let mut args = vec!["train", "--config", cfg.to_str().unwrap(), "--seed", "5", "--corpus", corpus.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
        if resume {
            args.push("--resume");
        }
        checked(xdep(args));
        out_dir
    };
    let full = run("full", 4, false);
    run("split", 2, false);
    let split = run("split", 4, true);
    for file in ["model.xnn", "checkpoint.xnn", "history.csv"] {
        assert_eq!(fs::read(full.join(file)).unwrap(), fs::read(split.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn three_class_config_on_two_class_corpus_exits_2() {
    let corpus = tiny_corpus().join("corpus");
    let dir = scratch("classes");
    let mut cfg = tiny_train_config(1);
    cfg["train"]["classes"] = json!(3);
    let cfg = write_json(&dir, "c.json", &cfg);
    let out = xdep(["train", "--config", cfg.to_str().unwrap(), "--seed", "1", "--corpus", corpus.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("classes"), "{}", stderr(&out));
}

#[test]
fn evaluate_rows_follow_the_report_order() {
    let corpus = tiny_corpus().join("corpus");
    let dir = scratch("evaluate");
    let model = tiny_model().join("model.xnn");
    let out = checked(xdep(["evaluate", "--corpus", corpus.to_str().unwrap(), "--model", model.to_str().unwrap(), "--out", dir.to_str().unwrap()]));
    let (header, rows) = read_csv(&dir.join("evaluation.csv"));
    assert_eq!(header, ["group", "datasets", "loss", "accuracy"]);
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    let expected: Vec<&str> = REPORT_ROWS.iter().copied().filter(|n| names.contains(n)).collect();
    assert_eq!(names, expected);
    assert_eq!(&names[..3], ["training", "validation", "testing"]);
    // No mixtures or held-out groups in this corpus.
    assert!(stderr(&out).contains("different-scale"));
    let text = fs::read_to_string(dir.join("evaluation.txt")).unwrap();
    assert!(text.starts_with("group"));
}

#[test]
fn predict_table_layout_and_low_confidence_flag() {
    let corpus = Corpus::open(&tiny_corpus().join("corpus")).unwrap();
    let coords = corpus.manifest.fixed_sites.clone().unwrap();
    let sites = SiteSet::new(coords.clone()).unwrap();
    let spec = ProcessSpec::MaxStable {
        kind: MaxStableKind::BrownResnick,
        model: CorrelationModel::new(0.5, 1.0).unwrap(),
    };
    let dir = scratch("predict");
    let obs = dir.join("obs.csv");
    write_observations(&obs, &coords, &field(&spec, &sites, 240, 9));
    let mut cfg = json!({"predict": {"block_sizes": [1, 3, 10]}});
    cfg["predict"]["observations"] = json!(obs);
    let cfg = write_json(&dir, "c.json", &cfg);
    let model = tiny_model().join("model.xnn");
    let out = checked(xdep(["predict", "--config", cfg.to_str().unwrap(), "--model", model.to_str().unwrap(), "--out", dir.to_str().unwrap()]));
    let (header, rows) = read_csv(&dir.join("predictions.csv"));
    assert_eq!(header, ["m", "P(AD)", "P(AI)"]);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["1", "3", "10"]);
    for r in &rows {
        let total: f64 = r[1..].iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    // 240 / 10 = 24 blocks is below the 30-block minimum.
    assert!(stderr(&out).contains("m=10"), "{}", stderr(&out));
    let text = fs::read_to_string(dir.join("predictions.txt")).unwrap();
    let flagged: Vec<&str> = text.lines().filter(|l| l.contains("low-confidence")).collect();
    assert_eq!(flagged.len(), 1);
    assert!(flagged[0].starts_with("10 "));
}

#[test]
fn predict_rejects_a_station_count_mismatch() {
    let dir = scratch("predict-mismatch");
    let sites = SiteSet::uniform(6, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1)).unwrap();
    let spec = ProcessSpec::ExtremeGaussian {
        model: CorrelationModel::new(0.5, 1.0).unwrap(),
    };
    let obs = dir.join("obs.csv");
    write_observations(&obs, sites.coords(), &field(&spec, &sites, 100, 2));
    let model = tiny_model().join("model.xnn");
    let out = xdep(["predict", "--model", model.to_str().unwrap(), "--observations", obs.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("15 sites"), "{}", stderr(&out));
}

#[test]
fn featurize_comonotone_stations_give_unit_planes() {
    let dir = scratch("featurize");
    let coords = [[0.0, 0.0], [3.0, 1.0], [1.0, 4.0], [2.0, 2.0]];
    let base: Vec<f64> = (0..400).map(|t| ((t * 7919) % 401) as f64).collect();
    let values = Array2::from_shape_fn((400, 4), |(t, j)| base[t] * (j + 1) as f64 + j as f64);
    let obs = dir.join("obs.csv");
    write_observations(&obs, &coords, &values);
    checked(xdep(["featurize", "--observations", obs.to_str().unwrap(), "--out", dir.to_str().unwrap()]));
    let tensor = DependenceTensor::from_bytes(&fs::read(dir.join("tensor.xdt")).unwrap()).unwrap();
    assert!(tensor.chi.iter().chain(tensor.chibar.iter()).all(|&v| v == 1.0));
    let (header, rows) = read_csv(&dir.join("profile.csv"));
    assert_eq!(header, ["direction", "direction_label", "bin", "h", "chi", "chibar", "pairs"]);
    let pairs: usize = rows.iter().map(|r| r[6].parse::<usize>().unwrap()).sum();
    assert_eq!(pairs, 6);
    let report = fs::read_to_string(dir.join("featurize.txt")).unwrap();
    assert!(report.contains("missing cells: 0"));
}

#[test]
fn featurize_reports_missing_cells() {
    let dir = scratch("featurize-missing");
    let sites = SiteSet::uniform(5, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4)).unwrap();
    let spec = ProcessSpec::ExtremeGaussian {
        model: CorrelationModel::new(0.5, 1.0).unwrap(),
    };
    let mut values = field(&spec, &sites, 300, 8);
    values[[10, 2]] = f64::NAN;
    values[[11, 2]] = f64::NAN;
    let obs = dir.join("obs.csv");
    write_observations(&obs, sites.coords(), &values);
    let out = checked(xdep(["featurize", "--observations", obs.to_str().unwrap(), "--out", dir.to_str().unwrap()]));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("missing cells: 2"), "{stdout}");
    assert!(stdout.contains("s2"), "{stdout}");
    let tensor = DependenceTensor::from_bytes(&fs::read(dir.join("tensor.xdt")).unwrap()).unwrap();
    tensor.check_invariants().unwrap();
}
