//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p xdep-cli --test acceptance -- --nocapture` to see
//! the report.

mod common;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::{checked, read_csv, write_json, write_observations, xdep};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use xdep_core::corpus::Corpus;
use xdep_core::extremes::{empirical_chi, empirical_chibar, UniformScores};
use xdep_core::nn::{
    add_l2_gradient, build_network_with, cross_entropy, l2_penalty, parameter_count, classifier_chain, train, Activation, LayerSpec,
    Network, Shape, Tensor3, TrainConfig, REFERENCE_DENSE_UNITS,
};
use xdep_core::rng::StreamKey;
use xdep_core::sim::{invert_frechet, simulate, CorrelationModel, MaxStableKind, ProcessSpec, SiteSet};

/// Desk-scale scenario-3 run shared by criteria 6 to 9.
const DESK_SITES: usize = 15;
const DESK_REPS: usize = 500;
const DESK_PER_CLASS: usize = 1000;
const DESK_DENSE: [usize; 2] = [512, 256];
const DESK_LEARNING_RATE: f64 = 1e-4;
const DESK_PATIENCE: usize = 5;
const DESK_SEED: u64 = 2024;

/// Thresholds on the outcome of the one desk-scale training run. Their
/// verdicts are printed but do not fail the test.
const REPORTED_ONLY: [usize; 3] = [7, 8, 9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn workdir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn architecture() -> Outcome {
    let count = |d| parameter_count(Shape::new(d, d, 2), &classifier_chain(2, REFERENCE_DENSE_UNITS)).unwrap();
    let (c30, c40) = (count(30), count(40));
    outcome(c30 == 17_674_306 && c40 == 45_199_426, format!("30x30x2: {c30}, 40x40x2: {c40}"))
}

fn unit_frechet<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    -1.0 / u.ln()
}

fn estimator_identities() -> Outcome {
    const N: usize = 1_000_000;
    const U: f64 = 0.975;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let independent = Array2::from_shape_simple_fn((N, 2), || unit_frechet(&mut rng));
    let mut comonotone = Array2::zeros((N, 2));
    for i in 0..N {
        let x = unit_frechet(&mut rng);
        comonotone[[i, 0]] = x;
        comonotone[[i, 1]] = x;
    }
    let estimates = |values: &Array2<f64>| {
        let s = UniformScores::from_values(values);
        (
            empirical_chi(s.column(0), s.column(1), U).unwrap().value,
            empirical_chibar(s.column(0), s.column(1), U).unwrap().value,
        )
    };
    let (chi_i, chibar_i) = estimates(&independent);
    let (chi_c, chibar_c) = estimates(&comonotone);
    outcome(
        chi_i.abs() <= 0.05 && chibar_i.abs() <= 0.05 && chi_c == 1.0 && chibar_c == 1.0,
        format!("independent chi {chi_i:.4} chibar {chibar_i:.4}; comonotone chi {chi_c} chibar {chibar_c}"),
    )
}

fn inversion_involution() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1_000_000 {
        // Log-uniform over fourteen decades around the unit Fréchet bulk.
        let x = 10f64.powf(rng.random_range(-2.0..12.0));
        let back = invert_frechet(invert_frechet(x));
        worst = worst.max(((back - x) / x).abs());
    }
    outcome(worst < 1e-9, format!("max relative error {worst:.2e} over 1e6 values in [1e-2, 1e12]"))
}

fn gradient_check() -> Outcome {
    const H: f64 = 1e-5;
    const L2: f64 = 5e-5;
    const FLOOR: f64 = 1e-6;
    let specs = [
        LayerSpec::Conv2D {
            filters: 4,
            kernel: [3, 3],
            stride: [2, 2],
            activation: Activation::Relu,
        },
        LayerSpec::MaxPool2D { pool: [2, 2], stride: [1, 1] },
        LayerSpec::Conv2D {
            filters: 3,
            kernel: [3, 3],
            stride: [1, 1],
            activation: Activation::Relu,
        },
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 6, activation: Activation::Relu },
        LayerSpec::Dense { units: 2, activation: Activation::Identity },
        LayerSpec::Softmax,
    ];
    let shape = Shape::new(13, 13, 2);
    let results: Vec<(f64, usize, usize)> = (0..100u64)
        .into_par_iter()
        .map(|instance| {
            let net = Network::new(shape, &specs, 100 + instance).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(instance);
            let x = Tensor3::new(13, 13, 2, (0..338).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let label = rng.random_range(0..2);
            let objective = |n: &Network| {
                let trace = n.forward_trace(&x).unwrap();
                (cross_entropy(trace.probabilities(), label) + l2_penalty(n, L2), trace.activation_pattern(n))
            };
            let pattern = objective(&net).1;
            let mut grads = net.gradient(&x, label).unwrap();
            add_l2_gradient(&net, L2, &mut grads);
            let (mut worst, mut checked, mut skipped) = (0.0f64, 0usize, 0usize);
            for li in 0..net.layers().len() {
                for (is_bias, len) in [(false, net.layers()[li].weights.len()), (true, net.layers()[li].biases.len())] {
                    for k in 0..len {
                        let nudged = |delta: f64| {
                            let mut n = net.clone();
                            let layer = &mut n.layers_mut()[li];
                            if is_bias {
                                layer.biases[k] += delta;
                            } else {
                                layer.weights[k] += delta;
                            }
                            objective(&n)
                        };
                        let ((plus, p_plus), (minus, p_minus)) = (nudged(H), nudged(-H));
                        if p_plus != pattern || p_minus != pattern {
                            skipped += 1;
                            continue;
                        }
                        let numeric = (plus - minus) / (2.0 * H);
                        let analytic = if is_bias { grads.biases[li][k] } else { grads.weights[li][k] };
                        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(FLOOR);
                        worst = worst.max(rel);
                        checked += 1;
                    }
                }
            }
            (worst, checked, skipped)
        })
        .collect();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let checked: usize = results.iter().map(|r| r.1).sum();
    let skipped: usize = results.iter().map(|r| r.2).sum();
    let skip_rate = skipped as f64 / (checked + skipped) as f64;
    outcome(
        worst < 1e-4 && skip_rate < 0.01,
        format!("max relative error {worst:.2e} over {checked} parameter checks; {skipped} skipped at activation kinks"),
    )
}

fn ks_frechet(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (-1.0 / x).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn marginal_law() -> Outcome {
    const N: usize = 100_000;
    let sites = SiteSet::uniform(8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let model = CorrelationModel::new(0.5, 1.0).unwrap();
    let mut specs: Vec<ProcessSpec> = MaxStableKind::ALL
        .iter()
        .flat_map(|&kind| [ProcessSpec::MaxStable { kind, model }, ProcessSpec::Inverted { kind, model }])
        .collect();
    specs.push(ProcessSpec::ExtremeGaussian { model });
    specs.push(
        ProcessSpec::mixture(
            0.5,
            ProcessSpec::MaxStable {
                kind: MaxStableKind::BrownResnick,
                model,
            },
            ProcessSpec::Inverted {
                kind: MaxStableKind::Schlather,
                model,
            },
        )
        .unwrap(),
    );
    let worst: Vec<(String, f64)> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let sample = simulate(spec, &sites, N, StreamKey::new(77, i as u64)).unwrap();
            let ks = (0..sites.len()).map(|j| ks_frechet(sample.values.column(j).to_vec())).fold(0.0, f64::max);
            (format!("{:?}", spec.family()), ks)
        })
        .collect();
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let detail = worst.iter().map(|(f, ks)| format!("{f} {ks:.4}")).collect::<Vec<_>>().join(", ");
    outcome(max < 0.01, format!("max KS distance {max:.4} ({detail})"))
}

struct DeskRun {
    dir: PathBuf,
    rows: HashMap<String, (usize, f64)>,
}

fn desk_run() -> DeskRun {
    let dir = workdir("desk");
    let cfg = json!({
        "simulate": {
            "scenario": 3,
            "sites": DESK_SITES,
            "datasets": {"ad": DESK_PER_CLASS, "ai": DESK_PER_CLASS},
            "n_reps": DESK_REPS
        },
        "train": {
            "dense_units": DESK_DENSE,
            "learning_rate": DESK_LEARNING_RATE,
            "patience": DESK_PATIENCE
        }
    });
    let cfg = write_json(&dir, "config.json", &cfg);
    let seed = DESK_SEED.to_string();
    let args = |cmd: &str| vec![cmd.to_string(), "--config".into(), cfg.display().to_string(), "--seed".into(), seed.clone(), "--out".into(), dir.display().to_string()];
    for cmd in ["simulate", "train", "evaluate"] {
        let t = Instant::now();
        checked(xdep(args(cmd)));
        println!("  desk run: {cmd} took {:.0?}", t.elapsed());
    }
    let (_, rows) = read_csv(&dir.join("evaluation.csv"));
    let rows = rows
        .into_iter()
        .map(|r| (r[0].clone(), (r[1].parse().unwrap(), r[3].parse().unwrap())))
        .collect();
    DeskRun { dir, rows }
}

fn desk_classification(run: &DeskRun) -> Outcome {
    let (n, acc) = run.rows["testing"];
    outcome(acc >= 0.80, format!("test accuracy {acc:.4} on {n} datasets (floor 0.80)"))
}

fn ai_ordering(run: &DeskRun) -> Outcome {
    let get = |g: &str| run.rows.get(g).copied().unwrap_or((0, f64::NAN));
    let (gn, gauss) = get("Gaussian");
    let (adn, ad) = get("AD");
    let (ain, ai) = get("AI");
    outcome(
        gauss >= 0.90 && ai >= ad,
        format!("extreme-Gaussian {gauss:.4} (n={gn}), AI {ai:.4} (n={ain}), AD {ad:.4} (n={adn})"),
    )
}

fn overfit_capacity(run: &DeskRun) -> Outcome {
    let corpus = Corpus::open(&run.dir.join("corpus")).unwrap();
    // 25 tensors of each class, in split order.
    let m = &corpus.manifest;
    let picked: Vec<usize> = (0..2)
        .flat_map(|class| m.split.training.iter().copied().filter(move |&i| m.records[i].label.index() == class).take(25))
        .collect();
    let data = corpus.labeled(&picked).unwrap();
    let cfg = TrainConfig {
        max_epochs: 200,
        patience: 200,
        ..TrainConfig::default()
    };
    let net = build_network_with(DESK_SITES, 2, DESK_DENSE, 8).unwrap();
    // Validating on the training tensors makes `val_acc` the exact training accuracy.
    let progress = train(net, &data, &data, &cfg, 8).unwrap();
    let first = progress.history.iter().find(|r| r.val_acc == 1.0).map(|r| r.epoch);
    let best = progress.history.iter().map(|r| r.val_acc).fold(0.0, f64::max);
    match first {
        Some(e) => outcome(true, format!("training accuracy 1.0 at epoch {e}")),
        None => outcome(false, format!("best training accuracy {best:.3} after 200 epochs")),
    }
}

fn closed_loop(run: &DeskRun) -> Outcome {
    const TRIALS: u64 = 100;
    let corpus = Corpus::open(&run.dir.join("corpus")).unwrap();
    let coords = corpus.manifest.fixed_sites.clone().unwrap();
    let sites = SiteSet::new(coords.clone()).unwrap();
    let model = CorrelationModel::new(0.5, 1.0).unwrap();
    let dir = workdir("closed-loop");
    let cfg = write_json(&dir, "config.json", &json!({"predict": {"block_sizes": [1]}}));
    let model_path = run.dir.join("model.xnn");
    let mut hits = [0u64; 2];
    for (class, spec) in [
        ProcessSpec::MaxStable {
            kind: MaxStableKind::BrownResnick,
            model,
        },
        ProcessSpec::Inverted {
            kind: MaxStableKind::BrownResnick,
            model,
        },
    ]
    .iter()
    .enumerate()
    {
        for trial in 0..TRIALS {
            let values = simulate(spec, &sites, DESK_REPS, StreamKey::new(9_000 + trial, class as u64)).unwrap().values;
            let obs = dir.join("obs.csv");
            write_observations(&obs, &coords, &values);
            let out = dir.join("out");
            checked(xdep([
                "predict",
                "--config",
                cfg.to_str().unwrap(),
                "--model",
                model_path.to_str().unwrap(),
                "--observations",
                obs.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ]));
            let (_, rows) = read_csv(&out.join("predictions.csv"));
            let p: f64 = rows[0][1 + class].parse().unwrap();
            hits[class] += u64::from(p > 0.9);
        }
    }
    let need = TRIALS * 95 / 100;
    outcome(
        hits[0] >= need && hits[1] >= need,
        format!("P(true class) > 0.9 in {}/{TRIALS} Brown-Resnick and {}/{TRIALS} inverted Brown-Resnick trials", hits[0], hits[1]),
    )
}

fn determinism() -> Outcome {
    let dir = workdir("determinism");
    let mut cfg = common::small_simulate(15, 50, 50, 200);
    cfg["train"] = json!({"dense_units": [64, 32], "batch_size": 8, "max_epochs": 2, "learning_rate": 0.001});
    let cfg = write_json(&dir, "config.json", &cfg);
    let mut digests = Vec::new();
    for threads in ["1", "4", "8"] {
        let out = dir.join(format!("threads-{threads}"));
        for cmd in ["simulate", "train"] {
            checked(xdep([cmd, "--config", cfg.to_str().unwrap(), "--seed", "31", "--threads", threads, "--out", out.to_str().unwrap()]));
        }
        let files = ["corpus/manifest.json", "corpus/tensors.bin", "model.xnn", "checkpoint.xnn", "history.csv"];
        digests.push(files.map(|f| fs::read(out.join(f)).unwrap()));
    }
    let same = digests.windows(2).all(|w| w[0] == w[1]);
    outcome(same, "corpus, model, checkpoint and history bytes compared at 1, 4 and 8 threads")
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut timed = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let mut o = f();
        o.detail = format!("{} [{:.1?}]", o.detail, t.elapsed());
        println!("{} criterion {id} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    timed(1, "architecture fidelity", &mut architecture);
    timed(2, "estimator identities", &mut estimator_identities);
    timed(3, "inversion involution", &mut inversion_involution);
    timed(4, "gradient correctness", &mut gradient_check);
    timed(5, "marginal law", &mut marginal_law);
    let start = Instant::now();
    let run = desk_run();
    println!("  desk run ready after {:.0?}", start.elapsed());
    timed(6, "overfit capacity", &mut || overfit_capacity(&run));
    timed(7, "desk-scale classification", &mut || desk_classification(&run));
    timed(8, "AI-recognition ordering", &mut || ai_ordering(&run));
    timed(9, "closed-loop prediction", &mut || closed_loop(&run));
    timed(10, "determinism", &mut determinism);

    println!("\nacceptance summary");
    for (id, name, o) in &results {
        let note = if REPORTED_ONLY.contains(id) { " (reported, not asserted)" } else { "" };
        println!("{} {id:>2} {name}{note}", if o.pass { "PASS" } else { "FAIL" });
    }
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.2.pass && !REPORTED_ONLY.contains(&r.0))
        .map(|r| format!("{} ({})", r.0, r.1))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
