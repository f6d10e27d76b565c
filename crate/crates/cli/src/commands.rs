//! The five subcommands. Each writes its outputs and `resolved-config.json`
//! into the configured output directory and prints a short report.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use xdep_core::corpus::{evaluate_model, generate_corpus, Corpus, CorpusManifest, Group, ParameterPolicy};
use xdep_core::extremes::{
    block_maxima, dependence_tensor, directional_tail_profile, moving_average_residuals, rank_transform_frechet, DependenceTensor,
    QualityReport, UniformScores, DIRECTION_LABELS,
};
use xdep_core::nn::{build_network_with, load_network, predict as classify, resume, save_network, train as fit, EpochRecord, Network, TrainProgress};
use xdep_core::sim::DependenceClass;

use crate::config::RunConfig;
use crate::error::{io_at, CliError, CliResult};
use crate::observations::ObservationTable;
use crate::report::TextTable;

pub const CORPUS_DIR: &str = "corpus";
pub const MODEL_FILE: &str = "model.xnn";
pub const CHECKPOINT_FILE: &str = "checkpoint.xnn";
pub const HISTORY_FILE: &str = "history.csv";
pub const EVALUATION_CSV: &str = "evaluation.csv";
pub const EVALUATION_TXT: &str = "evaluation.txt";
pub const PREDICTIONS_CSV: &str = "predictions.csv";
pub const PREDICTIONS_TXT: &str = "predictions.txt";
pub const TENSOR_FILE: &str = "tensor.xdt";
pub const PROFILE_CSV: &str = "profile.csv";
pub const FEATURIZE_TXT: &str = "featurize.txt";
pub const SUMMARY_TXT: &str = "summary.txt";

fn prepare_out(cfg: &RunConfig) -> CliResult<&Path> {
    fs::create_dir_all(&cfg.out).map_err(io_at(&cfg.out))?;
    cfg.write_resolved(&cfg.out)?;
    Ok(&cfg.out)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(io_at(path))
}

fn required(path: &Option<PathBuf>, field: &str) -> CliResult<PathBuf> {
    path.clone()
        .ok_or_else(|| CliError::Config(format!("missing required field `{field}` (set it in the config or on the command line)")))
}

fn open_corpus(dir: &Path) -> CliResult<Corpus> {
    if !dir.join(xdep_core::corpus::MANIFEST_FILE).is_file() {
        return Err(CliError::Io(format!("{}: no corpus manifest found", dir.display())));
    }
    Corpus::open(dir).map_err(CliError::from)
}

fn class_names(classes: usize) -> Vec<&'static str> {
    DependenceClass::ALL[..classes].iter().map(|c| c.short_name()).collect()
}

fn manifest_summary(m: &CorpusManifest) -> String {
    let mut text = format!(
        "corpus: scenario {}, seed {}, {} sites, {} replications per dataset, u = {}\n",
        m.scenario, m.seed, m.sites, m.n_reps, m.threshold
    );
    let mut by_class = TextTable::new(["class", "datasets"]);
    for (c, n) in m.label_histogram() {
        by_class.push(vec![c.short_name().into(), n.to_string()]);
    }
    text += &by_class.render();
    let mut by_family = TextTable::new(["group", "family", "datasets"]);
    let mut keys: Vec<(Group, String)> = m.records.iter().map(|r| (r.group, format!("{:?}", r.family))).collect();
    keys.sort();
    keys.dedup();
    for (g, f) in keys {
        let n = m.records.iter().filter(|r| r.group == g && format!("{:?}", r.family) == f).count();
        by_family.push(vec![g.name().into(), f, n.to_string()]);
    }
    text += "\n";
    text += &by_family.render();
    text += &format!(
        "\nsplit: {} training, {} validation, {} testing, {} evaluation\n",
        m.split.training.len(),
        m.split.validation.len(),
        m.split.testing.len(),
        m.split.evaluation.len()
    );
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");
    match &m.spec.parameters {
        ParameterPolicy::Grid { scale, smoothness, mixing } => {
            text += &format!("parameter grid:\n  scale: {}\n  smoothness: {}\n", fmt(scale), fmt(smoothness));
            if m.classes == 3 {
                text += &format!("  mixing: {}\n", fmt(mixing));
            }
        }
        ParameterPolicy::Random { scale, smoothness, mixing } => {
            text += &format!(
                "parameters uniform on: scale [{}, {}], smoothness [{}, {}]",
                scale[0], scale[1], smoothness[0], smoothness[1]
            );
            if m.classes == 3 {
                text += &format!(", mixing [{}, {}]", mixing[0], mixing[1]);
            }
            text += "\n";
        }
    }
    let approximate: usize = m.records.iter().map(|r| r.approximate_reps).sum();
    if approximate > 0 {
        text += &format!("replications truncated by the storm budget: {approximate}\n");
    }
    for w in &m.warnings {
        text += &format!("warning: {w}\n");
    }
    text
}

pub fn simulate(cfg: &RunConfig) -> CliResult<()> {
    let seed = cfg.require_seed()?;
    let spec = cfg.simulate.scenario_spec()?;
    let out = prepare_out(cfg)?;
    let dir = out.join(CORPUS_DIR);
    let manifest = generate_corpus(&spec, seed, &dir)?;
    let summary = manifest_summary(&manifest);
    write_text(&out.join(SUMMARY_TXT), &summary)?;
    print!("{summary}");
    Ok(())
}

fn write_history(path: &Path, history: &[EpochRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    if history.is_empty() {
        w.write_record(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])?;
    }
    for r in history {
        w.serialize(r)?;
    }
    w.flush().map_err(io_at(path))
}

fn read_history(path: &Path) -> CliResult<Vec<EpochRecord>> {
    let file = fs::File::open(path).map_err(io_at(path))?;
    let mut r = csv::Reader::from_reader(file);
    let history: Vec<EpochRecord> = r
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if history.iter().enumerate().any(|(i, rec)| rec.epoch != i + 1) {
        return Err(CliError::Config(format!("{}: epochs must run 1, 2, ... without gaps", path.display())));
    }
    Ok(history)
}

pub fn train(cfg: &RunConfig) -> CliResult<()> {
    let seed = cfg.require_seed()?;
    let t = &cfg.train;
    let tc = t.train_config();
    tc.validate().map_err(CliError::from)?;
    let corpus = open_corpus(&required(&t.corpus, "train.corpus")?)?;
    let m = &corpus.manifest;
    if t.classes != m.classes {
        return Err(CliError::Config(format!(
            "train.classes is {} but the corpus labels span {} classes; labels and network outputs would not match",
            t.classes, m.classes
        )));
    }
    if m.split.training.is_empty() || m.split.validation.is_empty() {
        return Err(CliError::Config("corpus has an empty training or validation split".into()));
    }
    let out = prepare_out(cfg)?;
    let train_set = corpus.labeled(&m.split.training)?;
    let val_set = corpus.labeled(&m.split.validation)?;
    let progress = if t.resume {
        let last = load_network(&out.join(CHECKPOINT_FILE))?;
        let best = load_network(&out.join(MODEL_FILE))?;
        let history = read_history(&out.join(HISTORY_FILE))?;
        if last.input_shape() != best.input_shape() || last.input_shape().height != m.sites {
            return Err(CliError::Config("saved networks do not match the corpus input size".into()));
        }
        log::info!("resuming after epoch {}", history.len());
        resume(TrainProgress { best, last, history }, &train_set, &val_set, &tc, seed)?
    } else {
        let net = build_network_with(m.sites, t.classes, t.dense_units, seed)?;
        log::info!("network with {} parameters", net.parameter_count());
        fit(net, &train_set, &val_set, &tc, seed)?
    };
    save_network(&progress.best, &out.join(MODEL_FILE))?;
    save_network(&progress.last, &out.join(CHECKPOINT_FILE))?;
    write_history(&out.join(HISTORY_FILE), &progress.history)?;
    let mut table = TextTable::new(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]);
    for r in &progress.history {
        table.push(vec![
            r.epoch.to_string(),
            format!("{:.4}", r.train_loss),
            format!("{:.4}", r.train_acc),
            format!("{:.4}", r.val_loss),
            format!("{:.4}", r.val_acc),
        ]);
    }
    print!("{}", table.render());
    println!("best epoch: {} of {}", progress.best_epoch(), progress.history.len());
    Ok(())
}

fn check_input(net: &Network, d: usize, what: &str) -> CliResult<()> {
    let shape = net.input_shape();
    if shape.height != d {
        return Err(CliError::Config(format!(
            "model expects {} sites but {what} has {d}",
            shape.height
        )));
    }
    Ok(())
}

pub fn evaluate(cfg: &RunConfig) -> CliResult<()> {
    let e = &cfg.evaluate;
    let corpus = open_corpus(&required(&e.corpus, "evaluate.corpus")?)?;
    let net = load_network(&required(&e.model, "evaluate.model")?)?;
    check_input(&net, corpus.manifest.sites, "the corpus")?;
    let out = prepare_out(cfg)?;
    let report = evaluate_model(&net, &corpus, e.l2)?;
    let path = out.join(EVALUATION_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["group", "datasets", "loss", "accuracy"])?;
    let mut table = TextTable::new(["group", "datasets", "loss", "accuracy"]);
    for r in &report.rows {
        w.write_record([r.group.clone(), r.datasets.to_string(), r.loss.to_string(), r.accuracy.to_string()])?;
        table.push(vec![r.group.clone(), r.datasets.to_string(), format!("{:.4}", r.loss), format!("{:.4}", r.accuracy)]);
    }
    w.flush().map_err(io_at(&path))?;
    let mut text = table.render();
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
        text += &format!("warning: {warning}\n");
    }
    write_text(&out.join(EVALUATION_TXT), &text)?;
    print!("{text}");
    Ok(())
}

/// One row of the per-block-size prediction table.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPrediction {
    pub block_size: usize,
    pub blocks: usize,
    pub class: DependenceClass,
    pub probabilities: Vec<f64>,
    pub low_confidence: bool,
    pub quality: QualityReport,
}

fn featurize_values(values: &Array2<f64>, window: Option<usize>, block: usize, u: f64) -> CliResult<(UniformScores, DependenceTensor, QualityReport)> {
    let residuals = match window {
        Some(w) => moving_average_residuals(values, w)?,
        None => values.clone(),
    };
    let n = residuals.nrows();
    if block == 0 || n / block.max(1) < 2 {
        return Err(CliError::Config(format!("block size {block} leaves fewer than 2 blocks of {n} observations")));
    }
    let maxima = block_maxima(&residuals, block)?;
    let scores = UniformScores::from_frechet(&rank_transform_frechet(&maxima)?);
    let (tensor, quality) = dependence_tensor(&scores, u)?;
    Ok((scores, tensor, quality))
}

/// Classifies `table` once per block size.
pub fn predict_blocks(net: &Network, table: &ObservationTable, block_sizes: &[usize], window: Option<usize>, u: f64, min_blocks: usize) -> CliResult<Vec<BlockPrediction>> {
    check_input(net, table.stations.len(), "the observation table")?;
    let n = table.times.len();
    block_sizes
        .iter()
        .map(|&m| {
            let (_, tensor, quality) = featurize_values(&table.values, window, m, u)?;
            let (class, probabilities) = classify(net, &tensor.to_input())?;
            let blocks = n / m;
            Ok(BlockPrediction {
                block_size: m,
                blocks,
                class: DependenceClass::from_index(class).expect("class index within the network outputs"),
                probabilities,
                low_confidence: blocks < min_blocks,
                quality,
            })
        })
        .collect()
}

pub fn predict(cfg: &RunConfig) -> CliResult<()> {
    let p = &cfg.predict;
    if p.block_sizes.is_empty() {
        return Err(CliError::Config("predict.block_sizes is empty".into()));
    }
    let net = load_network(&required(&p.model, "predict.model")?)?;
    let table = ObservationTable::load(&required(&p.observations, "predict.observations")?)?;
    let rows = predict_blocks(&net, &table, &p.block_sizes, p.moving_average_window, p.threshold, p.min_blocks)?;
    let out = prepare_out(cfg)?;
    let names = class_names(net.classes());
    let path = out.join(PREDICTIONS_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["m".to_string()];
    header.extend(names.iter().map(|c| format!("P({c})")));
    w.write_record(&header)?;
    let mut text_header = vec!["m".to_string(), "blocks".into(), "class".into()];
    text_header.extend(names.iter().map(|c| format!("P({c})")));
    text_header.push("note".into());
    let mut table_txt = TextTable::new(text_header);
    for r in &rows {
        let mut rec = vec![r.block_size.to_string()];
        rec.extend(r.probabilities.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
        if r.low_confidence {
            eprintln!(
                "warning: m={} leaves {} blocks (< {}); prediction flagged low-confidence",
                r.block_size, r.blocks, p.min_blocks
            );
        }
        let mut cells = vec![r.block_size.to_string(), r.blocks.to_string(), r.class.short_name().to_string()];
        cells.extend(r.probabilities.iter().map(|v| format!("{v:.4}")));
        cells.push(if r.low_confidence { "low-confidence".into() } else { String::new() });
        table_txt.push(cells);
    }
    w.flush().map_err(io_at(&path))?;
    let mut text = table_txt.render();
    let missing = table.missing_cells();
    if missing > 0 {
        text += &format!("missing cells: {missing} (pairs use replications where both stations are present)\n");
    }
    write_text(&out.join(PREDICTIONS_TXT), &text)?;
    print!("{text}");
    Ok(())
}

pub fn featurize(cfg: &RunConfig) -> CliResult<()> {
    let f = &cfg.featurize;
    let table = ObservationTable::load(&required(&f.observations, "featurize.observations")?)?;
    if table.stations.len() < 2 {
        return Err(CliError::Config("featurize needs at least 2 stations".into()));
    }
    let sites = table.sites()?;
    let (scores, tensor, quality) = featurize_values(&table.values, f.moving_average_window, f.block_size, f.threshold)?;
    let profile = directional_tail_profile(&scores, &sites, f.threshold, f.profile_bins)?;
    let out = prepare_out(cfg)?;
    let tensor_path = out.join(TENSOR_FILE);
    fs::write(&tensor_path, tensor.to_bytes()).map_err(io_at(&tensor_path))?;
    let path = out.join(PROFILE_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["direction", "direction_label", "bin", "h", "chi", "chibar", "pairs"])?;
    for pt in &profile {
        w.write_record([
            pt.direction.to_string(),
            DIRECTION_LABELS[pt.direction].to_string(),
            pt.bin.to_string(),
            pt.h.to_string(),
            pt.chi.to_string(),
            pt.chibar.to_string(),
            pt.pairs.to_string(),
        ])?;
    }
    w.flush().map_err(io_at(&path))?;

    let mut text = format!(
        "{} stations, {} time points, block size {}, u = {}\n",
        table.stations.len(),
        table.times.len(),
        f.block_size,
        f.threshold
    );
    let missing = table.missing_cells();
    text += &format!("missing cells: {missing}\n");
    if missing > 0 {
        let mut per_station = TextTable::new(["station", "missing"]);
        for (j, s) in table.stations.iter().enumerate() {
            let n = table.values.column(j).iter().filter(|v| v.is_nan()).count();
            if n > 0 {
                per_station.push(vec![s.clone(), n.to_string()]);
            }
        }
        text += &per_station.render();
        text += "pairs use replications where both stations are present\n";
    }
    if !quality.corrected.is_empty() {
        text += &format!("cells with a zero exceedance count (continuity-corrected): {}\n", quality.corrected.len());
    }
    if !quality.undefined.is_empty() {
        text += &format!("cells without a defined estimate: {}\n", quality.undefined.len());
    }
    write_text(&out.join(FEATURIZE_TXT), &text)?;
    print!("{text}");
    Ok(())
}
