use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::adam_step;
use super::loss::{add_l2_gradient, cross_entropy, l2_penalty};
use super::network::{Gradients, Network};
use super::Tensor3;
use crate::rng::{lanes, StreamKey};
use crate::{Error, Result};

/// Samples per parallel work unit. Fixed so the reduction order, and hence
/// every bit of the result, does not depend on the thread count.
const GRAIN: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub classes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            l2: 5e-5,
            batch_size: 32,
            max_epochs: 100,
            patience: 3,
            classes: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("train.{field} {why}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2", "must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs", "must be positive");
        }
        if self.patience == 0 {
            return bad("patience", "must be positive");
        }
        if !(2..=3).contains(&self.classes) {
            return bad("classes", "must be 2 or 3");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTensor {
    pub input: Tensor3,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Minimum-validation-loss tracking with a patience budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.stale = 0;
            StopDecision::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }
}

/// State of a (possibly unfinished) training run.
#[derive(Debug, Clone)]
pub struct TrainProgress {
    /// Network at the epoch with the lowest validation loss.
    pub best: Network,
    /// Network after the latest epoch, with its optimiser state.
    pub last: Network,
    pub history: Vec<EpochRecord>,
}

impl TrainProgress {
    pub fn fresh(net: Network) -> Self {
        Self {
            best: net.clone(),
            last: net,
            history: Vec::new(),
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.stopper(usize::MAX).best_epoch()
    }

    fn stopper(&self, patience: usize) -> EarlyStopping {
        let mut s = EarlyStopping::new(patience);
        for r in &self.history {
            s.observe(r.epoch, r.val_loss);
        }
        s
    }
}

fn check_set(name: &str, set: &[LabeledTensor], net: &Network) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Config(format!("{name} set is empty")));
    }
    for (i, s) in set.iter().enumerate() {
        if s.label >= net.classes() {
            return Err(Error::Config(format!("{name} sample {i} has label {} but the network has {} classes", s.label, net.classes())));
        }
        if s.input.shape() != net.input_shape() {
            return Err(Error::Shape(format!("{name} sample {i} is {} but the network expects {}", s.input.shape(), net.input_shape())));
        }
    }
    Ok(())
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Predicted class and full probability vector; ties go to the lower class index.
pub fn predict(net: &Network, x: &Tensor3) -> Result<(usize, Vec<f64>)> {
    let p = net.forward(x)?;
    Ok((argmax(&p), p))
}

/// Summed cross-entropy gradient, summed loss and hit count of a batch.
fn batch_gradient(net: &Network, batch: &[&LabeledTensor]) -> Result<(Gradients, f64, usize)> {
    let parts: Vec<Result<(Gradients, f64, usize)>> = batch
        .par_chunks(GRAIN)
        .map(|chunk| {
            let mut g = Gradients::zeros_like(net);
            let mut loss = 0.0;
            let mut hits = 0;
            for s in chunk {
                let trace = net.forward_trace(&s.input)?;
                let p = trace.probabilities();
                loss += cross_entropy(p, s.label);
                hits += usize::from(argmax(p) == s.label);
                net.backward_into(&trace, s.label, &mut g)?;
            }
            Ok((g, loss, hits))
        })
        .collect();
    let mut parts = parts.into_iter();
    let (mut total, mut loss, mut hits) = parts.next().expect("batches are non-empty")?;
    for part in parts {
        let (g, l, h) = part?;
        total.add_assign(&g);
        loss += l;
        hits += h;
    }
    Ok((total, loss, hits))
}

/// Mean loss (cross-entropy plus the l2 penalty, counted once) and accuracy.
pub fn evaluate(net: &Network, samples: &[LabeledTensor], l2: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Config("cannot evaluate an empty group".into()));
    }
    let per: Vec<Result<(f64, bool)>> = samples
        .par_iter()
        .map(|s| {
            let p = net.forward(&s.input)?;
            Ok((cross_entropy(&p, s.label), argmax(&p) == s.label))
        })
        .collect();
    let mut loss = 0.0;
    let mut hits = 0usize;
    for r in per {
        let (l, hit) = r?;
        loss += l;
        hits += usize::from(hit);
    }
    let n = samples.len() as f64;
    Ok((loss / n + l2_penalty(net, l2), hits as f64 / n))
}

/// Trains from scratch. See [`resume`].
pub fn train(net: Network, train_set: &[LabeledTensor], val_set: &[LabeledTensor], cfg: &TrainConfig, seed: u64) -> Result<TrainProgress> {
    resume(TrainProgress::fresh(net), train_set, val_set, cfg, seed)
}

/// Runs epochs until early stopping or `cfg.max_epochs`, continuing `progress`.
///
/// Epoch `e` shuffles the training set with stream `e` of the shuffle lane, so
/// a run resumed from a saved `progress` replays the uninterrupted run exactly.
/// Training loss and accuracy are running means over the epoch's batches,
/// taken before each update.
pub fn resume(mut progress: TrainProgress, train_set: &[LabeledTensor], val_set: &[LabeledTensor], cfg: &TrainConfig, seed: u64) -> Result<TrainProgress> {
    cfg.validate()?;
    if progress.last.classes() != cfg.classes {
        return Err(Error::Config(format!("network has {} classes but train.classes is {}", progress.last.classes(), cfg.classes)));
    }
    check_set("training", train_set, &progress.last)?;
    check_set("validation", val_set, &progress.last)?;
    let mut stopper = progress.stopper(cfg.patience);
    let shuffle = StreamKey::new(seed, 0).with_lane(lanes::SHUFFLE);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    while !stopper.should_stop() && progress.history.len() < cfg.max_epochs {
        let epoch = progress.history.len() + 1;
        order.sort_unstable();
        order.shuffle(&mut shuffle.stream(epoch as u64));
        let net = &mut progress.last;
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let samples: Vec<&LabeledTensor> = batch.iter().map(|&i| &train_set[i]).collect();
            let (mut grads, loss, h) = batch_gradient(net, &samples)?;
            loss_sum += loss + l2_penalty(net, cfg.l2) * samples.len() as f64;
            hits += h;
            grads.scale(1.0 / samples.len() as f64);
            add_l2_gradient(net, cfg.l2, &mut grads);
            adam_step(net, &grads, cfg.learning_rate);
        }
        let n = train_set.len() as f64;
        if !loss_sum.is_finite() {
            return Err(Error::Domain(format!("training loss diverged at epoch {epoch}")));
        }
        let (val_loss, val_acc) = evaluate(net, val_set, cfg.l2)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_acc: hits as f64 / n,
            val_loss,
            val_acc,
        };
        log::info!(
            "epoch {epoch}: train loss {:.4} acc {:.4}, val loss {:.4} acc {:.4}",
            record.train_loss,
            record.train_acc,
            val_loss,
            val_acc
        );
        progress.history.push(record);
        if stopper.observe(epoch, val_loss) == StopDecision::Improved {
            progress.best = progress.last.clone();
        }
    }
    Ok(progress)
}
