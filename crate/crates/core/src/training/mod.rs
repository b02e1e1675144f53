//! Pretraining, cascaded training of the context network, evaluation, and
//! multi-run aggregation.

mod report;

use serde::{Deserialize, Serialize};

use crate::dataset::{Batch, SampleSet, Task};
use crate::error::{Error, Result};
use crate::networks::{ContextNetwork, FunctionNetwork, Module};
use crate::tensor::{Adam, AdamConfig, Graph, SeededRng, Tensor};

pub use report::{aggregate, improvement, render_table, ExperimentReport, RunRow, Stat};

/// Training-accuracy floor for the first epoch; below it the run is aborted.
pub const DIVERGENCE_FLOOR: f64 = 0.15;
const EVAL_BATCH: usize = 250;

/// Stream ids carved out of a run seed.
const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: Task,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl TrainConfig {
    /// Protocol defaults for `task`: batch 64, Adam defaults, the task's
    /// epoch count.
    pub fn for_task(task: Task, seed: u64) -> Self {
        Self {
            task,
            epochs: task.paper_epochs(),
            batch_size: 64,
            adam: AdamConfig::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        let a = self.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::invalid(format!("bad Adam settings {a:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub loss: f64,
    /// Running training accuracy over the epoch.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainResult {
    pub seed: u64,
    pub accuracy: f64,
    pub epochs: Vec<EpochStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub baseline: f64,
    /// Dual-system test accuracy before any context update.
    pub initial: f64,
    pub dual: f64,
    pub epochs: Vec<EpochStats>,
}

fn check_task(set: &SampleSet, task: Task, what: &str) -> Result<()> {
    if set.task != task {
        return Err(Error::invalid(format!(
            "{what} holds {} samples, config is for {task}",
            set.task
        )));
    }
    Ok(())
}

fn shuffled(n: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order
}

fn correct(logits: &Tensor, targets: &[usize]) -> Result<usize> {
    Ok(logits
        .argmax_rows()?
        .iter()
        .zip(targets)
        .filter(|(p, t)| p == t)
        .count())
}

/// One pass over `set` in shuffled order. `step` trains on a batch and
/// returns its loss and the number of correct predictions.
fn run_epoch(
    set: &SampleSet,
    config: &TrainConfig,
    epoch: usize,
    rng: &mut SeededRng,
    mut step: impl FnMut(&Batch) -> Result<(f64, usize)>,
) -> Result<EpochStats> {
    let order = shuffled(set.len(), rng);
    let (mut loss_sum, mut batches, mut hits) = (0.0, 0usize, 0usize);
    for chunk in order.chunks(config.batch_size) {
        let batch = set.batch(chunk)?;
        let (loss, ok) = step(&batch)?;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite loss in epoch {epoch}, batch {batches}"
            )));
        }
        loss_sum += loss;
        hits += ok;
        batches += 1;
    }
    let stats = EpochStats {
        epoch,
        loss: loss_sum / batches as f64,
        accuracy: hits as f64 / set.len() as f64,
    };
    if epoch == 1 && stats.accuracy < DIVERGENCE_FLOOR {
        return Err(Error::Diverged(format!(
            "training accuracy {:.4} after epoch 1 is below {DIVERGENCE_FLOOR}",
            stats.accuracy
        )));
    }
    Ok(stats)
}

/// Trains a fresh function network on single-digit canvases, then freezes it
/// and reports held-out accuracy.
pub fn pretrain(
    config: &TrainConfig,
    train: &SampleSet,
    test: &SampleSet,
    observer: &mut dyn FnMut(&EpochStats),
) -> Result<(FunctionNetwork, PretrainResult)> {
    config.validate()?;
    if !matches!(config.task, Task::Pretrain { .. }) {
        return Err(Error::invalid(format!(
            "pretraining needs a pretrain task, got {}",
            config.task
        )));
    }
    check_task(train, config.task, "training set")?;
    check_task(test, config.task, "test set")?;
    let mut net = FunctionNetwork::new(
        config.task.geometry(),
        &mut SeededRng::for_stream(config.seed, INIT_STREAM),
    );
    let mut adam = Adam::new(config.adam);
    let mut rng = SeededRng::for_stream(config.seed, SHUFFLE_STREAM);
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let stats = run_epoch(train, config, epoch, &mut rng, |batch| {
            let mut g = Graph::new();
            let x = g.input(batch.images.clone());
            let logits = net.forward(&mut g, x, None)?;
            let loss = g.cross_entropy(logits, &batch.targets)?;
            let grads = g.backward(loss)?;
            grads.accumulate_into(net.params_mut())?;
            adam.step(net.params_mut())?;
            net.zero_grad();
            Ok((
                g.value(loss).data()[0].into(),
                correct(g.value(logits), &batch.targets)?,
            ))
        })?;
        observer(&stats);
        epochs.push(stats);
    }
    net.freeze();
    let accuracy = baseline_eval(&net, test)?;
    Ok((
        net,
        PretrainResult {
            seed: config.seed,
            accuracy,
            epochs,
        },
    ))
}

/// Accuracy of `fn_net` over `set`, with gates supplied per batch by `gate`
/// (`None` runs the plain classifier).
pub fn evaluate_with(
    fn_net: &FunctionNetwork,
    set: &SampleSet,
    mut gate: impl FnMut(&Batch) -> Result<Option<Tensor>>,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::invalid("accuracy over an empty test set is undefined"));
    }
    let mut hits = 0;
    let indices: Vec<usize> = (0..set.len()).collect();
    for chunk in indices.chunks(EVAL_BATCH) {
        let batch = set.batch(chunk)?;
        let gates = gate(&batch)?;
        let logits = fn_net.logits(&batch.images, gates.as_ref())?;
        hits += correct(&logits, &batch.targets)?;
    }
    Ok(hits as f64 / set.len() as f64)
}

/// Gateless accuracy against the cued target; the signal is never seen.
pub fn baseline_eval(fn_net: &FunctionNetwork, set: &SampleSet) -> Result<f64> {
    evaluate_with(fn_net, set, |_| Ok(None))
}

/// Accuracy of the dual system.
pub fn evaluate(fn_net: &FunctionNetwork, ctx: &ContextNetwork, set: &SampleSet) -> Result<f64> {
    let signal_len = ctx.signal_len();
    evaluate_with(fn_net, set, |batch| {
        let signals = batch
            .signals
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{} samples carry no signal", set.task)))?;
        if signals.shape()[1] != signal_len {
            return Err(Error::shape(format!(
                "signals of width {} for a context network expecting {signal_len}",
                signals.shape()[1]
            )));
        }
        ctx.gates(&batch.images, signals).map(Some)
    })
}

/// Rejects a function network with any trainable parameter.
pub fn check_frozen(fn_net: &FunctionNetwork) -> Result<()> {
    if let Some(p) = fn_net.params().into_iter().find(|p| p.trainable()) {
        return Err(Error::Freeze(format!(
            "function network parameter {} is trainable; cascaded training needs it frozen",
            p.name()
        )));
    }
    Ok(())
}

/// The untrained context network a run with `config` starts from.
pub fn initial_context(config: &TrainConfig) -> Result<ContextNetwork> {
    ContextNetwork::for_task(config.task, &mut SeededRng::for_stream(config.seed, INIT_STREAM))
}

/// Trains a fresh context network for `config.task` through the frozen
/// `fn_net`. Run `run` is reported with `config.seed` as its seed.
pub fn train_cascaded(
    fn_net: &FunctionNetwork,
    config: &TrainConfig,
    run: usize,
    train: &SampleSet,
    test: &SampleSet,
    observer: &mut dyn FnMut(&EpochStats),
) -> Result<(ContextNetwork, RunResult)> {
    config.validate()?;
    check_frozen(fn_net)?;
    check_task(train, config.task, "training set")?;
    check_task(test, config.task, "test set")?;
    if fn_net.geometry() != config.task.geometry() {
        return Err(Error::shape(format!(
            "function network is built for {} slots, task {} has {}",
            fn_net.geometry().slots(),
            config.task,
            config.task.slots()
        )));
    }
    let mut ctx = initial_context(config)?;
    let baseline = baseline_eval(fn_net, test)?;
    let initial = evaluate(fn_net, &ctx, test)?;
    let mut adam = Adam::new(config.adam);
    let mut rng = SeededRng::for_stream(config.seed, SHUFFLE_STREAM);
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let stats = run_epoch(train, config, epoch, &mut rng, |batch| {
            let signals = batch
                .signals
                .clone()
                .ok_or_else(|| Error::invalid("cascaded training needs cued samples"))?;
            let mut g = Graph::new();
            let x = g.input(batch.images.clone());
            let s = g.input(signals);
            let gate = ctx.forward(&mut g, x, s)?;
            let logits = fn_net.forward(&mut g, x, Some(gate))?;
            let loss = g.cross_entropy(logits, &batch.targets)?;
            let grads = g.backward(loss)?;
            grads.accumulate_into(ctx.params_mut())?;
            adam.step(ctx.params_mut())?;
            ctx.zero_grad();
            Ok((
                g.value(loss).data()[0].into(),
                correct(g.value(logits), &batch.targets)?,
            ))
        })?;
        observer(&stats);
        epochs.push(stats);
    }
    let dual = evaluate(fn_net, &ctx, test)?;
    Ok((
        ctx,
        RunResult {
            run,
            seed: config.seed,
            baseline,
            initial,
            dual,
            epochs,
        },
    ))
}
