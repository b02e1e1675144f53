//! Pretraining, cascaded training and evaluation at small scale.

mod common;

use std::sync::OnceLock;

use dualnet::dataset::{gen_dataset, Dataset, DatasetSpec, SampleSet, Task};
use dualnet::networks::{FunctionNetwork, Module};
use dualnet::tensor::{AdamConfig, Tensor};
use dualnet::training::{baseline_eval, check_frozen, evaluate, evaluate_with, pretrain, train_cascaded, TrainConfig};
use dualnet::Error;

fn data(task: Task, scale: usize) -> Dataset {
    let spec = DatasetSpec::scaled(task, 1, scale).unwrap();
    gen_dataset(&spec, &common::mnist_dir()).unwrap_or_else(|e| panic!("MNIST is required for this test: {e}"))
}

fn pretrain_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        ..TrainConfig::for_task(Task::Pretrain { slots: 2 }, 3)
    }
}

fn pretrain_data() -> &'static Dataset {
    static DATA: OnceLock<Dataset> = OnceLock::new();
    DATA.get_or_init(|| data(Task::Pretrain { slots: 2 }, 20))
}

/// One epoch over 3000 single-digit canvases.
fn pretrained() -> &'static FunctionNetwork {
    static NET: OnceLock<FunctionNetwork> = OnceLock::new();
    NET.get_or_init(|| {
        let d = pretrain_data();
        pretrain(&pretrain_config(1), &d.train, &d.test, &mut |_| {}).unwrap().0
    })
}

#[test]
fn zero_epochs_is_chance_level() {
    let d = pretrain_data();
    let (net, result) = pretrain(&pretrain_config(0), &d.train, &d.test, &mut |_| {}).unwrap();
    assert!(net.is_frozen());
    assert!(result.epochs.is_empty());
    assert!((0.02..=0.25).contains(&result.accuracy), "{}", result.accuracy);
}

#[test]
fn pretraining_is_deterministic_and_learns() {
    let d = pretrain_data();
    let mut seen = Vec::new();
    let (again, result) = pretrain(&pretrain_config(1), &d.train, &d.test, &mut |s| seen.push(*s)).unwrap();
    assert_eq!(seen, result.epochs);
    assert_eq!(again.param_digest(), pretrained().param_digest());
    assert!(result.accuracy > 0.6, "{}", result.accuracy);
}

#[test]
fn a_huge_learning_rate_is_reported_as_divergence() {
    let d = pretrain_data();
    let config = TrainConfig {
        adam: AdamConfig {
            lr: 50.0,
            ..AdamConfig::default()
        },
        ..pretrain_config(1)
    };
    let err = pretrain(&config, &d.train, &d.test, &mut |_| {}).unwrap_err();
    assert!(matches!(err, Error::Diverged(_)), "{err}");
}

#[test]
fn cascaded_training_leaves_the_function_network_untouched() {
    let fn_net = pretrained();
    let d = data(Task::Spatial2, 40);
    let before = fn_net.param_digest();
    let config = TrainConfig {
        epochs: 1,
        ..TrainConfig::for_task(Task::Spatial2, 4)
    };
    let (ctx, result) = train_cascaded(fn_net, &config, 0, &d.train, &d.test, &mut |_| {}).unwrap();
    assert_eq!(fn_net.param_digest(), before);
    let initial = dualnet::training::initial_context(&config).unwrap();
    assert_ne!(ctx.param_digest(), initial.param_digest());
    assert_eq!(result.baseline, baseline_eval(fn_net, &d.test).unwrap());
    assert_eq!(result.dual, evaluate(fn_net, &ctx, &d.test).unwrap());
    assert!(result.dual > result.baseline, "{result:?}");

    // Same seed, same result.
    let (ctx2, result2) = train_cascaded(fn_net, &config, 0, &d.train, &d.test, &mut |_| {}).unwrap();
    assert_eq!(ctx2.param_digest(), ctx.param_digest());
    assert_eq!(result2, result);
}

#[test]
fn an_unfrozen_function_network_is_refused() {
    let d = data(Task::Spatial2, 400);
    let mut net = pretrained().clone();
    net.set_trainable(true);
    assert!(matches!(check_frozen(&net), Err(Error::Freeze(_))));
    let config = TrainConfig::for_task(Task::Spatial2, 1);
    let err = train_cascaded(&net, &config, 0, &d.train, &d.test, &mut |_| {}).unwrap_err();
    assert!(matches!(err, Error::Freeze(_)), "{err}");
}

#[test]
fn mismatched_task_or_geometry_is_refused() {
    let d = data(Task::Spatial3, 400);
    let config = TrainConfig::for_task(Task::Spatial3, 1);
    // A two-slot function network cannot serve a three-slot task.
    assert!(train_cascaded(pretrained(), &config, 0, &d.train, &d.test, &mut |_| {}).is_err());
    let wrong = TrainConfig::for_task(Task::Spatial2, 1);
    assert!(train_cascaded(pretrained(), &wrong, 0, &d.train, &d.test, &mut |_| {}).is_err());
}

#[test]
fn all_ones_gate_reproduces_the_baseline() {
    let fn_net = pretrained();
    let d = data(Task::Spatial2, 100);
    let shape = fn_net.gate_shape();
    let ones = evaluate_with(fn_net, &d.test, |_| Ok(Some(Tensor::ones(&shape)))).unwrap();
    assert_eq!(ones, baseline_eval(fn_net, &d.test).unwrap());
}

#[test]
fn empty_test_set_is_an_error() {
    let empty = SampleSet {
        task: Task::Spatial2,
        split: dualnet::dataset::Split::Test,
        samples: Vec::new(),
    };
    assert!(baseline_eval(pretrained(), &empty).is_err());
}
