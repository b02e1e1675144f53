//! Gate contract between the two networks.

use dualnet::dataset::{CanvasGeometry, Task};
use dualnet::networks::{ContextNetwork, FunctionNetwork, Module};
use dualnet::tensor::{Graph, SeededRng, Tensor};
use proptest::prelude::*;

fn images(geometry: CanvasGeometry, n: usize, rng: &mut SeededRng) -> Tensor {
    Tensor::uniform(&[n, 1, geometry.height(), geometry.width()], 0.0, 1.0, rng)
}

fn one_hot(n: usize, width: usize, hot: impl Fn(usize) -> usize) -> Tensor {
    Tensor::from_fn(&[n, width], |i| if i % width == hot(i / width) { 1.0 } else { 0.0 })
}

#[test]
fn unit_gate_is_bitwise_identity_for_every_canvas() {
    let mut rng = SeededRng::new(31);
    for slots in [2, 3] {
        let geometry = CanvasGeometry::new(slots).unwrap();
        let net = FunctionNetwork::new(geometry, &mut rng);
        let ones = Tensor::ones(&net.gate_shape());
        for _ in 0..5 {
            let x = images(geometry, 40, &mut rng);
            let plain = net.logits(&x, None).unwrap();
            let gated = net.logits(&x, Some(&ones)).unwrap();
            let same = plain
                .data()
                .iter()
                .zip(gated.data())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            assert!(same);
        }
    }
}

#[test]
fn frozen_classifier_gets_no_gradient_but_passes_one_through() {
    let mut rng = SeededRng::new(32);
    let task = Task::Spatial2;
    let mut fn_net = FunctionNetwork::new(task.geometry(), &mut rng);
    fn_net.freeze();
    let mut ctx: ContextNetwork = ContextNetwork::for_task(task, &mut rng).unwrap();
    let mut g = Graph::new();
    let x = g.input(images(task.geometry(), 3, &mut rng));
    let s = g.input(one_hot(3, 2, |i| i % 2));
    let gate = ctx.forward(&mut g, x, s).unwrap();
    let logits = fn_net.forward(&mut g, x, Some(gate)).unwrap();
    let loss = g.cross_entropy(logits, &[1, 2, 3]).unwrap();
    let grads = g.backward(loss).unwrap();
    for p in fn_net.params() {
        assert!(grads.for_param(p.name()).is_none(), "{} received a gradient", p.name());
    }
    grads.accumulate_into(fn_net.params_mut()).unwrap();
    assert!(fn_net.params().iter().all(|p| !p.has_grad()));
    grads.accumulate_into(ctx.params_mut()).unwrap();
    assert!(ctx.params().iter().all(|p| p.has_grad()));
    assert!(ctx.params().iter().any(|p| p.grad().data().iter().any(|v| *v != 0.0)));
}

fn task_strategy() -> impl Strategy<Value = Task> {
    prop_oneof![Just(Task::Spatial2), Just(Task::Spatial3), Just(Task::Feature2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Gates stay strictly inside (0, 1) for any image, including blank and
    /// saturated canvases, and any cue.
    #[test]
    fn gates_stay_in_the_open_unit_interval(task in task_strategy(), seed: u64, fill in prop_oneof![Just(None), Just(Some(0.0f32)), Just(Some(1.0f32))]) {
        let mut rng = SeededRng::new(seed);
        let ctx: ContextNetwork = ContextNetwork::for_task(task, &mut rng).unwrap();
        let geometry = task.geometry();
        let n = 3;
        let x = match fill {
            None => images(geometry, n, &mut rng),
            Some(v) => Tensor::full(&[n, 1, geometry.height(), geometry.width()], v),
        };
        let width = task.signal_len();
        let cues: Vec<usize> = (0..n).map(|_| rng.below(width)).collect();
        let gates = ctx.gates(&x, &one_hot(n, width, |i| cues[i])).unwrap();
        prop_assert!(gates.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    /// Any per-sample gate in [0, 1] yields finite logits of the right shape.
    #[test]
    fn any_unit_range_gate_gives_finite_logits(seed: u64) {
        let mut rng = SeededRng::new(seed);
        let geometry = CanvasGeometry::new(2).unwrap();
        let net = FunctionNetwork::new(geometry, &mut rng);
        let x = images(geometry, 2, &mut rng);
        let gate = Tensor::uniform(&[2, 16, 14, 28], 0.0, 1.0, &mut rng);
        let logits = net.logits(&x, Some(&gate)).unwrap();
        prop_assert!(logits.all_finite());
        prop_assert_eq!(logits.shape(), &[2, 10]);
    }
}
