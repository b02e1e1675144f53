//! Analytic gradients of every graph op and of the assembled dual network
//! against f64 central differences.

use dualnet::dataset::{CanvasGeometry, Task};
use dualnet::gradcheck::{check_dual, check_op, op_cases, CheckConfig, CheckReport, Differentiable, DualTarget};
use dualnet::networks::{ContextNetwork, FunctionNetwork};
use dualnet::tensor::{Graph, NodeId, Real, SeededRng, Tensor};
use dualnet::Result;

fn assert_passes(report: &CheckReport) {
    println!("{report}");
    assert!(report.passed(), "{report}");
    assert!(report.probes >= 100);
}

#[test]
fn every_op_matches_central_differences() {
    let cfg = CheckConfig::default();
    let cases = op_cases();
    assert_eq!(cases.len(), 16);
    for case in &cases {
        let report = check_op(case, &cfg).unwrap();
        assert_passes(&report);
    }
}

#[test]
fn a_wrong_gradient_is_caught() {
    // sum(x * x) has slope 2x; comparing against sum(x) slopes must fail.
    struct Square;
    impl Differentiable for Square {
        fn name(&self) -> String {
            "square".into()
        }
        fn inputs(&self) -> Vec<(String, Tensor<f64>)> {
            vec![("x".into(), Tensor::uniform(&[10], 0.5, 2.0, &mut SeededRng::new(3)))]
        }
        fn loss<T: Real>(&self, g: &mut Graph<T>, x: &[NodeId]) -> Result<NodeId> {
            // The f32 pass sees a different function from the f64 pass.
            if std::mem::size_of::<T>() == 4 {
                g.sum(x[0])
            } else {
                let sq = g.mul(x[0], x[0])?;
                g.sum(sq)
            }
        }
    }
    let report = check_op(&Square, &CheckConfig::default()).unwrap();
    assert!(!report.passed());
}

fn dual_setup(task: Task, seed: u64) -> (FunctionNetwork, ContextNetwork, dualnet::dataset::Batch) {
    let mut rng = SeededRng::new(seed);
    let geometry = task.geometry();
    let mut fn_net = FunctionNetwork::new(geometry, &mut rng);
    fn_net.freeze();
    let ctx = ContextNetwork::for_task(task, &mut rng).unwrap();
    let batch = random_batch(geometry, task.signal_len(), 4, &mut rng);
    (fn_net, ctx, batch)
}

fn random_batch(geometry: CanvasGeometry, signal_len: usize, n: usize, rng: &mut SeededRng) -> dualnet::dataset::Batch {
    let images = Tensor::uniform(&[n, 1, geometry.height(), geometry.width()], 0.0, 1.0, rng);
    let signals = (signal_len > 0).then(|| {
        Tensor::from_fn(&[n, signal_len], |i| {
            if i % signal_len == (i / signal_len) % signal_len {
                1.0
            } else {
                0.0
            }
        })
    });
    let targets = (0..n).map(|_| rng.below(10)).collect();
    dualnet::dataset::Batch {
        images,
        signals,
        targets,
    }
}

#[test]
fn dual_network_gradients_reach_the_spatial_context_network() {
    let (fn_net, ctx, batch) = dual_setup(Task::Spatial2, 5);
    let report = check_dual(&fn_net, &ctx, &batch, DualTarget::Context, &CheckConfig::default()).unwrap();
    assert_passes(&report);
}

#[test]
fn dual_network_gradients_reach_the_feature_context_network() {
    let (fn_net, ctx, batch) = dual_setup(Task::Feature2, 6);
    let report = check_dual(&fn_net, &ctx, &batch, DualTarget::Context, &CheckConfig::default()).unwrap();
    assert_passes(&report);
}

#[test]
fn function_network_gradients_for_pretraining() {
    let mut rng = SeededRng::new(7);
    let geometry = CanvasGeometry::new(2).unwrap();
    let fn_net = FunctionNetwork::new(geometry, &mut rng);
    let ctx = ContextNetwork::for_task(Task::Spatial2, &mut rng).unwrap();
    let batch = random_batch(geometry, 0, 4, &mut rng);
    let report = check_dual(&fn_net, &ctx, &batch, DualTarget::Function, &CheckConfig::default()).unwrap();
    assert_passes(&report);
}
