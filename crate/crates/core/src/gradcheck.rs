//! Finite-difference gradient checks.
//!
//! Analytic gradients come from an `f32` graph. The reference slope comes from
//! central differences of the same forward computation re-evaluated in `f64`,
//! so it never touches the backward kernels.

use crate::dataset::Batch;
use crate::error::{Error, Result};
use crate::networks::{ContextNetwork, FunctionNetwork, Module};
use crate::tensor::{Conv2dSpec, Graph, NodeId, Real, SeededRng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    /// Central-difference step.
    pub eps: f64,
    /// Largest accepted relative error.
    pub tolerance: f64,
    /// Denominator floor of the relative error, so near-zero slopes are
    /// compared on an absolute scale.
    pub floor: f64,
    /// Probes that must be compared (kinked probes do not count).
    pub probes: usize,
    /// Give up when more than this share of drawn probes lands on a kink.
    pub max_kink_share: f64,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            tolerance: 1e-2,
            floor: 1e-3,
            probes: 100,
            max_kink_share: 0.5,
            seed: 17,
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central and one-sided difference quotients of `f` around 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slope {
    pub numeric: f64,
    pub forward: f64,
    pub backward: f64,
}

impl Slope {
    /// True when a relu or max-pool switch lies within the step. A switch
    /// moves the central quotient by half the gap between the one-sided
    /// ones, so a gap under the tolerance cannot cause a false failure.
    pub fn kinked(&self, tolerance: f64, floor: f64) -> bool {
        let (f, b) = (self.forward, self.backward);
        (f - b).abs() > tolerance * f.abs().max(b.abs()).max(floor)
    }
}

pub fn central_difference(mut f: impl FnMut(f64) -> Result<f64>, eps: f64) -> Result<Slope> {
    let (plus, zero, minus) = (f(eps)?, f(0.0)?, f(-eps)?);
    Ok(Slope {
        numeric: (plus - minus) / (2.0 * eps),
        forward: (plus - zero) / eps,
        backward: (zero - minus) / eps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub input: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub probes: usize,
    pub kinks: usize,
    pub max_rel_error: f64,
    pub worst: Option<Mismatch>,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} probes, {} kinks skipped, max rel error {:.2e}",
            self.name, self.probes, self.kinks, self.max_rel_error
        )?;
        if let Some(w) = &self.worst {
            write!(
                f,
                " ({}[{}] analytic {:.6e} numeric {:.6e})",
                w.input, w.index, w.analytic, w.numeric
            )?;
        }
        Ok(())
    }
}

/// A scalar function of named tensors, buildable on a graph of any precision.
pub trait Differentiable {
    fn name(&self) -> String;
    /// Values at which to check, with a label each.
    fn inputs(&self) -> Vec<(String, Tensor<f64>)>;
    fn loss<T: Real>(&self, g: &mut Graph<T>, inputs: &[NodeId]) -> Result<NodeId>;
}

fn scalar<T: Real>(t: &Tensor<T>) -> f64 {
    t.data()[0].to_f64().unwrap_or(f64::NAN)
}

/// Probes drawn round-robin over the inputs, each at a random element.
struct Prober {
    rng: SeededRng,
    sizes: Vec<usize>,
    next_input: usize,
}

impl Prober {
    fn new(seed: u64, sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::invalid("gradient check needs non-empty inputs"));
        }
        Ok(Self {
            rng: SeededRng::new(seed),
            sizes,
            next_input: 0,
        })
    }

    fn draw(&mut self) -> (usize, usize) {
        let input = self.next_input;
        self.next_input = (input + 1) % self.sizes.len();
        (input, self.rng.below(self.sizes[input]))
    }
}

/// Shared probe loop. `analytic(input, index)` and `numeric(input, index)`
/// give the two slopes for one coordinate.
fn run_probes(
    name: String,
    labels: &[String],
    sizes: Vec<usize>,
    cfg: &CheckConfig,
    mut analytic: impl FnMut(usize, usize) -> f64,
    mut numeric: impl FnMut(usize, usize) -> Result<Slope>,
) -> Result<CheckReport> {
    let mut prober = Prober::new(cfg.seed, sizes)?;
    let mut report = CheckReport {
        name,
        probes: 0,
        kinks: 0,
        max_rel_error: 0.0,
        worst: None,
        tolerance: cfg.tolerance,
    };
    while report.probes < cfg.probes {
        let drawn = report.probes + report.kinks;
        if drawn >= 20 && report.kinks as f64 > cfg.max_kink_share * drawn as f64 {
            return Err(Error::invalid(format!(
                "{}: {} of {drawn} probes hit a kink",
                report.name, report.kinks
            )));
        }
        let (input, index) = prober.draw();
        let slope = numeric(input, index)?;
        if slope.kinked(cfg.tolerance, cfg.floor) {
            report.kinks += 1;
            continue;
        }
        let a = analytic(input, index);
        let err = relative_error(a, slope.numeric, cfg.floor);
        if !err.is_finite() || err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = if err.is_finite() { err } else { f64::INFINITY };
            report.worst = Some(Mismatch {
                input: labels[input].clone(),
                index,
                analytic: a,
                numeric: slope.numeric,
            });
        }
        report.probes += 1;
    }
    Ok(report)
}

/// Checks every input of `case` against central differences.
pub fn check_op(case: &impl Differentiable, cfg: &CheckConfig) -> Result<CheckReport> {
    let inputs = case.inputs();
    let labels: Vec<String> = inputs.iter().map(|(l, _)| l.clone()).collect();
    let values: Vec<Tensor<f64>> = inputs.into_iter().map(|(_, t)| t).collect();

    let mut g32 = Graph::<f32>::new();
    let ids: Vec<NodeId> = values.iter().map(|v| g32.variable(v.cast())).collect();
    let loss = case.loss(&mut g32, &ids)?;
    let grads = g32.backward(loss)?;
    let analytic: Vec<Tensor<f64>> = ids
        .iter()
        .zip(&values)
        .map(|(&id, v)| {
            grads
                .get(id)
                .map(Tensor::cast)
                .unwrap_or_else(|| Tensor::zeros(v.shape()))
        })
        .collect();

    let eval = |input: usize, index: usize, delta: f64| -> Result<f64> {
        let mut g = Graph::<f64>::new();
        let ids: Vec<NodeId> = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut v = v.clone();
                if i == input {
                    v.data_mut()[index] += delta;
                }
                g.input(v)
            })
            .collect();
        let loss = case.loss(&mut g, &ids)?;
        Ok(scalar(g.value(loss)))
    };
    run_probes(
        case.name(),
        &labels,
        values.iter().map(Tensor::len).collect(),
        cfg,
        |i, k| analytic[i].data()[k],
        |i, k| central_difference(|d| eval(i, k, d), cfg.eps),
    )
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Conv(Conv2dSpec),
    TConv(Conv2dSpec),
    MaxPool,
    Relu,
    Sigmoid,
    Linear,
    GateShared,
    GatePerSample,
    Concat,
    Broadcast,
    Reshape,
    Mul,
    Sum,
    CrossEntropy,
}

/// One graph op applied to fixed random inputs.
#[derive(Debug, Clone)]
pub struct OpCase {
    name: &'static str,
    op: Op,
    inputs: Vec<(String, Tensor<f64>)>,
    /// Fixed random weights that turn a tensor output into a scalar.
    projection: Option<Tensor<f64>>,
}

const LABELS: [usize; 3] = [2, 0, 4];

fn uniform(shape: &[usize], scale: f64, rng: &mut SeededRng) -> Tensor<f64> {
    Tensor::uniform(shape, -scale, scale, rng)
}

fn named(items: Vec<(&str, Tensor<f64>)>) -> Vec<(String, Tensor<f64>)> {
    items.into_iter().map(|(n, t)| (n.to_string(), t)).collect()
}

fn apply<T: Real>(op: Op, g: &mut Graph<T>, x: &[NodeId]) -> Result<NodeId> {
    match op {
        Op::Conv(spec) => g.conv2d(x[0], x[1], x[2], spec),
        Op::TConv(spec) => g.transposed_conv2d(x[0], x[1], x[2], spec),
        Op::MaxPool => g.maxpool2d(x[0], (2, 2), (2, 2)),
        Op::Relu => g.relu(x[0]),
        Op::Sigmoid => g.sigmoid(x[0]),
        Op::Linear => g.linear(x[0], x[1], x[2]),
        Op::GateShared | Op::GatePerSample => g.gate_mul(x[0], x[1]),
        Op::Concat => g.concat_channels(x[0], x[1]),
        Op::Broadcast => g.broadcast_spatial(x[0], 3, 4),
        Op::Reshape => g.reshape(x[0], &[3, 20]),
        Op::Mul => g.mul(x[0], x[1]),
        Op::Sum => g.sum(x[0]),
        Op::CrossEntropy => g.cross_entropy(x[0], &LABELS),
    }
}

impl Differentiable for OpCase {
    fn name(&self) -> String {
        self.name.to_string()
    }

    fn inputs(&self) -> Vec<(String, Tensor<f64>)> {
        self.inputs.clone()
    }

    fn loss<T: Real>(&self, g: &mut Graph<T>, inputs: &[NodeId]) -> Result<NodeId> {
        let out = apply(self.op, g, inputs)?;
        match &self.projection {
            Some(r) => {
                let r = g.input(r.cast());
                let weighted = g.mul(out, r)?;
                g.sum(weighted)
            }
            None => Ok(out),
        }
    }
}

/// Every differentiable graph op, with strided and asymmetric-padding
/// variants of the convolutions and both gate layouts.
pub fn op_cases() -> Vec<OpCase> {
    let mut rng = SeededRng::new(2024);
    let r = &mut rng;
    let mut out = Vec::new();
    let mut add = |name, op, inputs: Vec<(&str, Tensor<f64>)>, out_shape: Option<&[usize]>, rng: &mut SeededRng| {
        let projection = out_shape.map(|s| uniform(s, 1.0, rng));
        out.push(OpCase {
            name,
            op,
            inputs: named(inputs),
            projection,
        });
    };

    let same = Conv2dSpec::new((1, 1), (2, 2));
    add(
        "conv2d 5x5 pad 2",
        Op::Conv(same),
        vec![
            ("input", uniform(&[2, 3, 6, 7], 1.0, r)),
            ("kernel", uniform(&[4, 3, 5, 5], 0.3, r)),
            ("bias", uniform(&[4], 0.5, r)),
        ],
        Some(&[2, 4, 6, 7]),
        r,
    );
    let strided = Conv2dSpec::new((2, 1), (1, 0));
    add(
        "conv2d stride (2,1) pad (1,0)",
        Op::Conv(strided),
        vec![
            ("input", uniform(&[2, 2, 7, 6], 1.0, r)),
            ("kernel", uniform(&[3, 2, 3, 3], 0.5, r)),
            ("bias", uniform(&[3], 0.5, r)),
        ],
        Some(&[2, 3, 4, 4]),
        r,
    );
    let up = Conv2dSpec::new((2, 2), (1, 1));
    add(
        "transposed conv 4x4 stride 2 pad 1",
        Op::TConv(up),
        vec![
            ("input", uniform(&[2, 3, 3, 4], 1.0, r)),
            ("kernel", uniform(&[3, 2, 4, 4], 0.3, r)),
            ("bias", uniform(&[2], 0.5, r)),
        ],
        Some(&[2, 2, 6, 8]),
        r,
    );
    let uneven = Conv2dSpec::new((2, 2), (2, 1));
    add(
        "transposed conv stride 2 pad (2,1)",
        Op::TConv(uneven),
        vec![
            ("input", uniform(&[2, 2, 4, 4], 1.0, r)),
            ("kernel", uniform(&[2, 3, 4, 4], 0.3, r)),
            ("bias", uniform(&[3], 0.5, r)),
        ],
        Some(&[2, 3, 6, 8]),
        r,
    );
    add(
        "maxpool 2x2",
        Op::MaxPool,
        vec![("input", uniform(&[2, 3, 6, 8], 1.0, r))],
        Some(&[2, 3, 3, 4]),
        r,
    );
    add(
        "relu",
        Op::Relu,
        vec![("input", uniform(&[2, 3, 5, 5], 1.0, r))],
        Some(&[2, 3, 5, 5]),
        r,
    );
    add(
        "sigmoid",
        Op::Sigmoid,
        vec![("input", uniform(&[2, 3, 5, 5], 4.0, r))],
        Some(&[2, 3, 5, 5]),
        r,
    );
    add(
        "linear",
        Op::Linear,
        vec![
            ("input", uniform(&[3, 12], 1.0, r)),
            ("weight", uniform(&[12, 5], 0.5, r)),
            ("bias", uniform(&[5], 0.5, r)),
        ],
        Some(&[3, 5]),
        r,
    );
    add(
        "gate multiply, shared gate",
        Op::GateShared,
        vec![
            ("features", uniform(&[3, 4, 3, 5], 1.0, r)),
            ("gate", Tensor::uniform(&[4, 3, 5], 0.0, 1.0, r)),
        ],
        Some(&[3, 4, 3, 5]),
        r,
    );
    add(
        "gate multiply, per-sample gate",
        Op::GatePerSample,
        vec![
            ("features", uniform(&[3, 4, 3, 5], 1.0, r)),
            ("gate", Tensor::uniform(&[3, 4, 3, 5], 0.0, 1.0, r)),
        ],
        Some(&[3, 4, 3, 5]),
        r,
    );
    add(
        "concat channels",
        Op::Concat,
        vec![
            ("a", uniform(&[2, 3, 4, 4], 1.0, r)),
            ("b", uniform(&[2, 2, 4, 4], 1.0, r)),
        ],
        Some(&[2, 5, 4, 4]),
        r,
    );
    add(
        "broadcast spatial",
        Op::Broadcast,
        vec![("input", uniform(&[2, 5], 1.0, r))],
        Some(&[2, 5, 3, 4]),
        r,
    );
    add(
        "reshape",
        Op::Reshape,
        vec![("input", uniform(&[3, 4, 5], 1.0, r))],
        Some(&[3, 20]),
        r,
    );
    add(
        "elementwise product",
        Op::Mul,
        vec![("a", uniform(&[4, 6], 1.0, r)), ("b", uniform(&[4, 6], 1.0, r))],
        Some(&[4, 6]),
        r,
    );
    add("sum", Op::Sum, vec![("input", uniform(&[4, 6], 1.0, r))], None, r);
    add(
        "softmax cross-entropy",
        Op::CrossEntropy,
        vec![("logits", uniform(&[3, 6], 2.0, r))],
        None,
        r,
    );
    out
}

/// What the end-to-end check perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualTarget {
    /// Context parameters behind a frozen function network (cascaded training).
    Context,
    /// Function parameters without a gate (pretraining).
    Function,
}

fn dual_loss<T: Real>(
    fn_net: &FunctionNetwork<T>,
    ctx: Option<&ContextNetwork<T>>,
    batch: &Batch<T>,
) -> Result<(Graph<T>, NodeId)> {
    let mut g = Graph::new();
    let image = g.input(batch.images.clone());
    let gate = match ctx {
        Some(ctx) => {
            let signals = batch
                .signals
                .clone()
                .ok_or_else(|| Error::invalid("context check needs a cued batch"))?;
            let signal = g.input(signals);
            Some(ctx.forward(&mut g, image, signal)?)
        }
        None => None,
    };
    let logits = fn_net.forward(&mut g, image, gate)?;
    let loss = g.cross_entropy(logits, &batch.targets)?;
    Ok((g, loss))
}

/// Loss gradient of the dual network on `batch` with respect to the
/// parameters of `target`.
pub fn check_dual(
    fn_net: &FunctionNetwork,
    ctx: &ContextNetwork,
    batch: &Batch,
    target: DualTarget,
    cfg: &CheckConfig,
) -> Result<CheckReport> {
    let ctx_used = (target == DualTarget::Context).then_some(ctx);
    let (g, loss) = dual_loss(fn_net, ctx_used, batch)?;
    let grads = g.backward(loss)?;

    let names: Vec<String> = match target {
        DualTarget::Context => ctx.params().iter().map(|p| p.name().to_string()).collect(),
        DualTarget::Function => fn_net.params().iter().map(|p| p.name().to_string()).collect(),
    };
    let sizes: Vec<usize> = match target {
        DualTarget::Context => ctx.params().iter().map(|p| p.value().len()).collect(),
        DualTarget::Function => fn_net.params().iter().map(|p| p.value().len()).collect(),
    };
    let analytic: Vec<Option<Tensor<f64>>> = names.iter().map(|n| grads.for_param(n).map(|t| t.cast())).collect();

    let fn64 = fn_net.cast::<f64>();
    let ctx64 = ctx.cast::<f64>();
    let batch64 = Batch {
        images: batch.images.cast(),
        signals: batch.signals.as_ref().map(Tensor::cast),
        targets: batch.targets.clone(),
    };
    let eval = |param: usize, index: usize, delta: f64| -> Result<f64> {
        let (mut f, mut c) = (fn64.clone(), ctx64.clone());
        let p = match target {
            DualTarget::Context => c.params_mut().swap_remove(param),
            DualTarget::Function => f.params_mut().swap_remove(param),
        };
        let mut v = p.value().clone();
        v.data_mut()[index] += delta;
        p.set_value(v)?;
        let ctx_used = (target == DualTarget::Context).then_some(&c);
        let (g, loss) = dual_loss(&f, ctx_used, &batch64)?;
        Ok(scalar(g.value(loss)))
    };
    let kind = match target {
        DualTarget::Context => format!("dual network ({} context)", ctx.kind()),
        DualTarget::Function => "function network".to_string(),
    };
    run_probes(
        kind,
        &names,
        sizes,
        cfg,
        |i, k| analytic[i].as_ref().map_or(0.0, |t| t.data()[k]),
        |i, k| central_difference(|d| eval(i, k, d), cfg.eps),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_uses_the_floor() {
        assert_eq!(relative_error(1.0, 1.0, 1e-3), 0.0);
        assert!((relative_error(2.0, 1.0, 1e-3) - 0.5).abs() < 1e-12);
        assert!((relative_error(1e-6, 0.0, 1e-3) - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn central_difference_of_a_cubic_and_a_kink() {
        let s = central_difference(|d| Ok((1.0 + d).powi(3)), 1e-6).unwrap();
        assert!((s.numeric - 3.0).abs() < 1e-8);
        assert!(!s.kinked(1e-2, 1e-3));
        let k = central_difference(|d| Ok(d.max(0.0)), 1e-6).unwrap();
        assert!(k.kinked(1e-2, 1e-3));
    }
}
