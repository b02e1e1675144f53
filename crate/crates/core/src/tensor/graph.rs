use super::kernels::{self, Conv2dSpec};
use super::{Parameter, Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d {
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        spec: Conv2dSpec,
    },
    TransposedConv2d {
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        spec: Conv2dSpec,
    },
    MaxPool {
        input: NodeId,
        window: (usize, usize),
        stride: (usize, usize),
    },
    Relu(NodeId),
    Sigmoid(NodeId),
    Linear {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
    },
    GateMul {
        features: NodeId,
        gate: NodeId,
    },
    Concat(NodeId, NodeId),
    BroadcastSpatial {
        input: NodeId,
        h: usize,
        w: usize,
    },
    Reshape {
        input: NodeId,
        shape: Vec<usize>,
    },
    Mul(NodeId, NodeId),
    Sum(NodeId),
    CrossEntropy {
        logits: NodeId,
        labels: Vec<usize>,
    },
}

impl Op {
    fn inputs(&self) -> Vec<NodeId> {
        match *self {
            Op::Leaf => vec![],
            Op::Conv2d {
                input, kernel, bias, ..
            }
            | Op::TransposedConv2d {
                input, kernel, bias, ..
            } => vec![input, kernel, bias],
            Op::Linear { input, weight, bias } => vec![input, weight, bias],
            Op::GateMul { features, gate } => vec![features, gate],
            Op::Concat(a, b) | Op::Mul(a, b) => vec![a, b],
            Op::MaxPool { input, .. }
            | Op::BroadcastSpatial { input, .. }
            | Op::Reshape { input, .. }
            | Op::Relu(input)
            | Op::Sigmoid(input)
            | Op::Sum(input)
            | Op::CrossEntropy { logits: input, .. } => vec![input],
        }
    }
}

/// Values an op keeps for its backward pass beyond its inputs and output.
#[derive(Debug, Clone)]
enum Saved<T: Real> {
    None,
    Argmax(Vec<usize>),
    Probs(Tensor<T>),
}

#[derive(Debug, Clone)]
struct Node<T: Real> {
    value: Tensor<T>,
    op: Op,
    saved: Saved<T>,
    requires_grad: bool,
}

/// Tape of layer-level operations in execution order.
///
/// Nodes can only reference earlier nodes, so the recording order is a
/// topological order and backward is a single reverse sweep. Inputs whose
/// gradient nobody asked for are skipped; a frozen layer in front of a
/// trainable one still passes the gradient through to its input.
#[derive(Debug, Clone)]
pub struct Graph<T: Real = f32> {
    nodes: Vec<Node<T>>,
    bindings: Vec<(NodeId, String)>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Graph::backward`], indexed by node.
#[derive(Debug, Clone)]
pub struct Gradients<T: Real = f32> {
    grads: Vec<Option<Tensor<T>>>,
    bindings: Vec<(NodeId, String)>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient of the parameter bound under `name`, summed over every node
    /// it was bound to.
    pub fn for_param(&self, name: &str) -> Option<Tensor<T>> {
        let mut acc: Option<Tensor<T>> = None;
        for (id, _) in self.bindings.iter().filter(|(_, n)| n == name) {
            if let Some(g) = self.get(*id) {
                match acc.as_mut() {
                    Some(a) => a.add_assign(g).expect("bound nodes share the parameter shape"),
                    None => acc = Some(g.clone()),
                }
            }
        }
        acc
    }

    /// Adds each trainable parameter's gradient into its `grad` buffer.
    pub fn accumulate_into<'a>(&self, params: impl IntoIterator<Item = &'a mut Parameter<T>>) -> Result<()> {
        for p in params {
            if !p.trainable() {
                continue;
            }
            if let Some(g) = self.for_param(p.name()) {
                p.accumulate_grad(&g)?;
            }
        }
        Ok(())
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            bindings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn node(&self, id: NodeId) -> Result<&Node<T>> {
        self.nodes.get(id.0).ok_or_else(|| {
            Error::Graph(format!(
                "node {} is not recorded on this graph ({} nodes)",
                id.0,
                self.nodes.len()
            ))
        })
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            saved: Saved::None,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A constant input; no gradient is computed for it.
    pub fn input(&mut self, value: Tensor<T>) -> NodeId {
        self.leaf(value, false)
    }

    /// A free leaf whose gradient is wanted.
    pub fn variable(&mut self, value: Tensor<T>) -> NodeId {
        self.leaf(value, true)
    }

    /// Records a parameter as a leaf. Only trainable parameters request a
    /// gradient.
    pub fn param(&mut self, p: &Parameter<T>) -> NodeId {
        let id = self.leaf(p.value().clone(), p.trainable());
        self.bindings.push((id, p.name().to_string()));
        id
    }

    fn eval<'v>(op: &Op, values: &dyn Fn(NodeId) -> &'v Tensor<T>) -> Result<(Tensor<T>, Saved<T>)> {
        let plain = |t: Result<Tensor<T>>| t.map(|t| (t, Saved::None));
        match op {
            Op::Leaf => Err(Error::Graph("leaf nodes have no forward computation".into())),
            Op::Conv2d {
                input,
                kernel,
                bias,
                spec,
            } => plain(kernels::conv2d(values(*input), values(*kernel), values(*bias), *spec)),
            Op::TransposedConv2d {
                input,
                kernel,
                bias,
                spec,
            } => plain(kernels::transposed_conv2d(
                values(*input),
                values(*kernel),
                values(*bias),
                *spec,
            )),
            Op::MaxPool { input, window, stride } => {
                let (out, arg) = kernels::maxpool2d(values(*input), *window, *stride)?;
                Ok((out, Saved::Argmax(arg)))
            }
            Op::Relu(x) => Ok((kernels::relu(values(*x)), Saved::None)),
            Op::Sigmoid(x) => Ok((kernels::sigmoid(values(*x)), Saved::None)),
            Op::Linear { input, weight, bias } => {
                plain(kernels::linear(values(*input), values(*weight), values(*bias)))
            }
            Op::GateMul { features, gate } => plain(kernels::gate_mul(values(*features), values(*gate))),
            Op::Concat(a, b) => plain(kernels::concat_channels(values(*a), values(*b))),
            Op::BroadcastSpatial { input, h, w } => plain(kernels::broadcast_spatial(values(*input), *h, *w)),
            Op::Reshape { input, shape } => plain(values(*input).clone().reshape(shape)),
            Op::Mul(a, b) => {
                let (a, b) = (values(*a), values(*b));
                if a.shape() != b.shape() {
                    return Err(Error::shape(format!(
                        "elementwise product of {:?} and {:?}",
                        a.shape(),
                        b.shape()
                    )));
                }
                let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
                plain(Tensor::new(a.shape().to_vec(), data))
            }
            Op::Sum(x) => Ok((Tensor::scalar(values(*x).sum()), Saved::None)),
            Op::CrossEntropy { logits, labels } => {
                let (loss, probs) = kernels::softmax_cross_entropy(values(*logits), labels)?;
                Ok((Tensor::scalar(loss), Saved::Probs(probs)))
            }
        }
    }

    fn push(&mut self, op: Op) -> Result<NodeId> {
        let inputs = op.inputs();
        for &i in &inputs {
            self.node(i)?;
        }
        let requires_grad = inputs.iter().any(|&i| self.nodes[i.0].requires_grad);
        let nodes = &self.nodes;
        let (value, saved) = Self::eval(&op, &|id| &nodes[id.0].value)?;
        self.nodes.push(Node {
            value,
            op,
            saved,
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn conv2d(&mut self, input: NodeId, kernel: NodeId, bias: NodeId, spec: Conv2dSpec) -> Result<NodeId> {
        self.push(Op::Conv2d {
            input,
            kernel,
            bias,
            spec,
        })
    }

    pub fn transposed_conv2d(
        &mut self,
        input: NodeId,
        kernel: NodeId,
        bias: NodeId,
        spec: Conv2dSpec,
    ) -> Result<NodeId> {
        self.push(Op::TransposedConv2d {
            input,
            kernel,
            bias,
            spec,
        })
    }

    pub fn maxpool2d(&mut self, input: NodeId, window: (usize, usize), stride: (usize, usize)) -> Result<NodeId> {
        self.push(Op::MaxPool { input, window, stride })
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Sigmoid(x))
    }

    pub fn linear(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        self.push(Op::Linear { input, weight, bias })
    }

    /// Multiplies NCHW feature maps by a gate of shape CHW (shared by the
    /// batch) or NCHW (one gate per sample).
    pub fn gate_mul(&mut self, features: NodeId, gate: NodeId) -> Result<NodeId> {
        self.push(Op::GateMul { features, gate })
    }

    pub fn concat_channels(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Concat(a, b))
    }

    pub fn broadcast_spatial(&mut self, input: NodeId, h: usize, w: usize) -> Result<NodeId> {
        self.push(Op::BroadcastSpatial { input, h, w })
    }

    pub fn reshape(&mut self, input: NodeId, shape: &[usize]) -> Result<NodeId> {
        self.push(Op::Reshape {
            input,
            shape: shape.to_vec(),
        })
    }

    /// Collapses everything after the batch axis.
    pub fn flatten(&mut self, input: NodeId) -> Result<NodeId> {
        let shape = self.node(input)?.value.shape();
        let n = shape[0];
        let rest = shape[1..].iter().product();
        self.reshape(input, &[n, rest])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Mul(a, b))
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.push(Op::Sum(x))
    }

    /// Mean softmax cross-entropy over the batch; a scalar node.
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        self.push(Op::CrossEntropy {
            logits,
            labels: labels.to_vec(),
        })
    }

    /// Class probabilities saved by a cross-entropy node.
    pub fn probabilities(&self, loss: NodeId) -> Option<&Tensor<T>> {
        match &self.nodes.get(loss.0)?.saved {
            Saved::Probs(p) => Some(p),
            _ => None,
        }
    }

    /// Recomputes every non-leaf node from the recorded leaves.
    pub fn replay(&self) -> Result<Vec<Tensor<T>>> {
        let mut values: Vec<Tensor<T>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Leaf => node.value.clone(),
                ref op => Self::eval(op, &|id| &values[id.0])?.0,
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Reverse sweep from a scalar `loss` node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        let root = self.nodes.get(loss.0).ok_or_else(|| {
            Error::Graph(format!(
                "backward from node {} but only {} nodes were recorded; run the forward pass first",
                loss.0,
                self.nodes.len()
            ))
        })?;
        if root.value.len() != 1 {
            return Err(Error::Graph(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(root.value.shape(), T::one()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let wants = |id: NodeId| self.nodes[id.0].requires_grad;
            let mut contributions: Vec<(NodeId, Tensor<T>)> = Vec::new();
            match &node.op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::Conv2d {
                    input,
                    kernel,
                    bias,
                    spec,
                }
                | Op::TransposedConv2d {
                    input,
                    kernel,
                    bias,
                    spec,
                } => {
                    let need = [wants(*input), wants(*kernel), wants(*bias)];
                    let (x, k) = (&self.nodes[input.0].value, &self.nodes[kernel.0].value);
                    let r = if matches!(node.op, Op::Conv2d { .. }) {
                        kernels::conv2d_backward(x, k, &g, *spec, need)?
                    } else {
                        kernels::transposed_conv2d_backward(x, k, &g, *spec, need)?
                    };
                    contributions.extend(r.input.map(|t| (*input, t)));
                    contributions.extend(r.kernel.map(|t| (*kernel, t)));
                    contributions.extend(r.bias.map(|t| (*bias, t)));
                }
                Op::MaxPool { input, .. } => {
                    let Saved::Argmax(arg) = &node.saved else {
                        return Err(Error::Graph("maxpool node lost its argmax record".into()));
                    };
                    let shape = self.nodes[input.0].value.shape();
                    contributions.push((*input, kernels::maxpool2d_backward(shape, arg, &g)));
                }
                Op::Relu(x) => {
                    contributions.push((*x, kernels::relu_backward(&self.nodes[x.0].value, &g)));
                }
                Op::Sigmoid(x) => {
                    contributions.push((*x, kernels::sigmoid_backward(&node.value, &g)));
                }
                Op::Linear { input, weight, bias } => {
                    let need = [wants(*input), wants(*weight), wants(*bias)];
                    let r =
                        kernels::linear_backward(&self.nodes[input.0].value, &self.nodes[weight.0].value, &g, need)?;
                    contributions.extend(r.input.map(|t| (*input, t)));
                    contributions.extend(r.kernel.map(|t| (*weight, t)));
                    contributions.extend(r.bias.map(|t| (*bias, t)));
                }
                Op::GateMul { features, gate } => {
                    let (df, dg) = kernels::gate_mul_backward(
                        &self.nodes[features.0].value,
                        &self.nodes[gate.0].value,
                        &g,
                        [wants(*features), wants(*gate)],
                    )?;
                    contributions.extend(df.map(|t| (*features, t)));
                    contributions.extend(dg.map(|t| (*gate, t)));
                }
                Op::Concat(a, b) => {
                    let (da, db) = kernels::concat_channels_backward(
                        self.nodes[a.0].value.shape(),
                        self.nodes[b.0].value.shape(),
                        &g,
                    );
                    contributions.push((*a, da));
                    contributions.push((*b, db));
                }
                Op::BroadcastSpatial { input, .. } => {
                    let shape = self.nodes[input.0].value.shape();
                    contributions.push((*input, kernels::broadcast_spatial_backward(shape, &g)));
                }
                Op::Reshape { input, .. } => {
                    let shape = self.nodes[input.0].value.shape();
                    contributions.push((*input, g.reshape(shape)?));
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let prod = |x: &Tensor<T>| {
                        let data = g.data().iter().zip(x.data()).map(|(&d, &v)| d * v).collect();
                        Tensor::new(x.shape().to_vec(), data)
                    };
                    contributions.push((*a, prod(vb)?));
                    contributions.push((*b, prod(va)?));
                }
                Op::Sum(x) => {
                    let shape = self.nodes[x.0].value.shape();
                    contributions.push((*x, Tensor::full(shape, g.data()[0])));
                }
                Op::CrossEntropy { logits, labels } => {
                    let Saved::Probs(p) = &node.saved else {
                        return Err(Error::Graph("cross-entropy node lost its probabilities".into()));
                    };
                    contributions.push((*logits, kernels::softmax_cross_entropy_backward(p, labels, g.data()[0])));
                }
            }
            for (id, t) in contributions {
                if !wants(id) {
                    continue;
                }
                match grads[id.0].as_mut() {
                    Some(acc) => acc.add_assign(&t)?,
                    None => grads[id.0] = Some(t),
                }
            }
        }

        Ok(Gradients {
            grads,
            bindings: self.bindings.clone(),
        })
    }
}
