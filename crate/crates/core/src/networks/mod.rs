//! The frozen function network and the two context networks that gate it.

mod checkpoint;
mod context;
mod function;

use crate::digest::Hasher;
use crate::error::{Error, Result};
use crate::tensor::{Conv2dSpec, Graph, NodeId, Parameter, Real, SeededRng, Tensor};

pub use checkpoint::{Checkpoint, CheckpointHeader, LayerEntry, CHECKPOINT_VERSION};
pub use context::{ContextNetwork, FeatureContextNetwork, SpatialContextNetwork};
pub use function::{gate_shape, FunctionNetwork, GATE_CHANNELS};

/// Anything that owns a fixed, ordered list of parameters.
pub trait Module<T: Real> {
    fn params(&self) -> Vec<&Parameter<T>>;
    fn params_mut(&mut self) -> Vec<&mut Parameter<T>>;

    fn set_trainable(&mut self, trainable: bool) {
        for p in self.params_mut() {
            p.set_trainable(trainable);
        }
    }

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Digest over names, shapes, trainable flags and the exact bits of every
    /// value.
    fn param_digest(&self) -> String {
        let mut h = Hasher::new();
        for p in self.params() {
            h.field(p.name());
            for &d in p.value().shape() {
                h.update(&(d as u64).to_le_bytes());
            }
            h.update(&[u8::from(p.trainable())]);
            for v in p.value().data() {
                h.update(&v.to_f64_lossy().to_le_bytes());
            }
        }
        h.finish()
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value().len()).sum()
    }
}

/// He-style uniform bound `sqrt(6 / fan_in)`.
fn he_uniform<T: Real>(shape: &[usize], fan_in: usize, rng: &mut SeededRng) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Tensor::uniform(shape, -bound, bound, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Conv<T: Real> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
    pub spec: Conv2dSpec,
}

impl<T: Real> Conv<T> {
    pub fn new(name: &str, in_ch: usize, out_ch: usize, kernel: usize, spec: Conv2dSpec, rng: &mut SeededRng) -> Self {
        let shape = [out_ch, in_ch, kernel, kernel];
        Self {
            weight: Parameter::new(
                format!("{name}.weight"),
                he_uniform(&shape, in_ch * kernel * kernel, rng),
                true,
            ),
            bias: Parameter::new(format!("{name}.bias"), Tensor::zeros(&[out_ch]), true),
            spec,
        }
    }

    pub fn forward(&self, g: &mut Graph<T>, x: NodeId) -> Result<NodeId> {
        let w = g.param(&self.weight);
        let b = g.param(&self.bias);
        g.conv2d(x, w, b, self.spec)
    }

    pub fn cast<U: Real>(&self) -> Conv<U> {
        Conv {
            weight: cast_param(&self.weight),
            bias: cast_param(&self.bias),
            spec: self.spec,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TransposedConv<T: Real> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
    pub spec: Conv2dSpec,
}

impl<T: Real> TransposedConv<T> {
    pub fn new(name: &str, in_ch: usize, out_ch: usize, kernel: usize, spec: Conv2dSpec, rng: &mut SeededRng) -> Self {
        let shape = [in_ch, out_ch, kernel, kernel];
        // Each output pixel sees about in_ch * (kernel / stride)^2 inputs.
        let fan_in = (in_ch * kernel * kernel / (spec.stride.0 * spec.stride.1)).max(1);
        Self {
            weight: Parameter::new(format!("{name}.weight"), he_uniform(&shape, fan_in, rng), true),
            bias: Parameter::new(format!("{name}.bias"), Tensor::zeros(&[out_ch]), true),
            spec,
        }
    }

    pub fn forward(&self, g: &mut Graph<T>, x: NodeId) -> Result<NodeId> {
        let w = g.param(&self.weight);
        let b = g.param(&self.bias);
        g.transposed_conv2d(x, w, b, self.spec)
    }

    pub fn cast<U: Real>(&self) -> TransposedConv<U> {
        TransposedConv {
            weight: cast_param(&self.weight),
            bias: cast_param(&self.bias),
            spec: self.spec,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense<T: Real> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
}

impl<T: Real> Dense<T> {
    pub fn new(name: &str, inputs: usize, outputs: usize, rng: &mut SeededRng) -> Self {
        Self {
            weight: Parameter::new(
                format!("{name}.weight"),
                he_uniform(&[inputs, outputs], inputs, rng),
                true,
            ),
            bias: Parameter::new(format!("{name}.bias"), Tensor::zeros(&[outputs]), true),
        }
    }

    pub fn forward(&self, g: &mut Graph<T>, x: NodeId) -> Result<NodeId> {
        let w = g.param(&self.weight);
        let b = g.param(&self.bias);
        g.linear(x, w, b)
    }

    pub fn cast<U: Real>(&self) -> Dense<U> {
        Dense {
            weight: cast_param(&self.weight),
            bias: cast_param(&self.bias),
        }
    }
}

pub(crate) fn cast_param<T: Real, U: Real>(p: &Parameter<T>) -> Parameter<U> {
    Parameter::new(p.name(), p.value().cast(), p.trainable())
}

/// Rejects anything but rows with a single 1 and zeros elsewhere.
pub fn check_one_hot<T: Real>(signal: &Tensor<T>, width: usize) -> Result<()> {
    let (_, cols) = signal.dims2()?;
    if cols != width {
        return Err(Error::shape(format!(
            "signal has {cols} entries per sample, expected {width}"
        )));
    }
    for (i, row) in signal.data().chunks(cols).enumerate() {
        let ones = row.iter().filter(|&&v| v == T::one()).count();
        let zeros = row.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || zeros != cols - 1 {
            return Err(Error::invalid(format!("signal row {i} is not one-hot: {row:?}")));
        }
    }
    Ok(())
}
