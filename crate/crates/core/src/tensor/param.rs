use super::{Real, Tensor};
use crate::error::{Error, Result};

/// A named weight tensor with its gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T: Real = f32> {
    name: String,
    value: Tensor<T>,
    grad: Tensor<T>,
    trainable: bool,
    grad_recorded: bool,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>, trainable: bool) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
            trainable,
            grad_recorded: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor<T> {
        &self.value
    }

    pub fn grad(&self) -> &Tensor<T> {
        &self.grad
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
    }

    pub fn has_grad(&self) -> bool {
        self.grad_recorded
    }

    /// Replaces the value; the new tensor must keep the shape.
    pub fn set_value(&mut self, value: Tensor<T>) -> Result<()> {
        if value.shape() != self.value.shape() {
            return Err(Error::shape(format!(
                "parameter {} has shape {:?}, got {:?}",
                self.name,
                self.value.shape(),
                value.shape()
            )));
        }
        self.value = value;
        Ok(())
    }

    pub(crate) fn value_mut(&mut self) -> &mut Tensor<T> {
        &mut self.value
    }

    pub fn accumulate_grad(&mut self, g: &Tensor<T>) -> Result<()> {
        if g.shape() != self.value.shape() {
            return Err(Error::shape(format!(
                "gradient {:?} for parameter {} of shape {:?}",
                g.shape(),
                self.name,
                self.value.shape()
            )));
        }
        self.grad.add_assign(g)?;
        self.grad_recorded = true;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|v| *v = T::zero());
        self.grad_recorded = false;
    }
}
