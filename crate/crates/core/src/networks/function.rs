use super::{Conv, Dense, Module};
use crate::dataset::CanvasGeometry;
use crate::error::{Error, Result};
use crate::tensor::{Conv2dSpec, Graph, NodeId, Parameter, Real, SeededRng, Tensor};

/// Channels of the gated feature maps.
pub const GATE_CHANNELS: usize = 16;
const HIDDEN: usize = 128;
const CLASSES: usize = 10;

/// `[channels, height, width]` of the gated conv2 activation for a canvas:
/// conv layers keep the extent, each 2x2 pool halves it.
pub fn gate_shape(geometry: CanvasGeometry) -> [usize; 3] {
    [GATE_CHANNELS, geometry.height() / 2, geometry.width() / 2]
}

/// Single-digit classifier over a whole canvas:
///
/// conv 16@5x5 pad 2, relu, maxpool 2, conv 16@5x5 pad 2, relu, **gate**,
/// maxpool 2, dense 128, relu, dense 10.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionNetwork<T: Real = f32> {
    geometry: CanvasGeometry,
    conv1: Conv<T>,
    conv2: Conv<T>,
    fc1: Dense<T>,
    fc2: Dense<T>,
}

impl<T: Real> FunctionNetwork<T> {
    pub fn new(geometry: CanvasGeometry, rng: &mut SeededRng) -> Self {
        let same = Conv2dSpec::new((1, 1), (2, 2));
        let [c, h, w] = gate_shape(geometry);
        let flat = c * (h / 2) * (w / 2);
        Self {
            geometry,
            conv1: Conv::new("fn.conv1", 1, GATE_CHANNELS, 5, same, rng),
            conv2: Conv::new("fn.conv2", GATE_CHANNELS, GATE_CHANNELS, 5, same, rng),
            fc1: Dense::new("fn.fc1", flat, HIDDEN, rng),
            fc2: Dense::new("fn.fc2", HIDDEN, CLASSES, rng),
        }
    }

    pub fn geometry(&self) -> CanvasGeometry {
        self.geometry
    }

    pub fn gate_shape(&self) -> [usize; 3] {
        gate_shape(self.geometry)
    }

    /// Marks every parameter frozen.
    pub fn freeze(&mut self) {
        self.set_trainable(false);
    }

    pub fn is_frozen(&self) -> bool {
        self.params().iter().all(|p| !p.trainable())
    }

    fn check_image(&self, image: &Tensor<T>) -> Result<()> {
        let (_, c, h, w) = image.dims4()?;
        let g = self.geometry;
        if (c, h, w) != (1, g.height(), g.width()) {
            return Err(Error::shape(format!(
                "function network expects images of 1x{}x{}, got {c}x{h}x{w}",
                g.height(),
                g.width()
            )));
        }
        Ok(())
    }

    /// Records the forward pass; returns the `N x 10` logits node. With
    /// `gate`, the conv2 activation is multiplied by it before pooling.
    pub fn forward(&self, g: &mut Graph<T>, image: NodeId, gate: Option<NodeId>) -> Result<NodeId> {
        self.check_image(g.value(image))?;
        let x = self.conv1.forward(g, image)?;
        let x = g.relu(x)?;
        let x = g.maxpool2d(x, (2, 2), (2, 2))?;
        let x = self.conv2.forward(g, x)?;
        let mut x = g.relu(x)?;
        if let Some(gate) = gate {
            x = g.gate_mul(x, gate)?;
        }
        let x = g.maxpool2d(x, (2, 2), (2, 2))?;
        let x = g.flatten(x)?;
        let x = self.fc1.forward(g, x)?;
        let x = g.relu(x)?;
        self.fc2.forward(g, x)
    }

    /// Evaluates logits without keeping the graph.
    pub fn logits(&self, images: &Tensor<T>, gate: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let x = g.input(images.clone());
        let gate = gate.map(|t| g.input(t.clone()));
        let out = self.forward(&mut g, x, gate)?;
        Ok(g.value(out).clone())
    }

    pub fn cast<U: Real>(&self) -> FunctionNetwork<U> {
        FunctionNetwork {
            geometry: self.geometry,
            conv1: self.conv1.cast(),
            conv2: self.conv2.cast(),
            fc1: self.fc1.cast(),
            fc2: self.fc2.cast(),
        }
    }
}

impl<T: Real> Module<T> for FunctionNetwork<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        vec![
            &self.conv1.weight,
            &self.conv1.bias,
            &self.conv2.weight,
            &self.conv2.bias,
            &self.fc1.weight,
            &self.fc1.bias,
            &self.fc2.weight,
            &self.fc2.bias,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.fc1.weight,
            &mut self.fc1.bias,
            &mut self.fc2.weight,
            &mut self.fc2.bias,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(slots: usize) -> FunctionNetwork<f32> {
        FunctionNetwork::new(CanvasGeometry::new(slots).unwrap(), &mut SeededRng::new(3))
    }

    fn images(n: usize, slots: usize, seed: u64) -> Tensor<f32> {
        let mut rng = SeededRng::new(seed);
        Tensor::uniform(&[n, 1, 28, 28 * slots], 0.0, 1.0, &mut rng)
    }

    #[test]
    fn logits_shape_for_each_geometry() {
        for slots in 1..=3 {
            let f = net(slots);
            let y = f.logits(&images(3, slots, 1), None).unwrap();
            assert_eq!(y.shape(), [3, 10]);
            assert_eq!(f.gate_shape(), [16, 14, 14 * slots]);
        }
    }

    #[test]
    fn unit_gate_is_bitwise_identity() {
        let f = net(2);
        let x = images(4, 2, 2);
        let plain = f.logits(&x, None).unwrap();
        let gated = f.logits(&x, Some(&Tensor::ones(&[16, 14, 28]))).unwrap();
        assert_eq!(plain, gated);
    }

    #[test]
    fn zero_gate_gives_input_independent_logits() {
        let f = net(2);
        let zero = Tensor::zeros(&[16, 14, 28]);
        let a = f.logits(&images(2, 2, 5), Some(&zero)).unwrap();
        let b = f.logits(&images(2, 2, 6), Some(&zero)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sample(0).unwrap().data(), a.sample(1).unwrap().data());
    }

    #[test]
    fn gate_shape_mismatch_is_rejected() {
        let f = net(2);
        let err = f
            .logits(&images(1, 2, 1), Some(&Tensor::ones(&[16, 14, 42])))
            .unwrap_err();
        assert!(matches!(err, Error::Shape(_)), "{err}");
    }

    #[test]
    fn wrong_canvas_is_rejected() {
        let f = net(2);
        assert!(f.logits(&images(1, 3, 1), None).is_err());
    }

    #[test]
    fn freeze_marks_everything() {
        let mut f = net(2);
        assert!(!f.is_frozen());
        f.freeze();
        assert!(f.is_frozen());
    }
}
