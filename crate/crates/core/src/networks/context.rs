use super::{check_one_hot, gate_shape, Conv, Dense, Module, TransposedConv, GATE_CHANNELS};
use crate::dataset::{CanvasGeometry, Task};
use crate::error::{Error, Result};
use crate::tensor::{Conv2dSpec, Graph, NodeId, Parameter, Real, SeededRng, Tensor};

const DECONV_KERNEL: usize = 4;

/// Seed extent and second-deconv padding that make two stride-2, 4x4
/// transposed convolutions land exactly on `target`.
///
/// The first deconv (padding 1) doubles the seed; the second maps `2s` to
/// `4s + 2 - 2p`. With `s = ceil(target / 4)` the padding is a whole number
/// whenever `target` is even, which the gate extents always are.
fn seed_extent(target: usize) -> Result<(usize, usize)> {
    let seed = target.div_ceil(4);
    let full = 4 * seed + 2;
    if !target.is_multiple_of(2) || full < target {
        return Err(Error::shape(format!("no seed extent reaches gate extent {target}")));
    }
    Ok((seed, (full - target) / 2))
}

/// Gate generator driven only by the one-hot slot cue.
///
/// one-hot k, dense to a `16 x h0 x w0` seed, relu, deconv 4x4 s2, relu,
/// deconv 4x4 s2, relu, conv 1x1, sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialContextNetwork<T: Real = f32> {
    geometry: CanvasGeometry,
    seed: (usize, usize),
    embed: Dense<T>,
    deconv1: TransposedConv<T>,
    deconv2: TransposedConv<T>,
    head: Conv<T>,
}

impl<T: Real> SpatialContextNetwork<T> {
    pub fn new(geometry: CanvasGeometry, rng: &mut SeededRng) -> Result<Self> {
        let [c, gh, gw] = gate_shape(geometry);
        let (sh, ph) = seed_extent(gh)?;
        let (sw, pw) = seed_extent(gw)?;
        Ok(Self {
            geometry,
            seed: (sh, sw),
            embed: Dense::new("ctx.embed", geometry.slots(), c * sh * sw, rng),
            deconv1: TransposedConv::new("ctx.deconv1", c, c, DECONV_KERNEL, Conv2dSpec::new((2, 2), (1, 1)), rng),
            deconv2: TransposedConv::new(
                "ctx.deconv2",
                c,
                c,
                DECONV_KERNEL,
                Conv2dSpec::new((2, 2), (ph, pw)),
                rng,
            ),
            head: Conv::new("ctx.head", c, c, 1, Conv2dSpec::unit(), rng),
        })
    }

    pub fn geometry(&self) -> CanvasGeometry {
        self.geometry
    }

    /// `N x k` one-hot signals to `N x 16 x Hg x Wg` gates.
    pub fn forward(&self, g: &mut Graph<T>, signal: NodeId) -> Result<NodeId> {
        check_one_hot(g.value(signal), self.geometry.slots())?;
        let n = g.value(signal).shape()[0];
        let x = self.embed.forward(g, signal)?;
        let x = g.relu(x)?;
        let x = g.reshape(x, &[n, GATE_CHANNELS, self.seed.0, self.seed.1])?;
        let x = self.deconv1.forward(g, x)?;
        let x = g.relu(x)?;
        let x = self.deconv2.forward(g, x)?;
        let x = g.relu(x)?;
        let x = self.head.forward(g, x)?;
        g.sigmoid(x)
    }

    pub fn cast<U: Real>(&self) -> SpatialContextNetwork<U> {
        SpatialContextNetwork {
            geometry: self.geometry,
            seed: self.seed,
            embed: self.embed.cast(),
            deconv1: self.deconv1.cast(),
            deconv2: self.deconv2.cast(),
            head: self.head.cast(),
        }
    }
}

impl<T: Real> Module<T> for SpatialContextNetwork<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        vec![
            &self.embed.weight,
            &self.embed.bias,
            &self.deconv1.weight,
            &self.deconv1.bias,
            &self.deconv2.weight,
            &self.deconv2.bias,
            &self.head.weight,
            &self.head.bias,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![
            &mut self.embed.weight,
            &mut self.embed.bias,
            &mut self.deconv1.weight,
            &mut self.deconv1.bias,
            &mut self.deconv2.weight,
            &mut self.deconv2.bias,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }
}

/// Gate generator that reads the canvas as well as the group cue.
///
/// conv 8@5x5 s2, relu, conv 16@3x3, relu, concat the broadcast cue,
/// conv 16@3x3, relu, conv 1x1, sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureContextNetwork<T: Real = f32> {
    geometry: CanvasGeometry,
    signal_len: usize,
    conv1: Conv<T>,
    conv2: Conv<T>,
    fuse: Conv<T>,
    head: Conv<T>,
}

impl<T: Real> FeatureContextNetwork<T> {
    pub fn new(geometry: CanvasGeometry, signal_len: usize, rng: &mut SeededRng) -> Self {
        let c = GATE_CHANNELS;
        let same3 = Conv2dSpec::new((1, 1), (1, 1));
        Self {
            geometry,
            signal_len,
            conv1: Conv::new("ctx.conv1", 1, 8, 5, Conv2dSpec::new((2, 2), (2, 2)), rng),
            conv2: Conv::new("ctx.conv2", 8, c, 3, same3, rng),
            fuse: Conv::new("ctx.fuse", c + signal_len, c, 3, same3, rng),
            head: Conv::new("ctx.head", c, c, 1, Conv2dSpec::unit(), rng),
        }
    }

    pub fn geometry(&self) -> CanvasGeometry {
        self.geometry
    }

    pub fn forward(&self, g: &mut Graph<T>, image: NodeId, signal: NodeId) -> Result<NodeId> {
        check_one_hot(g.value(signal), self.signal_len)?;
        let (n, c, h, w) = g.value(image).dims4()?;
        let geo = self.geometry;
        if (c, h, w) != (1, geo.height(), geo.width()) {
            return Err(Error::shape(format!(
                "context network expects images of 1x{}x{}, got {c}x{h}x{w}",
                geo.height(),
                geo.width()
            )));
        }
        if g.value(signal).shape()[0] != n {
            return Err(Error::shape(format!(
                "{n} images but {} signals",
                g.value(signal).shape()[0]
            )));
        }
        let [_, gh, gw] = gate_shape(geo);
        let x = self.conv1.forward(g, image)?;
        let x = g.relu(x)?;
        let x = self.conv2.forward(g, x)?;
        let x = g.relu(x)?;
        let cue = g.broadcast_spatial(signal, gh, gw)?;
        let x = g.concat_channels(x, cue)?;
        let x = self.fuse.forward(g, x)?;
        let x = g.relu(x)?;
        let x = self.head.forward(g, x)?;
        g.sigmoid(x)
    }

    pub fn cast<U: Real>(&self) -> FeatureContextNetwork<U> {
        FeatureContextNetwork {
            geometry: self.geometry,
            signal_len: self.signal_len,
            conv1: self.conv1.cast(),
            conv2: self.conv2.cast(),
            fuse: self.fuse.cast(),
            head: self.head.cast(),
        }
    }
}

impl<T: Real> Module<T> for FeatureContextNetwork<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        vec![
            &self.conv1.weight,
            &self.conv1.bias,
            &self.conv2.weight,
            &self.conv2.bias,
            &self.fuse.weight,
            &self.fuse.bias,
            &self.head.weight,
            &self.head.bias,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        vec![
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.fuse.weight,
            &mut self.fuse.bias,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }
}

/// Either context variant, picked by task.
#[derive(Debug, Clone, PartialEq)]
pub enum ContextNetwork<T: Real = f32> {
    Spatial(SpatialContextNetwork<T>),
    Feature(FeatureContextNetwork<T>),
}

impl<T: Real> ContextNetwork<T> {
    pub fn for_task(task: Task, rng: &mut SeededRng) -> Result<Self> {
        match task {
            Task::Spatial2 | Task::Spatial3 => Ok(Self::Spatial(SpatialContextNetwork::new(task.geometry(), rng)?)),
            Task::Feature2 => Ok(Self::Feature(FeatureContextNetwork::new(
                task.geometry(),
                task.signal_len(),
                rng,
            ))),
            Task::Pretrain { .. } => Err(Error::invalid(format!("task {task} has no context network"))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Spatial(_) => "spatial",
            Self::Feature(_) => "feature",
        }
    }

    pub fn geometry(&self) -> CanvasGeometry {
        match self {
            Self::Spatial(n) => n.geometry(),
            Self::Feature(n) => n.geometry(),
        }
    }

    pub fn signal_len(&self) -> usize {
        match self {
            Self::Spatial(n) => n.geometry().slots(),
            Self::Feature(n) => n.signal_len,
        }
    }

    /// Records the gate for a batch; the spatial variant ignores `image`.
    pub fn forward(&self, g: &mut Graph<T>, image: NodeId, signal: NodeId) -> Result<NodeId> {
        match self {
            Self::Spatial(n) => n.forward(g, signal),
            Self::Feature(n) => n.forward(g, image, signal),
        }
    }

    /// Evaluates gates without keeping the graph.
    pub fn gates(&self, images: &Tensor<T>, signals: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let x = g.input(images.clone());
        let s = g.input(signals.clone());
        let out = self.forward(&mut g, x, s)?;
        Ok(g.value(out).clone())
    }

    pub fn cast<U: Real>(&self) -> ContextNetwork<U> {
        match self {
            Self::Spatial(n) => ContextNetwork::Spatial(n.cast()),
            Self::Feature(n) => ContextNetwork::Feature(n.cast()),
        }
    }
}

impl<T: Real> Module<T> for ContextNetwork<T> {
    fn params(&self) -> Vec<&Parameter<T>> {
        match self {
            Self::Spatial(n) => n.params(),
            Self::Feature(n) => n.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<T>> {
        match self {
            Self::Spatial(n) => n.params_mut(),
            Self::Feature(n) => n.params_mut(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(rows: &[usize], k: usize) -> Tensor<f32> {
        let mut t = Tensor::zeros(&[rows.len(), k]);
        for (i, &r) in rows.iter().enumerate() {
            t.data_mut()[i * k + r] = 1.0;
        }
        t
    }

    #[test]
    fn seed_extents() {
        assert_eq!(seed_extent(14).unwrap(), (4, 2));
        assert_eq!(seed_extent(28).unwrap(), (7, 1));
        assert_eq!(seed_extent(42).unwrap(), (11, 2));
        assert!(seed_extent(13).is_err());
    }

    #[test]
    fn spatial_gate_shape_and_range() {
        for task in [Task::Spatial2, Task::Spatial3] {
            let k = task.slots();
            let ctx = ContextNetwork::<f32>::for_task(task, &mut SeededRng::new(1)).unwrap();
            let images = Tensor::zeros(&[k, 1, 28, 28 * k]);
            let rows: Vec<usize> = (0..k).collect();
            let gates = ctx.gates(&images, &one_hot(&rows, k)).unwrap();
            assert_eq!(gates.shape(), [k, 16, 14, 14 * k]);
            assert!(gates.data().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn spatial_gate_is_pure_and_image_free() {
        let ctx = ContextNetwork::<f32>::for_task(Task::Spatial2, &mut SeededRng::new(2)).unwrap();
        let mut rng = SeededRng::new(3);
        let a = Tensor::uniform(&[1, 1, 28, 56], 0.0, 1.0, &mut rng);
        let b = Tensor::uniform(&[1, 1, 28, 56], 0.0, 1.0, &mut rng);
        let s = one_hot(&[1], 2);
        assert_eq!(ctx.gates(&a, &s).unwrap(), ctx.gates(&a, &s).unwrap());
        assert_eq!(ctx.gates(&a, &s).unwrap(), ctx.gates(&b, &s).unwrap());
    }

    #[test]
    fn feature_gate_depends_on_both_inputs() {
        let ctx = ContextNetwork::<f32>::for_task(Task::Feature2, &mut SeededRng::new(4)).unwrap();
        let mut rng = SeededRng::new(5);
        let a = Tensor::uniform(&[1, 1, 28, 56], 0.0, 1.0, &mut rng);
        let b = Tensor::uniform(&[1, 1, 28, 56], 0.0, 1.0, &mut rng);
        let s0 = one_hot(&[0], 2);
        let s1 = one_hot(&[1], 2);
        let ga = ctx.gates(&a, &s0).unwrap();
        assert_eq!(ga.shape(), [1, 16, 14, 28]);
        assert_eq!(ga, ctx.gates(&a, &s0).unwrap());
        assert_ne!(ga, ctx.gates(&b, &s0).unwrap());
        assert_ne!(ga, ctx.gates(&a, &s1).unwrap());
        assert!(ga.data().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn non_one_hot_signals_are_rejected() {
        let ctx = ContextNetwork::<f32>::for_task(Task::Spatial2, &mut SeededRng::new(6)).unwrap();
        let img = Tensor::zeros(&[1, 1, 28, 56]);
        for bad in [vec![1.0, 1.0], vec![0.0, 0.0], vec![0.5, 0.5]] {
            let s = Tensor::new(vec![1, 2], bad).unwrap();
            assert!(ctx.gates(&img, &s).is_err());
        }
        let wrong_len = one_hot(&[0], 3);
        assert!(ctx.gates(&img, &wrong_len).is_err());
    }

    #[test]
    fn feature_rejects_wrong_canvas() {
        let ctx = ContextNetwork::<f32>::for_task(Task::Feature2, &mut SeededRng::new(7)).unwrap();
        let img = Tensor::zeros(&[1, 1, 28, 84]);
        assert!(matches!(ctx.gates(&img, &one_hot(&[0], 2)), Err(Error::Shape(_))));
    }
}
