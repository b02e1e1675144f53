//! Pure forward and backward kernels. The graph in `graph.rs` records which
//! kernel produced each node; these functions hold no state.

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Stride and zero padding of a 2-D (transposed) convolution, as
/// `(vertical, horizontal)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dSpec {
    pub stride: (usize, usize),
    pub padding: (usize, usize),
}

impl Conv2dSpec {
    pub const fn new(stride: (usize, usize), padding: (usize, usize)) -> Self {
        Self { stride, padding }
    }

    pub const fn unit() -> Self {
        Self::new((1, 1), (0, 0))
    }

    /// Output extent of a convolution along one axis.
    pub fn conv_out(extent: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
        let padded = extent + 2 * pad;
        if stride == 0 || padded < kernel {
            return None;
        }
        Some((padded - kernel) / stride + 1)
    }

    /// Output extent of a transposed convolution along one axis.
    pub fn transposed_out(extent: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
        let full = (extent.checked_sub(1)?) * stride + kernel;
        full.checked_sub(2 * pad).filter(|&v| v > 0)
    }
}

/// Geometry shared by im2col and col2im: an image of `channels x h x w`
/// scanned by a `kh x kw` window onto an `oh x ow` grid.
#[derive(Debug, Clone, Copy)]
struct Patches {
    channels: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    spec: Conv2dSpec,
}

impl Patches {
    fn rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    /// Source index into the image for window tap `(ki, kj)` at grid point
    /// `(oy, ox)`, or `None` when it falls in the padding.
    #[inline]
    fn source(&self, ki: usize, kj: usize, oy: usize, ox: usize) -> Option<(usize, usize)> {
        let iy = (oy * self.spec.stride.0 + ki).checked_sub(self.spec.padding.0)?;
        let ix = (ox * self.spec.stride.1 + kj).checked_sub(self.spec.padding.1)?;
        (iy < self.h && ix < self.w).then_some((iy, ix))
    }

    fn im2col<T: Real>(&self, image: &[T], cols: &mut [T]) {
        let ncols = self.cols();
        for ci in 0..self.channels {
            let plane = &image[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    let dst = &mut cols[row * ncols..(row + 1) * ncols];
                    for oy in 0..self.oh {
                        for ox in 0..self.ow {
                            dst[oy * self.ow + ox] = match self.source(ki, kj, oy, ox) {
                                Some((iy, ix)) => plane[iy * self.w + ix],
                                None => T::zero(),
                            };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of `im2col`: scatter-adds columns back onto the image.
    fn col2im<T: Real>(&self, cols: &[T], image: &mut [T]) {
        let ncols = self.cols();
        for ci in 0..self.channels {
            let plane = &mut image[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    let src = &cols[row * ncols..(row + 1) * ncols];
                    for oy in 0..self.oh {
                        for ox in 0..self.ow {
                            if let Some((iy, ix)) = self.source(ki, kj, oy, ox) {
                                let v = &mut plane[iy * self.w + ix];
                                *v = *v + src[oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_bias<T: Real>(bias: &Tensor<T>, channels: usize, what: &str) -> Result<()> {
    if bias.shape() != [channels] {
        return Err(Error::shape(format!(
            "{what} bias has shape {:?}, expected [{channels}]",
            bias.shape()
        )));
    }
    Ok(())
}

fn add_channel_bias<T: Real>(out: &mut [T], bias: &[T], plane: usize) {
    for (chunk, &b) in out.chunks_mut(plane).zip(bias.iter().cycle()) {
        for v in chunk {
            *v = *v + b;
        }
    }
}

fn channel_bias_grad<T: Real>(dy: &Tensor<T>) -> Tensor<T> {
    let (n, c, h, w) = dy.dims4().expect("rank-4 upstream gradient");
    let mut db = vec![T::zero(); c];
    for s in 0..n {
        for (ch, acc) in db.iter_mut().enumerate() {
            let start = (s * c + ch) * h * w;
            *acc = *acc + dy.data()[start..start + h * w].iter().copied().sum::<T>();
        }
    }
    Tensor::new(vec![c], db).expect("non-empty bias gradient")
}

fn conv_patches<T: Real>(input: &Tensor<T>, kernel: &Tensor<T>, spec: Conv2dSpec) -> Result<(Patches, usize, usize)> {
    let (n, c, h, w) = input.dims4()?;
    let (o, kc, kh, kw) = kernel.dims4().map_err(|_| {
        Error::shape(format!(
            "conv2d kernel must be O x C x Kh x Kw, got {:?}",
            kernel.shape()
        ))
    })?;
    if kc != c {
        return Err(Error::shape(format!(
            "conv2d input has {c} channels but kernel expects {kc} (kernel {:?})",
            kernel.shape()
        )));
    }
    let oh = Conv2dSpec::conv_out(h, kh, spec.stride.0, spec.padding.0);
    let ow = Conv2dSpec::conv_out(w, kw, spec.stride.1, spec.padding.1);
    let (Some(oh), Some(ow)) = (oh, ow) else {
        return Err(Error::shape(format!(
            "conv2d kernel {kh}x{kw} with {spec:?} does not fit input {h}x{w}"
        )));
    };
    Ok((
        Patches {
            channels: c,
            h,
            w,
            kh,
            kw,
            oh,
            ow,
            spec,
        },
        n,
        o,
    ))
}

/// Cross-correlation of an `N x C x H x W` input with an `O x C x Kh x Kw`
/// kernel.
pub fn conv2d<T: Real>(input: &Tensor<T>, kernel: &Tensor<T>, bias: &Tensor<T>, spec: Conv2dSpec) -> Result<Tensor<T>> {
    let (p, n, o) = conv_patches(input, kernel, spec)?;
    check_bias(bias, o, "conv2d")?;
    let in_stride = p.channels * p.h * p.w;
    let out_plane = p.cols();
    let mut out = vec![T::zero(); n * o * out_plane];
    let mut cols = vec![T::zero(); p.rows() * p.cols()];
    for s in 0..n {
        p.im2col(&input.data()[s * in_stride..(s + 1) * in_stride], &mut cols);
        let dst = &mut out[s * o * out_plane..(s + 1) * o * out_plane];
        T::gemm(
            false,
            false,
            o,
            out_plane,
            p.rows(),
            T::one(),
            kernel.data(),
            &cols,
            T::zero(),
            dst,
        );
        add_channel_bias(dst, bias.data(), out_plane);
    }
    Tensor::new(vec![n, o, p.oh, p.ow], out)
}

/// Gradients of [`conv2d`] with respect to the requested operands.
pub struct ConvGrads<T: Real> {
    pub input: Option<Tensor<T>>,
    pub kernel: Option<Tensor<T>>,
    pub bias: Option<Tensor<T>>,
}

pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &Tensor<T>,
    spec: Conv2dSpec,
    need: [bool; 3],
) -> Result<ConvGrads<T>> {
    let (p, n, o) = conv_patches(input, kernel, spec)?;
    let in_stride = p.channels * p.h * p.w;
    let out_plane = p.cols();
    let mut dx = need[0].then(|| vec![T::zero(); input.len()]);
    let mut dk = need[1].then(|| vec![T::zero(); kernel.len()]);
    let mut cols = vec![T::zero(); p.rows() * p.cols()];
    for s in 0..n {
        let dy = &grad_out.data()[s * o * out_plane..(s + 1) * o * out_plane];
        if let Some(dk) = dk.as_mut() {
            p.im2col(&input.data()[s * in_stride..(s + 1) * in_stride], &mut cols);
            T::gemm(false, true, o, p.rows(), out_plane, T::one(), dy, &cols, T::one(), dk);
        }
        if let Some(dx) = dx.as_mut() {
            T::gemm(
                true,
                false,
                p.rows(),
                out_plane,
                o,
                T::one(),
                kernel.data(),
                dy,
                T::zero(),
                &mut cols,
            );
            p.col2im(&cols, &mut dx[s * in_stride..(s + 1) * in_stride]);
        }
    }
    Ok(ConvGrads {
        input: dx.map(|d| Tensor::new(input.shape().to_vec(), d)).transpose()?,
        kernel: dk.map(|d| Tensor::new(kernel.shape().to_vec(), d)).transpose()?,
        bias: need[2].then(|| channel_bias_grad(grad_out)),
    })
}

fn transposed_patches<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    spec: Conv2dSpec,
) -> Result<(Patches, usize, usize)> {
    let (n, c, h, w) = input.dims4()?;
    let (kc, o, kh, kw) = kernel.dims4().map_err(|_| {
        Error::shape(format!(
            "transposed_conv2d kernel must be Cin x Cout x Kh x Kw, got {:?}",
            kernel.shape()
        ))
    })?;
    if kc != c {
        return Err(Error::shape(format!(
            "transposed_conv2d input has {c} channels but kernel expects {kc} (kernel {:?})",
            kernel.shape()
        )));
    }
    let oh = Conv2dSpec::transposed_out(h, kh, spec.stride.0, spec.padding.0);
    let ow = Conv2dSpec::transposed_out(w, kw, spec.stride.1, spec.padding.1);
    let (Some(oh), Some(ow)) = (oh, ow) else {
        return Err(Error::shape(format!(
            "transposed_conv2d kernel {kh}x{kw} with {spec:?} on input {h}x{w} gives an empty output"
        )));
    };
    // The output image is scanned by the kernel onto the input grid.
    Ok((
        Patches {
            channels: o,
            h: oh,
            w: ow,
            kh,
            kw,
            oh: h,
            ow: w,
            spec,
        },
        n,
        c,
    ))
}

/// Transposed convolution (gradient of [`conv2d`] with respect to its
/// input); kernel layout is `Cin x Cout x Kh x Kw`.
pub fn transposed_conv2d<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    spec: Conv2dSpec,
) -> Result<Tensor<T>> {
    let (p, n, cin) = transposed_patches(input, kernel, spec)?;
    check_bias(bias, p.channels, "transposed_conv2d")?;
    let in_stride = cin * p.cols();
    let out_stride = p.channels * p.h * p.w;
    let mut out = vec![T::zero(); n * out_stride];
    let mut cols = vec![T::zero(); p.rows() * p.cols()];
    for s in 0..n {
        let x = &input.data()[s * in_stride..(s + 1) * in_stride];
        T::gemm(
            true,
            false,
            p.rows(),
            p.cols(),
            cin,
            T::one(),
            kernel.data(),
            x,
            T::zero(),
            &mut cols,
        );
        let dst = &mut out[s * out_stride..(s + 1) * out_stride];
        p.col2im(&cols, dst);
        add_channel_bias(dst, bias.data(), p.h * p.w);
    }
    Tensor::new(vec![n, p.channels, p.h, p.w], out)
}

pub fn transposed_conv2d_backward<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &Tensor<T>,
    spec: Conv2dSpec,
    need: [bool; 3],
) -> Result<ConvGrads<T>> {
    let (p, n, cin) = transposed_patches(input, kernel, spec)?;
    let in_stride = cin * p.cols();
    let out_stride = p.channels * p.h * p.w;
    let mut dx = need[0].then(|| vec![T::zero(); input.len()]);
    let mut dk = need[1].then(|| vec![T::zero(); kernel.len()]);
    let mut cols = vec![T::zero(); p.rows() * p.cols()];
    for s in 0..n {
        p.im2col(&grad_out.data()[s * out_stride..(s + 1) * out_stride], &mut cols);
        if let Some(dx) = dx.as_mut() {
            let dst = &mut dx[s * in_stride..(s + 1) * in_stride];
            T::gemm(
                false,
                false,
                cin,
                p.cols(),
                p.rows(),
                T::one(),
                kernel.data(),
                &cols,
                T::zero(),
                dst,
            );
        }
        if let Some(dk) = dk.as_mut() {
            let x = &input.data()[s * in_stride..(s + 1) * in_stride];
            T::gemm(false, true, cin, p.rows(), p.cols(), T::one(), x, &cols, T::one(), dk);
        }
    }
    Ok(ConvGrads {
        input: dx.map(|d| Tensor::new(input.shape().to_vec(), d)).transpose()?,
        kernel: dk.map(|d| Tensor::new(kernel.shape().to_vec(), d)).transpose()?,
        bias: need[2].then(|| channel_bias_grad(grad_out)),
    })
}

/// Max pooling; also returns the flat input index of every selected maximum.
pub fn maxpool2d<T: Real>(
    input: &Tensor<T>,
    window: (usize, usize),
    stride: (usize, usize),
) -> Result<(Tensor<T>, Vec<usize>)> {
    let (n, c, h, w) = input.dims4()?;
    if window.0 == 0 || window.1 == 0 || stride.0 == 0 || stride.1 == 0 {
        return Err(Error::invalid(format!(
            "maxpool window {window:?} and stride {stride:?} must be positive"
        )));
    }
    if window.0 > h || window.1 > w {
        return Err(Error::shape(format!(
            "maxpool window {}x{} larger than input {h}x{w}",
            window.0, window.1
        )));
    }
    let oh = (h - window.0) / stride.0 + 1;
    let ow = (w - window.1) / stride.1 + 1;
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let x = input.data();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * stride.0 * w + ox * stride.1;
                for ky in 0..window.0 {
                    for kx in 0..window.1 {
                        let idx = base + (oy * stride.0 + ky) * w + ox * stride.1 + kx;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![n, c, oh, ow], out)?, argmax))
}

pub fn maxpool2d_backward<T: Real>(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor<T>) -> Tensor<T> {
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        d[idx] = d[idx] + g;
    }
    dx
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_backward<T: Real>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape as input")
}

/// Logistic sigmoid clamped to the open interval `(0, 1)`; without the clamp
/// `f32` rounds large inputs to exactly `1.0` or `0.0`.
pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let lo = T::min_positive_value();
    let hi = T::one() - T::epsilon() / (T::one() + T::one());
    x.map(|v| {
        let y = if v >= T::zero() {
            T::one() / (T::one() + (-v).exp())
        } else {
            let e = v.exp();
            e / (T::one() + e)
        };
        y.max(lo).min(hi)
    })
}

pub fn sigmoid_backward<T: Real>(y: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data = y
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&s, &g)| g * s * (T::one() - s))
        .collect();
    Tensor::new(y.shape().to_vec(), data).expect("same shape as output")
}

/// `x (N x F) * weight (F x G) + bias (G)`.
pub fn linear<T: Real>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, f) = x.dims2()?;
    let (wf, g) = weight.dims2()?;
    if wf != f {
        return Err(Error::shape(format!(
            "linear input has {f} features but weight is {wf}x{g}"
        )));
    }
    check_bias(bias, g, "linear")?;
    let mut out = Vec::with_capacity(n * g);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    T::gemm(
        false,
        false,
        n,
        g,
        f,
        T::one(),
        x.data(),
        weight.data(),
        T::one(),
        &mut out,
    );
    Tensor::new(vec![n, g], out)
}

pub fn linear_backward<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    need: [bool; 3],
) -> Result<ConvGrads<T>> {
    let (n, f) = x.dims2()?;
    let (_, g) = weight.dims2()?;
    let dx = need[0].then(|| {
        let mut d = vec![T::zero(); n * f];
        T::gemm(
            false,
            true,
            n,
            f,
            g,
            T::one(),
            grad_out.data(),
            weight.data(),
            T::zero(),
            &mut d,
        );
        d
    });
    let dw = need[1].then(|| {
        let mut d = vec![T::zero(); f * g];
        T::gemm(
            true,
            false,
            f,
            g,
            n,
            T::one(),
            x.data(),
            grad_out.data(),
            T::zero(),
            &mut d,
        );
        d
    });
    let db = need[2].then(|| {
        let mut d = vec![T::zero(); g];
        for row in grad_out.data().chunks(g) {
            for (acc, &v) in d.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        d
    });
    Ok(ConvGrads {
        input: dx.map(|d| Tensor::new(vec![n, f], d)).transpose()?,
        kernel: dw.map(|d| Tensor::new(vec![f, g], d)).transpose()?,
        bias: db.map(|d| Tensor::new(vec![g], d)).transpose()?,
    })
}

/// Shape check for [`gate_mul`]; returns whether the gate is broadcast over
/// the batch.
fn gate_broadcast<T: Real>(features: &Tensor<T>, gate: &Tensor<T>) -> Result<bool> {
    let (n, c, h, w) = features.dims4()?;
    match gate.shape() {
        [gc, gh, gw] if [*gc, *gh, *gw] == [c, h, w] => Ok(true),
        [1, gc, gh, gw] if [*gc, *gh, *gw] == [c, h, w] => Ok(true),
        [gn, gc, gh, gw] if [*gn, *gc, *gh, *gw] == [n, c, h, w] => Ok(false),
        other => Err(Error::shape(format!(
            "gate shape {other:?} does not match feature maps {:?} (expected [{c}, {h}, {w}] or [{n}, {c}, {h}, {w}])",
            features.shape()
        ))),
    }
}

/// `features[n,c,h,w] * gate[c,h,w]`, or elementwise when the gate carries
/// its own batch axis.
pub fn gate_mul<T: Real>(features: &Tensor<T>, gate: &Tensor<T>) -> Result<Tensor<T>> {
    gate_broadcast(features, gate)?;
    let g = gate.data();
    let data = features
        .data()
        .iter()
        .zip(g.iter().cycle())
        .map(|(&f, &m)| f * m)
        .collect();
    Tensor::new(features.shape().to_vec(), data)
}

pub fn gate_mul_backward<T: Real>(
    features: &Tensor<T>,
    gate: &Tensor<T>,
    grad_out: &Tensor<T>,
    need: [bool; 2],
) -> Result<(Option<Tensor<T>>, Option<Tensor<T>>)> {
    gate_broadcast(features, gate)?;
    let df = need[0].then(|| {
        let data = grad_out
            .data()
            .iter()
            .zip(gate.data().iter().cycle())
            .map(|(&d, &m)| d * m)
            .collect();
        Tensor::new(features.shape().to_vec(), data).expect("feature shape")
    });
    let dg = need[1].then(|| {
        let mut d = vec![T::zero(); gate.len()];
        let len = d.len();
        for (i, (&go, &f)) in grad_out.data().iter().zip(features.data()).enumerate() {
            let slot = &mut d[i % len];
            *slot = *slot + go * f;
        }
        Tensor::new(gate.shape().to_vec(), d).expect("gate shape")
    });
    Ok((df, dg))
}

/// Concatenation of two NCHW tensors along the channel axis.
pub fn concat_channels<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, ca, h, w) = a.dims4()?;
    let (nb, cb, hb, wb) = b.dims4()?;
    if (n, h, w) != (nb, hb, wb) {
        return Err(Error::shape(format!(
            "concat along channels needs matching N, H, W: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (sa, sb) = (ca * h * w, cb * h * w);
    let mut out = Vec::with_capacity(a.len() + b.len());
    for s in 0..n {
        out.extend_from_slice(&a.data()[s * sa..(s + 1) * sa]);
        out.extend_from_slice(&b.data()[s * sb..(s + 1) * sb]);
    }
    Tensor::new(vec![n, ca + cb, h, w], out)
}

pub fn concat_channels_backward<T: Real>(
    a_shape: &[usize],
    b_shape: &[usize],
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>) {
    let n = a_shape[0];
    let sa: usize = a_shape[1..].iter().product();
    let sb: usize = b_shape[1..].iter().product();
    let mut da = Vec::with_capacity(n * sa);
    let mut db = Vec::with_capacity(n * sb);
    for chunk in grad_out.data().chunks(sa + sb) {
        da.extend_from_slice(&chunk[..sa]);
        db.extend_from_slice(&chunk[sa..]);
    }
    (
        Tensor::new(a_shape.to_vec(), da).expect("shape a"),
        Tensor::new(b_shape.to_vec(), db).expect("shape b"),
    )
}

/// Repeats an `N x C` tensor over an `h x w` grid, giving `N x C x h x w`.
pub fn broadcast_spatial<T: Real>(x: &Tensor<T>, h: usize, w: usize) -> Result<Tensor<T>> {
    let (n, c) = x.dims2()?;
    if h == 0 || w == 0 {
        return Err(Error::shape(format!("broadcast to empty grid {h}x{w}")));
    }
    let mut out = Vec::with_capacity(n * c * h * w);
    for &v in x.data() {
        out.extend(std::iter::repeat_n(v, h * w));
    }
    Tensor::new(vec![n, c, h, w], out)
}

pub fn broadcast_spatial_backward<T: Real>(x_shape: &[usize], grad_out: &Tensor<T>) -> Tensor<T> {
    let (_, _, h, w) = grad_out.dims4().expect("rank-4 upstream gradient");
    let data = grad_out
        .data()
        .chunks(h * w)
        .map(|plane| plane.iter().copied().sum())
        .collect();
    Tensor::new(x_shape.to_vec(), data).expect("signal shape")
}

/// Mean cross-entropy of softmax(logits) against integer labels, stabilised
/// by subtracting each row's maximum. Returns the loss and the probabilities.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let (n, c) = logits.dims2()?;
    if labels.len() != n {
        return Err(Error::shape(format!(
            "{} labels for a batch of {n} logits",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::invalid(format!("label {bad} out of range [0, {c})")));
    }
    let mut probs = Vec::with_capacity(n * c);
    let mut total = T::zero();
    for (row, &label) in logits.data().chunks(c).zip(labels) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let denom: T = row.iter().map(|&v| (v - max).exp()).sum();
        let log_denom = denom.ln();
        total = total + log_denom - (row[label] - max);
        probs.extend(row.iter().map(|&v| (v - max).exp() / denom));
    }
    let loss = total / T::from_usize(n).unwrap();
    Ok((loss, Tensor::new(vec![n, c], probs)?))
}

pub fn softmax_cross_entropy_backward<T: Real>(probs: &Tensor<T>, labels: &[usize], upstream: T) -> Tensor<T> {
    let (n, c) = probs.dims2().expect("rank-2 probabilities");
    let scale = upstream / T::from_usize(n).unwrap();
    let mut d = probs.data().to_vec();
    for (row, &label) in d.chunks_mut(c).zip(labels) {
        row[label] = row[label] - T::one();
        for v in row.iter_mut() {
            *v = *v * scale;
        }
    }
    Tensor::new(vec![n, c], d).expect("logit shape")
}
