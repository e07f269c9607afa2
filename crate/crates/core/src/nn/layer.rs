//! Layer kernels: 1D/2D cross-correlation, dense affine maps, max pooling,
//! and flattening, each with a manual gradient pass.

use serde::{Deserialize, Serialize};

use super::NnError;
use crate::tensor::Tensor;

/// Activation applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Softmax,
    None,
}

/// 1D convolution attributes: channels, kernel size, stride, padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv1dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv1dSpec {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self, NnError> {
        if in_channels == 0 || out_channels == 0 || kernel_size == 0 {
            return Err(NnError::InvalidSpec(
                "conv1d channels and kernel size must be >= 1".into(),
            ));
        }
        if stride == 0 {
            return Err(NnError::InvalidSpec("conv1d stride must be >= 1".into()));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            padding,
        })
    }
}

/// 2D convolution attributes (square treatment of height/width).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conv2dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
}

impl Conv2dSpec {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<Self, NnError> {
        if in_channels == 0 || out_channels == 0 || kernel.0 == 0 || kernel.1 == 0 {
            return Err(NnError::InvalidSpec(
                "conv2d channels and kernel dims must be >= 1".into(),
            ));
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(NnError::InvalidSpec("conv2d stride must be >= 1".into()));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        })
    }
}

/// Dense (fully-connected) layer attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseSpec {
    pub in_features: usize,
    pub out_features: usize,
    pub activation: Activation,
}

impl DenseSpec {
    pub fn new(
        in_features: usize,
        out_features: usize,
        activation: Activation,
    ) -> Result<Self, NnError> {
        if in_features == 0 || out_features == 0 {
            return Err(NnError::InvalidSpec(
                "dense feature counts must be >= 1".into(),
            ));
        }
        Ok(Self {
            in_features,
            out_features,
            activation,
        })
    }
}

/// Output width of a 1D convolution: floor((W - k + 2P) / S) + 1.
pub fn conv_output_size(input_width: usize, spec: &Conv1dSpec) -> Result<usize, NnError> {
    let padded = input_width + 2 * spec.padding;
    if padded < spec.kernel_size {
        return Err(NnError::WindowSmallerThanKernel {
            layer: "conv1d".into(),
            width: input_width,
            padding: spec.padding,
            kernel: spec.kernel_size,
        });
    }
    Ok((padded - spec.kernel_size) / spec.stride + 1)
}

fn conv2d_output_dims(h: usize, w: usize, spec: &Conv2dSpec) -> Result<(usize, usize), NnError> {
    let ph = h + 2 * spec.padding.0;
    let pw = w + 2 * spec.padding.1;
    if ph < spec.kernel.0 || pw < spec.kernel.1 {
        return Err(NnError::WindowSmallerThanKernel {
            layer: "conv2d".into(),
            width: h.min(w),
            padding: spec.padding.0.max(spec.padding.1),
            kernel: spec.kernel.0.max(spec.kernel.1),
        });
    }
    Ok((
        (ph - spec.kernel.0) / spec.stride.0 + 1,
        (pw - spec.kernel.1) / spec.stride.1 + 1,
    ))
}

/// The operation a layer performs, together with its parameters.
#[derive(Debug, Clone)]
pub enum LayerOp {
    Conv1d {
        spec: Conv1dSpec,
        /// Shape `[out_c, in_c, k]`.
        weights: Tensor,
        /// Shape `[out_c]`.
        bias: Tensor,
        relu: bool,
    },
    Conv2d {
        spec: Conv2dSpec,
        /// Shape `[out_c, in_c, kh, kw]`.
        weights: Tensor,
        bias: Tensor,
        relu: bool,
    },
    Dense {
        spec: DenseSpec,
        /// Shape `[in, out]`.
        weights: Tensor,
        bias: Tensor,
    },
    MaxPool2d {
        size: (usize, usize),
    },
    Flatten,
}

/// A named layer with a freeze flag. Non-parameterized layers keep
/// `trainable = false` permanently.
#[derive(Debug, Clone)]
pub struct Layer {
    pub name: String,
    pub op: LayerOp,
    pub trainable: bool,
}

impl Layer {
    pub fn has_params(&self) -> bool {
        matches!(
            self.op,
            LayerOp::Conv1d { .. } | LayerOp::Conv2d { .. } | LayerOp::Dense { .. }
        )
    }

    pub fn param_count(&self) -> usize {
        match &self.op {
            LayerOp::Conv1d { weights, bias, .. }
            | LayerOp::Conv2d { weights, bias, .. }
            | LayerOp::Dense { weights, bias, .. } => weights.len() + bias.len(),
            _ => 0,
        }
    }

    pub(crate) fn params(&self) -> Option<(&Tensor, &Tensor)> {
        match &self.op {
            LayerOp::Conv1d { weights, bias, .. }
            | LayerOp::Conv2d { weights, bias, .. }
            | LayerOp::Dense { weights, bias, .. } => Some((weights, bias)),
            _ => None,
        }
    }

    pub(crate) fn params_mut(&mut self) -> Option<(&mut Tensor, &mut Tensor)> {
        match &mut self.op {
            LayerOp::Conv1d { weights, bias, .. }
            | LayerOp::Conv2d { weights, bias, .. }
            | LayerOp::Dense { weights, bias, .. } => Some((weights, bias)),
            _ => None,
        }
    }
}

/// Values remembered by the forward pass for the gradient pass.
#[derive(Debug)]
pub enum LayerCache {
    Conv1d { input: Tensor, preact: Tensor },
    Conv2d { input: Tensor, preact: Tensor },
    Dense { input: Tensor, preact: Tensor, softmax_out: Option<Tensor> },
    MaxPool2d { input_shape: Vec<usize>, argmax: Vec<usize> },
    Flatten { input_shape: Vec<usize> },
}

/// Parameter gradients for one layer (`None` for non-parameterized layers).
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Option<Tensor>,
    pub bias: Option<Tensor>,
}

impl LayerGrads {
    pub fn empty() -> Self {
        Self {
            weights: None,
            bias: None,
        }
    }
}

fn dim_err(layer: &str, dimension: &str, expected: usize, got: usize) -> NnError {
    NnError::ShapeMismatch {
        layer: layer.to_string(),
        dimension: dimension.to_string(),
        expected,
        got,
    }
}

impl Layer {
    /// Forward pass. When `cache` is requested the values needed by
    /// [`Layer::backward`] are returned as well.
    pub fn forward(&self, input: &Tensor, want_cache: bool) -> Result<(Tensor, Option<LayerCache>), NnError> {
        match &self.op {
            LayerOp::Conv1d {
                spec,
                weights,
                bias,
                relu,
            } => {
                let (batch, in_c, width) = expect_3d(&self.name, input)?;
                if in_c != spec.in_channels {
                    return Err(dim_err(&self.name, "input channels", spec.in_channels, in_c));
                }
                let preact = conv1d_forward(input.data(), batch, in_c, width, spec, weights.data(), bias.data())
                    .map_err(|mut e| {
                        if let NnError::WindowSmallerThanKernel { layer, .. } = &mut e {
                            *layer = self.name.clone();
                        }
                        e
                    })?;
                let out = if *relu { relu_forward(&preact) } else { preact.clone() };
                let cache = want_cache.then(|| LayerCache::Conv1d {
                    input: input.clone(),
                    preact,
                });
                Ok((out, cache))
            }
            LayerOp::Conv2d {
                spec,
                weights,
                bias,
                relu,
            } => {
                let (batch, in_c, h, w) = expect_4d(&self.name, input)?;
                if in_c != spec.in_channels {
                    return Err(dim_err(&self.name, "input channels", spec.in_channels, in_c));
                }
                let preact = conv2d_forward(input.data(), batch, in_c, h, w, spec, weights.data(), bias.data())?;
                let out = if *relu { relu_forward(&preact) } else { preact.clone() };
                let cache = want_cache.then(|| LayerCache::Conv2d {
                    input: input.clone(),
                    preact,
                });
                Ok((out, cache))
            }
            LayerOp::Dense { spec, weights, bias } => {
                let (batch, features) = expect_2d(&self.name, input)?;
                if features != spec.in_features {
                    return Err(dim_err(&self.name, "input features", spec.in_features, features));
                }
                let preact = dense_forward(input.data(), batch, spec, weights.data(), bias.data());
                let (out, softmax_out) = match spec.activation {
                    Activation::Relu => (relu_forward(&preact), None),
                    Activation::Softmax => {
                        let s = softmax_rows(&preact, batch, spec.out_features);
                        (s.clone(), Some(s))
                    }
                    Activation::None => (preact.clone(), None),
                };
                let cache = want_cache.then(|| LayerCache::Dense {
                    input: input.clone(),
                    preact,
                    softmax_out,
                });
                Ok((out, cache))
            }
            LayerOp::MaxPool2d { size } => {
                let (batch, c, h, w) = expect_4d(&self.name, input)?;
                let (out, argmax) = maxpool2d_forward(input.data(), batch, c, h, w, *size);
                let cache = want_cache.then(|| LayerCache::MaxPool2d {
                    input_shape: input.shape().to_vec(),
                    argmax,
                });
                Ok((out, cache))
            }
            LayerOp::Flatten => {
                let shape = input.shape();
                if shape.len() < 2 {
                    return Err(dim_err(&self.name, "rank", 2, shape.len()));
                }
                let batch = shape[0];
                let rest: usize = shape[1..].iter().product();
                let out = input.reshape(vec![batch, rest]).expect("flatten preserves count");
                let cache = want_cache.then(|| LayerCache::Flatten {
                    input_shape: shape.to_vec(),
                });
                Ok((out, cache))
            }
        }
    }

    /// Gradient pass: maps the gradient w.r.t. this layer's output to the
    /// gradient w.r.t. its input, plus parameter gradients.
    pub fn backward(
        &self,
        cache: &LayerCache,
        grad_out: &Tensor,
    ) -> Result<(Tensor, LayerGrads), NnError> {
        match (&self.op, cache) {
            (
                LayerOp::Conv1d {
                    spec,
                    weights,
                    relu,
                    ..
                },
                LayerCache::Conv1d { input, preact },
            ) => {
                let dz = if *relu {
                    relu_backward(preact, grad_out)
                } else {
                    grad_out.clone()
                };
                let (batch, in_c, width) = expect_3d(&self.name, input)?;
                let (grad_in, grad_w, grad_b) =
                    conv1d_backward(input.data(), batch, in_c, width, spec, weights.data(), dz.data());
                Ok((
                    grad_in,
                    LayerGrads {
                        weights: Some(grad_w),
                        bias: Some(grad_b),
                    },
                ))
            }
            (
                LayerOp::Conv2d {
                    spec,
                    weights,
                    relu,
                    ..
                },
                LayerCache::Conv2d { input, preact },
            ) => {
                let dz = if *relu {
                    relu_backward(preact, grad_out)
                } else {
                    grad_out.clone()
                };
                let (batch, in_c, h, w) = expect_4d(&self.name, input)?;
                let (grad_in, grad_w, grad_b) =
                    conv2d_backward(input.data(), batch, in_c, h, w, spec, weights.data(), dz.data());
                Ok((
                    grad_in,
                    LayerGrads {
                        weights: Some(grad_w),
                        bias: Some(grad_b),
                    },
                ))
            }
            (
                LayerOp::Dense { spec, weights, .. },
                LayerCache::Dense {
                    input,
                    preact,
                    softmax_out,
                },
            ) => {
                let dz = match spec.activation {
                    Activation::Relu => relu_backward(preact, grad_out),
                    Activation::Softmax => softmax_backward(
                        softmax_out.as_ref().expect("softmax cache"),
                        grad_out,
                        spec.out_features,
                    ),
                    Activation::None => grad_out.clone(),
                };
                let (batch, _) = expect_2d(&self.name, input)?;
                let (grad_in, grad_w, grad_b) =
                    dense_backward(input.data(), batch, spec, weights.data(), dz.data());
                Ok((
                    grad_in,
                    LayerGrads {
                        weights: Some(grad_w),
                        bias: Some(grad_b),
                    },
                ))
            }
            (LayerOp::MaxPool2d { .. }, LayerCache::MaxPool2d { input_shape, argmax }) => {
                let n: usize = input_shape.iter().product();
                let mut grad_in = vec![0.0; n];
                for (g, &src) in grad_out.data().iter().zip(argmax.iter()) {
                    grad_in[src] += *g;
                }
                Ok((
                    Tensor::from_parts(input_shape.clone(), grad_in),
                    LayerGrads::empty(),
                ))
            }
            (LayerOp::Flatten, LayerCache::Flatten { input_shape }) => Ok((
                grad_out
                    .reshape(input_shape.clone())
                    .expect("flatten grad preserves count"),
                LayerGrads::empty(),
            )),
            _ => Err(NnError::InvalidSpec(format!(
                "{}: cache does not match layer kind",
                self.name
            ))),
        }
    }

    /// Output shape for a given input shape, without computing values.
    pub fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>, NnError> {
        match &self.op {
            LayerOp::Conv1d { spec, .. } => {
                if input_shape.len() != 3 {
                    return Err(dim_err(&self.name, "rank", 3, input_shape.len()));
                }
                let out_w = conv_output_size(input_shape[2], spec)?;
                Ok(vec![input_shape[0], spec.out_channels, out_w])
            }
            LayerOp::Conv2d { spec, .. } => {
                if input_shape.len() != 4 {
                    return Err(dim_err(&self.name, "rank", 4, input_shape.len()));
                }
                let (oh, ow) = conv2d_output_dims(input_shape[2], input_shape[3], spec)?;
                Ok(vec![input_shape[0], spec.out_channels, oh, ow])
            }
            LayerOp::Dense { spec, .. } => {
                if input_shape.len() != 2 {
                    return Err(dim_err(&self.name, "rank", 2, input_shape.len()));
                }
                Ok(vec![input_shape[0], spec.out_features])
            }
            LayerOp::MaxPool2d { size } => {
                if input_shape.len() != 4 {
                    return Err(dim_err(&self.name, "rank", 4, input_shape.len()));
                }
                Ok(vec![
                    input_shape[0],
                    input_shape[1],
                    input_shape[2] / size.0,
                    input_shape[3] / size.1,
                ])
            }
            LayerOp::Flatten => {
                if input_shape.len() < 2 {
                    return Err(dim_err(&self.name, "rank", 2, input_shape.len()));
                }
                Ok(vec![input_shape[0], input_shape[1..].iter().product()])
            }
        }
    }
}

fn expect_2d(layer: &str, t: &Tensor) -> Result<(usize, usize), NnError> {
    match t.shape() {
        [b, f] => Ok((*b, *f)),
        s => Err(dim_err(layer, "rank", 2, s.len())),
    }
}

fn expect_3d(layer: &str, t: &Tensor) -> Result<(usize, usize, usize), NnError> {
    match t.shape() {
        [b, c, w] => Ok((*b, *c, *w)),
        s => Err(dim_err(layer, "rank", 3, s.len())),
    }
}

fn expect_4d(layer: &str, t: &Tensor) -> Result<(usize, usize, usize, usize), NnError> {
    match t.shape() {
        [b, c, h, w] => Ok((*b, *c, *h, *w)),
        s => Err(dim_err(layer, "rank", 4, s.len())),
    }
}

fn relu_forward(t: &Tensor) -> Tensor {
    Tensor::from_parts(
        t.shape().to_vec(),
        t.data().iter().map(|&v| v.max(0.0)).collect(),
    )
}

fn relu_backward(preact: &Tensor, grad_out: &Tensor) -> Tensor {
    Tensor::from_parts(
        grad_out.shape().to_vec(),
        preact
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&z, &g)| if z > 0.0 { g } else { 0.0 })
            .collect(),
    )
}

fn softmax_rows(preact: &Tensor, batch: usize, features: usize) -> Tensor {
    let mut out = vec![0.0; batch * features];
    for b in 0..batch {
        let row = &preact.data()[b * features..(b + 1) * features];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let dst = &mut out[b * features..(b + 1) * features];
        let mut sum = 0.0;
        for (d, &z) in dst.iter_mut().zip(row) {
            *d = (z - max).exp();
            sum += *d;
        }
        for d in dst.iter_mut() {
            *d /= sum;
        }
    }
    Tensor::from_parts(vec![batch, features], out)
}

/// dL/dz_j = p_j * (g_j - sum_k g_k p_k), rowwise.
fn softmax_backward(softmax_out: &Tensor, grad_out: &Tensor, features: usize) -> Tensor {
    let batch = softmax_out.len() / features;
    let mut dz = vec![0.0; batch * features];
    for b in 0..batch {
        let p = &softmax_out.data()[b * features..(b + 1) * features];
        let g = &grad_out.data()[b * features..(b + 1) * features];
        let dot: f64 = p.iter().zip(g).map(|(&pi, &gi)| pi * gi).sum();
        for ((d, &pi), &gi) in dz[b * features..(b + 1) * features]
            .iter_mut()
            .zip(p)
            .zip(g)
        {
            *d = pi * (gi - dot);
        }
    }
    Tensor::from_parts(vec![batch, features], dz)
}

fn conv1d_forward(
    input: &[f64],
    batch: usize,
    in_c: usize,
    width: usize,
    spec: &Conv1dSpec,
    weights: &[f64],
    bias: &[f64],
) -> Result<Tensor, NnError> {
    let out_w = conv_output_size(width, spec)?;
    let (out_c, k) = (spec.out_channels, spec.kernel_size);
    let mut out = vec![0.0; batch * out_c * out_w];
    let fast = spec.stride == 1 && spec.padding == 0;
    for b in 0..batch {
        for oc in 0..out_c {
            let dst = &mut out[(b * out_c + oc) * out_w..(b * out_c + oc + 1) * out_w];
            dst.fill(bias[oc]);
            for ic in 0..in_c {
                let src = &input[(b * in_c + ic) * width..(b * in_c + ic + 1) * width];
                let wrow = &weights[(oc * in_c + ic) * k..(oc * in_c + ic + 1) * k];
                if fast {
                    for (kk, &wv) in wrow.iter().enumerate() {
                        let seg = &src[kk..kk + out_w];
                        for (d, &s) in dst.iter_mut().zip(seg) {
                            *d += wv * s;
                        }
                    }
                } else {
                    for (ow, d) in dst.iter_mut().enumerate() {
                        let base = ow * spec.stride;
                        let mut acc = 0.0;
                        for (kk, &wv) in wrow.iter().enumerate() {
                            let pos = base + kk;
                            if pos >= spec.padding && pos - spec.padding < width {
                                acc += wv * src[pos - spec.padding];
                            }
                        }
                        *d += acc;
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![batch, out_c, out_w], out))
}

fn conv1d_backward(
    input: &[f64],
    batch: usize,
    in_c: usize,
    width: usize,
    spec: &Conv1dSpec,
    weights: &[f64],
    dz: &[f64],
) -> (Tensor, Tensor, Tensor) {
    let (out_c, k) = (spec.out_channels, spec.kernel_size);
    let out_w = dz.len() / (batch * out_c);
    let mut grad_in = vec![0.0; batch * in_c * width];
    let mut grad_w = vec![0.0; out_c * in_c * k];
    let mut grad_b = vec![0.0; out_c];
    let fast = spec.stride == 1 && spec.padding == 0;
    for b in 0..batch {
        for oc in 0..out_c {
            let dzr = &dz[(b * out_c + oc) * out_w..(b * out_c + oc + 1) * out_w];
            grad_b[oc] += dzr.iter().sum::<f64>();
            for ic in 0..in_c {
                let src = &input[(b * in_c + ic) * width..(b * in_c + ic + 1) * width];
                let gin = &mut grad_in[(b * in_c + ic) * width..(b * in_c + ic + 1) * width];
                let wrow = &weights[(oc * in_c + ic) * k..(oc * in_c + ic + 1) * k];
                let gwr = &mut grad_w[(oc * in_c + ic) * k..(oc * in_c + ic + 1) * k];
                if fast {
                    for kk in 0..k {
                        let seg = &src[kk..kk + out_w];
                        gwr[kk] += dot(dzr, seg);
                        let wv = wrow[kk];
                        for (gi, &g) in gin[kk..kk + out_w].iter_mut().zip(dzr) {
                            *gi += wv * g;
                        }
                    }
                } else {
                    for (ow, &g) in dzr.iter().enumerate() {
                        let base = ow * spec.stride;
                        for kk in 0..k {
                            let pos = base + kk;
                            if pos >= spec.padding && pos - spec.padding < width {
                                gwr[kk] += g * src[pos - spec.padding];
                                gin[pos - spec.padding] += g * wrow[kk];
                            }
                        }
                    }
                }
            }
        }
    }
    (
        Tensor::from_parts(vec![batch, in_c, width], grad_in),
        Tensor::from_parts(vec![out_c, in_c, k], grad_w),
        Tensor::from_parts(vec![out_c], grad_b),
    )
}

fn conv2d_forward(
    input: &[f64],
    batch: usize,
    in_c: usize,
    h: usize,
    w: usize,
    spec: &Conv2dSpec,
    weights: &[f64],
    bias: &[f64],
) -> Result<Tensor, NnError> {
    let (oh, ow) = conv2d_output_dims(h, w, spec)?;
    let (out_c, (kh, kw)) = (spec.out_channels, spec.kernel);
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let mut out = vec![0.0; batch * out_c * oh * ow];
    for b in 0..batch {
        for oc in 0..out_c {
            for oy in 0..oh {
                let dst =
                    &mut out[((b * out_c + oc) * oh + oy) * ow..((b * out_c + oc) * oh + oy + 1) * ow];
                dst.fill(bias[oc]);
                for ic in 0..in_c {
                    let plane = &input[(b * in_c + ic) * h * w..(b * in_c + ic + 1) * h * w];
                    for ky in 0..kh {
                        let iy = oy * sh + ky;
                        if iy < ph || iy - ph >= h {
                            continue;
                        }
                        let src_row = &plane[(iy - ph) * w..(iy - ph + 1) * w];
                        let wrow = &weights[((oc * in_c + ic) * kh + ky) * kw
                            ..((oc * in_c + ic) * kh + ky + 1) * kw];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let base = ox * sw;
                            let mut acc = 0.0;
                            for (kx, &wv) in wrow.iter().enumerate() {
                                let ix = base + kx;
                                if ix >= pw && ix - pw < w {
                                    acc += wv * src_row[ix - pw];
                                }
                            }
                            *d += acc;
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![batch, out_c, oh, ow], out))
}

fn conv2d_backward(
    input: &[f64],
    batch: usize,
    in_c: usize,
    h: usize,
    w: usize,
    spec: &Conv2dSpec,
    weights: &[f64],
    dz: &[f64],
) -> (Tensor, Tensor, Tensor) {
    let (out_c, (kh, kw)) = (spec.out_channels, spec.kernel);
    let (sh, sw) = spec.stride;
    let (ph, pw) = spec.padding;
    let (oh, ow) = conv2d_output_dims(h, w, spec).expect("validated in forward");
    let mut grad_in = vec![0.0; batch * in_c * h * w];
    let mut grad_w = vec![0.0; out_c * in_c * kh * kw];
    let mut grad_b = vec![0.0; out_c];
    for b in 0..batch {
        for oc in 0..out_c {
            for oy in 0..oh {
                let dzr =
                    &dz[((b * out_c + oc) * oh + oy) * ow..((b * out_c + oc) * oh + oy + 1) * ow];
                grad_b[oc] += dzr.iter().sum::<f64>();
                for ic in 0..in_c {
                    let plane_in = (b * in_c + ic) * h * w;
                    for ky in 0..kh {
                        let iy = oy * sh + ky;
                        if iy < ph || iy - ph >= h {
                            continue;
                        }
                        let row_in = plane_in + (iy - ph) * w;
                        let wbase = ((oc * in_c + ic) * kh + ky) * kw;
                        for (ox, &g) in dzr.iter().enumerate() {
                            let base = ox * sw;
                            for kx in 0..kw {
                                let ix = base + kx;
                                if ix >= pw && ix - pw < w {
                                    grad_w[wbase + kx] += g * input[row_in + ix - pw];
                                    grad_in[row_in + ix - pw] += g * weights[wbase + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    (
        Tensor::from_parts(vec![batch, in_c, h, w], grad_in),
        Tensor::from_parts(vec![out_c, in_c, kh, kw], grad_w),
        Tensor::from_parts(vec![out_c], grad_b),
    )
}

/// Samples per block in the dense kernels. Weight rows are streamed once
/// per block instead of once per sample, which is what bounds throughput
/// for wide layers.
const DENSE_BLOCK: usize = 8;

fn dense_forward(input: &[f64], batch: usize, spec: &DenseSpec, weights: &[f64], bias: &[f64]) -> Tensor {
    let (n_in, n_out) = (spec.in_features, spec.out_features);
    let mut out = vec![0.0; batch * n_out];
    for chunk in out.chunks_mut(n_out) {
        chunk.copy_from_slice(bias);
    }
    let mut b0 = 0;
    while b0 < batch {
        let b1 = (b0 + DENSE_BLOCK).min(batch);
        for i in 0..n_in {
            let wrow = &weights[i * n_out..(i + 1) * n_out];
            for b in b0..b1 {
                let xi = input[b * n_in + i];
                if xi == 0.0 {
                    continue;
                }
                let dst = &mut out[b * n_out..(b + 1) * n_out];
                for (d, &wv) in dst.iter_mut().zip(wrow) {
                    *d += xi * wv;
                }
            }
        }
        b0 = b1;
    }
    Tensor::from_parts(vec![batch, n_out], out)
}

fn dense_backward(
    input: &[f64],
    batch: usize,
    spec: &DenseSpec,
    weights: &[f64],
    dz: &[f64],
) -> (Tensor, Tensor, Tensor) {
    let (n_in, n_out) = (spec.in_features, spec.out_features);
    let mut grad_in = vec![0.0; batch * n_in];
    let mut grad_w = vec![0.0; n_in * n_out];
    let mut grad_b = vec![0.0; n_out];
    for b in 0..batch {
        let dzr = &dz[b * n_out..(b + 1) * n_out];
        for (gb, &g) in grad_b.iter_mut().zip(dzr) {
            *gb += g;
        }
    }
    let mut b0 = 0;
    while b0 < batch {
        let b1 = (b0 + DENSE_BLOCK).min(batch);
        for i in 0..n_in {
            let wrow = &weights[i * n_out..(i + 1) * n_out];
            let gwr = &mut grad_w[i * n_out..(i + 1) * n_out];
            for b in b0..b1 {
                let dzr = &dz[b * n_out..(b + 1) * n_out];
                grad_in[b * n_in + i] += dot(dzr, wrow);
                let xi = input[b * n_in + i];
                if xi == 0.0 {
                    continue;
                }
                for (gw, &g) in gwr.iter_mut().zip(dzr) {
                    *gw += xi * g;
                }
            }
        }
        b0 = b1;
    }
    (
        Tensor::from_parts(vec![batch, n_in], grad_in),
        Tensor::from_parts(vec![n_in, n_out], grad_w),
        Tensor::from_parts(vec![n_out], grad_b),
    )
}

fn maxpool2d_forward(
    input: &[f64],
    batch: usize,
    c: usize,
    h: usize,
    w: usize,
    size: (usize, usize),
) -> (Tensor, Vec<usize>) {
    let (oh, ow) = (h / size.0, w / size.1);
    let mut out = vec![0.0; batch * c * oh * ow];
    let mut argmax = vec![0usize; batch * c * oh * ow];
    for bc in 0..batch * c {
        let plane = bc * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0usize;
                for ky in 0..size.0 {
                    for kx in 0..size.1 {
                        let idx = plane + (oy * size.0 + ky) * w + ox * size.1 + kx;
                        if input[idx] > best {
                            best = input[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = bc * oh * ow + oy * ow + ox;
                out[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
    (Tensor::from_parts(vec![batch, c, oh, ow], out), argmax)
}

/// Dot product with four independent accumulators. The fixed reassociation
/// lets the compiler keep multiple FMA chains in flight; results stay
/// deterministic because the order is fixed.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (a4, a_rest) = a.split_at(a.len() - a.len() % 4);
    let (b4, b_rest) = b.split_at(a4.len());
    for (xa, xb) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        acc[0] += xa[0] * xb[0];
        acc[1] += xa[1] * xb[1];
        acc[2] += xa[2] * xb[2];
        acc[3] += xa[3] * xb[3];
    }
    let mut tail = 0.0;
    for (x, y) in a_rest.iter().zip(b_rest) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(op: LayerOp) -> Layer {
        Layer {
            name: "test".into(),
            op,
            trainable: true,
        }
    }

    #[test]
    fn conv_output_size_formula() {
        let spec = Conv1dSpec::new(1, 30, 10, 1, 0).unwrap();
        assert_eq!(conv_output_size(1000, &spec).unwrap(), 991);
        let spec = Conv1dSpec::new(1, 1, 5, 1, 0).unwrap();
        assert_eq!(conv_output_size(5, &spec).unwrap(), 1);
        assert_eq!(conv_output_size(979, &spec).unwrap(), 975);
    }

    #[test]
    fn conv_output_size_rejects_small_window() {
        let spec = Conv1dSpec::new(1, 1, 5, 1, 0).unwrap();
        assert!(matches!(
            conv_output_size(4, &spec),
            Err(NnError::WindowSmallerThanKernel { .. })
        ));
        // Padding can rescue a narrow input.
        let spec = Conv1dSpec::new(1, 1, 5, 1, 1).unwrap();
        assert_eq!(conv_output_size(4, &spec).unwrap(), 2);
    }

    #[test]
    fn conv1d_box_filter_on_ones() {
        let spec = Conv1dSpec::new(1, 2, 3, 1, 0).unwrap();
        let weights = Tensor::new(vec![2, 1, 3], vec![1.0; 6]).unwrap();
        let bias = Tensor::zeros(vec![2]);
        let l = layer(LayerOp::Conv1d {
            spec,
            weights,
            bias,
            relu: false,
        });
        let input = Tensor::new(vec![1, 1, 10], vec![1.0; 10]).unwrap();
        let (out, _) = l.forward(&input, false).unwrap();
        assert_eq!(out.shape(), &[1, 2, 8]);
        assert!(out.data().iter().all(|&v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn conv1d_zero_weights_yield_bias() {
        let spec = Conv1dSpec::new(2, 3, 4, 1, 0).unwrap();
        let weights = Tensor::zeros(vec![3, 2, 4]);
        let bias = Tensor::new(vec![3], vec![0.5, -1.5, 2.0]).unwrap();
        let l = layer(LayerOp::Conv1d {
            spec,
            weights,
            bias,
            relu: false,
        });
        let input = Tensor::new(vec![1, 2, 9], (0..18).map(|i| i as f64).collect()).unwrap();
        let (out, _) = l.forward(&input, false).unwrap();
        for oc in 0..3 {
            for ow in 0..6 {
                let expected = [0.5, -1.5, 2.0][oc];
                assert_eq!(out.data()[oc * 6 + ow], expected);
            }
        }
    }

    #[test]
    fn conv1d_rejects_wrong_channels() {
        let spec = Conv1dSpec::new(3, 2, 2, 1, 0).unwrap();
        let l = layer(LayerOp::Conv1d {
            spec,
            weights: Tensor::zeros(vec![2, 3, 2]),
            bias: Tensor::zeros(vec![2]),
            relu: false,
        });
        let input = Tensor::zeros(vec![1, 2, 8]);
        let err = l.forward(&input, false).unwrap_err();
        assert!(err.to_string().contains("input channels"));
    }

    #[test]
    fn dense_identity_passthrough() {
        let spec = DenseSpec::new(3, 3, Activation::None).unwrap();
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let l = layer(LayerOp::Dense {
            spec,
            weights: Tensor::new(vec![3, 3], w).unwrap(),
            bias: Tensor::zeros(vec![3]),
        });
        let input = Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.0, 0.0, 0.5, -0.5]).unwrap();
        let (out, _) = l.forward(&input, false).unwrap();
        assert_eq!(out.data(), input.data());
    }

    #[test]
    fn dense_relu_clamps_negatives() {
        let spec = DenseSpec::new(3, 3, Activation::Relu).unwrap();
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let l = layer(LayerOp::Dense {
            spec,
            weights: Tensor::new(vec![3, 3], w).unwrap(),
            bias: Tensor::zeros(vec![3]),
        });
        let input = Tensor::new(vec![1, 3], vec![-1.0, 0.0, 2.0]).unwrap();
        let (out, _) = l.forward(&input, false).unwrap();
        assert_eq!(out.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let spec = DenseSpec::new(2, 4, Activation::Softmax).unwrap();
        let l = layer(LayerOp::Dense {
            spec,
            weights: Tensor::new(vec![2, 4], (0..8).map(|i| 0.3 * i as f64).collect()).unwrap(),
            bias: Tensor::new(vec![4], vec![0.1, -0.2, 0.3, 0.0]).unwrap(),
        });
        let input = Tensor::new(vec![3, 2], vec![1.0, -4.0, 2.0, 2.0, -7.0, 0.25]).unwrap();
        let (out, _) = l.forward(&input, false).unwrap();
        for b in 0..3 {
            let sum: f64 = out.data()[b * 4..(b + 1) * 4].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {b} sums to {sum}");
            assert!(out.data()[b * 4..(b + 1) * 4].iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn maxpool_picks_maxima_and_routes_gradient() {
        let l = layer(LayerOp::MaxPool2d { size: (2, 2) });
        let input = Tensor::new(
            vec![1, 1, 2, 4],
            vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, -1.0, 7.0],
        )
        .unwrap();
        let (out, cache) = l.forward(&input, true).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1, 2]);
        assert_eq!(out.data(), &[5.0, 7.0]);
        let grad_out = Tensor::new(vec![1, 1, 1, 2], vec![10.0, 20.0]).unwrap();
        let (grad_in, _) = l.backward(cache.as_ref().unwrap(), &grad_out).unwrap();
        assert_eq!(
            grad_in.data(),
            &[0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 20.0]
        );
    }

    #[test]
    fn flatten_round_trip() {
        let l = layer(LayerOp::Flatten);
        let input = Tensor::new(vec![2, 3, 4], (0..24).map(|i| i as f64).collect()).unwrap();
        let (out, cache) = l.forward(&input, true).unwrap();
        assert_eq!(out.shape(), &[2, 12]);
        let (back, _) = l.backward(cache.as_ref().unwrap(), &out).unwrap();
        assert_eq!(back.shape(), input.shape());
        assert_eq!(back.data(), input.data());
    }
}
