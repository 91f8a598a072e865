//! Layer vocabulary, shape rules and the forward/backward kernels.
//!
//! Per-sample layouts are channels-last: dense `[n]`, 1-D layers `[L, C]`,
//! 2-D layers `[H, W, C]`. Batched tensors prepend the batch axis.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationFn {
    Relu,
    Sigmoid,
    Tanh,
}

impl ActivationFn {
    fn apply(self, x: f64) -> f64 {
        match self {
            ActivationFn::Relu => x.max(0.0),
            ActivationFn::Sigmoid => sigmoid(x),
            ActivationFn::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            ActivationFn::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationFn::Sigmoid => y * (1.0 - y),
            ActivationFn::Tanh => 1.0 - y * y,
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
    DepthwiseSeparableConv1d {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
    /// Square kernel; stride and padding apply to both spatial axes.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
    },
    Maxpool1d {
        kernel_size: usize,
        #[serde(default = "one")]
        stride: usize,
    },
    GlobalAvgPool,
    Activation {
        function: ActivationFn,
    },
    Flatten,
}

/// `floor((len + 2·pad - kernel) / stride) + 1`, `None` when the kernel
/// does not fit.
pub fn conv_output_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = len + 2 * padding;
    if padded < kernel || stride == 0 {
        None
    } else {
        Some((padded - kernel) / stride + 1)
    }
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::DepthwiseSeparableConv1d { .. } => "depthwise_separable_conv1d",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Maxpool1d { .. } => "maxpool1d",
            LayerSpec::GlobalAvgPool => "global_avg_pool",
            LayerSpec::Activation { .. } => "activation",
            LayerSpec::Flatten => "flatten",
        }
    }

    /// Checks extents (all ≥ 1, padding < kernel).
    pub fn validate(&self) -> Result<()> {
        let check_conv = |cin: usize, cout: usize, k: usize, s: usize, p: usize| {
            if cin == 0 || cout == 0 || k == 0 || s == 0 {
                Err(Error::config(
                    self.name(),
                    "channels, kernel and stride must be >= 1",
                ))
            } else if p >= k {
                Err(Error::config(
                    self.name(),
                    "padding must be smaller than the kernel",
                ))
            } else {
                Ok(())
            }
        };
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if inputs == 0 || outputs == 0 {
                    return Err(Error::config("dense", "inputs and outputs must be >= 1"));
                }
                Ok(())
            }
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                padding,
            }
            | LayerSpec::DepthwiseSeparableConv1d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                padding,
            }
            | LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                padding,
            } => check_conv(in_channels, out_channels, kernel_size, stride, padding),
            LayerSpec::Maxpool1d {
                kernel_size,
                stride,
            } => {
                if kernel_size == 0 || stride == 0 {
                    return Err(Error::config("maxpool1d", "kernel and stride must be >= 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        let mismatch = |expected: &[usize]| Err(Error::shape(self.name(), expected, input));
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if input != [inputs] {
                    return mismatch(&[inputs]);
                }
                Ok(vec![outputs])
            }
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                padding,
            }
            | LayerSpec::DepthwiseSeparableConv1d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                padding,
            } => {
                if input.len() != 2 || input[1] != in_channels {
                    return mismatch(&[input.first().copied().unwrap_or(0), in_channels]);
                }
                match conv_output_len(input[0], kernel_size, stride, padding) {
                    Some(l) => Ok(vec![l, out_channels]),
                    None => mismatch(&[kernel_size, in_channels]),
                }
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                padding,
            } => {
                if input.len() != 3 || input[2] != in_channels {
                    return mismatch(&[
                        input.first().copied().unwrap_or(0),
                        input.get(1).copied().unwrap_or(0),
                        in_channels,
                    ]);
                }
                let h = conv_output_len(input[0], kernel_size, stride, padding);
                let w = conv_output_len(input[1], kernel_size, stride, padding);
                match (h, w) {
                    (Some(h), Some(w)) => Ok(vec![h, w, out_channels]),
                    _ => mismatch(&[kernel_size, kernel_size, in_channels]),
                }
            }
            LayerSpec::Maxpool1d {
                kernel_size,
                stride,
            } => {
                if input.len() != 2 {
                    return mismatch(&[kernel_size, 1]);
                }
                match conv_output_len(input[0], kernel_size, stride, 0) {
                    Some(l) => Ok(vec![l, input[1]]),
                    None => mismatch(&[kernel_size, input[1]]),
                }
            }
            LayerSpec::GlobalAvgPool => {
                if input.len() < 2 {
                    return mismatch(&[1, input.first().copied().unwrap_or(1)]);
                }
                Ok(vec![input[input.len() - 1]])
            }
            LayerSpec::Activation { .. } => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }

    /// Trainable parameter tensors `(name, shape, fan_in)` in storage order.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>, usize)> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => vec![
                ("weight", vec![inputs, outputs], inputs),
                ("bias", vec![outputs], inputs),
            ],
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel_size,
                ..
            } => vec![
                (
                    "weight",
                    vec![kernel_size, in_channels, out_channels],
                    kernel_size * in_channels,
                ),
                ("bias", vec![out_channels], kernel_size * in_channels),
            ],
            LayerSpec::DepthwiseSeparableConv1d {
                in_channels,
                out_channels,
                kernel_size,
                ..
            } => vec![
                ("depthwise", vec![kernel_size, in_channels], kernel_size),
                ("pointwise", vec![in_channels, out_channels], in_channels),
                ("bias", vec![out_channels], in_channels),
            ],
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel_size,
                ..
            } => vec![
                (
                    "weight",
                    vec![kernel_size, kernel_size, in_channels, out_channels],
                    kernel_size * kernel_size * in_channels,
                ),
                (
                    "bias",
                    vec![out_channels],
                    kernel_size * kernel_size * in_channels,
                ),
            ],
            _ => Vec::new(),
        }
    }

    pub fn n_params(&self) -> u64 {
        self.param_shapes()
            .iter()
            .map(|(_, s, _)| s.iter().product::<usize>() as u64)
            .sum()
    }
}

fn padded_index(pos: usize, offset: usize, padding: usize, len: usize) -> Option<usize> {
    let p = pos + offset;
    if p < padding || p - padding >= len {
        None
    } else {
        Some(p - padding)
    }
}

/// Depthwise pass: `z[t, c] = Σ_k x[t·s + k - p, c] · w[k, c]`.
#[allow(clippy::too_many_arguments)]
pub fn depthwise_conv1d(
    x: &[f64],
    batch: usize,
    len: usize,
    channels: usize,
    weight: &[f64],
    kernel: usize,
    stride: usize,
    padding: usize,
    len_out: usize,
) -> Vec<f64> {
    let mut z = vec![0.0; batch * len_out * channels];
    for b in 0..batch {
        let xb = &x[b * len * channels..(b + 1) * len * channels];
        let zb = &mut z[b * len_out * channels..(b + 1) * len_out * channels];
        for t in 0..len_out {
            for k in 0..kernel {
                let Some(pos) = padded_index(t * stride, k, padding, len) else {
                    continue;
                };
                for c in 0..channels {
                    zb[t * channels + c] += xb[pos * channels + c] * weight[k * channels + c];
                }
            }
        }
    }
    z
}

/// Standard 1-D convolution (cross-correlation) with bias.
#[allow(clippy::too_many_arguments)]
pub fn conv1d(
    x: &[f64],
    batch: usize,
    len: usize,
    cin: usize,
    weight: &[f64],
    bias: &[f64],
    cout: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    len_out: usize,
) -> Vec<f64> {
    let mut y = vec![0.0; batch * len_out * cout];
    for b in 0..batch {
        let xb = &x[b * len * cin..(b + 1) * len * cin];
        let yb = &mut y[b * len_out * cout..(b + 1) * len_out * cout];
        for t in 0..len_out {
            let yt = &mut yb[t * cout..(t + 1) * cout];
            yt.copy_from_slice(bias);
            for k in 0..kernel {
                let Some(pos) = padded_index(t * stride, k, padding, len) else {
                    continue;
                };
                for ci in 0..cin {
                    let xv = xb[pos * cin + ci];
                    let w = &weight[(k * cin + ci) * cout..(k * cin + ci + 1) * cout];
                    for (yo, wo) in yt.iter_mut().zip(w) {
                        *yo += xv * wo;
                    }
                }
            }
        }
    }
    y
}

/// Runs one layer over a batch.
pub(crate) fn forward(
    spec: &LayerSpec,
    params: &[Tensor],
    x: &Tensor,
    out_shape: &[usize],
) -> Tensor {
    let batch = x.shape()[0];
    let xd = x.data();
    let mut shape = vec![batch];
    shape.extend_from_slice(out_shape);
    let data = match *spec {
        LayerSpec::Dense { inputs, outputs } => {
            let (w, bias) = (params[0].data(), params[1].data());
            let mut y = Vec::with_capacity(batch * outputs);
            for row in xd.chunks_exact(inputs) {
                let start = y.len();
                y.extend_from_slice(bias);
                let yr = &mut y[start..];
                for (i, &xi) in row.iter().enumerate() {
                    for (yo, wo) in yr.iter_mut().zip(&w[i * outputs..(i + 1) * outputs]) {
                        *yo += xi * wo;
                    }
                }
            }
            y
        }
        LayerSpec::Conv1d {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            padding,
        } => conv1d(
            xd,
            batch,
            x.shape()[1],
            in_channels,
            params[0].data(),
            params[1].data(),
            out_channels,
            kernel_size,
            stride,
            padding,
            out_shape[0],
        ),
        LayerSpec::DepthwiseSeparableConv1d {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            padding,
        } => {
            let len_out = out_shape[0];
            let z = depthwise_conv1d(
                xd,
                batch,
                x.shape()[1],
                in_channels,
                params[0].data(),
                kernel_size,
                stride,
                padding,
                len_out,
            );
            conv1d(
                &z,
                batch,
                len_out,
                in_channels,
                params[1].data(),
                params[2].data(),
                out_channels,
                1,
                1,
                0,
                len_out,
            )
        }
        LayerSpec::Conv2d {
            in_channels: cin,
            out_channels: cout,
            kernel_size: k,
            stride,
            padding,
        } => {
            let (h, w) = (x.shape()[1], x.shape()[2]);
            let (ho, wo) = (out_shape[0], out_shape[1]);
            let (wt, bias) = (params[0].data(), params[1].data());
            let mut y = vec![0.0; batch * ho * wo * cout];
            for b in 0..batch {
                let xb = &xd[b * h * w * cin..(b + 1) * h * w * cin];
                for i in 0..ho {
                    for j in 0..wo {
                        let base = ((b * ho + i) * wo + j) * cout;
                        let yt = &mut y[base..base + cout];
                        yt.copy_from_slice(bias);
                        for ki in 0..k {
                            let Some(r) = padded_index(i * stride, ki, padding, h) else {
                                continue;
                            };
                            for kj in 0..k {
                                let Some(c) = padded_index(j * stride, kj, padding, w) else {
                                    continue;
                                };
                                for ci in 0..cin {
                                    let xv = xb[(r * w + c) * cin + ci];
                                    let off = ((ki * k + kj) * cin + ci) * cout;
                                    for (yo, wv) in yt.iter_mut().zip(&wt[off..off + cout]) {
                                        *yo += xv * wv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            y
        }
        LayerSpec::Maxpool1d {
            kernel_size,
            stride,
        } => {
            let (len, c) = (x.shape()[1], x.shape()[2]);
            let len_out = out_shape[0];
            let mut y = vec![f64::NEG_INFINITY; batch * len_out * c];
            for b in 0..batch {
                for t in 0..len_out {
                    for k in 0..kernel_size {
                        let pos = t * stride + k;
                        for ch in 0..c {
                            let v = xd[(b * len + pos) * c + ch];
                            let slot = &mut y[(b * len_out + t) * c + ch];
                            if v > *slot {
                                *slot = v;
                            }
                        }
                    }
                }
            }
            y
        }
        LayerSpec::GlobalAvgPool => {
            let c = *x.shape().last().unwrap();
            let spatial = x.len() / (batch * c);
            let mut y = vec![0.0; batch * c];
            for b in 0..batch {
                for p in 0..spatial {
                    for ch in 0..c {
                        y[b * c + ch] += xd[(b * spatial + p) * c + ch];
                    }
                }
            }
            y.iter_mut().for_each(|v| *v /= spatial as f64);
            y
        }
        LayerSpec::Activation { function } => xd.iter().map(|&v| function.apply(v)).collect(),
        LayerSpec::Flatten => xd.to_vec(),
    };
    Tensor::new(shape, data).expect("layer output shape")
}

/// Backpropagates `gy` through one layer, accumulating parameter gradients
/// and returning the gradient with respect to the input.
pub(crate) fn backward(
    spec: &LayerSpec,
    params: &mut [Tensor],
    x: &Tensor,
    y: &Tensor,
    gy: &[f64],
) -> Vec<f64> {
    let batch = x.shape()[0];
    let xd = x.data();
    let mut gx = vec![0.0; xd.len()];
    match *spec {
        LayerSpec::Dense { inputs, outputs } => {
            let w = params[0].data().to_vec();
            {
                let gw = params[0].grad_mut();
                for b in 0..batch {
                    let xr = &xd[b * inputs..(b + 1) * inputs];
                    let gr = &gy[b * outputs..(b + 1) * outputs];
                    for (i, &xi) in xr.iter().enumerate() {
                        let row = &mut gw[i * outputs..(i + 1) * outputs];
                        for (g, &go) in row.iter_mut().zip(gr) {
                            *g += xi * go;
                        }
                        gx[b * inputs + i] = w[i * outputs..(i + 1) * outputs]
                            .iter()
                            .zip(gr)
                            .map(|(a, b)| a * b)
                            .sum();
                    }
                }
            }
            let gb = params[1].grad_mut();
            for gr in gy.chunks_exact(outputs) {
                for (g, &go) in gb.iter_mut().zip(gr) {
                    *g += go;
                }
            }
        }
        LayerSpec::Conv1d {
            in_channels: cin,
            out_channels: cout,
            kernel_size,
            stride,
            padding,
        } => {
            let len = x.shape()[1];
            let len_out = y.shape()[1];
            conv1d_backward(
                xd,
                &mut gx,
                gy,
                params,
                batch,
                len,
                cin,
                cout,
                kernel_size,
                stride,
                padding,
                len_out,
            );
        }
        LayerSpec::DepthwiseSeparableConv1d {
            in_channels: cin,
            out_channels: cout,
            kernel_size,
            stride,
            padding,
        } => {
            let len = x.shape()[1];
            let len_out = y.shape()[1];
            let wd = params[0].data().to_vec();
            let z = depthwise_conv1d(
                xd,
                batch,
                len,
                cin,
                &wd,
                kernel_size,
                stride,
                padding,
                len_out,
            );
            // pointwise stage: params[1..3] act as a 1x1 conv
            let mut gz = vec![0.0; z.len()];
            conv1d_backward(
                &z,
                &mut gz,
                gy,
                &mut params[1..3],
                batch,
                len_out,
                cin,
                cout,
                1,
                1,
                0,
                len_out,
            );
            let gwd = params[0].grad_mut();
            for b in 0..batch {
                for t in 0..len_out {
                    for k in 0..kernel_size {
                        let Some(pos) = padded_index(t * stride, k, padding, len) else {
                            continue;
                        };
                        for c in 0..cin {
                            let g = gz[(b * len_out + t) * cin + c];
                            gwd[k * cin + c] += xd[(b * len + pos) * cin + c] * g;
                            gx[(b * len + pos) * cin + c] += wd[k * cin + c] * g;
                        }
                    }
                }
            }
        }
        LayerSpec::Conv2d {
            in_channels: cin,
            out_channels: cout,
            kernel_size: k,
            stride,
            padding,
        } => {
            let (h, w) = (x.shape()[1], x.shape()[2]);
            let (ho, wo) = (y.shape()[1], y.shape()[2]);
            let wt = params[0].data().to_vec();
            let gw = params[0].grad_mut();
            for b in 0..batch {
                for i in 0..ho {
                    for j in 0..wo {
                        let base = ((b * ho + i) * wo + j) * cout;
                        let gyt = &gy[base..base + cout];
                        for ki in 0..k {
                            let Some(r) = padded_index(i * stride, ki, padding, h) else {
                                continue;
                            };
                            for kj in 0..k {
                                let Some(c) = padded_index(j * stride, kj, padding, w) else {
                                    continue;
                                };
                                for ci in 0..cin {
                                    let xi = ((b * h + r) * w + c) * cin + ci;
                                    let off = ((ki * k + kj) * cin + ci) * cout;
                                    let mut acc = 0.0;
                                    for o in 0..cout {
                                        gw[off + o] += xd[xi] * gyt[o];
                                        acc += wt[off + o] * gyt[o];
                                    }
                                    gx[xi] += acc;
                                }
                            }
                        }
                    }
                }
            }
            let gb = params[1].grad_mut();
            for gr in gy.chunks_exact(cout) {
                for (g, &go) in gb.iter_mut().zip(gr) {
                    *g += go;
                }
            }
        }
        LayerSpec::Maxpool1d {
            kernel_size,
            stride,
        } => {
            let (len, c) = (x.shape()[1], x.shape()[2]);
            let len_out = y.shape()[1];
            for b in 0..batch {
                for t in 0..len_out {
                    for ch in 0..c {
                        // first maximal position receives the gradient
                        let mut best = t * stride;
                        for k in 1..kernel_size {
                            let pos = t * stride + k;
                            if xd[(b * len + pos) * c + ch] > xd[(b * len + best) * c + ch] {
                                best = pos;
                            }
                        }
                        gx[(b * len + best) * c + ch] += gy[(b * len_out + t) * c + ch];
                    }
                }
            }
        }
        LayerSpec::GlobalAvgPool => {
            let c = *x.shape().last().unwrap();
            let spatial = xd.len() / (batch * c);
            let scale = 1.0 / spatial as f64;
            for b in 0..batch {
                for p in 0..spatial {
                    for ch in 0..c {
                        gx[(b * spatial + p) * c + ch] = gy[b * c + ch] * scale;
                    }
                }
            }
        }
        LayerSpec::Activation { function } => {
            for ((g, (&xv, &yv)), &go) in gx.iter_mut().zip(xd.iter().zip(y.data())).zip(gy) {
                *g = go * function.derivative(xv, yv);
            }
        }
        LayerSpec::Flatten => gx.copy_from_slice(gy),
    }
    gx
}

#[allow(clippy::too_many_arguments)]
fn conv1d_backward(
    x: &[f64],
    gx: &mut [f64],
    gy: &[f64],
    params: &mut [Tensor],
    batch: usize,
    len: usize,
    cin: usize,
    cout: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    len_out: usize,
) {
    let w = params[0].data().to_vec();
    {
        let gw = params[0].grad_mut();
        for b in 0..batch {
            for t in 0..len_out {
                let gyt = &gy[(b * len_out + t) * cout..(b * len_out + t + 1) * cout];
                for k in 0..kernel {
                    let Some(pos) = padded_index(t * stride, k, padding, len) else {
                        continue;
                    };
                    for ci in 0..cin {
                        let xi = (b * len + pos) * cin + ci;
                        let off = (k * cin + ci) * cout;
                        let mut acc = 0.0;
                        for o in 0..cout {
                            gw[off + o] += x[xi] * gyt[o];
                            acc += w[off + o] * gyt[o];
                        }
                        gx[xi] += acc;
                    }
                }
            }
        }
    }
    let gb = params[1].grad_mut();
    for gr in gy.chunks_exact(cout) {
        for (g, &go) in gb.iter_mut().zip(gr) {
            *g += go;
        }
    }
}
