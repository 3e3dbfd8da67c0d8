//! Layer primitives over the feature axis: 1-D cross-correlation, its
//! transpose, non-overlapping max pooling with switches, and unpooling.
//!
//! Tensors are `[channels, length]` for a single row or
//! `[batch, channels, length]` for a batch. Kernels are
//! `[out_channels, in_channels, width]`.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Kernel and bias of a convolution (or the decoder's transposed convolution).
///
/// A transposed convolution reads the same `[c_out, c_in, width]` kernel in
/// the opposite direction and carries a bias of length `c_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LayerParams {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.rank() != 3 {
            return Err(Error::shape(&[0, 0, 0], &weight.shape));
        }
        Ok(LayerParams { weight, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn width(&self) -> usize {
        self.weight.shape[2]
    }
}

/// Geometry of one cross-correlation `x[b, c_in, len_in] -> y[b, c_out, len_out]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub c_in: usize,
    pub len_in: usize,
    pub c_out: usize,
    pub width: usize,
    pub stride: usize,
    pub padding: usize,
    pub len_out: usize,
}

pub fn conv_out_len(len: usize, width: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = len + 2 * padding;
    if stride == 0 || padded < width {
        return None;
    }
    Some((padded - width) / stride + 1)
}

impl ConvGeometry {
    pub fn new(
        batch: usize,
        c_in: usize,
        len_in: usize,
        c_out: usize,
        width: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let len_out = conv_out_len(len_in, width, stride, padding)
            .ok_or_else(|| Error::shape(&[width], &[len_in + 2 * padding]))?;
        Ok(ConvGeometry {
            batch,
            c_in,
            len_in,
            c_out,
            width,
            stride,
            padding,
            len_out,
        })
    }

    /// Output positions `o` for which input position `o*stride + k - padding`
    /// is in range.
    #[inline]
    fn valid_range(&self, k: usize) -> (usize, usize) {
        let s = self.stride;
        let lo = if self.padding > k {
            (self.padding - k).div_ceil(s)
        } else {
            0
        };
        let hi_num = self.len_in + self.padding;
        let hi = if hi_num > k {
            ((hi_num - 1 - k) / s + 1).min(self.len_out)
        } else {
            0
        };
        (lo, hi.max(lo))
    }

    /// `y += corr(x, w)`.
    pub fn forward_acc(&self, x: &[f64], w: &[f64], y: &mut [f64]) {
        let (ci_n, co_n, kw) = (self.c_in, self.c_out, self.width);
        for b in 0..self.batch {
            for co in 0..co_n {
                let yrow = &mut y[(b * co_n + co) * self.len_out..][..self.len_out];
                for ci in 0..ci_n {
                    let xrow = &x[(b * ci_n + ci) * self.len_in..][..self.len_in];
                    for k in 0..kw {
                        let wv = w[(co * ci_n + ci) * kw + k];
                        if wv == 0.0 {
                            continue;
                        }
                        let (lo, hi) = self.valid_range(k);
                        if self.stride == 1 {
                            let start = lo + k - self.padding;
                            for (yo, xv) in yrow[lo..hi].iter_mut().zip(&xrow[start..]) {
                                *yo += wv * xv;
                            }
                        } else {
                            for o in lo..hi {
                                yrow[o] += wv * xrow[o * self.stride + k - self.padding];
                            }
                        }
                    }
                }
            }
        }
    }

    /// `dx += corr^T(dy, w)`; also the forward pass of the transposed convolution.
    pub fn input_grad_acc(&self, dy: &[f64], w: &[f64], dx: &mut [f64]) {
        let (ci_n, co_n, kw) = (self.c_in, self.c_out, self.width);
        for b in 0..self.batch {
            for co in 0..co_n {
                let dyrow = &dy[(b * co_n + co) * self.len_out..][..self.len_out];
                for ci in 0..ci_n {
                    let dxrow = &mut dx[(b * ci_n + ci) * self.len_in..][..self.len_in];
                    for k in 0..kw {
                        let wv = w[(co * ci_n + ci) * kw + k];
                        if wv == 0.0 {
                            continue;
                        }
                        let (lo, hi) = self.valid_range(k);
                        if self.stride == 1 {
                            let start = lo + k - self.padding;
                            for (xo, g) in dxrow[start..].iter_mut().zip(&dyrow[lo..hi]) {
                                *xo += wv * g;
                            }
                        } else {
                            for o in lo..hi {
                                dxrow[o * self.stride + k - self.padding] += wv * dyrow[o];
                            }
                        }
                    }
                }
            }
        }
    }

    /// `dw += d corr / d w` contracted with `dy`.
    pub fn weight_grad_acc(&self, x: &[f64], dy: &[f64], dw: &mut [f64]) {
        let (ci_n, co_n, kw) = (self.c_in, self.c_out, self.width);
        for b in 0..self.batch {
            for co in 0..co_n {
                let dyrow = &dy[(b * co_n + co) * self.len_out..][..self.len_out];
                for ci in 0..ci_n {
                    let xrow = &x[(b * ci_n + ci) * self.len_in..][..self.len_in];
                    for k in 0..kw {
                        let (lo, hi) = self.valid_range(k);
                        let mut acc = 0.0;
                        if self.stride == 1 {
                            let start = lo + k - self.padding;
                            for (g, xv) in dyrow[lo..hi].iter().zip(&xrow[start..]) {
                                acc += g * xv;
                            }
                        } else {
                            for o in lo..hi {
                                acc += dyrow[o] * xrow[o * self.stride + k - self.padding];
                            }
                        }
                        dw[(co * ci_n + ci) * kw + k] += acc;
                    }
                }
            }
        }
    }
}

/// Splits a `[C, L]` or `[B, C, L]` shape into `(batch, channels, length)`.
pub(crate) fn batch_dims(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [c, l] => Ok((1, c, l)),
        [b, c, l] => Ok((b, c, l)),
        _ => Err(Error::shape(&[0, 0, 0], shape)),
    }
}

fn with_batch_shape(like: &[usize], c: usize, l: usize) -> Vec<usize> {
    if like.len() == 2 {
        vec![c, l]
    } else {
        vec![like[0], c, l]
    }
}

/// Cross-correlation (no kernel flip) with zero padding.
pub fn conv1d(input: &Tensor, params: &LayerParams, stride: usize, padding: usize) -> Result<Tensor> {
    let (b, c, l) = batch_dims(&input.shape)?;
    if c != params.in_channels() {
        return Err(Error::shape(&[params.in_channels()], &[c]));
    }
    if params.bias.len() != params.out_channels() {
        return Err(Error::shape(&[params.out_channels()], &params.bias.shape));
    }
    let g = ConvGeometry::new(b, c, l, params.out_channels(), params.width(), stride, padding)?;
    let mut y = vec![0.0; b * g.c_out * g.len_out];
    for (chunk, bias) in y.chunks_mut(g.len_out).zip(params.bias.values.iter().cycle()) {
        chunk.fill(*bias);
    }
    g.forward_acc(&input.values, &params.weight.values, &mut y);
    Tensor::new(with_batch_shape(&input.shape, g.c_out, g.len_out), y)
}

/// Output length of the transposed convolution for an input of `len`.
pub fn transposed_out_len(len: usize, width: usize, stride: usize, padding: usize) -> Option<usize> {
    if len == 0 {
        return None;
    }
    ((len - 1) * stride + width).checked_sub(2 * padding)
}

/// Transposed convolution: the adjoint of [`conv1d`] (plus a bias over the
/// `in_channels` axis of the kernel).
pub fn transposed_conv1d(
    input: &Tensor,
    params: &LayerParams,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let (b, c, l) = batch_dims(&input.shape)?;
    if c != params.out_channels() {
        return Err(Error::shape(&[params.out_channels()], &[c]));
    }
    if params.bias.len() != params.in_channels() {
        return Err(Error::shape(&[params.in_channels()], &params.bias.shape));
    }
    let len_in = transposed_out_len(l, params.width(), stride, padding)
        .ok_or_else(|| Error::shape(&[params.width()], &[l]))?;
    let g = ConvGeometry::new(b, params.in_channels(), len_in, c, params.width(), stride, padding)?;
    if g.len_out != l {
        return Err(Error::shape(&[g.len_out], &[l]));
    }
    let mut y = vec![0.0; b * g.c_in * len_in];
    for (chunk, bias) in y.chunks_mut(len_in).zip(params.bias.values.iter().cycle()) {
        chunk.fill(*bias);
    }
    g.input_grad_acc(&input.values, &params.weight.values, &mut y);
    Tensor::new(with_batch_shape(&input.shape, g.c_in, len_in), y)
}

/// Arg-max positions recorded by [`maxpool`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Switches {
    /// Shape of the pooled tensor.
    pub pooled_shape: Vec<usize>,
    /// Length of the pooled axis before pooling.
    pub input_len: usize,
    pub window: usize,
    /// Position along the pooled axis of each pooled cell's maximum.
    pub indices: Vec<usize>,
}

impl Switches {
    /// Switches that place every pooled value at the centre of its window,
    /// used when decoding without a paired forward pass.
    pub fn centered(pooled_shape: &[usize], input_len: usize, window: usize) -> Self {
        let lp = *pooled_shape.last().unwrap_or(&0);
        let outer: usize = pooled_shape.iter().rev().skip(1).product();
        let mut indices = Vec::with_capacity(outer * lp);
        for _ in 0..outer {
            for j in 0..lp {
                let start = j * window;
                let end = (start + window).min(input_len);
                indices.push(start + (end - start - 1) / 2);
            }
        }
        Switches {
            pooled_shape: pooled_shape.to_vec(),
            input_len,
            window,
            indices,
        }
    }
}

pub fn pooled_len(len: usize, window: usize) -> usize {
    len.div_ceil(window)
}

/// Non-overlapping max pooling along the last axis. A trailing partial window
/// behaves as if padded with negative infinity; ties pick the lowest index.
pub fn maxpool(input: &Tensor, window: usize) -> (Tensor, Switches) {
    assert!(window >= 1, "pool window must be positive");
    let l = *input.shape.last().expect("maxpool needs a rank >= 1 tensor");
    let lp = pooled_len(l, window);
    let outer = if l == 0 { 0 } else { input.len() / l };
    let mut values = Vec::with_capacity(outer * lp);
    let mut indices = Vec::with_capacity(outer * lp);
    for row in input.values.chunks(l.max(1)).take(outer) {
        for j in 0..lp {
            let start = j * window;
            let end = (start + window).min(l);
            let mut best = start;
            for p in start + 1..end {
                if row[p] > row[best] {
                    best = p;
                }
            }
            values.push(row[best]);
            indices.push(best);
        }
    }
    let mut shape = input.shape.clone();
    *shape.last_mut().unwrap() = lp;
    let switches = Switches {
        pooled_shape: shape.clone(),
        input_len: l,
        window,
        indices,
    };
    (Tensor { shape, values }, switches)
}

/// Places pooled values at their switch positions; every other cell is zero.
pub fn unpool(pooled: &Tensor, switches: &Switches, out_len: usize) -> Result<Tensor> {
    if pooled.len() != switches.indices.len() {
        return Err(Error::shape(&switches.pooled_shape, &pooled.shape));
    }
    let lp = *pooled.shape.last().unwrap_or(&0);
    let outer = if lp == 0 { 0 } else { pooled.len() / lp };
    let mut out = vec![0.0; outer * out_len];
    for (i, (&v, &idx)) in pooled.values.iter().zip(&switches.indices).enumerate() {
        if idx >= out_len {
            return Err(Error::SwitchOutOfRange { index: idx, len: out_len });
        }
        out[(i / lp) * out_len + idx] = v;
    }
    let mut shape = pooled.shape.clone();
    *shape.last_mut().unwrap() = out_len;
    Tensor::new(shape, out)
}
