//! Forward and backward passes for the layer kinds of the classifier stack.
//!
//! All signatures are per-sample. Sequence activations are `(length, channels)`
//! tensors stored row-major, so element `(t, c)` lives at `t * channels + c`.
//! Every reduction runs in ascending index order, which keeps results
//! bit-reproducible.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tensor::{matvec, Tensor};

/// Gradients of a parametric layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub d_weights: Tensor,
    pub d_bias: Tensor,
    pub d_input: Tensor,
}

fn seq_dims(x: &Tensor, what: &str) -> Result<(usize, usize)> {
    match x.shape() {
        &[len, ch] => Ok((len, ch)),
        s => Err(Error::Dimension(format!(
            "{what} expects a (length, channels) tensor, got {s:?}"
        ))),
    }
}

/// 1D cross-correlation, stride 1, no padding.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Conv1DLayer {
    /// `(filters, in_channels, kernel_size)`
    pub weights: Tensor,
    /// `(filters,)`
    pub bias: Tensor,
}

impl Conv1DLayer {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        let ok = match (weights.shape(), bias.shape()) {
            (&[f, c, k], &[fb]) => f == fb && f > 0 && c > 0 && k > 0,
            _ => false,
        };
        if !ok {
            return Err(Error::Dimension(format!(
                "conv1d weights {:?} / bias {:?} are not (filters, in_channels, kernel) / (filters,)",
                weights.shape(),
                bias.shape()
            )));
        }
        Ok(Conv1DLayer { weights, bias })
    }

    pub fn filters(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel_size(&self) -> usize {
        self.weights.shape()[2]
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize)> {
        let (len, ch) = seq_dims(x, "conv1d")?;
        if ch != self.in_channels() {
            return Err(Error::Dimension(format!(
                "conv1d expects {} input channels, got {ch}",
                self.in_channels()
            )));
        }
        if len < self.kernel_size() {
            return Err(Error::Dimension(format!(
                "input too short for kernel: length {len} < kernel size {}",
                self.kernel_size()
            )));
        }
        Ok((len, len - self.kernel_size() + 1))
    }

    /// `out[t, f] = bias[f] + sum_{c, k} w[f, c, k] * x[t + k, c]`
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, out_len) = self.check_input(x)?;
        let (nf, nc, nk) = (self.filters(), self.in_channels(), self.kernel_size());
        let w = self.weights.data();
        let xs = x.data();
        let mut out = vec![0.0; out_len * nf];
        // One accumulator per output position, all advanced together; each
        // still sums over c then k from 0.
        let mut acc = vec![0.0; out_len];
        for f in 0..nf {
            acc.fill(0.0);
            for c in 0..nc {
                for (k, &wk) in w[(f * nc + c) * nk..(f * nc + c + 1) * nk]
                    .iter()
                    .enumerate()
                {
                    for (t, a) in acc.iter_mut().enumerate() {
                        *a += wk * xs[(t + k) * nc + c];
                    }
                }
            }
            let b = self.bias.data()[f];
            for (t, &a) in acc.iter().enumerate() {
                out[t * nf + f] = b + a;
            }
        }
        Tensor::new(vec![out_len, nf], out)
    }

    pub fn backward(&self, x: &Tensor, grad_out: &Tensor) -> Result<LayerGrads> {
        let (len, out_len) = self.check_input(x)?;
        let (nf, nc, nk) = (self.filters(), self.in_channels(), self.kernel_size());
        if grad_out.shape() != [out_len, nf] {
            return Err(Error::Dimension(format!(
                "conv1d grad_out {:?} does not match output shape [{out_len}, {nf}]",
                grad_out.shape()
            )));
        }
        let w = self.weights.data();
        let xs = x.data();
        let g = grad_out.data();

        let mut d_w = vec![0.0; nf * nc * nk];
        for f in 0..nf {
            for c in 0..nc {
                for k in 0..nk {
                    let mut acc = 0.0;
                    for t in 0..out_len {
                        acc += g[t * nf + f] * xs[(t + k) * nc + c];
                    }
                    d_w[(f * nc + c) * nk + k] = acc;
                }
            }
        }

        let d_b = (0..nf)
            .map(|f| (0..out_len).fold(0.0, |acc, t| acc + g[t * nf + f]))
            .collect();

        let mut d_in = vec![0.0; len * nc];
        for i in 0..len {
            for c in 0..nc {
                let mut acc = 0.0;
                for f in 0..nf {
                    for k in 0..nk {
                        // only taps whose output position t = i - k exists
                        if k <= i && i - k < out_len {
                            acc += w[(f * nc + c) * nk + k] * g[(i - k) * nf + f];
                        }
                    }
                }
                d_in[i * nc + c] = acc;
            }
        }

        Ok(LayerGrads {
            d_weights: Tensor::new(vec![nf, nc, nk], d_w)?,
            d_bias: Tensor::vector(d_b),
            d_input: Tensor::new(vec![len, nc], d_in)?,
        })
    }
}

/// Fully connected layer, `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseLayer {
    /// `(out, in)`
    pub weights: Tensor,
    /// `(out,)`
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        let ok = match (weights.shape(), bias.shape()) {
            (&[o, i], &[ob]) => o == ob && o > 0 && i > 0,
            _ => false,
        };
        if !ok {
            return Err(Error::Dimension(format!(
                "dense weights {:?} / bias {:?} are not (out, in) / (out,)",
                weights.shape(),
                bias.shape()
            )));
        }
        Ok(DenseLayer { weights, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut y = matvec(&self.weights, x)?;
        for (yi, &bi) in y.data_mut().iter_mut().zip(self.bias.data()) {
            *yi += bi;
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Tensor, grad_out: &Tensor) -> Result<LayerGrads> {
        let (n_out, n_in) = (self.outputs(), self.inputs());
        if x.shape() != [n_in] || grad_out.shape() != [n_out] {
            return Err(Error::Dimension(format!(
                "dense backward with x {:?} and grad_out {:?} for weights {:?}",
                x.shape(),
                grad_out.shape(),
                self.weights.shape()
            )));
        }
        let g = grad_out.data();
        let xs = x.data();
        let w = self.weights.data();

        let mut d_w = Vec::with_capacity(n_out * n_in);
        for &gi in g {
            d_w.extend(xs.iter().map(|&xj| gi * xj));
        }
        let d_in = (0..n_in)
            .map(|j| (0..n_out).fold(0.0, |acc, i| acc + w[i * n_in + j] * g[i]))
            .collect();

        Ok(LayerGrads {
            d_weights: Tensor::new(vec![n_out, n_in], d_w)?,
            d_bias: grad_out.clone(),
            d_input: Tensor::vector(d_in),
        })
    }
}

/// Output of a max-pooling pass, with the routing needed for backward.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub output: Tensor,
    /// Flat input position that won each output cell.
    pub argmax: Vec<usize>,
}

/// Non-overlapping max pooling along the length axis; a trailing remainder
/// shorter than `pool` is dropped. Ties pick the earliest position.
pub fn maxpool1d_forward(x: &Tensor, pool: usize) -> Result<Pooled> {
    let (len, ch) = seq_dims(x, "maxpool1d")?;
    if pool == 0 {
        return Err(Error::Dimension("pool size must be positive".into()));
    }
    if len < pool {
        return Err(Error::Dimension(format!(
            "maxpool1d input length {len} is shorter than pool size {pool}"
        )));
    }
    let out_len = len / pool;
    let xs = x.data();
    let mut out = Vec::with_capacity(out_len * ch);
    let mut argmax = Vec::with_capacity(out_len * ch);
    for t in 0..out_len {
        for c in 0..ch {
            let mut best = (t * pool) * ch + c;
            for p in 1..pool {
                let idx = (t * pool + p) * ch + c;
                if xs[idx] > xs[best] {
                    best = idx;
                }
            }
            out.push(xs[best]);
            argmax.push(best);
        }
    }
    Ok(Pooled {
        output: Tensor::new(vec![out_len, ch], out)?,
        argmax,
    })
}

/// Routes each output gradient to its recorded argmax position.
pub fn maxpool1d_backward(
    argmax: &[usize],
    grad_out: &Tensor,
    input_shape: &[usize],
) -> Result<Tensor> {
    if argmax.len() != grad_out.len() {
        return Err(Error::Dimension(format!(
            "maxpool1d grad_out has {} cells but {} argmax entries were recorded",
            grad_out.len(),
            argmax.len()
        )));
    }
    let mut d_in = Tensor::zeros(input_shape)?;
    let n = d_in.len();
    let buf = d_in.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        if idx >= n {
            return Err(Error::Internal(format!(
                "maxpool argmax index {idx} outside input of {n} elements"
            )));
        }
        buf[idx] += g;
    }
    Ok(d_in)
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v <= 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// Passes `grad_out` where `x > 0`; the derivative at exactly zero is zero.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if x.shape() != grad_out.shape() {
        return Err(Error::Dimension(format!(
            "relu backward with x {:?} and grad_out {:?}",
            x.shape(),
            grad_out.shape()
        )));
    }
    let mut d = grad_out.clone();
    for (g, &xv) in d.data_mut().iter_mut().zip(x.data()) {
        if xv <= 0.0 {
            *g = 0.0;
        }
    }
    Ok(d)
}

/// Max-shifted softmax over a flat slice.
pub fn softmax_slice(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| libm::exp(v - m)).collect();
    let sum = exps.iter().fold(0.0, |a, &e| a + e);
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn softmax(x: &Tensor) -> Result<Tensor> {
    if x.rank() != 1 || x.is_empty() {
        return Err(Error::Dimension(format!(
            "softmax expects a non-empty vector, got {:?}",
            x.shape()
        )));
    }
    Ok(Tensor::vector(softmax_slice(x.data())))
}

/// Row-major flatten; the backward pass is a reshape of the gradient.
pub fn flatten(x: &Tensor) -> Tensor {
    Tensor::vector(x.data().to_vec())
}
