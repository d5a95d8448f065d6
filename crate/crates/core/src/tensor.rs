//! Dense row-major `f64` tensor, rank 1 to 3.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const MAX_RANK: usize = 3;

/// Dense tensor; `data.len()` always equals the product of `shape`.
///
/// Dimensions may be zero so that an empty dataset (zero rows) is still a
/// well-formed rank-2 tensor.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Element-wise binary operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
}

fn volume(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn check_rank(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(Error::Dimension(format!(
            "tensor rank must be 1..={MAX_RANK}, got shape {shape:?}"
        )));
    }
    Ok(())
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_rank(&shape)?;
        if volume(&shape) != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {} elements, got {}",
                volume(&shape),
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        check_rank(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; volume(shape)],
        })
    }

    /// Rank-1 tensor over `data`.
    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    /// Rank-2 tensor from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} elements, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Tensor::new(vec![rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Row `i` of the leading axis as a flat slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let stride = volume(&self.shape[1..]);
        &self.data[i * stride..(i + 1) * stride]
    }

    /// Copy of the `i`-th slab along the leading axis, keeping the trailing
    /// axes (a rank-1 tensor yields a length-1 vector).
    pub fn index_axis0(&self, i: usize) -> Result<Tensor> {
        let n = self.shape[0];
        if i >= n {
            return Err(Error::Dimension(format!(
                "index {i} out of range for leading axis of {:?}",
                self.shape
            )));
        }
        let inner: Vec<usize> = if self.rank() == 1 {
            vec![1]
        } else {
            self.shape[1..].to_vec()
        };
        Ok(Tensor {
            data: self.row(i).to_vec(),
            shape: inner,
        })
    }

    /// Same data under a new shape; no element is moved.
    pub fn reshape(&self, new_shape: &[usize]) -> Result<Tensor> {
        self.clone().into_reshaped(new_shape)
    }

    pub fn into_reshaped(self, new_shape: &[usize]) -> Result<Tensor> {
        check_rank(new_shape)?;
        if volume(new_shape) != self.data.len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} ({} elements) into {new_shape:?}",
                self.shape,
                self.data.len()
            )));
        }
        Ok(Tensor {
            shape: new_shape.to_vec(),
            data: self.data,
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        elementwise(self, other, ElementwiseOp::Add)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        elementwise(self, other, ElementwiseOp::Sub)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        elementwise(self, other, ElementwiseOp::Mul)
    }

    /// Index of the largest element; ties resolve to the lowest index.
    pub fn argmax(&self) -> Option<usize> {
        argmax(&self.data)
    }
}

/// Lowest index of the maximum value.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

pub fn elementwise(a: &Tensor, b: &Tensor, op: ElementwiseOp) -> Result<Tensor> {
    if a.shape != b.shape {
        return Err(Error::Dimension(format!(
            "elementwise {op:?} needs identical shapes, got {:?} and {:?}",
            a.shape, b.shape
        )));
    }
    let f = match op {
        ElementwiseOp::Add => |x: f64, y: f64| x + y,
        ElementwiseOp::Sub => |x: f64, y: f64| x - y,
        ElementwiseOp::Mul => |x: f64, y: f64| x * y,
    };
    let data = a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect();
    Ok(Tensor {
        shape: a.shape.clone(),
        data,
    })
}

/// `w · x` for a rank-2 `w` (out×in) and rank-1 `x` (in), summing in
/// ascending column order.
pub fn matvec(w: &Tensor, x: &Tensor) -> Result<Tensor> {
    if w.rank() != 2 || x.rank() != 1 || w.shape[1] != x.shape[0] {
        return Err(Error::Dimension(format!(
            "matvec of {:?} by {:?}",
            w.shape, x.shape
        )));
    }
    let (m, n) = (w.shape[0], w.shape[1]);
    let dot = |i: usize| {
        w.row(i)
            .iter()
            .zip(&x.data)
            .fold(0.0, |acc, (&wij, &xj)| acc + wij * xj)
    };
    let mut out = vec![0.0; m];
    // Four rows at a time: independent accumulators overlap their add
    // latencies while each row keeps the same ascending-j summation.
    let blocks = m / 4;
    for b in 0..blocks {
        let i = 4 * b;
        let (r0, r1, r2, r3) = (w.row(i), w.row(i + 1), w.row(i + 2), w.row(i + 3));
        let mut a = [0.0f64; 4];
        for (j, &xj) in x.data[..n].iter().enumerate() {
            a[0] += r0[j] * xj;
            a[1] += r1[j] * xj;
            a[2] += r2[j] * xj;
            a[3] += r3[j] * xj;
        }
        out[i..i + 4].copy_from_slice(&a);
    }
    for (i, o) in out.iter_mut().enumerate().skip(4 * blocks) {
        *o = dot(i);
    }
    Ok(Tensor::vector(out))
}
