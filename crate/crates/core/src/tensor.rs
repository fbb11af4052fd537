//! Dense row-major tensor of rank 1 to 4.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_RANK: usize = 4;

/// Dense row-major array. Rank-4 tensors are batches laid out `N,C,H,W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    shape: Vec<usize>,
    data: Vec<S>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(Error::shape(format!(
            "rank must be 1..={MAX_RANK}, got shape {shape:?}"
        )));
    }
    if shape.contains(&0) {
        return Err(Error::shape(format!("zero-sized dimension in {shape:?}")));
    }
    Ok(shape.iter().product())
}

impl<S: Scalar> Tensor<S> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<S>) -> Result<Self> {
        let shape = shape.into();
        let len = check_shape(&shape)?;
        if len != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {len} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: S) -> Result<Self> {
        let shape = shape.into();
        let len = check_shape(&shape)?;
        Ok(Tensor {
            shape,
            data: vec![value; len],
        })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Result<Self> {
        Self::full(shape, S::zero())
    }

    pub fn ones(shape: impl Into<Vec<usize>>) -> Result<Self> {
        Self::full(shape, S::one())
    }

    /// Builds a tensor by evaluating `f` at every flat index.
    pub fn from_fn(shape: impl Into<Vec<usize>>, f: impl FnMut(usize) -> S) -> Result<Self> {
        let shape = shape.into();
        let len = check_shape(&shape)?;
        Ok(Tensor {
            shape,
            data: (0..len).map(f).collect(),
        })
    }

    /// Rank-1 tensor from a slice of `f64` values.
    pub fn vector(values: &[f64]) -> Result<Self> {
        Self::new(vec![values.len()], values.iter().map(|&v| S::from_acc(v)).collect())
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

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn map(&self, mut f: impl FnMut(S) -> S) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Converts the element type.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| T::from_acc(x.acc())).collect(),
        }
    }

    /// Interprets the tensor as `[C,H,W]`.
    pub fn chw(&self) -> Result<(usize, usize, usize)> {
        match *self.shape.as_slice() {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::shape(format!("expected a [C,H,W] tensor, got {:?}", self.shape))),
        }
    }

    /// Channel `c` of a `[C,H,W]` tensor as a `[1,H,W]` tensor.
    pub fn channel(&self, c: usize) -> Result<Self> {
        let (channels, h, w) = self.chw()?;
        if c >= channels {
            return Err(Error::IndexOutOfRange {
                index: c,
                len: channels,
            });
        }
        let plane = h * w;
        Self::new(vec![1, h, w], self.data[c * plane..(c + 1) * plane].to_vec())
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(items: &[Tensor<S>]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::shape("cannot stack zero tensors"))?;
        if first.rank() >= MAX_RANK {
            return Err(Error::shape("stacked tensor would exceed rank 4"));
        }
        let mut data = Vec::with_capacity(first.len() * items.len());
        for t in items {
            if t.shape != first.shape {
                return Err(Error::shape(format!(
                    "cannot stack {:?} with {:?}",
                    first.shape, t.shape
                )));
            }
            data.extend_from_slice(&t.data);
        }
        let mut shape = vec![items.len()];
        shape.extend_from_slice(&first.shape);
        Self::new(shape, data)
    }

    /// Splits along the leading axis.
    pub fn unstack(&self) -> Result<Vec<Self>> {
        if self.rank() < 2 {
            return Err(Error::shape("cannot unstack a rank-1 tensor"));
        }
        let inner: Vec<usize> = self.shape[1..].to_vec();
        let step: usize = inner.iter().product();
        self.data
            .chunks(step)
            .map(|chunk| Self::new(inner.clone(), chunk.to_vec()))
            .collect()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, &x| acc + x.acc())
    }

    pub fn min_max(&self) -> (S, S) {
        let first = self.data[0];
        self.data
            .iter()
            .fold((first, first), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff on mismatched shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.acc() - b.acc()).abs())
            .fold(0.0, f64::max)
    }
}
