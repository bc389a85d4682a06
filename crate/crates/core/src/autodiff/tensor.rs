use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Dense row-major `f64` array with an optional gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        if numel(&shape) != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} holds {} elements but data has {}", numel(&shape), data.len()),
            ));
        }
        Ok(Self { shape, data, requires_grad: false, grad: None })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: f64) -> Self {
        let shape = shape.into();
        let data = vec![value; numel(&shape)];
        Self { shape, data, requires_grad: false, grad: None }
    }

    pub fn scalar(value: f64) -> Self {
        Self { shape: Vec::new(), data: vec![value], requires_grad: false, grad: None }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self { shape: vec![data.len()], data, requires_grad: false, grad: None }
    }

    /// Gaussian entries with the given standard deviation.
    pub fn randn(shape: impl Into<Vec<usize>>, std: f64, rng: &mut impl Rng) -> Self {
        let shape = shape.into();
        let normal = Normal::new(0.0, std.max(f64::MIN_POSITIVE)).expect("finite std");
        let data = (0..numel(&shape)).map(|_| normal.sample(rng)).collect();
        Self { shape, data, requires_grad: false, grad: None }
    }

    /// Uniform entries in `[-bound, bound]`.
    pub fn uniform(shape: impl Into<Vec<usize>>, bound: f64, rng: &mut impl Rng) -> Self {
        let shape = shape.into();
        let data = (0..numel(&shape)).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self { shape, data, requires_grad: false, grad: None }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    /// Element at a 2-D index.
    pub fn at2(&self, row: usize, col: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 2);
        self.data[row * self.shape[1] + col]
    }

    pub fn reshape(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if numel(&shape) != self.data.len() {
            return Err(Error::shape("reshape", format!("{:?} -> {shape:?}", self.shape)));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Marks the tensor as trainable and allocates a zeroed gradient buffer.
    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self.grad = Some(vec![0.0; self.data.len()]);
        self
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> Option<&mut [f64]> {
        self.grad.as_deref_mut()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Adds `delta` into the gradient buffer, allocating it if needed.
    pub fn accumulate_grad(&mut self, delta: &[f64]) {
        assert_eq!(delta.len(), self.data.len());
        let g = self.grad.get_or_insert_with(|| vec![0.0; delta.len()]);
        for (a, b) in g.iter_mut().zip(delta) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Same values, no gradient state.
    pub fn detached(&self) -> Self {
        Self { shape: self.shape.clone(), data: self.data.clone(), requires_grad: false, grad: None }
    }
}
