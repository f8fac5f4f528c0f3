use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, NnError>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(NnError::Shape(msg.into()))
}

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let n: usize = shape.iter().product();
        if n != data.len() {
            return shape_err(format!("shape {shape:?} needs {n} values, got {}", data.len()));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: impl Into<Vec<usize>>, v: T) -> Self {
        let shape = shape.into();
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![v; n],
        }
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn from_f64(shape: impl Into<Vec<usize>>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&v| T::of(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshaped(mut self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if shape.iter().product::<usize>() != self.data.len() {
            return shape_err(format!("cannot reshape {:?} to {shape:?}", self.shape));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Element at a full multi-index.
    pub fn at(&self, idx: &[usize]) -> T {
        assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (i, (&x, &d)) in idx.iter().zip(&self.shape).enumerate() {
            assert!(x < d, "index {x} out of range for axis {i} of size {d}");
            off = off * d + x;
        }
        self.data[off]
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }
}
