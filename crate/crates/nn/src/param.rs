use std::collections::HashMap;

use rand::Rng;

use crate::scalar::Scalar;
use crate::tensor::{NnError, Result, Tensor};

pub type ParamId = usize;

/// A named tensor owned by a model. Buffers such as running statistics are
/// parameters with `requires_grad == false`.
#[derive(Debug, Clone)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub requires_grad: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
    by_name: HashMap<String, ParamId>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>, requires_grad: bool) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(NnError::Shape(format!("duplicate parameter name {name}")));
        }
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        let grad = Tensor::zeros(value.shape().to_vec());
        self.params.push(Parameter {
            name,
            value,
            grad,
            requires_grad,
        });
        Ok(id)
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(T::zero());
        }
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.requires_grad)
            .map(|p| p.value.numel())
            .sum()
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, g: &[T]) {
        let p = &mut self.params[id];
        if p.requires_grad {
            for (a, &b) in p.grad.data_mut().iter_mut().zip(g) {
                *a += b;
            }
        }
    }
}

/// Kaiming-uniform weights: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
pub fn kaiming_uniform<T: Scalar, R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor<T> {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches")
}
