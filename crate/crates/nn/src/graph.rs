//! Tape-based reverse-mode differentiation.
//!
//! Each op appends a node holding its forward value and a closure mapping the
//! output gradient to gradients of its parents. Nodes are topologically
//! ordered by construction, so backward is a single reverse sweep.

use crate::param::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::{NnError, Result, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Maps `(graph, output grad, which parents need grads)` to parent grads.
pub(crate) type Backward<T> = Box<dyn Fn(&Graph<T>, &[T], &[bool]) -> Vec<Option<Vec<T>>>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    Op,
    Input,
    Param(ParamId),
}

struct Node<T> {
    value: Tensor<T>,
    parents: Vec<Var>,
    backward: Option<Backward<T>>,
    needs_grad: bool,
    source: Source,
}

pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Constant leaf.
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false, Source::Input)
    }

    /// Leaf whose gradient is retained by [`Graph::backward`].
    pub fn input_with_grad(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, true, Source::Input)
    }

    /// Leaf bound to a stored parameter; backward accumulates into its grad.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let p = store.get(id);
        self.leaf(p.value.clone(), p.requires_grad, Source::Param(id))
    }

    fn leaf(&mut self, value: Tensor<T>, needs_grad: bool, source: Source) -> Var {
        self.nodes.push(Node {
            value,
            parents: Vec::new(),
            backward: None,
            needs_grad,
            source,
        });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn push(&mut self, value: Tensor<T>, parents: Vec<Var>, backward: Backward<T>) -> Var {
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value,
            parents,
            backward: needs_grad.then_some(backward),
            needs_grad,
            source: Source::Op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub(crate) fn data(&self, v: Var) -> &[T] {
        self.nodes[v.0].value.data()
    }

    /// Gradient of the last backward pass with respect to `v`, if it was reached.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Reverse sweep from a single-element `loss`. Parameter gradients are
    /// added to `store`, so repeated calls accumulate.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore<T>) -> Result<()> {
        let shape = self.shape(loss);
        if shape.iter().product::<usize>() != 1 {
            return Err(NnError::NonScalarLoss(shape.to_vec()));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if let Source::Param(id) = node.source {
                store.accumulate(id, &g);
            }
            if let Some(bw) = &node.backward {
                let need: Vec<bool> = node.parents.iter().map(|p| self.nodes[p.0].needs_grad).collect();
                let pgrads = bw(self, &g, &need);
                debug_assert_eq!(pgrads.len(), node.parents.len());
                for (p, pg) in node.parents.iter().zip(pgrads) {
                    let Some(pg) = pg else { continue };
                    if !self.nodes[p.0].needs_grad {
                        continue;
                    }
                    debug_assert_eq!(pg.len(), self.nodes[p.0].value.numel());
                    match &mut grads[p.0] {
                        Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, &b)| *a += b),
                        slot @ None => *slot = Some(pg),
                    }
                }
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }
}
