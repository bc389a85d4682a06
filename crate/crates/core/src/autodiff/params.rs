use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named, ordered collection of trainable tensors.
///
/// Registration order is stable and doubles as the serialization order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

/// Tape handles for every parameter of a store, valid for one tape.
#[derive(Clone, Debug)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub(crate) fn from_vars(vars: Vec<Var>) -> Self {
        Self(vars)
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

impl std::ops::Index<ParamId> for Bound {
    type Output = Var;
    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let name = name.into();
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(tensor.with_grad());
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Records every parameter on `tape`; only trainable bindings get gradients.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Bound {
        Bound(self.tensors.iter().map(|t| tape.leaf(t, trainable)).collect())
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    /// Adds the gradients of a backward pass into each parameter's buffer.
    pub fn accumulate(&mut self, grads: &Gradients, bound: &Bound) {
        for (t, &v) in self.tensors.iter_mut().zip(bound.vars()) {
            if let Some(g) = grads.get(v) {
                t.accumulate_grad(g);
            }
        }
    }

    /// Overwrites values from another store with identical names and shapes.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<()> {
        for (i, (name, t)) in self.names.iter().zip(self.tensors.iter_mut()).enumerate() {
            let Some(src) = other.find(name).map(|id| other.get(id)) else {
                return Err(Error::Checkpoint(format!("missing parameter {name}")));
            };
            if src.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} (#{i}) has shape {:?}, expected {:?}",
                    src.shape(),
                    t.shape()
                )));
            }
            t.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    /// Rounds every value to the nearest `f32`, the precision of checkpoints.
    pub fn round_to_f32(&mut self) {
        for t in &mut self.tensors {
            t.data_mut().iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    /// Raw bit patterns of every value, in registration order.
    pub fn value_bits(&self) -> Vec<u64> {
        self.tensors.iter().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect()
    }
}
