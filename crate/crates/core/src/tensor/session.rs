//! Named trainable parameters and their binding into a graph.

use super::graph::{Graph, Tensor};
use super::ndarray::NdArray;
use std::ops::{Deref, DerefMut};

/// Index of one parameter within a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

impl ParamId {
    /// Dense slot within the owning set.
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Flat container of named trainable arrays.
///
/// Networks hold a `ParamSet` plus `ParamId`s; each forward pass binds the
/// current values into a fresh graph via [`Session::param`].
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<NdArray>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: NdArray) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(NdArray::len).sum()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &NdArray {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut NdArray {
        &mut self.values[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &NdArray)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    /// Overwrite a parameter by name (checkpoint restore).
    pub fn set_by_name(&mut self, name: &str, value: NdArray) -> bool {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            self.values[i] = value;
            true
        } else {
            false
        }
    }
}

/// One forward/backward pass over a [`ParamSet`].
///
/// Binds each parameter into the graph at most once, so weight sharing (the
/// same `ParamId` used by every slice) accumulates gradients on a single leaf.
pub struct Session<'p> {
    graph: Graph,
    params: &'p ParamSet,
    bound: Vec<Option<Tensor>>,
    trainable: bool,
}

impl<'p> Session<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Session {
            graph: Graph::new(),
            params,
            bound: vec![None; params.len()],
            trainable: true,
        }
    }

    /// A session whose parameter leaves do not require gradients (inference).
    pub fn frozen(params: &'p ParamSet) -> Self {
        Session {
            trainable: false,
            ..Session::new(params)
        }
    }

    /// Leaf tensor for a parameter, cached per session.
    pub fn param(&mut self, id: ParamId) -> Tensor {
        if let Some(t) = self.bound[id.0] {
            return t;
        }
        let value = self.params.value(id).clone();
        let t = if self.trainable {
            self.graph.leaf_grad(value)
        } else {
            self.graph.leaf(value)
        };
        self.bound[id.0] = Some(t);
        t
    }

    /// Constant input leaf.
    pub fn input(&mut self, data: NdArray) -> Tensor {
        self.graph.leaf(data)
    }

    /// Gradient of a parameter after backward; `None` if it was never used.
    pub fn param_grad(&self, id: ParamId) -> Option<&[f64]> {
        self.bound[id.0].and_then(|t| self.graph.grad(t))
    }

    pub fn params(&self) -> &ParamSet {
        self.params
    }
}

impl Deref for Session<'_> {
    type Target = Graph;
    fn deref(&self) -> &Graph {
        &self.graph
    }
}

impl DerefMut for Session<'_> {
    fn deref_mut(&mut self) -> &mut Graph {
        &mut self.graph
    }
}
