//! The recording tape and its backward engine.

use super::ndarray::NdArray;
use crate::{Error, Result};

/// Handle to one node of a [`Graph`]. Valid only for the graph that made it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tensor(pub(crate) usize);

impl Tensor {
    pub fn id(&self) -> usize {
        self.0
    }
}

/// Context handed to a backward rule.
pub struct BackwardCtx<'a> {
    /// Value of the node itself.
    pub out: &'a NdArray,
    /// Incoming gradient, same length as `out`.
    pub out_grad: &'a [f64],
    /// Parent values, in recording order.
    pub parents: &'a [&'a NdArray],
    /// Whether each parent needs a gradient at all.
    pub need: &'a [bool],
}

/// Backward rule of a recorded operation.
///
/// Returns one gradient buffer per parent (or `None` where `ctx.need` is
/// false); each buffer must match the parent's length.
pub trait TapeOp {
    fn name(&self) -> &'static str;
    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>>;
}

struct Node {
    data: NdArray,
    grad: Option<Vec<f64>>,
    parents: Vec<Tensor>,
    rule: Option<Box<dyn TapeOp>>,
    requires_grad: bool,
}

/// Define-by-run differentiation graph.
///
/// Recording order is a valid evaluation order by construction (an operation
/// can only reference already-recorded parents), so backward simply walks the
/// tape once in reverse. A graph is confined to one thread of control.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    consumed: bool,
    applications: usize,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Number of recorded operations (leaves excluded).
    pub fn op_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.rule.is_some()).count()
    }

    /// Backward-rule applications performed by the last [`Graph::backward`].
    pub fn backward_applications(&self) -> usize {
        self.applications
    }

    /// Insert a constant leaf.
    pub fn leaf(&mut self, data: NdArray) -> Tensor {
        self.push(data, vec![], None, false)
    }

    /// Insert a leaf whose gradient will be populated by backward.
    pub fn leaf_grad(&mut self, data: NdArray) -> Tensor {
        self.push(data, vec![], None, true)
    }

    pub fn scalar(&mut self, value: f64) -> Tensor {
        self.leaf(NdArray::scalar(value))
    }

    pub(crate) fn push(
        &mut self,
        data: NdArray,
        parents: Vec<Tensor>,
        rule: Option<Box<dyn TapeOp>>,
        requires_grad: bool,
    ) -> Tensor {
        let id = self.nodes.len();
        self.nodes.push(Node {
            data,
            grad: None,
            parents,
            rule,
            requires_grad,
        });
        Tensor(id)
    }

    pub(crate) fn record(
        &mut self,
        data: NdArray,
        parents: Vec<Tensor>,
        rule: Box<dyn TapeOp>,
    ) -> Tensor {
        let requires = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.push(data, parents, Some(rule), requires)
    }

    pub fn data(&self, t: Tensor) -> &NdArray {
        &self.nodes[t.0].data
    }

    pub fn shape(&self, t: Tensor) -> &[usize] {
        self.nodes[t.0].data.shape()
    }

    pub fn requires_grad(&self, t: Tensor) -> bool {
        self.nodes[t.0].requires_grad
    }

    /// Gradient of `t` populated by the last backward pass, if any.
    pub fn grad(&self, t: Tensor) -> Option<&[f64]> {
        self.nodes[t.0].grad.as_deref()
    }

    /// Reverse-mode sweep from a scalar `loss`.
    ///
    /// Every node is visited exactly once, in reverse recording order; the
    /// graph is consumed and a second call fails.
    pub fn backward(&mut self, loss: Tensor) -> Result<()> {
        if self.consumed {
            return Err(Error::GraphConsumed);
        }
        if self.nodes[loss.0].data.len() != 1 {
            return Err(Error::NonScalarLoss {
                shape: self.nodes[loss.0].data.shape().to_vec(),
            });
        }
        self.consumed = true;
        self.applications = 0;
        self.nodes[loss.0].grad = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            if self.nodes[id].rule.is_none()
                || !self.nodes[id].requires_grad
                || self.nodes[id].grad.is_none()
            {
                continue;
            }
            let contributions = {
                let node = &self.nodes[id];
                let parent_data: Vec<&NdArray> =
                    node.parents.iter().map(|p| &self.nodes[p.0].data).collect();
                let need: Vec<bool> = node
                    .parents
                    .iter()
                    .map(|p| self.nodes[p.0].requires_grad)
                    .collect();
                let ctx = BackwardCtx {
                    out: &node.data,
                    out_grad: node.grad.as_deref().unwrap(),
                    parents: &parent_data,
                    need: &need,
                };
                node.rule.as_ref().unwrap().backward(ctx)
            };
            self.applications += 1;

            let parents = self.nodes[id].parents.clone();
            debug_assert_eq!(contributions.len(), parents.len());
            for (parent, contribution) in parents.into_iter().zip(contributions) {
                let Some(contribution) = contribution else {
                    continue;
                };
                let pnode = &mut self.nodes[parent.0];
                debug_assert_eq!(contribution.len(), pnode.data.len());
                match &mut pnode.grad {
                    Some(acc) => {
                        for (a, c) in acc.iter_mut().zip(&contribution) {
                            *a += c;
                        }
                    }
                    None => pnode.grad = Some(contribution),
                }
            }
        }
        Ok(())
    }
}
