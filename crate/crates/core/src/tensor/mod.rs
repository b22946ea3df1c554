//! Minimal dense N-D arrays with reverse-mode automatic differentiation.
//!
//! A [`Graph`] is a define-by-run tape: every operation appends a node holding
//! its value and a backward rule, and [`Graph::backward`] replays the tape in
//! reverse to populate leaf gradients. [`Tensor`] is a cheap handle (a node
//! id) into one graph. Everything is 64-bit.

mod grad_check;
mod graph;
mod ndarray;
mod ops;
mod session;

pub use grad_check::{grad_check, grad_check_multi, GradCheckReport};
pub use graph::{BackwardCtx, Graph, TapeOp, Tensor};
pub use ndarray::NdArray;
pub use ops::{EwKind, Operand, ReduceKind};
pub use session::{ParamId, ParamSet, Session};

/// Inputs of `log` and denominators of `div` are clamped this far from zero.
pub const EPS_NUM: f64 = 1e-12;

#[cfg(test)]
mod tests;
