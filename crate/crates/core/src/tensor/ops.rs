//! Elementwise, reduction and shape operations on the tape.

use super::graph::{BackwardCtx, Graph, TapeOp, Tensor};
use super::ndarray::{strides_of, NdArray};
use super::EPS_NUM;
use crate::{Error, Result};

/// Elementwise operation kinds accepted by [`Graph::elementwise`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwKind {
    Add,
    Sub,
    Mul,
    Div,
    Exp,
    Log,
    Neg,
    Clamp,
}

/// Right-hand operand of an elementwise operation.
#[derive(Debug, Clone, Copy)]
pub enum Operand {
    Tensor(Tensor),
    Scalar(f64),
    /// For unary kinds (`Exp`, `Log`, `Neg`).
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
    Max,
}

fn sign_clamped(v: f64) -> f64 {
    // Keeps divisions finite; zero denominators count as +eps.
    if v.abs() >= EPS_NUM {
        v
    } else if v < 0.0 {
        -EPS_NUM
    } else {
        EPS_NUM
    }
}

// ── binary elementwise ───────────────────────────────────────────────

struct BinaryOp {
    kind: EwKind,
}

impl TapeOp for BinaryOp {
    fn name(&self) -> &'static str {
        match self.kind {
            EwKind::Add => "add",
            EwKind::Sub => "sub",
            EwKind::Mul => "mul",
            EwKind::Div => "div",
            _ => unreachable!(),
        }
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        let a = ctx.parents[0].data();
        let b = ctx.parents[1].data();
        let g = ctx.out_grad;
        let ga = ctx.need[0].then(|| match self.kind {
            EwKind::Add | EwKind::Sub => g.to_vec(),
            EwKind::Mul => g.iter().zip(b).map(|(g, b)| g * b).collect(),
            EwKind::Div => g.iter().zip(b).map(|(g, b)| g / sign_clamped(*b)).collect(),
            _ => unreachable!(),
        });
        let gb = ctx.need[1].then(|| match self.kind {
            EwKind::Add => g.to_vec(),
            EwKind::Sub => g.iter().map(|g| -g).collect(),
            EwKind::Mul => g.iter().zip(a).map(|(g, a)| g * a).collect(),
            EwKind::Div => g
                .iter()
                .zip(a.iter().zip(b))
                .map(|(g, (a, b))| {
                    let b = sign_clamped(*b);
                    -g * a / (b * b)
                })
                .collect(),
            _ => unreachable!(),
        });
        vec![ga, gb]
    }
}

// ── scalar right-hand side ───────────────────────────────────────────

struct ScalarOp {
    kind: EwKind,
    scalar: f64,
}

impl TapeOp for ScalarOp {
    fn name(&self) -> &'static str {
        "scalar-ew"
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        let g = ctx.out_grad;
        let ga = ctx.need[0].then(|| match self.kind {
            EwKind::Add | EwKind::Sub => g.to_vec(),
            EwKind::Mul => g.iter().map(|g| g * self.scalar).collect(),
            EwKind::Div => {
                let d = sign_clamped(self.scalar);
                g.iter().map(|g| g / d).collect()
            }
            _ => unreachable!(),
        });
        vec![ga]
    }
}

// ── unary elementwise ────────────────────────────────────────────────

enum UnaryKind {
    Exp,
    Log,
    Neg,
    Clamp { lo: f64, hi: f64 },
    Sigmoid,
    Tanh,
    LeakyRelu { alpha: f64 },
}

struct UnaryOp {
    kind: UnaryKind,
}

impl TapeOp for UnaryOp {
    fn name(&self) -> &'static str {
        match self.kind {
            UnaryKind::Exp => "exp",
            UnaryKind::Log => "log",
            UnaryKind::Neg => "neg",
            UnaryKind::Clamp { .. } => "clamp",
            UnaryKind::Sigmoid => "sigmoid",
            UnaryKind::Tanh => "tanh",
            UnaryKind::LeakyRelu { .. } => "leaky_relu",
        }
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        if !ctx.need[0] {
            return vec![None];
        }
        let x = ctx.parents[0].data();
        let y = ctx.out.data();
        let g = ctx.out_grad;
        let grad = match &self.kind {
            UnaryKind::Exp => g.iter().zip(y).map(|(g, y)| g * y).collect(),
            UnaryKind::Log => g
                .iter()
                .zip(x)
                .map(|(g, x)| g / x.max(EPS_NUM))
                .collect(),
            UnaryKind::Neg => g.iter().map(|g| -g).collect(),
            UnaryKind::Clamp { lo, hi } => g
                .iter()
                .zip(x)
                .map(|(g, x)| if *x >= *lo && *x <= *hi { *g } else { 0.0 })
                .collect(),
            UnaryKind::Sigmoid => g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect(),
            UnaryKind::Tanh => g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect(),
            UnaryKind::LeakyRelu { alpha } => g
                .iter()
                .zip(x)
                .map(|(g, x)| if *x >= 0.0 { *g } else { g * alpha })
                .collect(),
        };
        vec![Some(grad)]
    }
}

// ── reductions ───────────────────────────────────────────────────────

struct ReduceOp {
    kind: ReduceKind,
    /// Row-major strides of the input.
    in_strides: Vec<usize>,
    /// Output stride per input axis; 0 for reduced axes. Empty for full
    /// reductions (everything maps to slot 0).
    axis_out_strides: Vec<usize>,
    /// For max: per output slot, the flat input index the gradient routes to.
    argmax: Vec<usize>,
    count: usize,
}

impl ReduceOp {
    fn map_index(&self, flat: usize) -> usize {
        if self.axis_out_strides.is_empty() {
            return 0;
        }
        let mut rem = flat;
        let mut out = 0usize;
        for (stride, out_stride) in self.in_strides.iter().zip(&self.axis_out_strides) {
            out += (rem / stride) * out_stride;
            rem %= stride;
        }
        out
    }
}

impl TapeOp for ReduceOp {
    fn name(&self) -> &'static str {
        match self.kind {
            ReduceKind::Sum => "sum",
            ReduceKind::Mean => "mean",
            ReduceKind::Max => "max",
        }
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        if !ctx.need[0] {
            return vec![None];
        }
        let g = ctx.out_grad;
        let n = ctx.parents[0].len();
        let grad = match self.kind {
            ReduceKind::Sum => {
                let mut grad = vec![0.0; n];
                for (i, slot) in grad.iter_mut().enumerate() {
                    *slot = g[self.map_index(i)];
                }
                grad
            }
            ReduceKind::Mean => {
                let scale = 1.0 / self.count as f64;
                let mut grad = vec![0.0; n];
                for (i, slot) in grad.iter_mut().enumerate() {
                    *slot = g[self.map_index(i)] * scale;
                }
                grad
            }
            ReduceKind::Max => {
                let mut grad = vec![0.0; n];
                for (out_slot, &src) in self.argmax.iter().enumerate() {
                    grad[src] += g[out_slot];
                }
                grad
            }
        };
        vec![Some(grad)]
    }
}

// ── shape ops ────────────────────────────────────────────────────────

struct ReshapeOp;

impl TapeOp for ReshapeOp {
    fn name(&self) -> &'static str {
        "reshape"
    }
    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        vec![ctx.need[0].then(|| ctx.out_grad.to_vec())]
    }
}

struct ConcatOp {
    axis: usize,
    out_shape: Vec<usize>,
    part_extents: Vec<usize>,
}

impl ConcatOp {
    /// (outer, inner) block structure around `axis`.
    fn blocks(&self) -> (usize, usize) {
        let outer: usize = self.out_shape[..self.axis].iter().product();
        let inner: usize = self.out_shape[self.axis + 1..].iter().product();
        (outer, inner)
    }
}

impl TapeOp for ConcatOp {
    fn name(&self) -> &'static str {
        "concat"
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        let (outer, inner) = self.blocks();
        let total_axis: usize = self.part_extents.iter().sum();
        let mut grads: Vec<Option<Vec<f64>>> = ctx
            .need
            .iter()
            .zip(ctx.parents)
            .map(|(need, p)| need.then(|| vec![0.0; p.len()]))
            .collect();
        let mut offset = 0usize;
        for (part, &extent) in self.part_extents.iter().enumerate() {
            if let Some(grad) = grads[part].as_mut() {
                for o in 0..outer {
                    for e in 0..extent {
                        let src = (o * total_axis + offset + e) * inner;
                        let dst = (o * extent + e) * inner;
                        grad[dst..dst + inner]
                            .copy_from_slice(&ctx.out_grad[src..src + inner]);
                    }
                }
            }
            offset += extent;
        }
        grads
    }
}

struct NarrowOp {
    axis: usize,
    start: usize,
    in_shape: Vec<usize>,
    out_extent: usize,
}

impl TapeOp for NarrowOp {
    fn name(&self) -> &'static str {
        "narrow"
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        if !ctx.need[0] {
            return vec![None];
        }
        let outer: usize = self.in_shape[..self.axis].iter().product();
        let inner: usize = self.in_shape[self.axis + 1..].iter().product();
        let in_extent = self.in_shape[self.axis];
        let mut grad = vec![0.0; ctx.parents[0].len()];
        for o in 0..outer {
            for e in 0..self.out_extent {
                let dst = (o * in_extent + self.start + e) * inner;
                let src = (o * self.out_extent + e) * inner;
                grad[dst..dst + inner].copy_from_slice(&ctx.out_grad[src..src + inner]);
            }
        }
        vec![Some(grad)]
    }
}

// ── Graph methods ────────────────────────────────────────────────────

impl Graph {
    /// Generic elementwise entry point; see the convenience wrappers below.
    pub fn elementwise(&mut self, kind: EwKind, a: Tensor, b: Operand) -> Result<Tensor> {
        match (kind, b) {
            (EwKind::Add | EwKind::Sub | EwKind::Mul | EwKind::Div, Operand::Tensor(b)) => {
                self.binary(kind, a, b)
            }
            (EwKind::Add | EwKind::Sub | EwKind::Mul | EwKind::Div, Operand::Scalar(s)) => {
                self.scalar_rhs(kind, a, s)
            }
            (EwKind::Exp, _) => Ok(self.unary(UnaryKind::Exp, a)),
            (EwKind::Log, _) => Ok(self.unary(UnaryKind::Log, a)),
            (EwKind::Neg, _) => Ok(self.unary(UnaryKind::Neg, a)),
            (EwKind::Clamp, Operand::Scalar(lo)) => Ok(self.clamp(a, lo, f64::INFINITY)),
            _ => Err(Error::Validation(format!(
                "elementwise {kind:?} needs a right-hand operand"
            ))),
        }
    }

    fn binary(&mut self, kind: EwKind, a: Tensor, b: Tensor) -> Result<Tensor> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op: match kind {
                    EwKind::Add => "add",
                    EwKind::Sub => "sub",
                    EwKind::Mul => "mul",
                    EwKind::Div => "div",
                    _ => "elementwise",
                },
                left: sa,
                right: sb,
            });
        }
        let out: Vec<f64> = {
            let da = self.data(a).data();
            let db = self.data(b).data();
            match kind {
                EwKind::Add => da.iter().zip(db).map(|(a, b)| a + b).collect(),
                EwKind::Sub => da.iter().zip(db).map(|(a, b)| a - b).collect(),
                EwKind::Mul => da.iter().zip(db).map(|(a, b)| a * b).collect(),
                EwKind::Div => da
                    .iter()
                    .zip(db)
                    .map(|(a, b)| a / sign_clamped(*b))
                    .collect(),
                _ => unreachable!(),
            }
        };
        let data = NdArray::new(sa, out).expect("shape preserved");
        Ok(self.record(data, vec![a, b], Box::new(BinaryOp { kind })))
    }

    fn scalar_rhs(&mut self, kind: EwKind, a: Tensor, s: f64) -> Result<Tensor> {
        let out = match kind {
            EwKind::Add => self.data(a).map(|v| v + s),
            EwKind::Sub => self.data(a).map(|v| v - s),
            EwKind::Mul => self.data(a).map(|v| v * s),
            EwKind::Div => {
                let d = sign_clamped(s);
                self.data(a).map(|v| v / d)
            }
            _ => unreachable!(),
        };
        Ok(self.record(out, vec![a], Box::new(ScalarOp { kind, scalar: s })))
    }

    fn unary(&mut self, kind: UnaryKind, a: Tensor) -> Tensor {
        let out = match &kind {
            UnaryKind::Exp => self.data(a).map(f64::exp),
            UnaryKind::Log => self.data(a).map(|v| v.max(EPS_NUM).ln()),
            UnaryKind::Neg => self.data(a).map(|v| -v),
            UnaryKind::Clamp { lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                self.data(a).map(|v| v.clamp(lo, hi))
            }
            UnaryKind::Sigmoid => self.data(a).map(|v| 1.0 / (1.0 + (-v).exp())),
            UnaryKind::Tanh => self.data(a).map(f64::tanh),
            UnaryKind::LeakyRelu { alpha } => {
                let alpha = *alpha;
                self.data(a).map(|v| if v >= 0.0 { v } else { alpha * v })
            }
        };
        self.record(out, vec![a], Box::new(UnaryOp { kind }))
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.binary(EwKind::Add, a, b)
    }
    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.binary(EwKind::Sub, a, b)
    }
    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.binary(EwKind::Mul, a, b)
    }
    pub fn div(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        self.binary(EwKind::Div, a, b)
    }
    pub fn add_scalar(&mut self, a: Tensor, s: f64) -> Tensor {
        self.scalar_rhs(EwKind::Add, a, s).expect("scalar add")
    }
    pub fn mul_scalar(&mut self, a: Tensor, s: f64) -> Tensor {
        self.scalar_rhs(EwKind::Mul, a, s).expect("scalar mul")
    }
    pub fn exp(&mut self, a: Tensor) -> Tensor {
        self.unary(UnaryKind::Exp, a)
    }
    /// Natural log with the input clamped at [`EPS_NUM`].
    pub fn log(&mut self, a: Tensor) -> Tensor {
        self.unary(UnaryKind::Log, a)
    }
    pub fn neg(&mut self, a: Tensor) -> Tensor {
        self.unary(UnaryKind::Neg, a)
    }
    pub fn clamp(&mut self, a: Tensor, lo: f64, hi: f64) -> Tensor {
        self.unary(UnaryKind::Clamp { lo, hi }, a)
    }
    pub fn sigmoid(&mut self, a: Tensor) -> Tensor {
        self.unary(UnaryKind::Sigmoid, a)
    }
    pub fn tanh(&mut self, a: Tensor) -> Tensor {
        self.unary(UnaryKind::Tanh, a)
    }
    pub fn leaky_relu(&mut self, a: Tensor, alpha: f64) -> Tensor {
        self.unary(UnaryKind::LeakyRelu { alpha }, a)
    }
    /// `1 - a`, a common factor in the losses.
    pub fn one_minus(&mut self, a: Tensor) -> Tensor {
        let n = self.neg(a);
        self.add_scalar(n, 1.0)
    }

    /// Reduce over `axes` (`None` reduces everything to a scalar).
    ///
    /// Reduced axes are dropped from the shape. `Max` routes its gradient to
    /// the first maximal element of each reduced slice.
    pub fn reduce(&mut self, kind: ReduceKind, a: Tensor, axes: Option<&[usize]>) -> Result<Tensor> {
        let in_shape = self.shape(a).to_vec();
        let rank = in_shape.len();
        let keep = match axes {
            None => vec![false; rank],
            Some(axes) => {
                let mut keep = vec![true; rank];
                for &axis in axes {
                    if axis >= rank {
                        return Err(Error::InvalidAxis { axis, rank });
                    }
                    keep[axis] = false;
                }
                keep
            }
        };
        let out_shape: Vec<usize> = in_shape
            .iter()
            .zip(&keep)
            .filter_map(|(d, k)| k.then_some(*d))
            .collect();
        let out_len: usize = out_shape.iter().product();
        let count = self.data(a).len() / out_len.max(1);
        let full = keep.iter().all(|k| !k);
        let axis_out_strides = if full {
            Vec::new()
        } else {
            let out_strides = strides_of(&out_shape);
            let mut per_axis = vec![0usize; rank];
            let mut oi = 0;
            for (axis, keep_axis) in keep.iter().enumerate() {
                if *keep_axis {
                    per_axis[axis] = out_strides[oi];
                    oi += 1;
                }
            }
            per_axis
        };
        let op = ReduceOp {
            kind,
            in_strides: strides_of(&in_shape),
            axis_out_strides,
            argmax: Vec::new(),
            count,
        };

        let input = self.data(a).data();
        let mut out = match kind {
            ReduceKind::Max => vec![f64::NEG_INFINITY; out_len],
            _ => vec![0.0; out_len],
        };
        let mut argmax = vec![usize::MAX; if kind == ReduceKind::Max { out_len } else { 0 }];
        for (i, &v) in input.iter().enumerate() {
            let slot = op.map_index(i);
            match kind {
                ReduceKind::Sum | ReduceKind::Mean => out[slot] += v,
                ReduceKind::Max => {
                    // Strict > keeps the first maximal element on ties.
                    if v > out[slot] {
                        out[slot] = v;
                        argmax[slot] = i;
                    }
                }
            }
        }
        if kind == ReduceKind::Mean {
            for v in &mut out {
                *v /= count as f64;
            }
        }
        let mut op = op;
        op.argmax = argmax;
        let data = NdArray::new(out_shape, out).expect("reduce shape");
        Ok(self.record(data, vec![a], Box::new(op)))
    }

    pub fn sum(&mut self, a: Tensor) -> Tensor {
        self.reduce(ReduceKind::Sum, a, None).expect("full sum")
    }
    pub fn mean(&mut self, a: Tensor) -> Tensor {
        self.reduce(ReduceKind::Mean, a, None).expect("full mean")
    }
    pub fn max(&mut self, a: Tensor) -> Tensor {
        self.reduce(ReduceKind::Max, a, None).expect("full max")
    }

    pub fn reshape(&mut self, a: Tensor, shape: Vec<usize>) -> Result<Tensor> {
        let expect: usize = shape.iter().product();
        if expect != self.data(a).len() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                left: self.shape(a).to_vec(),
                right: shape,
            });
        }
        let data = NdArray::new(shape, self.data(a).data().to_vec()).expect("reshape");
        Ok(self.record(data, vec![a], Box::new(ReshapeOp)))
    }

    /// Concatenate along `axis`; all other extents must agree.
    pub fn concat(&mut self, axis: usize, parts: &[Tensor]) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(Error::EmptySequence);
        }
        let first = self.shape(parts[0]).to_vec();
        let rank = first.len();
        if axis >= rank {
            return Err(Error::InvalidAxis { axis, rank });
        }
        let mut part_extents = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.len() != rank
                || s.iter()
                    .zip(&first)
                    .enumerate()
                    .any(|(ax, (l, r))| ax != axis && l != r)
            {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    left: first,
                    right: s.to_vec(),
                });
            }
            part_extents.push(s[axis]);
        }
        let mut out_shape = first;
        out_shape[axis] = part_extents.iter().sum();
        let outer: usize = out_shape[..axis].iter().product();
        let inner: usize = out_shape[axis + 1..].iter().product();
        let total_axis = out_shape[axis];
        let mut out = vec![0.0; outer * total_axis * inner];
        let mut offset = 0usize;
        for (&p, &extent) in parts.iter().zip(&part_extents) {
            let src = self.data(p).data();
            for o in 0..outer {
                for e in 0..extent {
                    let dst = (o * total_axis + offset + e) * inner;
                    let s = (o * extent + e) * inner;
                    out[dst..dst + inner].copy_from_slice(&src[s..s + inner]);
                }
            }
            offset += extent;
        }
        let data = NdArray::new(out_shape.clone(), out).expect("concat shape");
        Ok(self.record(
            data,
            parts.to_vec(),
            Box::new(ConcatOp {
                axis,
                out_shape,
                part_extents,
            }),
        ))
    }

    /// Slice `len` entries along `axis` starting at `start`.
    pub fn narrow(&mut self, a: Tensor, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let in_shape = self.shape(a).to_vec();
        let rank = in_shape.len();
        if axis >= rank {
            return Err(Error::InvalidAxis { axis, rank });
        }
        if start + len > in_shape[axis] {
            return Err(Error::Validation(format!(
                "narrow [{start}, {start}+{len}) out of range for extent {}",
                in_shape[axis]
            )));
        }
        let outer: usize = in_shape[..axis].iter().product();
        let inner: usize = in_shape[axis + 1..].iter().product();
        let in_extent = in_shape[axis];
        let mut out = vec![0.0; outer * len * inner];
        let src = self.data(a).data();
        for o in 0..outer {
            for e in 0..len {
                let s = (o * in_extent + start + e) * inner;
                let dst = (o * len + e) * inner;
                out[dst..dst + inner].copy_from_slice(&src[s..s + inner]);
            }
        }
        let mut out_shape = in_shape.clone();
        out_shape[axis] = len;
        let data = NdArray::new(out_shape, out).expect("narrow shape");
        Ok(self.record(
            data,
            vec![a],
            Box::new(NarrowOp {
                axis,
                start,
                in_shape,
                out_extent: len,
            }),
        ))
    }
}
