//! Convolution tape operations and parameter-owning layers.

use super::kernels::{
    conv2d_forward, conv2d_grad_input, conv2d_grad_kernel, conv3d_forward, conv3d_grad_input,
    conv3d_grad_kernel, Conv2dDims, Conv3dDims,
};
use super::{conv_out_extent, init, Padding};
use crate::tensor::{BackwardCtx, Graph, NdArray, ParamId, ParamSet, Session, TapeOp, Tensor};
use crate::{Error, Result};
use rand_chacha::ChaCha8Rng;

struct Conv2dOp {
    dims: Conv2dDims,
}

impl TapeOp for Conv2dOp {
    fn name(&self) -> &'static str {
        "conv2d"
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        let x = ctx.parents[0].data();
        let k = ctx.parents[1].data();
        let gx = ctx.need[0].then(|| conv2d_grad_input(ctx.out_grad, k, &self.dims));
        let gk = ctx.need[1].then(|| conv2d_grad_kernel(ctx.out_grad, x, &self.dims));
        vec![gx, gk]
    }
}

struct Conv3dOp {
    dims: Conv3dDims,
}

impl TapeOp for Conv3dOp {
    fn name(&self) -> &'static str {
        "conv3d"
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        let x = ctx.parents[0].data();
        let k = ctx.parents[1].data();
        let gx = ctx.need[0].then(|| conv3d_grad_input(ctx.out_grad, k, &self.dims));
        let gk = ctx.need[1].then(|| conv3d_grad_kernel(ctx.out_grad, x, &self.dims));
        vec![gx, gk]
    }
}

/// Per-channel bias broadcast over batch and spatial axes.
struct ChanBiasOp {
    channels: usize,
    plane: usize,
}

impl TapeOp for ChanBiasOp {
    fn name(&self) -> &'static str {
        "chan_bias"
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        let gx = ctx.need[0].then(|| ctx.out_grad.to_vec());
        let gb = ctx.need[1].then(|| {
            let mut gb = vec![0.0; self.channels];
            for (slot, chunk) in ctx.out_grad.chunks_exact(self.plane).enumerate() {
                let c = slot % self.channels;
                gb[c] += chunk.iter().sum::<f64>();
            }
            gb
        });
        vec![gx, gb]
    }
}

impl Graph {
    /// 2D convolution: `x [N,Ci,H,W]` with kernel `[Co,Ci,kh,kw]`.
    pub fn conv2d(
        &mut self,
        x: Tensor,
        kernel: Tensor,
        padding: Padding,
        stride: (usize, usize),
    ) -> Result<Tensor> {
        let xs = self.shape(x).to_vec();
        let ks = self.shape(kernel).to_vec();
        if xs.len() != 4 || ks.len() != 4 {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                left: xs,
                right: ks,
            });
        }
        let (batch, c_in, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (c_out, kc_in, kh, kw) = (ks[0], ks[1], ks[2], ks[3]);
        if kc_in != c_in {
            return Err(Error::ShapeMismatch {
                op: "conv2d channels",
                left: xs,
                right: ks,
            });
        }
        let pad = (padding.pad(kh), padding.pad(kw));
        let oh = conv_out_extent(h, kh, pad.0, stride.0);
        let ow = conv_out_extent(w, kw, pad.1, stride.1);
        let (Some(oh), Some(ow)) = (oh, ow) else {
            return Err(Error::KernelTooLarge {
                kernel: ks,
                input: xs,
            });
        };
        let dims = Conv2dDims {
            batch,
            c_in,
            c_out,
            h,
            w,
            kh,
            kw,
            oh,
            ow,
            stride,
            pad,
        };
        let out = conv2d_forward(self.data(x).data(), self.data(kernel).data(), &dims);
        let data = NdArray::new(vec![batch, c_out, oh, ow], out).expect("conv2d shape");
        Ok(self.record(data, vec![x, kernel], Box::new(Conv2dOp { dims })))
    }

    /// 3D convolution: `x [N,Ci,D,H,W]` with kernel `[Co,Ci,kd,kh,kw]`.
    pub fn conv3d(
        &mut self,
        x: Tensor,
        kernel: Tensor,
        padding: Padding,
        stride: (usize, usize, usize),
    ) -> Result<Tensor> {
        let xs = self.shape(x).to_vec();
        let ks = self.shape(kernel).to_vec();
        if xs.len() != 5 || ks.len() != 5 || ks[1] != xs[1] {
            return Err(Error::ShapeMismatch {
                op: "conv3d",
                left: xs,
                right: ks,
            });
        }
        let (batch, c_in, d, h, w) = (xs[0], xs[1], xs[2], xs[3], xs[4]);
        let (c_out, kd, kh, kw) = (ks[0], ks[2], ks[3], ks[4]);
        let pad = (padding.pad(kd), padding.pad(kh), padding.pad(kw));
        let od = conv_out_extent(d, kd, pad.0, stride.0);
        let oh = conv_out_extent(h, kh, pad.1, stride.1);
        let ow = conv_out_extent(w, kw, pad.2, stride.2);
        let (Some(od), Some(oh), Some(ow)) = (od, oh, ow) else {
            return Err(Error::KernelTooLarge {
                kernel: ks,
                input: xs,
            });
        };
        let dims = Conv3dDims {
            batch,
            c_in,
            c_out,
            d,
            h,
            w,
            kd,
            kh,
            kw,
            od,
            oh,
            ow,
            stride,
            pad,
        };
        let out = conv3d_forward(self.data(x).data(), self.data(kernel).data(), &dims);
        let data = NdArray::new(vec![batch, c_out, od, oh, ow], out).expect("conv3d shape");
        Ok(self.record(data, vec![x, kernel], Box::new(Conv3dOp { dims })))
    }

    /// Add a per-channel bias `b [C]` to `x [N,C,spatial...]`.
    pub fn add_chan_bias(&mut self, x: Tensor, bias: Tensor) -> Result<Tensor> {
        let xs = self.shape(x).to_vec();
        let bs = self.shape(bias).to_vec();
        if xs.len() < 2 || bs.len() != 1 || bs[0] != xs[1] {
            return Err(Error::ShapeMismatch {
                op: "add_chan_bias",
                left: xs,
                right: bs,
            });
        }
        let channels = xs[1];
        let plane: usize = xs[2..].iter().product();
        let b = self.data(bias).data().to_vec();
        let mut out = self.data(x).data().to_vec();
        for (slot, chunk) in out.chunks_exact_mut(plane).enumerate() {
            let bv = b[slot % channels];
            for v in chunk {
                *v += bv;
            }
        }
        let data = NdArray::new(xs, out).expect("bias shape");
        Ok(self.record(data, vec![x, bias], Box::new(ChanBiasOp { channels, plane })))
    }
}

/// A 2D convolution layer with bias.
#[derive(Debug, Clone)]
pub struct Conv2dLayer {
    pub kernel: ParamId,
    pub bias: ParamId,
    pub padding: Padding,
    pub stride: (usize, usize),
}

impl Conv2dLayer {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        padding: Padding,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let kernel = init::glorot_uniform(vec![out_ch, in_ch, k, k], in_ch * k * k, out_ch * k * k, rng);
        Conv2dLayer {
            kernel: params.add(format!("{name}.kernel"), kernel),
            bias: params.add(format!("{name}.bias"), NdArray::zeros(vec![out_ch])),
            padding,
            stride: (1, 1),
        }
    }

    pub fn apply(&self, sess: &mut Session<'_>, x: Tensor) -> Result<Tensor> {
        let k = sess.param(self.kernel);
        let b = sess.param(self.bias);
        let y = sess.conv2d(x, k, self.padding, self.stride)?;
        sess.add_chan_bias(y, b)
    }
}

/// A 3D convolution layer with bias.
#[derive(Debug, Clone)]
pub struct Conv3dLayer {
    pub kernel: ParamId,
    pub bias: ParamId,
    pub padding: Padding,
    pub stride: (usize, usize, usize),
}

impl Conv3dLayer {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        padding: Padding,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let fan = k * k * k;
        let kernel =
            init::glorot_uniform(vec![out_ch, in_ch, k, k, k], in_ch * fan, out_ch * fan, rng);
        Conv3dLayer {
            kernel: params.add(format!("{name}.kernel"), kernel),
            bias: params.add(format!("{name}.bias"), NdArray::zeros(vec![out_ch])),
            padding,
            stride: (1, 1, 1),
        }
    }

    pub fn apply(&self, sess: &mut Session<'_>, x: Tensor) -> Result<Tensor> {
        let k = sess.param(self.kernel);
        let b = sess.param(self.bias);
        let y = sess.conv3d(x, k, self.padding, self.stride)?;
        sess.add_chan_bias(y, b)
    }
}
