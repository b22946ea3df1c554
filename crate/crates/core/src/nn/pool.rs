//! Max pooling and nearest-neighbor up-sampling.

use crate::tensor::{BackwardCtx, Graph, NdArray, TapeOp, Tensor};
use crate::{Error, Result};

/// Gradient routing for max pooling: per output slot, the flat input index of
/// the first maximal element in scan order.
struct MaxPoolOp {
    argmax: Vec<usize>,
    in_len: usize,
}

impl TapeOp for MaxPoolOp {
    fn name(&self) -> &'static str {
        "maxpool"
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        if !ctx.need[0] {
            return vec![None];
        }
        let mut gx = vec![0.0; self.in_len];
        for (slot, &src) in self.argmax.iter().enumerate() {
            gx[src] += ctx.out_grad[slot];
        }
        vec![Some(gx)]
    }
}

struct UpsampleOp {
    /// Output index → source input index.
    src: Vec<usize>,
    in_len: usize,
}

impl TapeOp for UpsampleOp {
    fn name(&self) -> &'static str {
        "upsample"
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        if !ctx.need[0] {
            return vec![None];
        }
        let mut gx = vec![0.0; self.in_len];
        for (o, &s) in self.src.iter().enumerate() {
            gx[s] += ctx.out_grad[o];
        }
        vec![Some(gx)]
    }
}

fn check_divisible(what: &'static str, axis: usize, extent: usize, window: usize) -> Result<()> {
    if window == 0 || extent % window != 0 {
        return Err(Error::NotDivisible {
            what,
            axis,
            extent,
            divisor: window,
        });
    }
    Ok(())
}

impl Graph {
    /// Max pooling over non-overlapping `window` regions of `x [N,C,H,W]`.
    pub fn maxpool2d(&mut self, x: Tensor, window: (usize, usize)) -> Result<Tensor> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 4 {
            return Err(Error::ShapeMismatch {
                op: "maxpool2d",
                left: xs,
                right: vec![],
            });
        }
        let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        check_divisible("maxpool2d", 2, h, window.0)?;
        check_divisible("maxpool2d", 3, w, window.1)?;
        let (oh, ow) = (h / window.0, w / window.1);
        let input = self.data(x).data();
        let mut out = vec![f64::NEG_INFINITY; n * c * oh * ow];
        let mut argmax = vec![usize::MAX; out.len()];
        for plane in 0..n * c {
            let x_plane = &input[plane * h * w..][..h * w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let slot = (plane * oh + oy) * ow + ox;
                    for ky in 0..window.0 {
                        let iy = oy * window.0 + ky;
                        for kx in 0..window.1 {
                            let ix = ox * window.1 + kx;
                            let v = x_plane[iy * w + ix];
                            if v > out[slot] {
                                out[slot] = v;
                                argmax[slot] = plane * h * w + iy * w + ix;
                            }
                        }
                    }
                }
            }
        }
        let data = NdArray::new(vec![n, c, oh, ow], out).expect("pool shape");
        let in_len = input.len();
        Ok(self.record(data, vec![x], Box::new(MaxPoolOp { argmax, in_len })))
    }

    /// Max pooling over `window` regions of `x [N,C,D,H,W]`.
    pub fn maxpool3d(&mut self, x: Tensor, window: (usize, usize, usize)) -> Result<Tensor> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 5 {
            return Err(Error::ShapeMismatch {
                op: "maxpool3d",
                left: xs,
                right: vec![],
            });
        }
        let (n, c, d, h, w) = (xs[0], xs[1], xs[2], xs[3], xs[4]);
        check_divisible("maxpool3d", 2, d, window.0)?;
        check_divisible("maxpool3d", 3, h, window.1)?;
        check_divisible("maxpool3d", 4, w, window.2)?;
        let (od, oh, ow) = (d / window.0, h / window.1, w / window.2);
        let input = self.data(x).data();
        let vol = d * h * w;
        let mut out = vec![f64::NEG_INFINITY; n * c * od * oh * ow];
        let mut argmax = vec![usize::MAX; out.len()];
        for block in 0..n * c {
            let x_block = &input[block * vol..][..vol];
            for oz in 0..od {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let slot = ((block * od + oz) * oh + oy) * ow + ox;
                        for kz in 0..window.0 {
                            let iz = oz * window.0 + kz;
                            for ky in 0..window.1 {
                                let iy = oy * window.1 + ky;
                                for kx in 0..window.2 {
                                    let ix = ox * window.2 + kx;
                                    let v = x_block[(iz * h + iy) * w + ix];
                                    if v > out[slot] {
                                        out[slot] = v;
                                        argmax[slot] = block * vol + (iz * h + iy) * w + ix;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let data = NdArray::new(vec![n, c, od, oh, ow], out).expect("pool shape");
        let in_len = input.len();
        Ok(self.record(data, vec![x], Box::new(MaxPoolOp { argmax, in_len })))
    }

    /// Nearest-neighbor up-sampling of `x [N,C,H,W]` by `factor` per axis.
    pub fn upsample2d(&mut self, x: Tensor, factor: usize) -> Result<Tensor> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 4 {
            return Err(Error::ShapeMismatch {
                op: "upsample2d",
                left: xs,
                right: vec![],
            });
        }
        let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let (oh, ow) = (h * factor, w * factor);
        let input = self.data(x).data();
        let mut out = vec![0.0; n * c * oh * ow];
        let mut src = vec![0usize; out.len()];
        for plane in 0..n * c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let s = plane * h * w + (oy / factor) * w + ox / factor;
                    let o = (plane * oh + oy) * ow + ox;
                    out[o] = input[s];
                    src[o] = s;
                }
            }
        }
        let data = NdArray::new(vec![n, c, oh, ow], out).expect("upsample shape");
        let in_len = input.len();
        Ok(self.record(data, vec![x], Box::new(UpsampleOp { src, in_len })))
    }

    /// Nearest-neighbor up-sampling of `x [N,C,D,H,W]` by `factor` per axis.
    pub fn upsample3d(&mut self, x: Tensor, factor: usize) -> Result<Tensor> {
        let xs = self.shape(x).to_vec();
        if xs.len() != 5 {
            return Err(Error::ShapeMismatch {
                op: "upsample3d",
                left: xs,
                right: vec![],
            });
        }
        let (n, c, d, h, w) = (xs[0], xs[1], xs[2], xs[3], xs[4]);
        let (od, oh, ow) = (d * factor, h * factor, w * factor);
        let input = self.data(x).data();
        let mut out = vec![0.0; n * c * od * oh * ow];
        let mut src = vec![0usize; out.len()];
        let vol = d * h * w;
        for block in 0..n * c {
            for oz in 0..od {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let s = block * vol
                            + ((oz / factor) * h + oy / factor) * w
                            + ox / factor;
                        let o = ((block * od + oz) * oh + oy) * ow + ox;
                        out[o] = input[s];
                        src[o] = s;
                    }
                }
            }
        }
        let data = NdArray::new(vec![n, c, od, oh, ow], out).expect("upsample shape");
        let in_len = input.len();
        Ok(self.record(data, vec![x], Box::new(UpsampleOp { src, in_len })))
    }
}
