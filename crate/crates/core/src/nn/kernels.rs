//! Raw convolution loops, shared by the tape operations.
//!
//! Every output slot (one `[spatial]` plane per `(batch, channel)` pair) is
//! computed independently with a fixed-order inner loop, so results are
//! bit-identical regardless of how rayon schedules the slots.

use rayon::prelude::*;

/// Valid output range along one axis for a fixed kernel offset `k`, so that
/// the input index `o*stride + k - pad_lo` stays within `[0, input)`.
fn out_range(
    out_extent: usize,
    input: usize,
    stride: usize,
    k: usize,
    pad_lo: usize,
) -> (usize, usize) {
    let lo = if k >= pad_lo {
        0
    } else {
        (pad_lo - k).div_ceil(stride)
    };
    // largest o with o*stride + k - pad_lo <= input - 1
    let hi = if input + pad_lo < k + 1 {
        0
    } else {
        (((input - 1 + pad_lo - k) / stride) + 1).min(out_extent)
    };
    (lo.min(hi), hi)
}

pub struct Conv2dDims {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub oh: usize,
    pub ow: usize,
    pub stride: (usize, usize),
    pub pad: ((usize, usize), (usize, usize)),
}

pub fn conv2d_forward(x: &[f64], k: &[f64], d: &Conv2dDims) -> Vec<f64> {
    let mut out = vec![0.0; d.batch * d.c_out * d.oh * d.ow];
    let (sy, sx) = d.stride;
    let (py, px) = (d.pad.0 .0, d.pad.1 .0);
    out.par_chunks_mut(d.oh * d.ow)
        .enumerate()
        .for_each(|(slot, out_plane)| {
            let n = slot / d.c_out;
            let co = slot % d.c_out;
            for ci in 0..d.c_in {
                let x_plane = &x[(n * d.c_in + ci) * d.h * d.w..][..d.h * d.w];
                let k_plane = &k[(co * d.c_in + ci) * d.kh * d.kw..][..d.kh * d.kw];
                for ky in 0..d.kh {
                    let (oy_lo, oy_hi) = out_range(d.oh, d.h, sy, ky, py);
                    for kx in 0..d.kw {
                        let weight = k_plane[ky * d.kw + kx];
                        let (ox_lo, ox_hi) = out_range(d.ow, d.w, sx, kx, px);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        for oy in oy_lo..oy_hi {
                            let iy = oy * sy + ky - py;
                            let xrow = &x_plane[iy * d.w..][..d.w];
                            let orow = &mut out_plane[oy * d.ow..][..d.ow];
                            if sx == 1 {
                                let ix0 = ox_lo + kx - px;
                                let len = ox_hi - ox_lo;
                                for (o, xv) in orow[ox_lo..ox_hi]
                                    .iter_mut()
                                    .zip(&xrow[ix0..ix0 + len])
                                {
                                    *o += weight * xv;
                                }
                            } else {
                                for ox in ox_lo..ox_hi {
                                    orow[ox] += weight * xrow[ox * sx + kx - px];
                                }
                            }
                        }
                    }
                }
            }
        });
    out
}

pub fn conv2d_grad_input(go: &[f64], k: &[f64], d: &Conv2dDims) -> Vec<f64> {
    let mut gx = vec![0.0; d.batch * d.c_in * d.h * d.w];
    let (sy, sx) = d.stride;
    let (py, px) = (d.pad.0 .0, d.pad.1 .0);
    gx.par_chunks_mut(d.h * d.w)
        .enumerate()
        .for_each(|(slot, gx_plane)| {
            let n = slot / d.c_in;
            let ci = slot % d.c_in;
            for co in 0..d.c_out {
                let go_plane = &go[(n * d.c_out + co) * d.oh * d.ow..][..d.oh * d.ow];
                let k_plane = &k[(co * d.c_in + ci) * d.kh * d.kw..][..d.kh * d.kw];
                for ky in 0..d.kh {
                    let (oy_lo, oy_hi) = out_range(d.oh, d.h, sy, ky, py);
                    for kx in 0..d.kw {
                        let weight = k_plane[ky * d.kw + kx];
                        let (ox_lo, ox_hi) = out_range(d.ow, d.w, sx, kx, px);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        for oy in oy_lo..oy_hi {
                            let iy = oy * sy + ky - py;
                            let gxrow = &mut gx_plane[iy * d.w..][..d.w];
                            let gorow = &go_plane[oy * d.ow..][..d.ow];
                            if sx == 1 {
                                let ix0 = ox_lo + kx - px;
                                let len = ox_hi - ox_lo;
                                for (gx_v, go_v) in gxrow[ix0..ix0 + len]
                                    .iter_mut()
                                    .zip(&gorow[ox_lo..ox_hi])
                                {
                                    *gx_v += weight * go_v;
                                }
                            } else {
                                for ox in ox_lo..ox_hi {
                                    gxrow[ox * sx + kx - px] += weight * gorow[ox];
                                }
                            }
                        }
                    }
                }
            }
        });
    gx
}

pub fn conv2d_grad_kernel(go: &[f64], x: &[f64], d: &Conv2dDims) -> Vec<f64> {
    let mut gk = vec![0.0; d.c_out * d.c_in * d.kh * d.kw];
    let (sy, sx) = d.stride;
    let (py, px) = (d.pad.0 .0, d.pad.1 .0);
    gk.par_chunks_mut(d.kh * d.kw)
        .enumerate()
        .for_each(|(slot, gk_plane)| {
            let co = slot / d.c_in;
            let ci = slot % d.c_in;
            for ky in 0..d.kh {
                let (oy_lo, oy_hi) = out_range(d.oh, d.h, sy, ky, py);
                for kx in 0..d.kw {
                    let (ox_lo, ox_hi) = out_range(d.ow, d.w, sx, kx, px);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    let mut acc = 0.0;
                    for n in 0..d.batch {
                        let x_plane = &x[(n * d.c_in + ci) * d.h * d.w..][..d.h * d.w];
                        let go_plane =
                            &go[(n * d.c_out + co) * d.oh * d.ow..][..d.oh * d.ow];
                        for oy in oy_lo..oy_hi {
                            let iy = oy * sy + ky - py;
                            let xrow = &x_plane[iy * d.w..][..d.w];
                            let gorow = &go_plane[oy * d.ow..][..d.ow];
                            if sx == 1 {
                                let ix0 = ox_lo + kx - px;
                                let len = ox_hi - ox_lo;
                                for (go_v, xv) in
                                    gorow[ox_lo..ox_hi].iter().zip(&xrow[ix0..ix0 + len])
                                {
                                    acc += go_v * xv;
                                }
                            } else {
                                for ox in ox_lo..ox_hi {
                                    acc += gorow[ox] * xrow[ox * sx + kx - px];
                                }
                            }
                        }
                    }
                    gk_plane[ky * d.kw + kx] = acc;
                }
            }
        });
    gk
}

pub struct Conv3dDims {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub d: usize,
    pub h: usize,
    pub w: usize,
    pub kd: usize,
    pub kh: usize,
    pub kw: usize,
    pub od: usize,
    pub oh: usize,
    pub ow: usize,
    pub stride: (usize, usize, usize),
    pub pad: ((usize, usize), (usize, usize), (usize, usize)),
}

pub fn conv3d_forward(x: &[f64], k: &[f64], m: &Conv3dDims) -> Vec<f64> {
    let mut out = vec![0.0; m.batch * m.c_out * m.od * m.oh * m.ow];
    let (sz, sy, sx) = m.stride;
    let (pz, py, px) = (m.pad.0 .0, m.pad.1 .0, m.pad.2 .0);
    let in_vol = m.d * m.h * m.w;
    let out_vol = m.od * m.oh * m.ow;
    let k_vol = m.kd * m.kh * m.kw;
    out.par_chunks_mut(out_vol)
        .enumerate()
        .for_each(|(slot, out_block)| {
            let n = slot / m.c_out;
            let co = slot % m.c_out;
            for ci in 0..m.c_in {
                let x_block = &x[(n * m.c_in + ci) * in_vol..][..in_vol];
                let k_block = &k[(co * m.c_in + ci) * k_vol..][..k_vol];
                for kz in 0..m.kd {
                    let (oz_lo, oz_hi) = out_range(m.od, m.d, sz, kz, pz);
                    for ky in 0..m.kh {
                        let (oy_lo, oy_hi) = out_range(m.oh, m.h, sy, ky, py);
                        for kx in 0..m.kw {
                            let weight = k_block[(kz * m.kh + ky) * m.kw + kx];
                            let (ox_lo, ox_hi) = out_range(m.ow, m.w, sx, kx, px);
                            if ox_lo >= ox_hi {
                                continue;
                            }
                            for oz in oz_lo..oz_hi {
                                let iz = oz * sz + kz - pz;
                                for oy in oy_lo..oy_hi {
                                    let iy = oy * sy + ky - py;
                                    let xrow = &x_block[(iz * m.h + iy) * m.w..][..m.w];
                                    let orow =
                                        &mut out_block[(oz * m.oh + oy) * m.ow..][..m.ow];
                                    if sx == 1 {
                                        let ix0 = ox_lo + kx - px;
                                        let len = ox_hi - ox_lo;
                                        for (o, xv) in orow[ox_lo..ox_hi]
                                            .iter_mut()
                                            .zip(&xrow[ix0..ix0 + len])
                                        {
                                            *o += weight * xv;
                                        }
                                    } else {
                                        for ox in ox_lo..ox_hi {
                                            orow[ox] += weight * xrow[ox * sx + kx - px];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    out
}

pub fn conv3d_grad_input(go: &[f64], k: &[f64], m: &Conv3dDims) -> Vec<f64> {
    let mut gx = vec![0.0; m.batch * m.c_in * m.d * m.h * m.w];
    let (sz, sy, sx) = m.stride;
    let (pz, py, px) = (m.pad.0 .0, m.pad.1 .0, m.pad.2 .0);
    let in_vol = m.d * m.h * m.w;
    let out_vol = m.od * m.oh * m.ow;
    let k_vol = m.kd * m.kh * m.kw;
    gx.par_chunks_mut(in_vol)
        .enumerate()
        .for_each(|(slot, gx_block)| {
            let n = slot / m.c_in;
            let ci = slot % m.c_in;
            for co in 0..m.c_out {
                let go_block = &go[(n * m.c_out + co) * out_vol..][..out_vol];
                let k_block = &k[(co * m.c_in + ci) * k_vol..][..k_vol];
                for kz in 0..m.kd {
                    let (oz_lo, oz_hi) = out_range(m.od, m.d, sz, kz, pz);
                    for ky in 0..m.kh {
                        let (oy_lo, oy_hi) = out_range(m.oh, m.h, sy, ky, py);
                        for kx in 0..m.kw {
                            let weight = k_block[(kz * m.kh + ky) * m.kw + kx];
                            let (ox_lo, ox_hi) = out_range(m.ow, m.w, sx, kx, px);
                            if ox_lo >= ox_hi {
                                continue;
                            }
                            for oz in oz_lo..oz_hi {
                                let iz = oz * sz + kz - pz;
                                for oy in oy_lo..oy_hi {
                                    let iy = oy * sy + ky - py;
                                    let gxrow =
                                        &mut gx_block[(iz * m.h + iy) * m.w..][..m.w];
                                    let gorow =
                                        &go_block[(oz * m.oh + oy) * m.ow..][..m.ow];
                                    if sx == 1 {
                                        let ix0 = ox_lo + kx - px;
                                        let len = ox_hi - ox_lo;
                                        for (g, go_v) in gxrow[ix0..ix0 + len]
                                            .iter_mut()
                                            .zip(&gorow[ox_lo..ox_hi])
                                        {
                                            *g += weight * go_v;
                                        }
                                    } else {
                                        for ox in ox_lo..ox_hi {
                                            gxrow[ox * sx + kx - px] +=
                                                weight * gorow[ox];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    gx
}

pub fn conv3d_grad_kernel(go: &[f64], x: &[f64], m: &Conv3dDims) -> Vec<f64> {
    let mut gk = vec![0.0; m.c_out * m.c_in * m.kd * m.kh * m.kw];
    let (sz, sy, sx) = m.stride;
    let (pz, py, px) = (m.pad.0 .0, m.pad.1 .0, m.pad.2 .0);
    let in_vol = m.d * m.h * m.w;
    let out_vol = m.od * m.oh * m.ow;
    let k_vol = m.kd * m.kh * m.kw;
    gk.par_chunks_mut(k_vol)
        .enumerate()
        .for_each(|(slot, gk_block)| {
            let co = slot / m.c_in;
            let ci = slot % m.c_in;
            for kz in 0..m.kd {
                let (oz_lo, oz_hi) = out_range(m.od, m.d, sz, kz, pz);
                for ky in 0..m.kh {
                    let (oy_lo, oy_hi) = out_range(m.oh, m.h, sy, ky, py);
                    for kx in 0..m.kw {
                        let (ox_lo, ox_hi) = out_range(m.ow, m.w, sx, kx, px);
                        if ox_lo >= ox_hi {
                            continue;
                        }
                        let mut acc = 0.0;
                        for n in 0..m.batch {
                            let x_block = &x[(n * m.c_in + ci) * in_vol..][..in_vol];
                            let go_block = &go[(n * m.c_out + co) * out_vol..][..out_vol];
                            for oz in oz_lo..oz_hi {
                                let iz = oz * sz + kz - pz;
                                for oy in oy_lo..oy_hi {
                                    let iy = oy * sy + ky - py;
                                    let xrow = &x_block[(iz * m.h + iy) * m.w..][..m.w];
                                    let gorow =
                                        &go_block[(oz * m.oh + oy) * m.ow..][..m.ow];
                                    if sx == 1 {
                                        let ix0 = ox_lo + kx - px;
                                        let len = ox_hi - ox_lo;
                                        for (go_v, xv) in gorow[ox_lo..ox_hi]
                                            .iter()
                                            .zip(&xrow[ix0..ix0 + len])
                                        {
                                            acc += go_v * xv;
                                        }
                                    } else {
                                        for ox in ox_lo..ox_hi {
                                            acc += gorow[ox] * xrow[ox * sx + kx - px];
                                        }
                                    }
                                }
                            }
                        }
                        gk_block[(kz * m.kh + ky) * m.kw + kx] = acc;
                    }
                }
            }
        });
    gk
}
