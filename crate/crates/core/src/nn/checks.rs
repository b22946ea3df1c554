//! The full finite-difference verification suite over layers and losses.
//!
//! Shared by unit tests, the acceptance suite and the `gradcheck` CLI
//! command. Each entry builds a small scalar-valued composition through one
//! operation and compares backward against central differences.

use super::Padding;
use crate::loss;
use crate::rng;
use crate::tensor::{grad_check_multi, BackwardCtx, Graph, NdArray, TapeOp, Tensor};
use crate::Result;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub passed: bool,
}

fn randn(seed: u64, stage: &str, n: usize) -> NdArray {
    let mut rng = rng::derive(seed, stage);
    NdArray::from_vec((0..n).map(|_| rng.gen_range(-1.5..1.5)).collect())
}

fn rand01(seed: u64, stage: &str, n: usize) -> NdArray {
    let mut rng = rng::derive(seed, stage);
    NdArray::from_vec((0..n).map(|_| rng.gen_range(0.05..0.95)).collect())
}

fn check(
    name: &'static str,
    f: &dyn Fn(&mut Graph, &[Tensor]) -> Result<Tensor>,
    inputs: &[NdArray],
    tol: f64,
) -> CheckResult {
    match grad_check_multi(f, inputs, 1e-5, tol) {
        Ok(report) => CheckResult {
            name,
            max_rel_err: report.max_rel_err,
            passed: report.passed(),
        },
        Err(_) => CheckResult {
            name,
            max_rel_err: f64::INFINITY,
            passed: false,
        },
    }
}

/// Two unrolled ConvLSTM steps built from primitive ops.
fn convlstm_unrolled(
    g: &mut Graph,
    xs: &[Tensor],
    wx: Tensor,
    wh: Tensor,
    bias: Tensor,
    filters: usize,
    side: usize,
) -> Result<Tensor> {
    let mut h = g.leaf(NdArray::zeros(vec![1, filters, side, side]));
    let mut c = g.leaf(NdArray::zeros(vec![1, filters, side, side]));
    for &x in xs {
        let gx = g.conv2d(x, wx, Padding::Same, (1, 1))?;
        let gh = g.conv2d(h, wh, Padding::Same, (1, 1))?;
        let pre = g.add(gx, gh)?;
        let pre = g.add_chan_bias(pre, bias)?;
        let i_pre = g.narrow(pre, 1, 0, filters)?;
        let f_pre = g.narrow(pre, 1, filters, filters)?;
        let g_pre = g.narrow(pre, 1, 2 * filters, filters)?;
        let o_pre = g.narrow(pre, 1, 3 * filters, filters)?;
        let i = g.sigmoid(i_pre);
        let f = g.sigmoid(f_pre);
        let cand = g.tanh(g_pre);
        let o = g.sigmoid(o_pre);
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cand)?;
        c = g.add(keep, write)?;
        let act = g.tanh(c);
        h = g.mul(o, act)?;
    }
    Ok(h)
}

/// Gradient checks for every layer, one seed.
pub fn run_layer_checks(seed: u64, tol: f64) -> Vec<CheckResult> {
    let mut out = Vec::new();

    out.push(check(
        "leaky_relu",
        &|g, ts| {
            let y = g.leaky_relu(ts[0], 0.01);
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        },
        &[randn(seed, "lrelu", 16)],
        tol,
    ));

    out.push(check(
        "sigmoid",
        &|g, ts| {
            let y = g.sigmoid(ts[0]);
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        },
        &[randn(seed, "sigm", 16)],
        tol,
    ));

    out.push(check(
        "tanh",
        &|g, ts| {
            let y = g.tanh(ts[0]);
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        },
        &[randn(seed, "tanh", 16)],
        tol,
    ));

    out.push(check(
        "conv2d",
        &|g, ts| {
            let x = g.reshape(ts[0], vec![1, 2, 4, 4])?;
            let k = g.reshape(ts[1], vec![2, 2, 3, 3])?;
            let b = g.reshape(ts[2], vec![2])?;
            let y = g.conv2d(x, k, Padding::Same, (1, 1))?;
            let y = g.add_chan_bias(y, b)?;
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        },
        &[
            randn(seed, "c2-x", 32),
            randn(seed, "c2-k", 36),
            randn(seed, "c2-b", 2),
        ],
        tol,
    ));

    out.push(check(
        "conv3d",
        &|g, ts| {
            let x = g.reshape(ts[0], vec![1, 1, 3, 4, 4])?;
            let k = g.reshape(ts[1], vec![2, 1, 3, 3, 3])?;
            let b = g.reshape(ts[2], vec![2])?;
            let y = g.conv3d(x, k, Padding::Same, (1, 1, 1))?;
            let y = g.add_chan_bias(y, b)?;
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        },
        &[
            randn(seed, "c3-x", 48),
            randn(seed, "c3-k", 54),
            randn(seed, "c3-b", 2),
        ],
        tol,
    ));

    out.push(check(
        "maxpool2d",
        &|g, ts| {
            let x = g.reshape(ts[0], vec![1, 1, 4, 4])?;
            let y = g.maxpool2d(x, (2, 2))?;
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        },
        &[randn(seed, "mp2", 16)],
        tol,
    ));

    out.push(check(
        "maxpool3d",
        &|g, ts| {
            let x = g.reshape(ts[0], vec![1, 1, 2, 4, 4])?;
            let y = g.maxpool3d(x, (2, 2, 2))?;
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        },
        &[randn(seed, "mp3", 32)],
        tol,
    ));

    out.push(check(
        "upsample2d",
        &|g, ts| {
            let x = g.reshape(ts[0], vec![1, 1, 3, 3])?;
            let y = g.upsample2d(x, 2)?;
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        },
        &[randn(seed, "up2", 9)],
        tol,
    ));

    out.push(check(
        "upsample3d",
        &|g, ts| {
            let x = g.reshape(ts[0], vec![1, 1, 2, 3, 3])?;
            let y = g.upsample3d(x, 2)?;
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        },
        &[randn(seed, "up3", 18)],
        tol,
    ));

    out.push(check(
        "batchnorm",
        &|g, ts| {
            let x = g.reshape(ts[0], vec![2, 2, 3, 3])?;
            let (y, _) = g.batchnorm_train(x, ts[1], ts[2], 1e-5)?;
            let e = g.exp(y);
            Ok(g.sum(e))
        },
        &[
            randn(seed, "bn-x", 36),
            randn(seed, "bn-g", 2),
            randn(seed, "bn-b", 2),
        ],
        tol,
    ));

    out.push(check(
        "convlstm_step",
        &|g, ts| {
            let x0 = g.reshape(ts[0], vec![1, 1, 4, 4])?;
            let x1 = g.reshape(ts[1], vec![1, 1, 4, 4])?;
            let wx = g.reshape(ts[2], vec![4, 1, 3, 3])?;
            let wh = g.reshape(ts[3], vec![4, 1, 3, 3])?;
            let bias = g.reshape(ts[4], vec![4])?;
            let h = convlstm_unrolled(g, &[x0, x1], wx, wh, bias, 1, 4)?;
            let sq = g.mul(h, h)?;
            Ok(g.sum(sq))
        },
        &[
            randn(seed, "cl-x0", 16),
            randn(seed, "cl-x1", 16),
            randn(seed, "cl-wx", 36),
            randn(seed, "cl-wh", 36),
            randn(seed, "cl-b", 4),
        ],
        tol,
    ));

    out.push(check(
        "bidirectional_stack",
        &|g, ts| {
            let x0 = g.reshape(ts[0], vec![1, 1, 3, 3])?;
            let x1 = g.reshape(ts[1], vec![1, 1, 3, 3])?;
            let wxf = g.reshape(ts[2], vec![4, 1, 3, 3])?;
            let whf = g.reshape(ts[3], vec![4, 1, 3, 3])?;
            let bf = g.reshape(ts[4], vec![4])?;
            let wxb = g.reshape(ts[5], vec![4, 1, 3, 3])?;
            let whb = g.reshape(ts[6], vec![4, 1, 3, 3])?;
            let bb = g.reshape(ts[7], vec![4])?;
            let ck = g.reshape(ts[8], vec![1, 2, 1, 1])?;
            let cb = g.reshape(ts[9], vec![1])?;
            // Forward and backward single-step-per-slice passes.
            let hf0 = convlstm_unrolled(g, &[x0], wxf, whf, bf, 1, 3)?;
            let hf1 = convlstm_unrolled(g, &[x0, x1], wxf, whf, bf, 1, 3)?;
            let hb1 = convlstm_unrolled(g, &[x1], wxb, whb, bb, 1, 3)?;
            let hb0 = convlstm_unrolled(g, &[x1, x0], wxb, whb, bb, 1, 3)?;
            let cat0 = g.concat(1, &[hf0, hb0])?;
            let cat1 = g.concat(1, &[hf1, hb1])?;
            let y0 = g.conv2d(cat0, ck, Padding::Same, (1, 1))?;
            let y0 = g.add_chan_bias(y0, cb)?;
            let y1 = g.conv2d(cat1, ck, Padding::Same, (1, 1))?;
            let y1 = g.add_chan_bias(y1, cb)?;
            let s0 = g.mul(y0, y0)?;
            let s1 = g.mul(y1, y1)?;
            let a = g.sum(s0);
            let b = g.sum(s1);
            g.add(a, b)
        },
        &[
            randn(seed, "bd-x0", 9),
            randn(seed, "bd-x1", 9),
            randn(seed, "bd-wxf", 36),
            randn(seed, "bd-whf", 36),
            randn(seed, "bd-bf", 4),
            randn(seed, "bd-wxb", 36),
            randn(seed, "bd-whb", 36),
            randn(seed, "bd-bb", 4),
            randn(seed, "bd-ck", 2),
            randn(seed, "bd-cb", 1),
        ],
        tol,
    ));

    out
}

/// Gradient checks for the three training losses, one seed.
pub fn run_loss_checks(seed: u64, tol: f64) -> Vec<CheckResult> {
    let n = 16;
    let x = rand01(seed, "loss-x", n);
    let y = {
        let mut rng = rng::derive(seed, "loss-y");
        NdArray::from_vec((0..n).map(|_| f64::from(rng.gen_bool(0.3))).collect())
    };
    let w = rand01(seed, "loss-w", n);

    let y_bce = y.clone();
    let bce = move |g: &mut Graph, ts: &[Tensor]| -> Result<Tensor> {
        let target = g.leaf(y_bce.clone());
        loss::bce_loss(g, ts[0], target)
    };
    let y_dice = y.clone();
    let dice = move |g: &mut Graph, ts: &[Tensor]| -> Result<Tensor> {
        let target = g.leaf(y_dice.clone());
        loss::dice_loss(g, ts[0], target, 1.0)
    };
    let (y_w, w_w) = (y.clone(), w.clone());
    let wbce = move |g: &mut Graph, ts: &[Tensor]| -> Result<Tensor> {
        let target = g.leaf(y_w.clone());
        let weights = g.leaf(w_w.clone());
        loss::weighted_bce_loss(g, ts[0], target, weights)
    };

    vec![
        check("bce_loss", &bce, std::slice::from_ref(&x), tol),
        check("dice_loss", &dice, std::slice::from_ref(&x), tol),
        check("weighted_bce_loss", &wbce, std::slice::from_ref(&x), tol),
    ]
}

/// Run layers and losses across `seeds` seeds at `tol`.
pub fn run_all(seeds: u64, tol: f64) -> Vec<CheckResult> {
    let mut worst: Vec<CheckResult> = Vec::new();
    for seed in 0..seeds {
        let mut results = run_layer_checks(seed, tol);
        results.extend(run_loss_checks(seed, tol));
        for r in results {
            match worst.iter_mut().find(|w| w.name == r.name) {
                Some(w) => {
                    if r.max_rel_err > w.max_rel_err {
                        *w = r;
                    }
                }
                None => worst.push(r),
            }
        }
    }
    worst
}

/// A sigmoid whose backward rule is deliberately wrong, used to prove the
/// harness detects faults.
struct BrokenSigmoidOp;

impl TapeOp for BrokenSigmoidOp {
    fn name(&self) -> &'static str {
        "broken_sigmoid"
    }
    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        // Wrong: returns y instead of y*(1-y).
        let y = ctx.out.data();
        vec![ctx.need[0].then(|| ctx.out_grad.iter().zip(y).map(|(g, y)| g * y).collect())]
    }
}

/// Fault-injection check; must fail.
pub fn run_fault_injected(seed: u64, tol: f64) -> CheckResult {
    check(
        "fault_injected_sigmoid",
        &|g, ts| {
            let data = g.data(ts[0]).map(|v| 1.0 / (1.0 + (-v).exp()));
            let y = g.record(data, vec![ts[0]], Box::new(BrokenSigmoidOp));
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        },
        &[randn(seed, "fault", 8)],
        tol,
    )
}
