//! Convolutional LSTM: the standard LSTM state equations with the inner
//! products replaced by kernel convolutions over 2D feature maps.
//!
//! Gate order in the fused kernels is input, forget, candidate, output.
//! Peephole terms are omitted: gates see only the input and hidden
//! convolutions plus a bias.

use super::conv::Conv2dLayer;
use super::{init, Padding};
use crate::tensor::{NdArray, ParamId, ParamSet, Session, Tensor};
use crate::{Error, Result};
use rand_chacha::ChaCha8Rng;

/// Hidden and cell maps carried across the slice sequence.
#[derive(Debug, Clone, Copy)]
pub struct ConvLstmState {
    pub h: Tensor,
    pub c: Tensor,
}

/// One unidirectional ConvLSTM unit.
#[derive(Debug, Clone)]
pub struct ConvLstmCell {
    /// Input-to-gates kernel `[4F, Ci, k, k]`.
    pub wx: ParamId,
    /// Hidden-to-gates kernel `[4F, F, k, k]`.
    pub wh: ParamId,
    /// Gate bias `[4F]`.
    pub bias: ParamId,
    pub filters: usize,
}

impl ConvLstmCell {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_ch: usize,
        filters: usize,
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let wx = init::glorot_uniform(
            vec![4 * filters, in_ch, k, k],
            in_ch * k * k,
            filters * k * k,
            rng,
        );
        let wh = init::glorot_uniform(
            vec![4 * filters, filters, k, k],
            filters * k * k,
            filters * k * k,
            rng,
        );
        // Forget-gate bias starts at 1 so early cell state survives the
        // length of the slice sequence.
        let mut bias = vec![0.0; 4 * filters];
        for b in bias.iter_mut().skip(filters).take(filters) {
            *b = 1.0;
        }
        ConvLstmCell {
            wx: params.add(format!("{name}.wx"), wx),
            wh: params.add(format!("{name}.wh"), wh),
            bias: params.add(format!("{name}.bias"), NdArray::from_vec(bias)),
            filters,
        }
    }

    /// Zero hidden and cell maps for a `[batch, F, height, width]` sequence.
    pub fn zero_state(
        &self,
        sess: &mut Session<'_>,
        batch: usize,
        height: usize,
        width: usize,
    ) -> ConvLstmState {
        let zeros = NdArray::zeros(vec![batch, self.filters, height, width]);
        ConvLstmState {
            h: sess.input(zeros.clone()),
            c: sess.input(zeros),
        }
    }

    /// One recurrence step; returns the emitted hidden map and next state.
    pub fn step(
        &self,
        sess: &mut Session<'_>,
        x_t: Tensor,
        state: &ConvLstmState,
    ) -> Result<(Tensor, ConvLstmState)> {
        let xs = sess.shape(x_t).to_vec();
        let hs = sess.shape(state.h).to_vec();
        if xs.len() != 4 || hs.len() != 4 || xs[0] != hs[0] || xs[2..] != hs[2..] {
            return Err(Error::ShapeMismatch {
                op: "convlstm_step",
                left: xs,
                right: hs,
            });
        }
        let f = self.filters;
        let wx = sess.param(self.wx);
        let wh = sess.param(self.wh);
        let bias = sess.param(self.bias);

        let gx = sess.conv2d(x_t, wx, Padding::Same, (1, 1))?;
        let gh = sess.conv2d(state.h, wh, Padding::Same, (1, 1))?;
        let pre = sess.add(gx, gh)?;
        let pre = sess.add_chan_bias(pre, bias)?;

        let i_pre = sess.narrow(pre, 1, 0, f)?;
        let f_pre = sess.narrow(pre, 1, f, f)?;
        let g_pre = sess.narrow(pre, 1, 2 * f, f)?;
        let o_pre = sess.narrow(pre, 1, 3 * f, f)?;

        let i = sess.sigmoid(i_pre);
        let forget = sess.sigmoid(f_pre);
        let g = sess.tanh(g_pre);
        let o = sess.sigmoid(o_pre);

        let keep = sess.mul(forget, state.c)?;
        let write = sess.mul(i, g)?;
        let c_next = sess.add(keep, write)?;
        let c_act = sess.tanh(c_next);
        let h_next = sess.mul(o, c_act)?;

        Ok((
            h_next,
            ConvLstmState {
                h: h_next,
                c: c_next,
            },
        ))
    }

    /// Run over a whole slice sequence from zero state.
    pub fn run(&self, sess: &mut Session<'_>, seq: &[Tensor]) -> Result<Vec<Tensor>> {
        let first = seq.first().ok_or(Error::EmptySequence)?;
        let shape = sess.shape(*first).to_vec();
        let mut state = self.zero_state(sess, shape[0], shape[2], shape[3]);
        let mut out = Vec::with_capacity(seq.len());
        for &x_t in seq {
            let (h, next) = self.step(sess, x_t, &state)?;
            out.push(h);
            state = next;
        }
        Ok(out)
    }
}

/// A bidirectional ConvLSTM stack: two independently weighted units run
/// front-to-back and back-to-front, their hidden maps are concatenated per
/// slice, and a shared 1x1 convolution compresses the result.
///
/// With `backward_cell` absent this degrades to the unidirectional variant.
#[derive(Debug, Clone)]
pub struct BidirectionalConvLstm {
    pub forward_cell: ConvLstmCell,
    pub backward_cell: Option<ConvLstmCell>,
    pub compress: Conv2dLayer,
}

impl BidirectionalConvLstm {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_ch: usize,
        filters: usize,
        out_ch: usize,
        bidirectional: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let forward_cell = ConvLstmCell::new(params, &format!("{name}.fwd"), in_ch, filters, 3, rng);
        let backward_cell = bidirectional
            .then(|| ConvLstmCell::new(params, &format!("{name}.bwd"), in_ch, filters, 3, rng));
        let concat_ch = if bidirectional { 2 * filters } else { filters };
        let compress = Conv2dLayer::new(
            params,
            &format!("{name}.compress"),
            concat_ch,
            out_ch,
            1,
            Padding::Same,
            rng,
        );
        BidirectionalConvLstm {
            forward_cell,
            backward_cell,
            compress,
        }
    }

    pub fn apply(&self, sess: &mut Session<'_>, seq: &[Tensor]) -> Result<Vec<Tensor>> {
        if seq.is_empty() {
            return Err(Error::EmptySequence);
        }
        let fwd = self.forward_cell.run(sess, seq)?;
        let merged: Vec<Tensor> = match &self.backward_cell {
            Some(cell) => {
                let reversed: Vec<Tensor> = seq.iter().rev().copied().collect();
                let mut bwd = cell.run(sess, &reversed)?;
                bwd.reverse();
                fwd.iter()
                    .zip(&bwd)
                    .map(|(&f, &b)| sess.concat(1, &[f, b]))
                    .collect::<Result<_>>()?
            }
            None => fwd,
        };
        merged
            .into_iter()
            .map(|t| self.compress.apply(sess, t))
            .collect()
    }
}
