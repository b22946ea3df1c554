//! Batch normalization over the channel axis of `[N,C,spatial...]`.

use crate::tensor::{BackwardCtx, Graph, NdArray, ParamId, ParamSet, Session, TapeOp, Tensor};
use crate::{Error, Result};

/// Running statistics, updated in train mode and consumed in eval mode.
#[derive(Debug, Clone)]
pub struct BnState {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub initialized: bool,
}

impl BnState {
    pub fn new(channels: usize) -> Self {
        BnState {
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            initialized: false,
        }
    }
}

struct BatchNormTrainOp {
    channels: usize,
    plane: usize,
    /// Per-channel 1/sqrt(var + eps).
    invstd: Vec<f64>,
    mean: Vec<f64>,
    /// Elements per channel across the batch.
    m: usize,
}

impl BatchNormTrainOp {
    fn channel_of(&self, flat: usize) -> usize {
        (flat / self.plane) % self.channels
    }
}

impl TapeOp for BatchNormTrainOp {
    fn name(&self) -> &'static str {
        "batchnorm"
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        let x = ctx.parents[0].data();
        let gamma = ctx.parents[1].data();
        let go = ctx.out_grad;
        let c = self.channels;

        // Per-channel sums of dxhat and dxhat*xhat.
        let mut sum_dxhat = vec![0.0; c];
        let mut sum_dxhat_xhat = vec![0.0; c];
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for (i, &g) in go.iter().enumerate() {
            let ch = self.channel_of(i);
            let xhat = (x[i] - self.mean[ch]) * self.invstd[ch];
            let dxhat = g * gamma[ch];
            sum_dxhat[ch] += dxhat;
            sum_dxhat_xhat[ch] += dxhat * xhat;
            dgamma[ch] += g * xhat;
            dbeta[ch] += g;
        }

        let gx = ctx.need[0].then(|| {
            let m = self.m as f64;
            go.iter()
                .enumerate()
                .map(|(i, &g)| {
                    let ch = self.channel_of(i);
                    let xhat = (x[i] - self.mean[ch]) * self.invstd[ch];
                    let dxhat = g * gamma[ch];
                    (self.invstd[ch] / m)
                        * (m * dxhat - sum_dxhat[ch] - xhat * sum_dxhat_xhat[ch])
                })
                .collect()
        });
        vec![gx, ctx.need[1].then_some(dgamma), ctx.need[2].then_some(dbeta)]
    }
}

struct BatchNormEvalOp {
    channels: usize,
    plane: usize,
    invstd: Vec<f64>,
    mean: Vec<f64>,
}

impl TapeOp for BatchNormEvalOp {
    fn name(&self) -> &'static str {
        "batchnorm_eval"
    }

    fn backward(&self, ctx: BackwardCtx<'_>) -> Vec<Option<Vec<f64>>> {
        let x = ctx.parents[0].data();
        let gamma = ctx.parents[1].data();
        let go = ctx.out_grad;
        let channel_of = |i: usize| (i / self.plane) % self.channels;
        let gx = ctx.need[0].then(|| {
            go.iter()
                .enumerate()
                .map(|(i, &g)| {
                    let ch = channel_of(i);
                    g * gamma[ch] * self.invstd[ch]
                })
                .collect()
        });
        let gamma_beta = ctx.need[1] || ctx.need[2];
        let (mut dgamma, mut dbeta) = (vec![0.0; self.channels], vec![0.0; self.channels]);
        if gamma_beta {
            for (i, &g) in go.iter().enumerate() {
                let ch = channel_of(i);
                dgamma[ch] += g * (x[i] - self.mean[ch]) * self.invstd[ch];
                dbeta[ch] += g;
            }
        }
        vec![gx, ctx.need[1].then_some(dgamma), ctx.need[2].then_some(dbeta)]
    }
}

/// Batch statistics of one train-mode forward, for running-stat updates.
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl Graph {
    /// Train-mode batch norm: normalize per channel over batch and spatial
    /// axes with the batch statistics, then scale/shift by gamma/beta.
    pub fn batchnorm_train(
        &mut self,
        x: Tensor,
        gamma: Tensor,
        beta: Tensor,
        epsilon: f64,
    ) -> Result<(Tensor, BatchStats)> {
        let xs = self.shape(x).to_vec();
        if xs.len() < 2 {
            return Err(Error::ShapeMismatch {
                op: "batchnorm",
                left: xs,
                right: self.shape(gamma).to_vec(),
            });
        }
        let channels = xs[1];
        if self.shape(gamma) != [channels] || self.shape(beta) != [channels] {
            return Err(Error::ShapeMismatch {
                op: "batchnorm gamma/beta",
                left: xs,
                right: self.shape(gamma).to_vec(),
            });
        }
        let plane: usize = xs[2..].iter().product();
        let n = xs[0];
        let m = n * plane;
        let input = self.data(x).data();

        let mut mean = vec![0.0; channels];
        for (slot, chunk) in input.chunks_exact(plane).enumerate() {
            mean[slot % channels] += chunk.iter().sum::<f64>();
        }
        for v in &mut mean {
            *v /= m as f64;
        }
        let mut var = vec![0.0; channels];
        for (slot, chunk) in input.chunks_exact(plane).enumerate() {
            let mu = mean[slot % channels];
            var[slot % channels] += chunk.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>();
        }
        for v in &mut var {
            *v /= m as f64;
        }
        let invstd: Vec<f64> = var.iter().map(|v| 1.0 / (v + epsilon).sqrt()).collect();

        let gamma_v = self.data(gamma).data().to_vec();
        let beta_v = self.data(beta).data().to_vec();
        let mut out = Vec::with_capacity(input.len());
        for (slot, chunk) in input.chunks_exact(plane).enumerate() {
            let ch = slot % channels;
            let (mu, is, ga, be) = (mean[ch], invstd[ch], gamma_v[ch], beta_v[ch]);
            out.extend(chunk.iter().map(|v| (v - mu) * is * ga + be));
        }
        let data = NdArray::new(xs, out).expect("bn shape");
        let stats = BatchStats {
            mean: mean.clone(),
            var: var.clone(),
        };
        let op = BatchNormTrainOp {
            channels,
            plane,
            invstd,
            mean,
            m,
        };
        Ok((
            self.record(data, vec![x, gamma, beta], Box::new(op)),
            stats,
        ))
    }

    /// Eval-mode batch norm using fixed running statistics.
    pub fn batchnorm_eval(
        &mut self,
        x: Tensor,
        gamma: Tensor,
        beta: Tensor,
        state: &BnState,
        epsilon: f64,
    ) -> Result<Tensor> {
        if !state.initialized {
            return Err(Error::UninitializedBatchNorm);
        }
        let xs = self.shape(x).to_vec();
        let channels = xs[1];
        let plane: usize = xs[2..].iter().product();
        let invstd: Vec<f64> = state
            .running_var
            .iter()
            .map(|v| 1.0 / (v + epsilon).sqrt())
            .collect();
        let gamma_v = self.data(gamma).data().to_vec();
        let beta_v = self.data(beta).data().to_vec();
        let input = self.data(x).data();
        let mut out = Vec::with_capacity(input.len());
        for (slot, chunk) in input.chunks_exact(plane).enumerate() {
            let ch = slot % channels;
            let (mu, is, ga, be) = (state.running_mean[ch], invstd[ch], gamma_v[ch], beta_v[ch]);
            out.extend(chunk.iter().map(|v| (v - mu) * is * ga + be));
        }
        let data = NdArray::new(xs, out).expect("bn shape");
        let op = BatchNormEvalOp {
            channels,
            plane,
            invstd,
            mean: state.running_mean.clone(),
        };
        Ok(self.record(data, vec![x, gamma, beta], Box::new(op)))
    }
}

/// Batch normalization layer; running stats live in a separate [`BnState`]
/// owned by the network so the layer itself stays immutable during forward.
#[derive(Debug, Clone)]
pub struct BatchNormLayer {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub epsilon: f64,
    pub momentum: f64,
}

impl BatchNormLayer {
    pub fn new(params: &mut ParamSet, name: &str, channels: usize) -> Self {
        BatchNormLayer {
            gamma: params.add(format!("{name}.gamma"), NdArray::filled(vec![channels], 1.0)),
            beta: params.add(format!("{name}.beta"), NdArray::zeros(vec![channels])),
            epsilon: 1e-5,
            momentum: 0.1,
        }
    }

    /// Train mode: normalize by batch statistics and fold them into `state`.
    pub fn apply_train(
        &self,
        sess: &mut Session<'_>,
        x: Tensor,
        state: &mut BnState,
    ) -> Result<Tensor> {
        let gamma = sess.param(self.gamma);
        let beta = sess.param(self.beta);
        let (y, stats) = sess.batchnorm_train(x, gamma, beta, self.epsilon)?;
        if state.initialized {
            for (r, b) in state.running_mean.iter_mut().zip(&stats.mean) {
                *r = (1.0 - self.momentum) * *r + self.momentum * b;
            }
            for (r, b) in state.running_var.iter_mut().zip(&stats.var) {
                *r = (1.0 - self.momentum) * *r + self.momentum * b;
            }
        } else {
            state.running_mean.copy_from_slice(&stats.mean);
            state.running_var.copy_from_slice(&stats.var);
            state.initialized = true;
        }
        Ok(y)
    }

    pub fn apply_eval(&self, sess: &mut Session<'_>, x: Tensor, state: &BnState) -> Result<Tensor> {
        let gamma = sess.param(self.gamma);
        let beta = sess.param(self.beta);
        sess.batchnorm_eval(x, gamma, beta, state, self.epsilon)
    }
}
