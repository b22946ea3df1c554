//! Differentiable layers: 2D/3D convolution, pooling, up-sampling, batch
//! normalization, activations and the convolutional LSTM.
//!
//! Raw numeric loops live in [`kernels`]; the structs here own parameters
//! (via [`crate::tensor::ParamSet`] ids) and record tape operations.

mod conv;
mod convlstm;
pub mod init;
mod kernels;
mod norm;
mod pool;

pub use conv::{Conv2dLayer, Conv3dLayer};
pub use convlstm::{BidirectionalConvLstm, ConvLstmCell, ConvLstmState};
pub use norm::{BatchNormLayer, BnState};

/// Spatial padding mode. `Same` preserves extents at stride 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Same,
    Valid,
}

impl Padding {
    /// (lo, hi) zero padding for a kernel extent `k`.
    pub fn pad(self, k: usize) -> (usize, usize) {
        match self {
            Padding::Same => ((k - 1) / 2, k - 1 - (k - 1) / 2),
            Padding::Valid => (0, 0),
        }
    }
}

/// Output extent of a convolution along one axis.
pub(crate) fn conv_out_extent(input: usize, k: usize, pad: (usize, usize), stride: usize) -> Option<usize> {
    let padded = input + pad.0 + pad.1;
    if k > padded {
        return None;
    }
    Some((padded - k) / stride + 1)
}

mod checks;
pub use checks::{run_all, run_fault_injected, run_layer_checks, run_loss_checks, CheckResult};
