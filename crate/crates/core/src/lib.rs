//! Direct 3D vessel centerline extraction from anisotropic volumetric images.
//!
//! Vessels imaged via their endothelium appear as hollow tubes in highly
//! anisotropic z-stacks, which defeats classical segment-then-thin pipelines.
//! This crate trains hybrid networks — a shared 2D U-Net applied per slice,
//! chained through bidirectional convolutional-LSTM units across the z axis —
//! to emit voxel-wise centerline probabilities directly, then refines them
//! with homotopic thinning and pruning into skeleton graphs.
//!
//! The crate is self-contained: it ships a minimal reverse-mode autodiff
//! tensor core ([`tensor`]), the differentiable layers and losses the
//! architectures need ([`nn`], [`loss`]), five comparator networks ([`arch`]),
//! a synthetic vascular phantom generator ([`synth`]), skeleton post-processing
//! ([`skeleton`]), evaluation metrics ([`metrics`]), a training/experiment
//! harness ([`train`]) and the file formats plus CLI ([`io`], [`cli`]).

pub mod arch;
pub mod cli;
pub mod error;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod rng;
pub mod skeleton;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

/// Tool version stamped into manifests and checkpoints.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
