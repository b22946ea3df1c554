//! Dataset tiling, training loops, threshold tuning and the experiment
//! procedures.

pub mod tiling;

pub use tiling::{tile_volumes, validation_volumes, Split, TileBox, TileIndex};
