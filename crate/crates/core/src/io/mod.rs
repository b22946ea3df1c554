//! File formats and run manifests: VVOL volumes, VCKPT checkpoints, flat
//! key=value configs, results tables, manifests and slice/CSV exports.

mod checkpoint;
pub mod config;
mod export;
mod manifest;
mod results;
mod vvol;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use config::Config;
pub use export::{export_csv, export_pgm_slices, import_csv};
pub use manifest::Manifest;
pub use results::{ResultRow, ResultsTable, RowStatus};
pub use vvol::{read_vvol, write_vvol, VvolDtype};
