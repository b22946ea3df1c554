//! Regular tile grids over volumes, and the volume-level train/val split.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileBox {
    pub volume: usize,
    pub origin: (usize, usize, usize),
    pub dims: (usize, usize, usize),
    pub split: Split,
}

#[derive(Debug, Clone, Default)]
pub struct TileIndex {
    pub tiles: Vec<TileBox>,
}

/// Tile origins along one axis: stride `tile*(1-overlap)`, final tile clamped
/// flush with the border so the boxes exactly cover the extent.
fn axis_origins(extent: usize, tile: usize, overlap: f64) -> Vec<usize> {
    let stride = ((tile as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let mut origins = Vec::new();
    let mut o = 0usize;
    while o + tile <= extent {
        origins.push(o);
        o += stride;
    }
    let last = extent - tile;
    if *origins.last().unwrap_or(&usize::MAX) != last {
        origins.push(last);
    }
    origins
}

/// Build the deterministic tile grid over `volumes` (dims per volume).
pub fn tile_volumes(
    volumes: &[(usize, usize, usize)],
    tile: (usize, usize, usize),
    overlap: f64,
) -> Result<TileIndex> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Validation(format!(
            "overlap must be in [0,1), got {overlap}"
        )));
    }
    let mut tiles = Vec::new();
    for (volume, &dims) in volumes.iter().enumerate() {
        if tile.0 > dims.0 || tile.1 > dims.1 || tile.2 > dims.2 {
            return Err(Error::Validation(format!(
                "tile {tile:?} larger than volume {dims:?}"
            )));
        }
        for z in axis_origins(dims.2, tile.2, overlap) {
            for y in axis_origins(dims.1, tile.1, overlap) {
                for x in axis_origins(dims.0, tile.0, overlap) {
                    tiles.push(TileBox {
                        volume,
                        origin: (x, y, z),
                        dims: tile,
                        split: Split::Train,
                    });
                }
            }
        }
    }
    Ok(TileIndex { tiles })
}

impl TileIndex {
    /// Mark every tile of the validation volumes. The split is decided at
    /// volume granularity so overlapping tiles cannot leak across it.
    pub fn assign_volume_split(&mut self, val_volumes: &[usize]) {
        for t in &mut self.tiles {
            t.split = if val_volumes.contains(&t.volume) {
                Split::Val
            } else {
                Split::Train
            };
        }
    }

    pub fn of_split(&self, split: Split) -> Vec<TileBox> {
        self.tiles
            .iter()
            .copied()
            .filter(|t| t.split == split)
            .collect()
    }
}

/// Pick the validation volume ids: the last `ceil(n * fraction)` in a
/// seed-shuffled order (at least one when fraction > 0 and n > 1).
pub fn validation_volumes(n_volumes: usize, fraction: f64, seed: u64) -> Vec<usize> {
    if n_volumes < 2 || fraction <= 0.0 {
        return Vec::new();
    }
    let count = ((n_volumes as f64 * fraction).ceil() as usize)
        .max(1)
        .min(n_volumes - 1);
    let mut order: Vec<usize> = (0..n_volumes).collect();
    use rand::seq::SliceRandom;
    let mut rng = crate::rng::derive(seed, "train/val-split");
    order.shuffle(&mut rng);
    let mut val: Vec<usize> = order[..count].to_vec();
    val.sort_unstable();
    val
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_scale_grid_counts() {
        // 512x512x40 with 128x128x16 tiles, no overlap: 4 x-origins, 4
        // y-origins, and 3 z-origins (0, 16, and 24 clamped to the border;
        // a plain 4*4*2 grid would leave the last 8 slices uncovered).
        let index = tile_volumes(&[(512, 512, 40)], (128, 128, 16), 0.0).unwrap();
        assert_eq!(index.tiles.len(), 48);

        // Overlap 0.5: stride 64x64x8, clamped: 7*7*4 = 196.
        let index = tile_volumes(&[(512, 512, 40)], (128, 128, 16), 0.5).unwrap();
        assert_eq!(index.tiles.len(), 196);
    }

    #[test]
    fn tiles_exactly_cover_the_volume() {
        let dims = (50, 30, 10);
        let index = tile_volumes(&[dims], (16, 16, 4), 0.25).unwrap();
        let mut covered = vec![false; dims.0 * dims.1 * dims.2];
        for t in &index.tiles {
            for z in t.origin.2..t.origin.2 + t.dims.2 {
                for y in t.origin.1..t.origin.1 + t.dims.1 {
                    for x in t.origin.0..t.origin.0 + t.dims.0 {
                        assert!(x < dims.0 && y < dims.1 && z < dims.2);
                        covered[(z * dims.1 + y) * dims.0 + x] = true;
                    }
                }
            }
        }
        assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn oversized_tile_errors() {
        assert!(tile_volumes(&[(8, 8, 4)], (16, 8, 4), 0.0).is_err());
    }

    #[test]
    fn split_is_a_volume_level_partition() {
        let mut index = tile_volumes(&[(16, 16, 8); 5], (8, 8, 4), 0.5).unwrap();
        let val = validation_volumes(5, 0.2, 7);
        assert_eq!(val.len(), 1);
        index.assign_volume_split(&val);
        for t in &index.tiles {
            let expect = if val.contains(&t.volume) {
                Split::Val
            } else {
                Split::Train
            };
            assert_eq!(t.split, expect);
        }
        let n_train = index.of_split(Split::Train).len();
        let n_val = index.of_split(Split::Val).len();
        assert_eq!(n_train + n_val, index.tiles.len());
        assert!(n_val > 0);
    }

    #[test]
    fn validation_pick_is_deterministic() {
        assert_eq!(validation_volumes(10, 0.1, 3), validation_volumes(10, 0.1, 3));
        assert_eq!(validation_volumes(10, 0.1, 3).len(), 1);
    }
}
