//! Distance-ordered homotopic thinning.

use super::simple_point::{is_simple_26_6, is_simple_2d_8_4, Neighborhood};
use crate::synth::{distance_maps, Volume, VolumeKind};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Number of 26-connected foreground components.
pub fn count_components_26(v: &Volume) -> usize {
    let (nx, ny, nz) = v.dims;
    let mut visited = vec![false; v.len()];
    let mut count = 0;
    for start in 0..v.len() {
        if visited[start] || v.data[start] == 0.0 {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(i) = stack.pop() {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 && dz == 0 {
                            continue;
                        }
                        let (cx, cy, cz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                        if cx < 0 || cy < 0 || cz < 0 || cx >= nx as i64 || cy >= ny as i64 || cz >= nz as i64 {
                            continue;
                        }
                        let j = (cz as usize * ny + cy as usize) * nx + cx as usize;
                        if !visited[j] && v.data[j] != 0.0 {
                            visited[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
    }
    count
}

/// Number of 6-connected background components (cavity detector).
pub fn count_components_6_bg(v: &Volume) -> usize {
    let (nx, ny, nz) = v.dims;
    let mut visited = vec![false; v.len()];
    let mut count = 0;
    for start in 0..v.len() {
        if visited[start] || v.data[start] != 0.0 {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(i) = stack.pop() {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            let neighbors = [
                (x.wrapping_sub(1), y, z),
                (x + 1, y, z),
                (x, y.wrapping_sub(1), z),
                (x, y + 1, z),
                (x, y, z.wrapping_sub(1)),
                (x, y, z + 1),
            ];
            for (cx, cy, cz) in neighbors {
                if cx >= nx || cy >= ny || cz >= nz {
                    continue;
                }
                let j = (cz * ny + cy) * nx + cx;
                if !visited[j] && v.data[j] == 0.0 {
                    visited[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

/// A curve skeleton is unit-width when no 2x2 block of any axis-aligned
/// plane is fully foreground.
pub fn is_unit_width(v: &Volume) -> bool {
    let (nx, ny, nz) = v.dims;
    let at = |x: usize, y: usize, z: usize| v.at(x, y, z) != 0.0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !at(x, y, z) {
                    continue;
                }
                // xy plane
                if x + 1 < nx
                    && y + 1 < ny
                    && at(x + 1, y, z)
                    && at(x, y + 1, z)
                    && at(x + 1, y + 1, z)
                {
                    return false;
                }
                // xz plane
                if x + 1 < nx
                    && z + 1 < nz
                    && at(x + 1, y, z)
                    && at(x, y, z + 1)
                    && at(x + 1, y, z + 1)
                {
                    return false;
                }
                // yz plane
                if y + 1 < ny
                    && z + 1 < nz
                    && at(x, y + 1, z)
                    && at(x, y, z + 1)
                    && at(x, y + 1, z + 1)
                {
                    return false;
                }
            }
        }
    }
    true
}

/// Homotopic thinning to a unit-width curve skeleton.
///
/// Simple points are removed in ascending distance-to-background order
/// (voxel-grid metric; anisotropy intentionally plays no role in the
/// topology), scan order breaking ties, re-examining neighbors after every
/// removal. Curve endpoints (exactly one foreground neighbor) are kept, so
/// tubes thin to their medial curves instead of collapsing to points.
pub fn thin(mask: &Volume) -> Volume {
    let mut out = mask.clone();
    out.kind = VolumeKind::Skeleton;
    let n = out.len();
    if out.count_foreground() == 0 {
        return out;
    }

    // Distance keys from the unit-spacing transform; all-foreground masks
    // fall back to uniform keys (pure scan order).
    let keys: Vec<u64> = match distance_maps(mask, (1.0, 1.0, 1.0)) {
        Ok((_, d2)) => d2.data.iter().map(|d| d.to_bits()).collect(),
        Err(_) => vec![0; n],
    };

    let mut fg: Vec<bool> = out.data.iter().map(|&v| v != 0.0).collect();
    let dims = out.dims;
    let (nx, ny, nz) = dims;

    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    for i in 0..n {
        if fg[i] {
            heap.push(Reverse((keys[i], i)));
        }
    }

    while let Some(Reverse((_, i))) = heap.pop() {
        if !fg[i] {
            continue;
        }
        let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
        let hood = Neighborhood::sample(&fg, dims, x, y, z);
        let neighbors = hood.fg_count();
        if neighbors <= 1 {
            // Isolated voxel or curve endpoint: keep.
            continue;
        }
        if !is_simple_26_6(&fg, dims, x, y, z) {
            continue;
        }
        fg[i] = false;
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let (cx, cy, cz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                    if cx < 0 || cy < 0 || cz < 0 || cx >= nx as i64 || cy >= ny as i64 || cz >= nz as i64 {
                        continue;
                    }
                    let j = (cz as usize * ny + cy as usize) * nx + cx as usize;
                    if fg[j] {
                        heap.push(Reverse((keys[j], j)));
                    }
                }
            }
        }
    }

    for (o, f) in out.data.iter_mut().zip(&fg) {
        *o = f64::from(*f);
    }
    out
}

/// 2D slice-wise thinning with (8, 4) connectivity, used to build the
/// per-slice targets of split training.
pub fn thin_slice_2d(slice: &mut [bool], dims: (usize, usize)) {
    let (nx, ny) = dims;
    let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
    for (i, &v) in slice.iter().enumerate() {
        if v {
            heap.push(Reverse(i));
        }
    }
    while let Some(Reverse(i)) = heap.pop() {
        if !slice[i] {
            continue;
        }
        let (x, y) = (i % nx, i / nx);
        let mut neighbors = 0;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (cx, cy) = (x as i64 + dx, y as i64 + dy);
                if cx < 0 || cy < 0 || cx >= nx as i64 || cy >= ny as i64 {
                    continue;
                }
                if slice[cy as usize * nx + cx as usize] {
                    neighbors += 1;
                }
            }
        }
        if neighbors <= 1 {
            continue;
        }
        if !is_simple_2d_8_4(slice, dims, x, y) {
            continue;
        }
        slice[i] = false;
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (cx, cy) = (x as i64 + dx, y as i64 + dy);
                if cx < 0 || cy < 0 || cx >= nx as i64 || cy >= ny as i64 {
                    continue;
                }
                let j = cy as usize * nx + cx as usize;
                if slice[j] {
                    heap.push(Reverse(j));
                }
            }
        }
    }
}

/// Threshold a probability volume, thin it, and prune short spurs.
///
/// The networks already emit near-skeletal responses, so this is a
/// refinement pass, not the primary skeletonization.
pub fn binarize_and_skeletonize(prediction: &Volume, threshold: f64, min_branch_um: f64) -> Volume {
    let mut binary = prediction.clone();
    binary.kind = VolumeKind::Mask;
    for v in binary.data.iter_mut() {
        *v = f64::from(*v >= threshold);
    }
    let thinned = thin(&binary);
    super::prune::prune_volume(&thinned, min_branch_um)
}
