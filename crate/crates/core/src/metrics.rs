//! Evaluation metrics: Dice overlap, Modified Hausdorff skeleton error,
//! coverage at a radius, and node distance between skeleton graphs.

use crate::skeleton::SkeletonGraph;
use crate::synth::Volume;
use crate::{Error, Result};

/// A deduplicated set of 3D positions in µm.
#[derive(Debug, Clone, Default)]
pub struct PointSet {
    points: Vec<[f64; 3]>,
}

impl PointSet {
    pub fn new(mut points: Vec<[f64; 3]>) -> Self {
        points.sort_by(|a, b| {
            (a[0].to_bits(), a[1].to_bits(), a[2].to_bits()).cmp(&(
                b[0].to_bits(),
                b[1].to_bits(),
                b[2].to_bits(),
            ))
        });
        points.dedup();
        PointSet { points }
    }

    /// Skeleton voxel centers scaled to µm.
    pub fn from_skeleton(v: &Volume) -> Self {
        let (nx, ny, nz) = v.dims;
        let mut points = Vec::new();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if v.at(x, y, z) != 0.0 {
                        points.push(v.position_um(x, y, z));
                    }
                }
            }
        }
        PointSet::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn translated(&self, delta: [f64; 3]) -> PointSet {
        PointSet::new(
            self.points
                .iter()
                .map(|p| [p[0] + delta[0], p[1] + delta[1], p[2] + delta[2]])
                .collect(),
        )
    }
}

#[inline]
fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Uniform-grid spatial index over a point set for exact nearest queries.
struct GridIndex<'a> {
    points: &'a [[f64; 3]],
    cell: f64,
    origin: [f64; 3],
    dims: [usize; 3],
    buckets: Vec<Vec<u32>>,
}

impl<'a> GridIndex<'a> {
    fn build(points: &'a [[f64; 3]], cell: f64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let dims = [
            (((hi[0] - lo[0]) / cell).floor() as usize + 1).max(1),
            (((hi[1] - lo[1]) / cell).floor() as usize + 1).max(1),
            (((hi[2] - lo[2]) / cell).floor() as usize + 1).max(1),
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        for (i, p) in points.iter().enumerate() {
            let c = Self::cell_of_static(p, lo, cell, dims);
            buckets[c].push(i as u32);
        }
        GridIndex {
            points,
            cell,
            origin: lo,
            dims,
            buckets,
        }
    }

    fn cell_of_static(p: &[f64; 3], origin: [f64; 3], cell: f64, dims: [usize; 3]) -> usize {
        let cx = (((p[0] - origin[0]) / cell).floor() as i64).clamp(0, dims[0] as i64 - 1) as usize;
        let cy = (((p[1] - origin[1]) / cell).floor() as i64).clamp(0, dims[1] as i64 - 1) as usize;
        let cz = (((p[2] - origin[2]) / cell).floor() as i64).clamp(0, dims[2] as i64 - 1) as usize;
        (cz * dims[1] + cy) * dims[0] + cx
    }

    /// Exact nearest distance: expand rings of cells until the best found
    /// distance is provably closer than any unexplored ring.
    fn nearest(&self, q: [f64; 3]) -> f64 {
        let cx = ((q[0] - self.origin[0]) / self.cell).floor() as i64;
        let cy = ((q[1] - self.origin[1]) / self.cell).floor() as i64;
        let cz = ((q[2] - self.origin[2]) / self.cell).floor() as i64;
        let mut best = f64::INFINITY;
        let max_ring = self.dims.iter().max().unwrap() + 2;
        for ring in 0..=max_ring {
            // Any cell in ring r is at least (r-1) * cell away from q.
            if best.is_finite() && (ring as f64 - 1.0) * self.cell > best {
                break;
            }
            let r = ring as i64;
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                            continue;
                        }
                        let (bx, by, bz) = (cx + dx, cy + dy, cz + dz);
                        if bx < 0
                            || by < 0
                            || bz < 0
                            || bx >= self.dims[0] as i64
                            || by >= self.dims[1] as i64
                            || bz >= self.dims[2] as i64
                        {
                            continue;
                        }
                        let b = (bz as usize * self.dims[1] + by as usize) * self.dims[0]
                            + bx as usize;
                        for &i in &self.buckets[b] {
                            let d = dist(q, self.points[i as usize]);
                            if d < best {
                                best = d;
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

/// Exact distance from every point of `a` to its nearest point in `b`.
pub fn nearest_distances(a: &PointSet, b: &PointSet) -> Result<Vec<f64>> {
    if b.is_empty() {
        return Err(Error::EmptyPointSet("b"));
    }
    // Cell size near the typical nearest-neighbor spacing keeps buckets small.
    let cell = 20.0;
    let index = GridIndex::build(b.points(), cell);
    Ok(a.points().iter().map(|&p| index.nearest(p)).collect())
}

/// Dice overlap `2|a∩b| / (|a|+|b|)` of two binary volumes; defined as 1
/// when both are empty.
pub fn dice_score(a: &Volume, b: &Volume) -> Result<f64> {
    a.require_same_dims(b, "dice_score")?;
    let mut inter = 0usize;
    let mut na = 0usize;
    let mut nb = 0usize;
    for (x, y) in a.data.iter().zip(&b.data) {
        let (fa, fb) = (*x != 0.0, *y != 0.0);
        na += usize::from(fa);
        nb += usize::from(fb);
        inter += usize::from(fa && fb);
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// Modified Hausdorff distance in µm: the larger of the two directed mean
/// nearest-neighbor distances.
pub fn mhd(a: &PointSet, b: &PointSet) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyPointSet("a"));
    }
    if b.is_empty() {
        return Err(Error::EmptyPointSet("b"));
    }
    let ab = nearest_distances(a, b)?;
    let ba = nearest_distances(b, a)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(mean(&ab).max(mean(&ba)))
}

/// Fraction of `truth` points with a `pred` point within `radius_um`.
/// An empty prediction covers nothing.
pub fn coverage(truth: &PointSet, pred: &PointSet, radius_um: f64) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyPointSet("truth"));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let d = nearest_distances(truth, pred)?;
    let hit = d.iter().filter(|&&d| d <= radius_um).count();
    Ok(hit as f64 / truth.len() as f64)
}

/// Distance between the endpoint/junction markers of two graphs, measured
/// as the MHD over nodes of degree != 2.
///
/// This is a declared stand-in; no published definition exists for the
/// quantity it reports.
pub fn node_distance(a: &SkeletonGraph, b: &SkeletonGraph) -> Result<f64> {
    let pa = PointSet::new(a.marker_positions());
    let pb = PointSet::new(b.marker_positions());
    if pa.is_empty() || pb.is_empty() {
        return Err(Error::EmptyPointSet("graph markers"));
    }
    mhd(&pa, &pb)
}
