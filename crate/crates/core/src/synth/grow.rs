//! Centerline growth: biased random walks in continuous µm space.
//!
//! Each vessel starts at a random interior point with a random heading and
//! walks with persistence (new direction = normalize(0.8·previous +
//! 0.2·random unit)), reflecting at the volume borders. A walker may branch
//! with a small per-step probability, spawning an independent walker at the
//! branch point. The continuous polylines are the exact graph; their dense
//! rasterization is the skeleton volume.

use super::{PhantomParams, Volume, VolumeKind};
use crate::skeleton::SkeletonGraph;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const PERSISTENCE: f64 = 0.8;

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

struct Walker {
    position: [f64; 3],
    direction: [f64; 3],
    steps_left: usize,
    /// Node where this walker's current edge started.
    from_node: usize,
    points: Vec<[f64; 3]>,
    /// Which vessel (for per-vessel radii).
    vessel: usize,
}

/// Grown centerlines: voxel skeleton, exact graph, and per-point vessel ids.
pub struct Centerlines {
    pub skeleton: Volume,
    pub graph: SkeletonGraph,
    /// Vessel id per graph edge.
    pub edge_vessel: Vec<usize>,
}

/// Rasterize a µm polyline into 26-connected voxels by dense sampling.
pub(crate) fn rasterize_polyline(points: &[[f64; 3]], volume: &mut Volume) {
    let (sx, sy, sz) = volume.spacing_um;
    let min_spacing = sx.min(sy).min(sz);
    let sample_step = min_spacing * 0.45;
    let (nx, ny, nz) = volume.dims;
    let clamp_voxel = |p: [f64; 3]| -> (usize, usize, usize) {
        let x = (p[0] / sx).round().clamp(0.0, (nx - 1) as f64) as usize;
        let y = (p[1] / sy).round().clamp(0.0, (ny - 1) as f64) as usize;
        let z = (p[2] / sz).round().clamp(0.0, (nz - 1) as f64) as usize;
        (x, y, z)
    };
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let len = (seg[0] * seg[0] + seg[1] * seg[1] + seg[2] * seg[2]).sqrt();
        let steps = (len / sample_step).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let p = [a[0] + seg[0] * t, a[1] + seg[1] * t, a[2] + seg[2] * t];
            let (x, y, z) = clamp_voxel(p);
            volume.set(x, y, z, 1.0);
        }
    }
    if points.len() == 1 {
        let (x, y, z) = clamp_voxel(points[0]);
        volume.set(x, y, z, 1.0);
    }
}

/// Grow `params.n_vessels` centerline trees through a volume of `dims`
/// voxels at `spacing` µm.
pub fn grow_centerlines(
    params: &PhantomParams,
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<Centerlines> {
    params.validate()?;
    let extent = [
        (dims.0.saturating_sub(1)) as f64 * spacing.0,
        (dims.1.saturating_sub(1)) as f64 * spacing.1,
        (dims.2.saturating_sub(1)) as f64 * spacing.2,
    ];
    if extent.iter().any(|&e| e < 2.0 * params.step_um) {
        return Err(Error::Validation(format!(
            "volume {dims:?} too small to grow a path with step {} um",
            params.step_um
        )));
    }

    let mut graph = SkeletonGraph::default();
    let mut edge_vessel = Vec::new();
    // Walk budget: enough to traverse the widest extent about 1.5 times.
    let max_extent = extent.iter().cloned().fold(0.0, f64::max);
    let budget = ((1.5 * max_extent) / params.step_um).ceil() as usize;
    let max_walkers = params.n_vessels * 8;
    let mut spawned = params.n_vessels;

    let mut queue: Vec<Walker> = (0..params.n_vessels)
        .map(|vessel| {
            let position = [
                rng.gen_range(0.1..0.9) * extent[0],
                rng.gen_range(0.1..0.9) * extent[1],
                rng.gen_range(0.1..0.9) * extent[2],
            ];
            let direction = random_unit(rng);
            let from_node = graph.add_node(position);
            Walker {
                position,
                direction,
                steps_left: budget,
                from_node,
                points: vec![position],
                vessel,
            }
        })
        .collect();

    let mut skeleton = Volume::zeros(dims, spacing, VolumeKind::Skeleton);

    while let Some(mut walker) = queue.pop() {
        while walker.steps_left > 0 {
            walker.steps_left -= 1;
            let jitter = random_unit(rng);
            let mut dir = normalize([
                PERSISTENCE * walker.direction[0] + (1.0 - PERSISTENCE) * jitter[0],
                PERSISTENCE * walker.direction[1] + (1.0 - PERSISTENCE) * jitter[1],
                PERSISTENCE * walker.direction[2] + (1.0 - PERSISTENCE) * jitter[2],
            ]);
            let mut next = [
                walker.position[0] + dir[0] * params.step_um,
                walker.position[1] + dir[1] * params.step_um,
                walker.position[2] + dir[2] * params.step_um,
            ];
            // Reflect at borders.
            for axis in 0..3 {
                if next[axis] < 0.0 {
                    next[axis] = -next[axis];
                    dir[axis] = -dir[axis];
                } else if next[axis] > extent[axis] {
                    next[axis] = 2.0 * extent[axis] - next[axis];
                    dir[axis] = -dir[axis];
                }
                next[axis] = next[axis].clamp(0.0, extent[axis]);
            }
            walker.position = next;
            walker.direction = dir;
            walker.points.push(next);

            if walker.steps_left > 0
                && spawned < max_walkers
                && rng.gen_bool(params.branch_prob)
            {
                // Close the current edge at a branch node and spawn a child.
                let branch_node = graph.add_node(next);
                graph.add_edge(walker.from_node, branch_node, walker.points.clone());
                edge_vessel.push(walker.vessel);
                spawned += 1;
                queue.push(Walker {
                    position: next,
                    direction: random_unit(rng),
                    steps_left: walker.steps_left,
                    from_node: branch_node,
                    points: vec![next],
                    vessel: walker.vessel,
                });
                walker.from_node = branch_node;
                walker.points = vec![next];
            }
        }
        let end_node = graph.add_node(walker.position);
        graph.add_edge(walker.from_node, end_node, walker.points.clone());
        edge_vessel.push(walker.vessel);
    }

    for edge in &graph.edges {
        rasterize_polyline(&edge.polyline_um, &mut skeleton);
    }
    graph.relabel_components();

    Ok(Centerlines {
        skeleton,
        graph,
        edge_vessel,
    })
}
