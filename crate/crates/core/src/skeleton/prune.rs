//! Pruning of short terminal branches.

use super::{polyline_length, SkeletonGraph};
use crate::synth::Volume;

fn neighbors_26(
    dims: (usize, usize, usize),
    i: usize,
) -> impl Iterator<Item = usize> {
    let (nx, ny, nz) = dims;
    let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
    let mut out = Vec::with_capacity(26);
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
                out.push((cz as usize * ny + cy as usize) * nx + cx as usize);
            }
        }
    }
    out.into_iter()
}

fn step_um(dims: (usize, usize, usize), spacing: (f64, f64, f64), a: usize, b: usize) -> f64 {
    let (nx, ny, _) = dims;
    let pa = (a % nx, (a / nx) % ny, a / (nx * ny));
    let pb = (b % nx, (b / nx) % ny, b / (nx * ny));
    let dx = (pa.0 as f64 - pb.0 as f64) * spacing.0;
    let dy = (pa.1 as f64 - pb.1 as f64) * spacing.1;
    let dz = (pa.2 as f64 - pb.2 as f64) * spacing.2;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Remove terminal branches shorter than `min_branch_um` from a unit-width
/// voxel skeleton, iterating to a fixpoint. A connected component that is a
/// single endpoint-to-endpoint path is never deleted.
pub fn prune_volume(skeleton: &Volume, min_branch_um: f64) -> Volume {
    let mut out = skeleton.clone();
    if min_branch_um <= 0.0 {
        return out;
    }
    let dims = out.dims;
    let spacing = out.spacing_um;
    let mut fg: Vec<bool> = out.data.iter().map(|&v| v != 0.0).collect();
    let mut any_deleted = false;

    let degree = |fg: &[bool], i: usize| neighbors_26(dims, i).filter(|&j| fg[j]).count();

    loop {
        let endpoints: Vec<usize> = (0..fg.len())
            .filter(|&i| fg[i] && degree(&fg, i) == 1)
            .collect();
        let mut changed = false;
        for e in endpoints {
            if !fg[e] || degree(&fg, e) != 1 {
                continue;
            }
            // Walk from the endpoint toward the first junction. The chain
            // set guards against diagonal shortcuts looping the walk back.
            let mut chain = vec![e];
            let mut cur = e;
            let mut length = 0.0;
            let spur: Option<Vec<usize>> = loop {
                let candidates: Vec<usize> = neighbors_26(dims, cur)
                    .filter(|&j| fg[j] && !chain.contains(&j))
                    .collect();
                let Some(&next) = candidates.first() else {
                    break None; // reached the other endpoint: keep last path
                };
                if candidates.len() > 1 {
                    break None; // ambiguous branching at cur: keep
                }
                length += step_um(dims, spacing, cur, next);
                if degree(&fg, next) >= 3 {
                    // `next` is the junction; the spur is everything before it.
                    break (length < min_branch_um).then_some(chain.clone());
                }
                if length >= min_branch_um {
                    break None;
                }
                chain.push(next);
                cur = next;
            };
            if let Some(spur) = spur {
                for v in spur {
                    fg[v] = false;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
        any_deleted = true;
    }

    for (o, f) in out.data.iter_mut().zip(&fg) {
        *o = f64::from(*f);
    }
    if any_deleted {
        // Spur removal can leave a redundant voxel inside a junction
        // cluster; one homotopic thinning pass clears it.
        out = super::thin::thin(&out);
    }
    out
}

/// Graph-side pruning: drop terminal edges shorter than `min_branch_um`,
/// then merge through-nodes left with degree 2, repeating to a fixpoint.
/// Nodes orphaned by edge removal are dropped.
pub fn prune_graph(graph: &SkeletonGraph, min_branch_um: f64) -> SkeletonGraph {
    let mut g = graph.clone();
    if min_branch_um <= 0.0 {
        return g;
    }
    let originally_isolated: Vec<bool> = graph.nodes.iter().map(|n| n.degree == 0).collect();
    loop {
        let mut degree = vec![0usize; g.nodes.len()];
        for e in &g.edges {
            degree[e.a] += 1;
            degree[e.b] += 1;
        }
        // Component edge counts to protect last paths.
        g.relabel_components();
        let mut component_edges = vec![0usize; g.component_count()];
        for e in &g.edges {
            component_edges[g.component[e.a]] += 1;
        }
        let victim = g.edges.iter().position(|e| {
            e.length_um < min_branch_um
                && e.a != e.b
                && (degree[e.a] == 1) != (degree[e.b] == 1) // strictly terminal, not an isolated path
                && component_edges[g.component[e.a]] > 1
        });
        let Some(victim) = victim else {
            break;
        };
        let removed = g.edges.remove(victim);
        g.nodes[removed.a].degree -= 1;
        g.nodes[removed.b].degree -= 1;

        // Merge any through-node this created (degree exactly 2, two
        // distinct incident edges).
        loop {
            let Some(node) = (0..g.nodes.len()).find(|&n| {
                g.nodes[n].degree == 2
                    && g.edges.iter().filter(|e| e.a == n || e.b == n).count() == 2
                    && !g.edges.iter().any(|e| e.a == n && e.b == n)
            }) else {
                break;
            };
            let incident: Vec<usize> = g
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.a == node || e.b == node)
                .map(|(i, _)| i)
                .collect();
            let (i1, i2) = (incident[0], incident[1]);
            let e2 = g.edges.remove(i2);
            let e1 = g.edges.remove(i1);
            // Orient both polylines so they run through `node`.
            let mut first = if e1.b == node {
                e1.polyline_um.clone()
            } else {
                let mut p = e1.polyline_um.clone();
                p.reverse();
                p
            };
            let second = if e2.a == node {
                e2.polyline_um.clone()
            } else {
                let mut p = e2.polyline_um.clone();
                p.reverse();
                p
            };
            let start = if e1.b == node { e1.a } else { e1.b };
            let end = if e2.a == node { e2.b } else { e2.a };
            first.extend_from_slice(&second[1..]);
            let length_um = polyline_length(&first);
            g.nodes[node].degree = 0;
            g.edges.push(super::SkeletonEdge {
                a: start,
                b: end,
                polyline_um: first,
                length_um,
            });
        }
    }

    // Compact away nodes orphaned by pruning (keep genuinely isolated ones).
    let mut remap = vec![usize::MAX; g.nodes.len()];
    let mut kept = SkeletonGraph::default();
    for (i, node) in g.nodes.iter().enumerate() {
        if node.degree > 0 || originally_isolated.get(i).copied().unwrap_or(false) {
            remap[i] = kept.add_node(node.position_um);
            kept.nodes[remap[i]].degree = node.degree;
        }
    }
    for e in g.edges {
        kept.edges.push(super::SkeletonEdge {
            a: remap[e.a],
            b: remap[e.b],
            polyline_um: e.polyline_um,
            length_um: e.length_um,
        });
    }
    kept.relabel_components();
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{VolumeKind, DEFAULT_SPACING_UM};

    fn volume_from(points: &[(usize, usize, usize)], dims: (usize, usize, usize)) -> Volume {
        let mut v = Volume::zeros(dims, DEFAULT_SPACING_UM, VolumeKind::Skeleton);
        for &(x, y, z) in points {
            v.set(x, y, z, 1.0);
        }
        v
    }

    /// Y shape: two long arms and one short spur meeting at a junction.
    fn y_shape() -> (Volume, Vec<(usize, usize, usize)>) {
        let dims = (81, 81, 3);
        let mut points = Vec::new();
        // Long arm west (about 50 um at 0.83 um/voxel = 61 voxels).
        for i in 1..=61usize {
            points.push((40 - i.min(39), 40, 1));
        }
        // Long arm east.
        for i in 1..=40usize {
            points.push((40 + i, 40, 1));
        }
        // Short spur north: 6 voxels ~ 5 um.
        let spur: Vec<(usize, usize, usize)> = (1..=6).map(|i| (40, 40 - i, 1)).collect();
        points.push((40, 40, 1));
        points.extend(spur.iter().copied());
        // Dedupe (the west arm clamps at x=1).
        points.sort_unstable();
        points.dedup();
        (volume_from(&points, dims), spur)
    }

    #[test]
    fn short_spur_removed_long_arms_kept() {
        let (v, spur) = y_shape();
        let pruned = prune_volume(&v, 10.0);
        for &(x, y, z) in &spur {
            assert_eq!(pruned.at(x, y, z), 0.0, "spur voxel ({x},{y},{z})");
        }
        // Junction and arms survive.
        assert_eq!(pruned.at(40, 40, 1), 1.0);
        assert_eq!(pruned.at(50, 40, 1), 1.0);
        assert_eq!(pruned.at(30, 40, 1), 1.0);
        assert!(pruned.count_foreground() >= v.count_foreground() - spur.len() - 1);
    }

    #[test]
    fn threshold_zero_is_identity() {
        let (v, _) = y_shape();
        assert_eq!(prune_volume(&v, 0.0).data, v.data);
    }

    #[test]
    fn prune_is_idempotent_after_first_application() {
        let (v, _) = y_shape();
        let once = prune_volume(&v, 10.0);
        let twice = prune_volume(&once, 10.0);
        assert_eq!(once.data, twice.data);
    }

    #[test]
    fn whole_component_single_path_survives() {
        let dims = (9, 3, 3);
        let line: Vec<(usize, usize, usize)> = (2..7).map(|x| (x, 1, 1)).collect();
        let v = volume_from(&line, dims);
        // Path is ~3.3 um long, threshold is much larger; still kept.
        let pruned = prune_volume(&v, 50.0);
        assert_eq!(pruned.data, v.data);
    }

    #[test]
    fn graph_prune_removes_spur_and_merges_through_node() {
        let mut g = SkeletonGraph::default();
        let a = g.add_node([0.0, 0.0, 0.0]);
        let j = g.add_node([50.0, 0.0, 0.0]);
        let b = g.add_node([100.0, 0.0, 0.0]);
        let s = g.add_node([50.0, 5.0, 0.0]);
        g.add_edge(a, j, vec![[0.0, 0.0, 0.0], [50.0, 0.0, 0.0]]);
        g.add_edge(j, b, vec![[50.0, 0.0, 0.0], [100.0, 0.0, 0.0]]);
        g.add_edge(j, s, vec![[50.0, 0.0, 0.0], [50.0, 5.0, 0.0]]);
        g.relabel_components();

        let pruned = prune_graph(&g, 10.0);
        assert_eq!(pruned.edges.len(), 1);
        let edge = &pruned.edges[0];
        assert!((edge.length_um - 100.0).abs() < 1e-9);
        // Prune never increases edge count, never changes component count.
        assert_eq!(pruned.component_count(), g.component_count());
        // Idempotent.
        let again = prune_graph(&pruned, 10.0);
        assert_eq!(again.edges.len(), 1);
    }

    #[test]
    fn graph_prune_keeps_isolated_short_path() {
        let mut g = SkeletonGraph::default();
        let a = g.add_node([0.0, 0.0, 0.0]);
        let b = g.add_node([3.0, 0.0, 0.0]);
        g.add_edge(a, b, vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]]);
        g.relabel_components();
        let pruned = prune_graph(&g, 10.0);
        assert_eq!(pruned.edges.len(), 1);
    }
}
