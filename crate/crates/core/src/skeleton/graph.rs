//! Voxel skeleton → graph conversion.

use super::SkeletonGraph;
use crate::synth::Volume;
use crate::{Error, Result};

fn neighbors_sorted(dims: (usize, usize, usize), fg: &[bool], i: usize) -> Vec<usize> {
    let (nx, ny, nz) = dims;
    let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
    let mut out = Vec::new();
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
                    out.push(j);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

fn find_2x2_block(v: &Volume) -> Option<(usize, usize, usize)> {
    let (nx, ny, nz) = v.dims;
    let at = |x: usize, y: usize, z: usize| v.at(x, y, z) != 0.0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !at(x, y, z) {
                    continue;
                }
                if x + 1 < nx && y + 1 < ny && at(x + 1, y, z) && at(x, y + 1, z) && at(x + 1, y + 1, z) {
                    return Some((x, y, z));
                }
                if x + 1 < nx && z + 1 < nz && at(x + 1, y, z) && at(x, y, z + 1) && at(x + 1, y, z + 1) {
                    return Some((x, y, z));
                }
                if y + 1 < ny && z + 1 < nz && at(x, y + 1, z) && at(x, y, z + 1) && at(x, y + 1, z + 1) {
                    return Some((x, y, z));
                }
            }
        }
    }
    None
}

/// Convert a unit-width voxel skeleton into a [`SkeletonGraph`].
///
/// Voxels with a neighbor count other than 2 become nodes (endpoints,
/// junctions, isolated voxels); maximal chains of degree-2 voxels become
/// edges with anisotropic arc length; an isolated loop gets one artificial
/// degree-2 anchor node carrying a self-edge.
pub fn to_graph(skeleton: &Volume, spacing: (f64, f64, f64)) -> Result<SkeletonGraph> {
    if let Some((x, y, z)) = find_2x2_block(skeleton) {
        return Err(Error::NotThin(x, y, z));
    }
    let dims = skeleton.dims;
    let (nx, ny, _) = dims;
    let fg: Vec<bool> = skeleton.data.iter().map(|&v| v != 0.0).collect();
    let pos = |i: usize| -> [f64; 3] {
        let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
        [
            x as f64 * spacing.0,
            y as f64 * spacing.1,
            z as f64 * spacing.2,
        ]
    };

    let mut graph = SkeletonGraph::default();
    let mut node_of = vec![usize::MAX; fg.len()];
    let mut degree2 = Vec::new();
    for i in 0..fg.len() {
        if !fg[i] {
            continue;
        }
        let count = neighbors_sorted(dims, &fg, i).len();
        if count != 2 {
            node_of[i] = graph.add_node(pos(i));
        } else {
            degree2.push(i);
        }
    }

    let mut consumed = vec![false; fg.len()];
    // Chains and direct node-node contacts, from each node in index order.
    for i in 0..fg.len() {
        if !fg[i] || node_of[i] == usize::MAX {
            continue;
        }
        for w in neighbors_sorted(dims, &fg, i) {
            if node_of[w] != usize::MAX {
                if i < w {
                    graph.add_edge(node_of[i], node_of[w], vec![pos(i), pos(w)]);
                }
                continue;
            }
            if consumed[w] {
                continue;
            }
            // Walk the degree-2 chain starting at w.
            let mut polyline = vec![pos(i), pos(w)];
            let mut voxels = vec![w];
            consumed[w] = true;
            let mut prev = i;
            let mut cur = w;
            let end_node = loop {
                let nbrs = neighbors_sorted(dims, &fg, cur);
                debug_assert_eq!(nbrs.len(), 2);
                let next = if nbrs[0] == prev { nbrs[1] } else { nbrs[0] };
                polyline.push(pos(next));
                if node_of[next] != usize::MAX {
                    break node_of[next];
                }
                consumed[next] = true;
                voxels.push(next);
                prev = cur;
                cur = next;
            };
            let _ = voxels;
            graph.add_edge(node_of[i], end_node, polyline);
        }
    }

    // Remaining unconsumed degree-2 voxels form pure cycles; anchor each at
    // its lowest voxel.
    for &start in &degree2 {
        if consumed[start] || node_of[start] != usize::MAX {
            continue;
        }
        let anchor = graph.add_node(pos(start));
        node_of[start] = anchor;
        consumed[start] = true;
        let nbrs = neighbors_sorted(dims, &fg, start);
        let mut polyline = vec![pos(start)];
        let mut prev = start;
        let mut cur = nbrs[0];
        loop {
            polyline.push(pos(cur));
            if cur == start {
                break;
            }
            consumed[cur] = true;
            let nbrs = neighbors_sorted(dims, &fg, cur);
            let next = if nbrs[0] == prev { nbrs[1] } else { nbrs[0] };
            prev = cur;
            cur = next;
        }
        graph.add_edge(anchor, anchor, polyline);
    }

    graph.relabel_components();
    Ok(graph)
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

    #[test]
    fn straight_line_gives_two_nodes_one_edge() {
        let dims = (13, 3, 3);
        let line: Vec<(usize, usize, usize)> = (1..12).map(|x| (x, 1, 1)).collect();
        let v = volume_from(&line, dims);
        let g = to_graph(&v, v.spacing_um).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 1);
        assert!((g.edges[0].length_um - 10.0 * 0.83).abs() < 1e-12);
        assert_eq!(g.nodes[0].degree, 1);
        assert_eq!(g.component_count(), 1);
    }

    #[test]
    fn symmetric_y_gives_three_endpoints_one_junction() {
        let dims = (15, 15, 3);
        let mut points: Vec<(usize, usize, usize)> = Vec::new();
        for i in 0..=5usize {
            points.push((7, 7 - i, 1)); // north arm (includes junction voxel)
        }
        for i in 1..=5usize {
            points.push((7 - i, 7 + i, 1)); // southwest diagonal
            points.push((7 + i, 7 + i, 1)); // southeast diagonal
        }
        let v = volume_from(&points, dims);
        let g = to_graph(&v, v.spacing_um).unwrap();
        let endpoints = g.nodes.iter().filter(|n| n.degree == 1).count();
        let junctions = g.nodes.iter().filter(|n| n.degree >= 3).count();
        assert_eq!(endpoints, 3);
        assert_eq!(junctions, 1);
        assert_eq!(g.edges.len(), 3);
    }

    #[test]
    fn rasterized_circle_gives_anchor_and_self_edge() {
        let dims = (41, 41, 3);
        let r = 15.0f64;
        let mut points = Vec::new();
        for i in 0..2000 {
            let theta = i as f64 / 2000.0 * std::f64::consts::TAU;
            let x = (20.0 + r * theta.cos()).round() as usize;
            let y = (20.0 + r * theta.sin()).round() as usize;
            points.push((x, y, 1));
        }
        points.sort_unstable();
        points.dedup();
        let v = volume_from(&points, dims);
        // Thin the rasterized ring and prune the small nubs that endpoint
        // protection leaves behind.
        let t = super::super::thin(&v);
        let t = super::super::prune_volume(&t, 3.0);
        let g = to_graph(&t, t.spacing_um).unwrap();
        assert_eq!(g.nodes.len(), 1, "one anchor");
        assert_eq!(g.edges.len(), 1, "one self edge");
        assert_eq!(g.nodes[0].degree, 2);
        // A voxel-center polyline of an 8-connected digital circle is
        // systematically ~5.5% longer than the smooth curve (axis steps count
        // 1, diagonals sqrt(2)), so the tolerance sits just above that.
        let circumference = std::f64::consts::TAU * r * 0.83;
        let got = g.edges[0].length_um;
        assert!(
            (got - circumference).abs() / circumference < 0.065,
            "length {got} vs circumference {circumference}"
        );
    }

    #[test]
    fn non_thin_input_errors_with_instruction() {
        let dims = (4, 4, 3);
        let v = volume_from(&[(1, 1, 1), (2, 1, 1), (1, 2, 1), (2, 2, 1)], dims);
        let err = to_graph(&v, v.spacing_um).unwrap_err();
        assert!(err.to_string().contains("thin"), "{err}");
    }

    #[test]
    fn polyline_rasterization_reproduces_voxel_set() {
        // Grow a small thinned skeleton, convert, re-rasterize, compare.
        let params = crate::synth::PhantomParams {
            n_vessels: 2,
            ..Default::default()
        };
        let mut rng = crate::rng::derive(12, "roundtrip");
        let grown =
            crate::synth::grow_centerlines(&params, (32, 32, 8), DEFAULT_SPACING_UM, &mut rng)
                .unwrap();
        let thinned = super::super::thin(&grown.skeleton);
        let g = to_graph(&thinned, thinned.spacing_um).unwrap();

        let mut rebuilt = Volume::zeros(thinned.dims, thinned.spacing_um, VolumeKind::Skeleton);
        let set = |vol: &mut Volume, p: [f64; 3]| {
            let x = (p[0] / vol.spacing_um.0).round() as usize;
            let y = (p[1] / vol.spacing_um.1).round() as usize;
            let z = (p[2] / vol.spacing_um.2).round() as usize;
            vol.set(x, y, z, 1.0);
        };
        for n in &g.nodes {
            set(&mut rebuilt, n.position_um);
        }
        for e in &g.edges {
            for &p in &e.polyline_um {
                set(&mut rebuilt, p);
            }
        }
        assert_eq!(rebuilt.data, thinned.data);
    }

    #[test]
    fn isolated_voxel_becomes_degree_zero_node() {
        let v = volume_from(&[(2, 2, 1)], (5, 5, 3));
        let g = to_graph(&v, v.spacing_um).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(g.nodes[0].degree, 0);
        assert!(g.edges.is_empty());
    }
}
