//! Skeleton post-processing: homotopic thinning, pruning, conversion between
//! voxel skeletons and graphs, and SWC text serialization.

mod graph;
mod prune;
mod simple_point;
mod swc;
mod thin;

pub use graph::to_graph;
pub use prune::{prune_graph, prune_volume};
pub use simple_point::{is_simple_26_6, is_simple_2d_8_4};
pub use swc::{parse_swc, write_swc, SwcSample};
pub use thin::{binarize_and_skeletonize, count_components_26, count_components_6_bg, is_unit_width, thin, thin_slice_2d};

/// A node: endpoint (degree 1), junction (degree >= 3), isolated voxel
/// (degree 0), or the anchor of an isolated loop (degree 2).
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonNode {
    pub position_um: [f64; 3],
    /// Incident edge endpoints; a self-loop contributes 2.
    pub degree: usize,
}

/// A chain between two nodes, with its polyline sampled in µm.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonEdge {
    pub a: usize,
    pub b: usize,
    /// Sample points from node `a` to node `b`, inclusive.
    pub polyline_um: Vec<[f64; 3]>,
    pub length_um: f64,
}

/// Node/edge representation of a centerline network in physical coordinates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkeletonGraph {
    pub nodes: Vec<SkeletonNode>,
    pub edges: Vec<SkeletonEdge>,
    /// Connected-component label per node.
    pub component: Vec<usize>,
}

pub(crate) fn polyline_length(points: &[[f64; 3]]) -> f64 {
    points
        .windows(2)
        .map(|w| {
            let dx = w[1][0] - w[0][0];
            let dy = w[1][1] - w[0][1];
            let dz = w[1][2] - w[0][2];
            (dx * dx + dy * dy + dz * dz).sqrt()
        })
        .sum()
}

impl SkeletonGraph {
    pub fn add_node(&mut self, position_um: [f64; 3]) -> usize {
        self.nodes.push(SkeletonNode {
            position_um,
            degree: 0,
        });
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize, polyline_um: Vec<[f64; 3]>) {
        let length_um = polyline_length(&polyline_um);
        self.nodes[a].degree += 1;
        self.nodes[b].degree += 1;
        self.edges.push(SkeletonEdge {
            a,
            b,
            polyline_um,
            length_um,
        });
    }

    /// Recompute connected-component labels (dense, ordered by lowest node).
    pub fn relabel_components(&mut self) {
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let root = find(parent, parent[i]);
                parent[i] = root;
            }
            parent[i]
        }
        for e in &self.edges {
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        for i in 0..n {
            let root = find(&mut parent, i);
            if label[root] == usize::MAX {
                label[root] = next;
                next += 1;
            }
            label[i] = label[root];
        }
        self.component = label;
    }

    pub fn component_count(&self) -> usize {
        self.component.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Positions of all endpoints and junctions (degree != 2).
    pub fn marker_positions(&self) -> Vec<[f64; 3]> {
        self.nodes
            .iter()
            .filter(|n| n.degree != 2)
            .map(|n| n.position_um)
            .collect()
    }

    pub fn total_length_um(&self) -> f64 {
        self.edges.iter().map(|e| e.length_um).sum()
    }
}
