//! Part-connectivity graph built from dilated voxel occupancies.
//!
//! Two parts are connected when their occupancies, each dilated by
//! `dilation_voxels`, share a voxel. The edge weight estimates penetration
//! depth: over the shared voxels, the largest value of
//! `min(depth_u, depth_v)`, where a voxel's depth is its city-block distance
//! to the outside of the part's dilated occupancy. Touching parts therefore
//! get weight 1, and deeper interpenetration gives larger weights.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Point, TriangleMesh};
use crate::voxel::{GridSpec, VoxelSet};

pub const DEFAULT_DILATION_VOXELS: usize = 1;
pub const MIN_RESOLUTION: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl Edge {
    pub fn key(&self) -> (usize, usize) {
        (self.u, self.v)
    }
}

/// Undirected weighted graph; vertex `i` stands for the part ids in
/// `vertex_parts[i]`. Edges are stored with `u < v`, sorted, one per pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactGraph {
    pub vertex_parts: Vec<Vec<usize>>,
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub dilation_voxels: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate_parts: Vec<usize>,
}

impl ContactGraph {
    /// Graph over `n` singleton vertices. Self-loops are dropped and parallel
    /// edges collapse to their maximum weight.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::Validation(format!("edge ({a}, {b}) out of range for {n} vertices")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Validation(format!("edge ({a}, {b}) has invalid weight {w}")));
            }
            if a == b {
                continue;
            }
            let e = map.entry((a.min(b), a.max(b))).or_insert(w);
            *e = e.max(w);
        }
        Ok(ContactGraph {
            vertex_parts: (0..n).map(|i| vec![i]).collect(),
            edges: map.into_iter().map(|((u, v), weight)| Edge { u, v, weight }).collect(),
            dilation_voxels: 0,
            degenerate_parts: Vec::new(),
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_parts.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Checks the structural invariants (ranges, ordering, weights).
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vertices();
        let mut prev: Option<(usize, usize)> = None;
        for e in &self.edges {
            if e.u >= e.v || e.v >= n {
                return Err(Error::Validation(format!("bad edge ({}, {})", e.u, e.v)));
            }
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(Error::Validation(format!("edge ({}, {}) has invalid weight", e.u, e.v)));
            }
            if prev.is_some_and(|p| p >= e.key()) {
                return Err(Error::Validation("edges must be sorted and unique".into()));
            }
            prev = Some(e.key());
        }
        Ok(())
    }

    /// Sorted adjacency lists of `(neighbour, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.num_vertices()];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, i));
            adj[e.v].push((e.u, i));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// BFS two-coloring rooted at the smallest vertex of each component.
    /// Returns the colors and the indices of edges whose ends got equal colors.
    pub fn bfs_coloring(&self) -> (Vec<u8>, Vec<usize>) {
        let adj = self.adjacency();
        let n = self.num_vertices();
        let mut color = vec![u8::MAX; n];
        let mut queue = VecDeque::new();
        for root in 0..n {
            if color[root] != u8::MAX {
                continue;
            }
            color[root] = 0;
            queue.push_back(root);
            while let Some(x) = queue.pop_front() {
                for &(y, _) in &adj[x] {
                    if color[y] == u8::MAX {
                        color[y] = 1 - color[x];
                        queue.push_back(y);
                    }
                }
            }
        }
        let conflicts = self
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| color[e.u] == color[e.v])
            .map(|(i, _)| i)
            .collect();
        (color, conflicts)
    }

    pub fn is_bipartite(&self) -> bool {
        self.bfs_coloring().1.is_empty()
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let n = self.num_vertices();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut comp = vec![root];
            let mut stack = vec![root];
            while let Some(x) = stack.pop() {
                for &(y, _) in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        comp.push(y);
                        stack.push(y);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: ContactGraph = serde_json::from_str(s)?;
        g.validate()?;
        Ok(g)
    }

    /// Graphviz rendering; vertices are labelled with their part ids.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph contacts {\n");
        for (i, parts) in self.vertex_parts.iter().enumerate() {
            let label: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
            let _ = writeln!(s, "  {i} [label=\"{}\"];", label.join(","));
        }
        for e in &self.edges {
            let _ = writeln!(s, "  {} -- {} [label=\"{}\"];", e.u, e.v, e.weight);
        }
        s.push_str("}\n");
        s
    }
}

fn triangles(mesh: &TriangleMesh) -> Vec<[Point; 3]> {
    (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect()
}

/// Solid voxel occupancy of each part at `resolution`.
pub fn voxelize_parts(parts: &[TriangleMesh], resolution: usize) -> Vec<VoxelSet> {
    let grid = GridSpec::new(resolution);
    parts
        .par_iter()
        .map(|p| VoxelSet::from_triangles(&grid, &triangles(p)))
        .collect()
}

struct Dilated {
    set: VoxelSet,
    depth: Vec<u32>,
}

/// Contact graph over pre-computed occupancies (one vertex per occupancy).
pub fn contact_graph_from_voxels(occupancies: &[VoxelSet], dilation_voxels: usize) -> ContactGraph {
    let dilated: Vec<Dilated> = occupancies
        .par_iter()
        .map(|o| {
            let set = o.dilate(dilation_voxels);
            let depth = set.depth_map();
            Dilated { set, depth }
        })
        .collect();
    let n = occupancies.len();
    let degenerate: Vec<usize> = (0..n).filter(|&i| occupancies[i].is_empty()).collect();
    for &i in &degenerate {
        log::warn!("part {i} occupies no voxels at this resolution; it gets no contacts");
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|&(u, v)| {
            !occupancies[u].is_empty()
                && !occupancies[v].is_empty()
                && dilated[u].set.region.intersect(&dilated[v].set.region).is_some()
        })
        .collect();
    let edges: Vec<Edge> = pairs
        .par_iter()
        .filter_map(|&(u, v)| overlap_weight(&dilated[u], &dilated[v]).map(|w| Edge { u, v, weight: w as f64 }))
        .collect();
    ContactGraph {
        vertex_parts: (0..n).map(|i| vec![i]).collect(),
        edges,
        dilation_voxels,
        degenerate_parts: degenerate,
    }
}

fn overlap_weight(a: &Dilated, b: &Dilated) -> Option<u32> {
    let common = a.set.region.intersect(&b.set.region)?;
    let mut best: Option<u32> = None;
    for i in 0..common.len() {
        let g = common.global(i);
        let ia = a.set.region.index_of_global(g).unwrap();
        let ib = b.set.region.index_of_global(g).unwrap();
        if a.set.bits.get(ia) && b.set.bits.get(ib) {
            let w = a.depth[ia].min(b.depth[ib]);
            best = Some(best.map_or(w, |x| x.max(w)));
        }
    }
    best
}

/// Voxelizes every part and connects contacting pairs.
pub fn build_contact_graph(parts: &[TriangleMesh], resolution: usize, dilation_voxels: usize) -> Result<ContactGraph> {
    if parts.is_empty() {
        return Err(Error::Validation("contact graph needs at least one part".into()));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::Resolution(resolution));
    }
    let occ = voxelize_parts(parts, resolution);
    Ok(contact_graph_from_voxels(&occ, dilation_voxels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::box_mesh;

    fn cube(lo: [f64; 3], hi: [f64; 3]) -> TriangleMesh {
        box_mesh(Point::from(lo), Point::from(hi))
    }

    const N: usize = 32;
    const H: f64 = 2.0 / N as f64;

    #[test]
    fn gap_of_three_voxels_has_no_edge() {
        let a = cube([-8.0 * H, -4.0 * H, -4.0 * H], [0.0, 4.0 * H, 4.0 * H]);
        let b = cube([3.0 * H, -4.0 * H, -4.0 * H], [11.0 * H, 4.0 * H, 4.0 * H]);
        let g = build_contact_graph(&[a, b], N, 1).unwrap();
        assert!(g.edges.is_empty());
    }

    #[test]
    fn shared_face_is_tangential() {
        let a = cube([-8.0 * H, -4.0 * H, -4.0 * H], [0.0, 4.0 * H, 4.0 * H]);
        let b = cube([0.0, -4.0 * H, -4.0 * H], [8.0 * H, 4.0 * H, 4.0 * H]);
        let g = build_contact_graph(&[a, b], N, 1).unwrap();
        assert_eq!(g.edges.len(), 1);
        let w = g.edges[0].weight;
        assert!(w > 0.0 && w <= 1.0, "weight {w}");
    }

    #[test]
    fn nested_cube_penetrates_deeply() {
        let a = cube([-12.0 * H; 3], [12.0 * H; 3]);
        let b = cube([-4.0 * H; 3], [4.0 * H; 3]);
        let g = build_contact_graph(&[a, b], N, 1).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert!(g.edges[0].weight >= 4.0, "weight {}", g.edges[0].weight);
    }

    #[test]
    fn weight_never_grows_as_cubes_slide_apart() {
        let mut last = f64::INFINITY;
        for shift in 0..16 {
            let x = shift as f64 * H;
            let a = cube([-6.0 * H, -3.0 * H, -3.0 * H], [6.0 * H, 3.0 * H, 3.0 * H]);
            let b = cube([-6.0 * H + x, -3.0 * H, -3.0 * H], [6.0 * H + x, 3.0 * H, 3.0 * H]);
            let g = build_contact_graph(&[a, b], N, 1).unwrap();
            let w = g.edges.first().map_or(0.0, |e| e.weight);
            assert!(w <= last, "shift {shift}: {w} > {last}");
            last = w;
        }
        assert_eq!(last, 0.0);
    }

    #[test]
    fn from_edges_normalizes() {
        let g = ContactGraph::from_edges(3, [(1, 0, 2.0), (0, 1, 5.0), (2, 2, 1.0)]).unwrap();
        assert_eq!(g.edges, vec![Edge { u: 0, v: 1, weight: 5.0 }]);
        assert!(ContactGraph::from_edges(2, [(0, 1, -1.0)]).is_err());
        assert!(ContactGraph::from_edges(2, [(0, 1, f64::NAN)]).is_err());
    }

    #[test]
    fn resolution_floor() {
        let a = cube([-0.5; 3], [0.5; 3]);
        assert!(matches!(build_contact_graph(&[a], 8, 1), Err(Error::Resolution(8))));
    }

    #[test]
    fn json_and_dot() {
        let g = ContactGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 3.0)]).unwrap();
        let back = ContactGraph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
        assert!(g.to_dot().contains("1 -- 2"));
    }
}
