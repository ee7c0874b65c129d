//! Deterministic synthetic meshes and graphs used by tests, docs and the
//! `fixtures emit` command.
//!
//! Mesh fixtures are built directly in the normalized frame: the longest
//! extent of the whole object is 1.9 and it is centered, so loading them
//! back does not rescale anything.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contact_graph::ContactGraph;
use crate::mesh::{Point, TriangleMesh, Vec3};

/// What to generate. Lengths that mention voxels refer to `resolution`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureSpec {
    /// Five boxes in a row, neighbours overlapping by two voxels.
    BoxesChain { resolution: usize },
    /// Three boxes, pairwise overlapping by two voxels.
    BoxesK3 { resolution: usize },
    /// Four boxes, pairwise overlapping by two voxels.
    BoxesK4 { resolution: usize },
    /// A large cube containing a cube of half-width four voxels.
    NestedCubes { resolution: usize },
    /// Axis-aligned cube with its +z face removed.
    OpenBox,
    /// Sphere split along the equator into two hemispheres sharing the seam.
    SeamSplitSphere { radius: f64 },
    /// Icosphere fine enough for a chord error below 1e-3.
    AnalyticSphere { radius: f64 },
    Torus { major: f64, minor: f64 },
    /// Random boxes; overlapping ones become contacts.
    RandomBoxes { parts: usize, seed: u64 },
    /// Erdos-Renyi graph with uniform weights in `[0.1, 10)`.
    RandomGraph { n: usize, p: f64, seed: u64 },
}

#[derive(Clone, Debug)]
pub enum Fixture {
    /// Object made of parts (one mesh per intended part).
    Parts(Vec<TriangleMesh>),
    Graph(ContactGraph),
}

impl Fixture {
    pub fn parts(self) -> Vec<TriangleMesh> {
        match self {
            Fixture::Parts(p) => p,
            Fixture::Graph(_) => panic!("graph fixture has no meshes"),
        }
    }

    pub fn graph(self) -> ContactGraph {
        match self {
            Fixture::Graph(g) => g,
            Fixture::Parts(_) => panic!("mesh fixture has no graph"),
        }
    }
}

pub fn generate_fixture(spec: &FixtureSpec) -> Fixture {
    match *spec {
        FixtureSpec::BoxesChain { resolution } => Fixture::Parts(boxes_chain(5, resolution)),
        FixtureSpec::BoxesK3 { resolution } => Fixture::Parts(quadrant_boxes(3, resolution)),
        FixtureSpec::BoxesK4 { resolution } => Fixture::Parts(quadrant_boxes(4, resolution)),
        FixtureSpec::NestedCubes { resolution } => Fixture::Parts(nested_cubes(resolution)),
        FixtureSpec::OpenBox => Fixture::Parts(vec![open_box()]),
        FixtureSpec::SeamSplitSphere { radius } => Fixture::Parts(seam_split_sphere(radius, 48, 24).to_vec()),
        FixtureSpec::AnalyticSphere { radius } => Fixture::Parts(vec![analytic_sphere(radius)]),
        FixtureSpec::Torus { major, minor } => Fixture::Parts(vec![torus(major, minor, 96, 48)]),
        FixtureSpec::RandomBoxes { parts, seed } => Fixture::Parts(random_boxes(parts, seed)),
        FixtureSpec::RandomGraph { n, p, seed } => Fixture::Graph(random_graph(n, p, seed)),
    }
}

impl FixtureSpec {
    /// Short name used on the command line and for file names.
    pub fn kind(&self) -> &'static str {
        match self {
            FixtureSpec::BoxesChain { .. } => "boxes_chain",
            FixtureSpec::BoxesK3 { .. } => "boxes_K3",
            FixtureSpec::BoxesK4 { .. } => "boxes_K4",
            FixtureSpec::NestedCubes { .. } => "nested_cubes",
            FixtureSpec::OpenBox => "open_box",
            FixtureSpec::SeamSplitSphere { .. } => "seam_split_sphere",
            FixtureSpec::AnalyticSphere { .. } => "analytic_sphere",
            FixtureSpec::Torus { .. } => "torus",
            FixtureSpec::RandomBoxes { .. } => "random_boxes",
            FixtureSpec::RandomGraph { .. } => "random_graph",
        }
    }

    /// Spec for `kind` with default parameters at the given resolution and seed.
    pub fn named(kind: &str, resolution: usize, seed: u64) -> Option<Self> {
        Some(match kind.to_ascii_lowercase().as_str() {
            "boxes_chain" => FixtureSpec::BoxesChain { resolution },
            "boxes_k3" => FixtureSpec::BoxesK3 { resolution },
            "boxes_k4" => FixtureSpec::BoxesK4 { resolution },
            "nested_cubes" => FixtureSpec::NestedCubes { resolution },
            "open_box" => FixtureSpec::OpenBox,
            "seam_split_sphere" => FixtureSpec::SeamSplitSphere { radius: 0.5 },
            "analytic_sphere" => FixtureSpec::AnalyticSphere { radius: 0.5 },
            "torus" => FixtureSpec::Torus { major: 0.6, minor: 0.25 },
            "random_boxes" => FixtureSpec::RandomBoxes { parts: 10, seed },
            "random_graph" => FixtureSpec::RandomGraph { n: 6, p: 0.5, seed },
            _ => return None,
        })
    }

    pub const KINDS: [&'static str; 10] = [
        "boxes_chain",
        "boxes_K3",
        "boxes_K4",
        "nested_cubes",
        "open_box",
        "seam_split_sphere",
        "analytic_sphere",
        "torus",
        "random_boxes",
        "random_graph",
    ];
}

/// Writes a fixture to `path`. Mesh fixtures go to OBJ (all parts in one
/// node, so they separate as connected components) or, for `.glb` paths, to
/// one scene node per part. Graph fixtures are written as JSON.
pub fn write_fixture(spec: &FixtureSpec, path: &std::path::Path) -> crate::Result<()> {
    use crate::mesh_io::{write_glb, write_obj_groups, SceneNode};
    match generate_fixture(spec) {
        Fixture::Graph(g) => std::fs::write(path, g.to_json()?).map_err(|e| crate::Error::io(path, e)),
        Fixture::Parts(parts) => {
            let glb = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("glb"));
            let names: Vec<String> = (0..parts.len()).map(|i| format!("part{i}")).collect();
            if glb {
                let nodes: Vec<SceneNode> = parts
                    .into_iter()
                    .zip(names)
                    .map(|(mesh, name)| SceneNode { name, mesh })
                    .collect();
                write_glb(&nodes, path)
            } else {
                let groups: Vec<(&str, &TriangleMesh)> = names.iter().map(String::as_str).zip(parts.iter()).collect();
                write_obj_groups(&groups, path)
            }
        }
    }
}

/// Closed box with outward-facing triangles.
pub fn box_mesh(min: Point, max: Point) -> TriangleMesh {
    let c = |i: usize| {
        Point::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        )
    };
    let positions = (0..8).map(c).collect();
    let faces = vec![
        [0, 2, 3],
        [0, 3, 1], // -z
        [4, 5, 7],
        [4, 7, 6], // +z
        [0, 1, 5],
        [0, 5, 4], // -y
        [2, 6, 7],
        [2, 7, 3], // +y
        [0, 4, 6],
        [0, 6, 2], // -x
        [1, 3, 7],
        [1, 7, 5], // +x
    ];
    TriangleMesh::new(positions, faces)
}

/// The unit-ish cube used by the boundary-loop and repair examples, minus its +z face.
pub fn open_box() -> TriangleMesh {
    let mut m = box_mesh(Point::new(-0.5, -0.5, -0.5), Point::new(0.5, 0.5, 0.5));
    m.faces.drain(2..4);
    m
}

fn voxel(resolution: usize) -> f64 {
    2.0 / resolution as f64
}

pub fn boxes_chain(count: usize, resolution: usize) -> Vec<TriangleMesh> {
    let overlap = 2.0 * voxel(resolution);
    let width = (1.9 + (count - 1) as f64 * overlap) / count as f64;
    (0..count)
        .map(|i| {
            let x0 = -0.95 + i as f64 * (width - overlap);
            box_mesh(Point::new(x0, -0.25, -0.25), Point::new(x0 + width, 0.25, 0.25))
        })
        .collect()
}

/// Quadrant boxes around the z axis; every pair overlaps near the axis.
pub fn quadrant_boxes(count: usize, resolution: usize) -> Vec<TriangleMesh> {
    let v = voxel(resolution);
    let quadrant = |sx: f64, sy: f64| {
        let (x0, x1) = if sx < 0.0 { (-0.95, v) } else { (-v, 0.95) };
        let (y0, y1) = if sy < 0.0 { (-0.95, v) } else { (-v, 0.95) };
        box_mesh(Point::new(x0, y0, -0.3), Point::new(x1, y1, 0.3))
    };
    [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)]
        .into_iter()
        .take(count)
        .map(|(sx, sy)| quadrant(sx, sy))
        .collect()
}

pub fn nested_cubes(resolution: usize) -> Vec<TriangleMesh> {
    let half = 4.0 * voxel(resolution);
    vec![
        box_mesh(Point::new(-0.95, -0.95, -0.95), Point::new(0.95, 0.95, 0.95)),
        box_mesh(Point::new(-half, -half, -half), Point::new(half, half, half)),
    ]
}

pub fn random_boxes(parts: usize, seed: u64) -> Vec<TriangleMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boxes: Vec<(Point, Point)> = (0..parts)
        .map(|_| {
            let c = Point::new(
                rng.random_range(-0.6..0.6),
                rng.random_range(-0.6..0.6),
                rng.random_range(-0.6..0.6),
            );
            let h = Vec3::new(
                rng.random_range(0.08..0.3),
                rng.random_range(0.08..0.3),
                rng.random_range(0.08..0.3),
            );
            (c - h, c + h)
        })
        .collect();
    // place the scene in the normalized frame
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    for (a, b) in &boxes {
        lo = lo.inf(a);
        hi = hi.sup(b);
    }
    let center = nalgebra::center(&lo, &hi);
    let scale = 1.9 / (hi - lo).max();
    for (a, b) in &mut boxes {
        *a = Point::from((*a - center) * scale);
        *b = Point::from((*b - center) * scale);
    }
    boxes.into_iter().map(|(a, b)| box_mesh(a, b)).collect()
}

/// Latitude/longitude sphere split at the equator. Both halves compute the
/// equator ring with the same expression, so seam positions are identical.
pub fn seam_split_sphere(radius: f64, segments: usize, rings: usize) -> [TriangleMesh; 2] {
    let half = rings / 2;
    let point = |ring: usize, seg: usize| {
        let theta = PI * ring as f64 / rings as f64;
        let phi = 2.0 * PI * (seg % segments) as f64 / segments as f64;
        Point::new(radius * theta.sin() * phi.cos(), radius * theta.sin() * phi.sin(), radius * theta.cos())
    };
    let hemisphere = |r0: usize, r1: usize| {
        let mut positions = Vec::new();
        let mut faces = Vec::new();
        let mut index = std::collections::HashMap::new();
        let mut vid = |ring: usize, seg: usize, positions: &mut Vec<Point>| -> u32 {
            let key = if ring == 0 || ring == rings { (ring, 0) } else { (ring, seg % segments) };
            *index.entry(key).or_insert_with(|| {
                positions.push(point(key.0, key.1));
                (positions.len() - 1) as u32
            })
        };
        for ring in r0..r1 {
            for seg in 0..segments {
                let a = vid(ring, seg, &mut positions);
                let b = vid(ring + 1, seg, &mut positions);
                let c = vid(ring + 1, seg + 1, &mut positions);
                let d = vid(ring, seg + 1, &mut positions);
                if ring != 0 {
                    faces.push([a, b, d]);
                }
                if ring + 1 != rings {
                    faces.push([d, b, c]);
                }
            }
        }
        TriangleMesh::new(positions, faces)
    };
    [hemisphere(0, half), hemisphere(half, rings)]
}

/// Subdivided icosahedron projected onto a sphere, outward oriented.
pub fn icosphere(center: Point, radius: f64, subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vec3::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid = std::collections::HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) / 2.0).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let positions = verts.into_iter().map(|v| center + v * radius).collect();
    TriangleMesh::new(positions, faces)
}

/// Largest distance between the sphere and the tessellation (at face interiors).
pub fn icosphere_chord_error(mesh: &TriangleMesh, center: Point, radius: f64) -> f64 {
    (0..mesh.faces.len())
        .map(|f| {
            let t = mesh.triangle(f);
            let q = crate::mesh::closest_point_on_triangle(&center, &t[0], &t[1], &t[2]);
            radius - (q - center).norm()
        })
        .fold(0.0, f64::max)
}

/// Coarsest icosphere whose chord error is below 1e-3.
pub fn analytic_sphere(radius: f64) -> TriangleMesh {
    let mut level = 0;
    loop {
        let m = icosphere(Point::origin(), radius, level);
        if icosphere_chord_error(&m, Point::origin(), radius) < 1e-3 {
            return m;
        }
        level += 1;
    }
}

/// Torus around the z axis.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriangleMesh {
    let mut positions = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let r = major + minor * v.cos();
            positions.push(Point::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let id = |i: usize, j: usize| ((i % nu) * nv + (j % nv)) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(positions, faces)
}

pub fn random_graph(n: usize, p: f64, seed: u64) -> ContactGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b, rng.random_range(0.1..10.0)));
            }
        }
    }
    ContactGraph::from_edges(n, edges).expect("generated edges are valid")
}

/// Connected graph with `n` vertices and about `m` edges: a random spanning
/// tree plus random extra pairs.
pub fn random_connected_graph(n: usize, m: usize, seed: u64) -> ContactGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut present = std::collections::HashSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        present.insert((u, v));
        edges.push((u, v, rng.random_range(0.1..10.0)));
    }
    let max_edges = n * (n - 1) / 2;
    let target = m.min(max_edges);
    while edges.len() < target {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if present.insert(key) {
            edges.push((key.0, key.1, rng.random_range(0.1..10.0)));
        }
    }
    ContactGraph::from_edges(n, edges).expect("generated edges are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_is_closed_and_outward() {
        let m = box_mesh(Point::new(0.0, 0.0, 0.0), Point::new(1.0, 2.0, 3.0));
        assert_eq!(m.edge_defects(), (0, 0));
        assert!((m.signed_volume() - 6.0).abs() < 1e-12);
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn analytic_sphere_chord_error() {
        let m = analytic_sphere(0.5);
        let err = icosphere_chord_error(&m, Point::origin(), 0.5);
        assert!(err < 1e-3 && err > 0.0);
        assert_eq!(m.faces.len(), 20 * 4usize.pow(4));
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn torus_topology() {
        let m = torus(0.5, 0.2, 32, 16);
        assert_eq!(m.euler_characteristic(), 0);
        assert_eq!(m.edge_defects(), (0, 0));
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn seam_split_halves_are_open_but_close_together() {
        let [a, b] = seam_split_sphere(0.5, 24, 12);
        assert!(a.edge_defects().0 > 0);
        let joined = TriangleMesh::concat([&a, &b]);
        assert_eq!(joined.edge_defects(), (0, 0));
        assert!(joined.signed_volume() > 0.0);
    }

    #[test]
    fn chain_spans_normalized_extent() {
        let parts = boxes_chain(5, 64);
        let b = TriangleMesh::concat(parts.iter()).bounds();
        assert!((b.extent().x - 1.9).abs() < 1e-12);
        assert!(b.center().coords.norm() < 1e-12);
    }

    #[test]
    fn graphs_are_reproducible() {
        assert_eq!(random_graph(6, 0.5, 3), random_graph(6, 0.5, 3));
        let g = random_connected_graph(10, 20, 1);
        assert_eq!(g.num_edges(), 20);
        assert_eq!(g.components().len(), 1);
    }
}
