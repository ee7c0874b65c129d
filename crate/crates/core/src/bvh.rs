//! Bounding-volume hierarchy over triangles for nearest-point queries.

use crate::mesh::{closest_point_on_triangle, Aabb, Point, TriangleMesh};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    // Leaf: triangles [start, start + count). Inner: children at `start` and `start + 1`.
    start: u32,
    count: u32,
}

/// Static BVH built by median split on the longest centroid axis.
#[derive(Clone, Debug)]
pub struct TriangleBvh {
    nodes: Vec<Node>,
    tris: Vec<[Point; 3]>,
    ids: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest {
    pub distance: f64,
    pub point: Point,
    pub face: u32,
}

impl TriangleBvh {
    pub fn new(mesh: &TriangleMesh) -> Self {
        Self::from_meshes(std::iter::once(mesh))
    }

    pub fn from_meshes<'a>(meshes: impl IntoIterator<Item = &'a TriangleMesh>) -> Self {
        let mut tris = Vec::new();
        for m in meshes {
            for f in 0..m.faces.len() {
                tris.push(m.triangle(f));
            }
        }
        let n = tris.len();
        let mut bvh = TriangleBvh {
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            tris,
            ids: (0..n as u32).collect(),
        };
        if n > 0 {
            let centroids: Vec<Point> = bvh
                .tris
                .iter()
                .map(|t| Point::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
                .collect();
            bvh.nodes.push(Node {
                bounds: Aabb::empty(),
                start: 0,
                count: n as u32,
            });
            bvh.split(0, &centroids);
        }
        bvh
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    fn split(&mut self, node: usize, centroids: &[Point]) {
        let start = self.nodes[node].start as usize;
        let count = self.nodes[node].count as usize;
        let range = start..start + count;
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &id in &self.ids[range.clone()] {
            for p in &self.tris[id as usize] {
                bounds.grow(p);
            }
            cbounds.grow(&centroids[id as usize]);
        }
        self.nodes[node].bounds = bounds;
        if count <= LEAF_SIZE {
            return;
        }
        let ext = cbounds.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = count / 2;
        self.ids[range].select_nth_unstable_by(mid, |&a, &b| {
            centroids[a as usize][axis]
                .partial_cmp(&centroids[b as usize][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let left = self.nodes.len();
        self.nodes.push(Node {
            bounds: Aabb::empty(),
            start: start as u32,
            count: mid as u32,
        });
        self.nodes.push(Node {
            bounds: Aabb::empty(),
            start: (start + mid) as u32,
            count: (count - mid) as u32,
        });
        self.nodes[node].start = left as u32;
        self.nodes[node].count = 0;
        self.split(left, centroids);
        self.split(left + 1, centroids);
    }

    /// Nearest surface point to `p`, or `None` for an empty hierarchy.
    pub fn nearest(&self, p: &Point) -> Option<Nearest> {
        self.nearest_within(p, f64::INFINITY)
    }

    /// Like [`nearest`](Self::nearest) but ignores anything farther than `max_distance`.
    pub fn nearest_within(&self, p: &Point, max_distance: f64) -> Option<Nearest> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best_d2 = max_distance * max_distance;
        let mut best: Option<(Point, u32)> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.distance_squared(p) > best_d2 {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &id in &self.ids[s..s + node.count as usize] {
                    let t = &self.tris[id as usize];
                    let q = closest_point_on_triangle(p, &t[0], &t[1], &t[2]);
                    let d2 = (q - p).norm_squared();
                    if d2 < best_d2 || (d2 == best_d2 && best.is_some_and(|(_, b)| id < b)) {
                        best_d2 = d2;
                        best = Some((q, id));
                    }
                }
            } else {
                let l = node.start;
                let r = node.start + 1;
                let dl = self.nodes[l as usize].bounds.distance_squared(p);
                let dr = self.nodes[r as usize].bounds.distance_squared(p);
                // visit the closer child first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best.map(|(point, face)| Nearest {
            distance: best_d2.sqrt(),
            point,
            face,
        })
    }

    pub fn distance(&self, p: &Point) -> f64 {
        self.nearest(p).map_or(f64::INFINITY, |n| n.distance)
    }
}
