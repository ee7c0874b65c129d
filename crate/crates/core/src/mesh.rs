//! Indexed triangle meshes and the small amount of geometry shared by every stage.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Point3<f64>;
pub type Vec3 = Vector3<f64>;

/// Tolerance used whenever two positions are compared for identity.
pub const EPS_WELD: f64 = 1e-6;

/// Faces with less area than this are treated as degenerate at load.
pub const MIN_FACE_AREA: f64 = 1e-12;

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Point) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x || self.min.y > self.max.y || self.min.z > self.max.z
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_squared(&self, p: &Point) -> f64 {
        let mut d = 0.0;
        for a in 0..3 {
            let v = if p[a] < self.min[a] {
                self.min[a] - p[a]
            } else if p[a] > self.max[a] {
                p[a] - self.max[a]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    pub fn intersects(&self, other: &Aabb, margin: f64) -> bool {
        (0..3).all(|a| self.min[a] - margin <= other.max[a] && other.min[a] - margin <= self.max[a])
    }
}

/// Indexed triangle soup with optional per-face part labels.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub positions: Vec<Point>,
    pub faces: Vec<[u32; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_part_id: Option<Vec<u32>>,
}

impl TriangleMesh {
    pub fn new(positions: Vec<Point>, faces: Vec<[u32; 3]>) -> Self {
        TriangleMesh {
            positions,
            faces,
            face_part_id: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Checks index bounds and coordinate finiteness.
    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if let Some(bad) = self.faces.iter().flatten().find(|&&i| i as usize >= n) {
            return Err(Error::Validation(format!(
                "face index {bad} out of range for {n} positions"
            )));
        }
        if self.positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Validation("non-finite vertex coordinate".into()));
        }
        if let Some(labels) = &self.face_part_id {
            if labels.len() != self.faces.len() {
                return Err(Error::Validation("face_part_id length mismatch".into()));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn triangle(&self, f: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.positions[a as usize],
            self.positions[b as usize],
            self.positions[c as usize],
        ]
    }

    /// Unnormalized face normal (length = twice the area).
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let n = self.face_cross(f);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Bounding box over referenced vertices only.
    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for f in &self.faces {
            for &i in f {
                b.grow(&self.positions[i as usize]);
            }
        }
        b
    }

    /// Removes faces with a repeated vertex index or (near) zero area.
    /// Returns the number of faces dropped.
    pub fn drop_degenerate_faces(&mut self) -> usize {
        let before = self.faces.len();
        let keep: Vec<bool> = (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.faces[f];
                a != b && b != c && a != c && self.face_area(f) >= MIN_FACE_AREA
            })
            .collect();
        let mut it = keep.iter();
        self.faces.retain(|_| *it.next().unwrap());
        if let Some(labels) = &mut self.face_part_id {
            let mut it = keep.iter();
            labels.retain(|_| *it.next().unwrap());
        }
        before - self.faces.len()
    }

    /// Drops unreferenced vertices, keeping the order of first use.
    pub fn compact(&self) -> TriangleMesh {
        let mut remap = vec![u32::MAX; self.positions.len()];
        let mut positions = Vec::new();
        let faces = self
            .faces
            .iter()
            .map(|f| {
                f.map(|i| {
                    let slot = &mut remap[i as usize];
                    if *slot == u32::MAX {
                        *slot = positions.len() as u32;
                        positions.push(self.positions[i as usize]);
                    }
                    *slot
                })
            })
            .collect();
        TriangleMesh {
            positions,
            faces,
            face_part_id: self.face_part_id.clone(),
        }
    }

    /// Sub-mesh made of the given faces (compacted).
    pub fn select_faces(&self, faces: &[usize]) -> TriangleMesh {
        let sub = TriangleMesh {
            positions: self.positions.clone(),
            faces: faces.iter().map(|&f| self.faces[f]).collect(),
            face_part_id: self
                .face_part_id
                .as_ref()
                .map(|l| faces.iter().map(|&f| l[f]).collect()),
        };
        sub.compact()
    }

    /// Concatenates meshes; face labels are kept only if every input has them.
    pub fn concat<'a>(meshes: impl IntoIterator<Item = &'a TriangleMesh>) -> TriangleMesh {
        let mut out = TriangleMesh::default();
        let mut labels: Option<Vec<u32>> = Some(Vec::new());
        for m in meshes {
            let base = out.positions.len() as u32;
            out.positions.extend_from_slice(&m.positions);
            out.faces.extend(m.faces.iter().map(|f| f.map(|i| i + base)));
            match (&mut labels, &m.face_part_id) {
                (Some(acc), Some(l)) => acc.extend_from_slice(l),
                _ => labels = None,
            }
        }
        if labels.as_ref().is_some_and(|l| l.len() == out.faces.len() && !l.is_empty()) {
            out.face_part_id = labels;
        }
        out
    }

    pub fn transform(&mut self, f: impl Fn(&Point) -> Point) {
        for p in &mut self.positions {
            *p = f(p);
        }
    }

    /// Vertex ids after merging positions closer than `eps`.
    pub fn welded_ids(&self, eps: f64) -> Vec<u32> {
        weld_positions(&self.positions, eps)
    }

    /// Returns a copy whose coincident vertices (within `eps`) share one index.
    pub fn welded(&self, eps: f64) -> TriangleMesh {
        let ids = self.welded_ids(eps);
        let faces = self.faces.iter().map(|f| f.map(|i| ids[i as usize])).collect();
        TriangleMesh {
            positions: self.positions.clone(),
            faces,
            face_part_id: self.face_part_id.clone(),
        }
        .compact()
    }

    /// Undirected edges keyed by sorted (welded) vertex ids, with their incident faces.
    pub fn edge_faces(&self, ids: &[u32]) -> HashMap<(u32, u32), Vec<u32>> {
        let mut map: HashMap<(u32, u32), Vec<u32>> = HashMap::with_capacity(self.faces.len() * 2);
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let a = ids[f[k] as usize];
                let b = ids[f[(k + 1) % 3] as usize];
                if a == b {
                    continue;
                }
                map.entry((a.min(b), a.max(b))).or_default().push(fi as u32);
            }
        }
        map
    }

    /// Signed enclosed volume (divergence theorem); positive for outward orientation.
    pub fn signed_volume(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    /// V - E + F over welded vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let ids = self.welded_ids(0.0);
        let used: std::collections::HashSet<u32> =
            self.faces.iter().flatten().map(|&i| ids[i as usize]).collect();
        let edges = self.edge_faces(&ids).len();
        used.len() as i64 - edges as i64 + self.faces.len() as i64
    }

    /// (boundary edges, non-manifold edges) over welded vertices.
    pub fn edge_defects(&self) -> (usize, usize) {
        let ids = self.welded_ids(EPS_WELD);
        let mut boundary = 0;
        let mut nonmanifold = 0;
        for faces in self.edge_faces(&ids).values() {
            match faces.len() {
                1 => boundary += 1,
                2 => {}
                _ => nonmanifold += 1,
            }
        }
        (boundary, nonmanifold)
    }
}

/// Clusters positions closer than `eps` (single-linkage through a hash grid)
/// and returns, per input position, the smallest index of its cluster.
pub fn weld_positions(positions: &[Point], eps: f64) -> Vec<u32> {
    let n = positions.len();
    if eps <= 0.0 {
        let mut first: HashMap<[u64; 3], u32> = HashMap::with_capacity(n);
        return positions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
                *first.entry(key).or_insert(i as u32)
            })
            .collect();
    }
    let cell = |p: &Point| -> [i64; 3] {
        [
            (p.x / eps).floor() as i64,
            (p.y / eps).floor() as i64,
            (p.z / eps).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::with_capacity(n);
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    let eps2 = eps * eps;
    for (i, p) in positions.iter().enumerate() {
        let c = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &j in list {
                            if (positions[j as usize] - p).norm_squared() <= eps2 {
                                let (ri, rj) = (find(&mut parent, i as u32), find(&mut parent, j));
                                if ri != rj {
                                    let (lo, hi) = (ri.min(rj), ri.max(rj));
                                    parent[hi as usize] = lo;
                                }
                            }
                        }
                    }
                }
            }
        }
        grid.entry(c).or_default().push(i as u32);
    }
    (0..n as u32).map(|i| find(&mut parent, i)).collect()
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

pub fn point_triangle_distance_squared(p: &Point, tri: &[Point; 3]) -> f64 {
    (closest_point_on_triangle(p, &tri[0], &tri[1], &tri[2]) - p).norm_squared()
}

/// Distance from `p` to segment `ab`.
pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * t - p).norm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    #[test]
    fn closest_point_regions() {
        let t = [p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 1.0, 0.0)];
        // interior
        let q = closest_point_on_triangle(&p(0.2, 0.2, 3.0), &t[0], &t[1], &t[2]);
        assert!((q - p(0.2, 0.2, 0.0)).norm() < 1e-12);
        // vertex region
        let q = closest_point_on_triangle(&p(-1.0, -1.0, 0.0), &t[0], &t[1], &t[2]);
        assert_eq!(q, t[0]);
        // edge region of the hypotenuse
        let q = closest_point_on_triangle(&p(1.0, 1.0, 0.0), &t[0], &t[1], &t[2]);
        assert!((q - p(0.5, 0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn weld_merges_close_points_only() {
        let pts = vec![p(0.0, 0.0, 0.0), p(5e-7, 0.0, 0.0), p(1.0, 0.0, 0.0), p(0.0, 0.0, 0.0)];
        assert_eq!(weld_positions(&pts, EPS_WELD), vec![0, 0, 2, 0]);
        assert_eq!(weld_positions(&pts, 0.0), vec![0, 1, 2, 0]);
    }

    #[test]
    fn degenerate_faces_are_dropped() {
        let mut m = TriangleMesh::new(
            vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(2.0, 0.0, 0.0), p(0.0, 1.0, 0.0)],
            vec![[0, 1, 3], [0, 0, 1], [0, 1, 2]],
        );
        assert_eq!(m.drop_degenerate_faces(), 2);
        assert_eq!(m.faces, vec![[0, 1, 3]]);
    }
}
