//! Signed distance grids and marching-cubes extraction.
//!
//! Magnitudes are exact unsigned distances to the input triangles, evaluated
//! at voxel centers. The sign comes from the corner flood fill in
//! [`crate::voxel::classify`]: voxels the fill cannot reach are occupied and
//! carry negative values.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvh::TriangleBvh;
use crate::error::{Error, Result};
use crate::mesh::{Point, TriangleMesh};
use crate::voxel::{classify, crossing_segments, BitGrid, Classification, GridSpec};

pub const MIN_SDF_RESOLUTION: usize = 16;
pub const DEFAULT_RESOLUTION: usize = 512;

/// `resolution^3` signed distances over `[-1, 1]^3`, x-fastest.
/// Occupied voxels are strictly negative, empty ones positive.
#[derive(Clone, Debug, PartialEq)]
pub struct SdfGrid {
    pub resolution: usize,
    pub values: Vec<f32>,
    pub occupied_voxels: usize,
    pub occupancy_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridSidecar {
    pub resolution: usize,
    pub bounds: [[f64; 3]; 2],
    pub dtype: String,
    pub order: String,
    pub occupancy_ratio: f64,
}

impl SdfGrid {
    pub fn spec(&self) -> GridSpec {
        GridSpec::new(self.resolution)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution * (y + self.resolution * z)
    }

    #[inline]
    pub fn value(&self, x: usize, y: usize, z: usize) -> f32 {
        self.values[self.index(x, y, z)]
    }

    pub fn is_occupied(&self, idx: usize) -> bool {
        self.values[idx] < 0.0
    }

    /// Trilinear interpolation between voxel centers (clamped at the border).
    pub fn trilinear(&self, p: &Point) -> f64 {
        let spec = self.spec();
        let n = self.resolution;
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let s = spec.continuous_index(p[a]).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            base[a] = i;
            frac[a] = s - i as f64;
        }
        let mut acc = 0.0;
        for c in 0..8 {
            let off = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            let mut w = 1.0;
            for a in 0..3 {
                w *= if off[a] == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            let v = self.value(base[0] + off[0], base[1] + off[1], base[2] + off[2]) as f64;
            acc += w * v;
        }
        acc
    }

    pub fn sidecar(&self) -> GridSidecar {
        GridSidecar {
            resolution: self.resolution,
            bounds: [[-1.0; 3], [1.0; 3]],
            dtype: "float32-le".into(),
            order: "x-fastest".into(),
            occupancy_ratio: self.occupancy_ratio,
        }
    }

    /// Raw little-endian f32 dump (x-fastest) plus a `.json` sidecar.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        let side = path.with_extension("json");
        std::fs::write(&side, serde_json::to_string_pretty(&self.sidecar())?).map_err(|e| Error::io(&side, e))?;
        Ok(())
    }
}

/// Signed distance grid of the union of `parts`.
pub fn compute_sdf_grid(parts: &[TriangleMesh], resolution: usize) -> Result<SdfGrid> {
    compute_sdf_grid_classified(parts, resolution).map(|(g, _)| g)
}

/// Like [`compute_sdf_grid`], also returning the flood-fill classification.
pub fn compute_sdf_grid_classified(parts: &[TriangleMesh], resolution: usize) -> Result<(SdfGrid, Classification)> {
    if resolution < MIN_SDF_RESOLUTION {
        return Err(Error::Resolution(resolution));
    }
    let spec = GridSpec::new(resolution);
    let region = spec.full_region();
    let n = resolution;
    let bvh = TriangleBvh::from_meshes(parts.iter());
    let h = spec.voxel_size();

    let udf: Vec<f32> = if bvh.is_empty() {
        vec![f32::INFINITY; region.len()]
    } else {
        (0..n * n)
            .into_par_iter()
            .flat_map_iter(|row| {
                let (y, z) = (row % n, row / n);
                let mut prev = f64::INFINITY;
                let bvh = &bvh;
                (0..n).map(move |x| {
                    let p = spec.center_point([x as i64, y as i64, z as i64]);
                    // distance is 1-Lipschitz, so the previous value bounds this one
                    let d = bvh
                        .nearest_within(&p, prev + h * 1.000001)
                        .map_or_else(|| bvh.distance(&p), |hit| hit.distance);
                    prev = d;
                    d as f32
                })
            })
            .collect()
    };

    let threshold = spec.passable_distance() as f32;
    let band = BitGrid::from_fn(region.len(), |i| udf[i] <= threshold);
    let tris: Vec<[Point; 3]> = parts
        .iter()
        .flat_map(|m| (0..m.faces.len()).map(move |f| m.triangle(f)))
        .collect();
    let crossings = crossing_segments(&spec, &region, &tris);
    let class = classify(&region, &band, &crossings);

    let values: Vec<f32> = udf
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            if class.occupied.get(i) {
                -d.max(f32::MIN_POSITIVE)
            } else {
                d
            }
        })
        .collect();
    let occupied = class.occupied.count_ones();
    Ok((
        SdfGrid {
            resolution,
            values,
            occupied_voxels: occupied,
            occupancy_ratio: occupied as f64 / region.len() as f64,
        },
        class,
    ))
}

const CORNER_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

fn edge_id(a: usize, b: usize) -> usize {
    let key = (a.min(b), a.max(b));
    CORNER_EDGES.iter().position(|&e| e == key).unwrap()
}

/// Triangles (as cube-edge ids) for each of the 256 inside/outside corner
/// patterns. On faces with two diagonal inside corners, the inside corners
/// are always cut off separately, so neighbouring cells agree on every shared
/// face and the extracted surface is closed.
fn triangle_table() -> &'static Vec<Vec<[u8; 3]>> {
    static TABLE: OnceLock<Vec<Vec<[u8; 3]>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        // faces as (axis, side) with corners in counter-clockwise order seen from outside
        let mut faces: Vec<[usize; 4]> = Vec::new();
        for axis in 0..3 {
            for side in 0..2 {
                let normal_sign = if side == 1 { 1.0 } else { -1.0 };
                let (mut u, mut v) = ((axis + 1) % 3, (axis + 2) % 3);
                if normal_sign < 0.0 {
                    std::mem::swap(&mut u, &mut v);
                }
                let mut corners: Vec<usize> = (0..8).filter(|&c| corner_offset(c)[axis] == side).collect();
                corners.sort_by(|&a, &b| {
                    let ang = |c: usize| {
                        let o = corner_offset(c);
                        (o[v] as f64 - 0.5).atan2(o[u] as f64 - 0.5)
                    };
                    ang(a).partial_cmp(&ang(b)).unwrap()
                });
                faces.push([corners[0], corners[1], corners[2], corners[3]]);
            }
        }
        let mut table = Vec::with_capacity(256);
        for mask in 0..256usize {
            let inside = |c: usize| mask >> c & 1 == 1;
            // next[e] = edge reached from crossing e along one face segment
            let mut next = [usize::MAX; 12];
            for f in &faces {
                for k in 0..4 {
                    let (a, b) = (f[k], f[(k + 1) % 4]);
                    if inside(a) || !inside(b) {
                        continue;
                    }
                    // entering crossing; walk to the next leaving one
                    let start = edge_id(a, b);
                    for j in 1..4 {
                        let (c, d) = (f[(k + j) % 4], f[(k + j + 1) % 4]);
                        if inside(c) && !inside(d) {
                            next[start] = edge_id(c, d);
                            break;
                        }
                    }
                }
            }
            let mut used = [false; 12];
            let mut tris = Vec::new();
            for e in 0..12 {
                if next[e] == usize::MAX || used[e] {
                    continue;
                }
                let mut poly = Vec::new();
                let mut cur = e;
                while !used[cur] {
                    used[cur] = true;
                    poly.push(cur);
                    cur = next[cur];
                }
                for i in 1..poly.len() - 1 {
                    tris.push([poly[0] as u8, poly[i] as u8, poly[i + 1] as u8]);
                }
            }
            table.push(tris);
        }
        // orient so that normals point away from the inside corners
        let probe = &table[1][0];
        let mid = |e: u8| {
            let (a, b) = CORNER_EDGES[e as usize];
            let (oa, ob) = (corner_offset(a), corner_offset(b));
            nalgebra::Vector3::new(
                (oa[0] + ob[0]) as f64 / 2.0,
                (oa[1] + ob[1]) as f64 / 2.0,
                (oa[2] + ob[2]) as f64 / 2.0,
            )
        };
        let n = (mid(probe[1]) - mid(probe[0])).cross(&(mid(probe[2]) - mid(probe[0])));
        if n.sum() < 0.0 {
            for tris in &mut table {
                for t in tris.iter_mut() {
                    t.swap(1, 2);
                }
            }
        }
        table
    })
}

/// Extracts the `iso` level set with linear edge interpolation. Vertices are
/// shared between cells, so the result is a closed manifold whenever the
/// level set does not touch the grid border.
pub fn marching_cubes(grid: &SdfGrid, iso: f32) -> TriangleMesh {
    let n = grid.resolution;
    if n < 2 || !grid.values.iter().any(|&v| v < iso) {
        return TriangleMesh::default();
    }
    let spec = grid.spec();
    let table = triangle_table();
    let inside = |x: usize, y: usize, z: usize| grid.value(x, y, z) < iso;

    // per slab: triangles as global edge keys (lower voxel index * 3 + axis)
    let slabs: Vec<Vec<[u64; 3]>> = (0..n - 1)
        .into_par_iter()
        .map(|z| {
            let mut out = Vec::new();
            for y in 0..n - 1 {
                for x in 0..n - 1 {
                    let mut mask = 0usize;
                    for c in 0..8 {
                        let o = corner_offset(c);
                        if inside(x + o[0], y + o[1], z + o[2]) {
                            mask |= 1 << c;
                        }
                    }
                    if mask == 0 || mask == 255 {
                        continue;
                    }
                    for t in &table[mask] {
                        out.push(t.map(|e| {
                            let (a, b) = CORNER_EDGES[e as usize];
                            let (oa, ob) = (corner_offset(a), corner_offset(b));
                            let axis = (0..3).find(|&k| oa[k] != ob[k]).unwrap();
                            let lo = grid.index(x + oa[0], y + oa[1], z + oa[2]);
                            lo as u64 * 3 + axis as u64
                        }));
                    }
                }
            }
            out
        })
        .collect();

    let mut vertex_of: HashMap<u64, u32> = HashMap::new();
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for tri in slabs.into_iter().flatten() {
        let f = tri.map(|key| {
            *vertex_of.entry(key).or_insert_with(|| {
                let lo = (key / 3) as usize;
                let axis = (key % 3) as usize;
                let (x, y, z) = (lo % n, (lo / n) % n, lo / (n * n));
                let mut hi = [x, y, z];
                hi[axis] += 1;
                let v0 = (grid.values[lo] - iso) as f64;
                let v1 = (grid.value(hi[0], hi[1], hi[2]) - iso) as f64;
                let t = if v0 == v1 { 0.5 } else { v0 / (v0 - v1) };
                let p0 = spec.center_point([x as i64, y as i64, z as i64]);
                let p1 = spec.center_point([hi[0] as i64, hi[1] as i64, hi[2] as i64]);
                positions.push(p0 + (p1 - p0) * t.clamp(0.0, 1.0));
                (positions.len() - 1) as u32
            })
        });
        faces.push(f);
    }
    TriangleMesh::new(positions, faces)
}
