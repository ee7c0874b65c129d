//! Voxel grids over the canonical `[-1, 1]^3` domain.
//!
//! Voxel `i` along an axis has its center at `-1 + (i + 0.5) * h` with
//! `h = 2 / N`. Sub-blocks of the grid ([`Region`]) use global integer
//! coordinates, so blocks belonging to different parts can be intersected
//! directly. Linear indices are x-fastest.
//!
//! Solid occupancy is decided by a two-stage flood fill from the region's
//! corner voxel. The first stage only walks through voxels whose center is
//! farther than half a voxel diagonal from the surface, which cannot leak
//! through a closed surface. The second stage extends the empty region into
//! the near-surface band, stepping between neighbouring voxel centers only when
//! the segment joining them crosses no triangle. Whatever remains unreached is
//! occupied. Band voxels that are reachable on both sides of a surface (open
//! sheets, thin shells) are kept as occupied so that open geometry still
//! yields a thin solid.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::{point_triangle_distance_squared, Aabb, Point};

/// Regular grid of `resolution^3` voxels over `[-1, 1]^3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(resolution: usize) -> Self {
        GridSpec { resolution }
    }

    #[inline]
    pub fn voxel_size(&self) -> f64 {
        2.0 / self.resolution as f64
    }

    #[inline]
    pub fn center(&self, i: i64) -> f64 {
        -1.0 + (i as f64 + 0.5) * self.voxel_size()
    }

    pub fn center_point(&self, g: [i64; 3]) -> Point {
        Point::new(self.center(g[0]), self.center(g[1]), self.center(g[2]))
    }

    /// Continuous index coordinate: voxel centers sit at integers.
    #[inline]
    pub fn continuous_index(&self, x: f64) -> f64 {
        (x + 1.0) / self.voxel_size() - 0.5
    }

    /// Voxel whose cell contains `p`.
    pub fn voxel_of(&self, p: &Point) -> [i64; 3] {
        [0, 1, 2].map(|a| ((p[a] + 1.0) / self.voxel_size()).floor() as i64)
    }

    /// Flood-fill passability threshold: half a voxel diagonal.
    pub fn passable_distance(&self) -> f64 {
        0.5 * 3f64.sqrt() * self.voxel_size()
    }

    pub fn full_region(&self) -> Region {
        Region {
            origin: [0; 3],
            dims: [self.resolution; 3],
        }
    }

    /// Region covering `bounds` plus `pad` voxels on every side.
    pub fn region_around(&self, bounds: &Aabb, pad: i64) -> Region {
        let mut origin = [0i64; 3];
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let lo = self.continuous_index(bounds.min[a]).floor() as i64 - pad;
            let hi = self.continuous_index(bounds.max[a]).ceil() as i64 + pad;
            origin[a] = lo;
            dims[a] = (hi - lo + 1) as usize;
        }
        Region { origin, dims }
    }
}

/// Axis-aligned block of voxels in global integer coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub origin: [i64; 3],
    pub dims: [usize; 3],
}

impl Region {
    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, l: [usize; 3]) -> usize {
        l[0] + self.dims[0] * (l[1] + self.dims[1] * l[2])
    }

    #[inline]
    pub fn local(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let r = idx / self.dims[0];
        [x, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn global(&self, idx: usize) -> [i64; 3] {
        let l = self.local(idx);
        [
            self.origin[0] + l[0] as i64,
            self.origin[1] + l[1] as i64,
            self.origin[2] + l[2] as i64,
        ]
    }

    #[inline]
    pub fn index_of_global(&self, g: [i64; 3]) -> Option<usize> {
        let mut l = [0usize; 3];
        for a in 0..3 {
            let d = g[a] - self.origin[a];
            if d < 0 || d >= self.dims[a] as i64 {
                return None;
            }
            l[a] = d as usize;
        }
        Some(self.index(l))
    }

    pub fn grow(&self, r: usize) -> Region {
        Region {
            origin: self.origin.map(|o| o - r as i64),
            dims: self.dims.map(|d| d + 2 * r),
        }
    }

    pub fn intersect(&self, other: &Region) -> Option<Region> {
        let mut origin = [0i64; 3];
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let lo = self.origin[a].max(other.origin[a]);
            let hi = (self.origin[a] + self.dims[a] as i64).min(other.origin[a] + other.dims[a] as i64);
            if hi <= lo {
                return None;
            }
            origin[a] = lo;
            dims[a] = (hi - lo) as usize;
        }
        Some(Region { origin, dims })
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut origin = [0i64; 3];
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let lo = self.origin[a].min(other.origin[a]);
            let hi = (self.origin[a] + self.dims[a] as i64).max(other.origin[a] + other.dims[a] as i64);
            origin[a] = lo;
            dims[a] = (hi - lo) as usize;
        }
        Region { origin, dims }
    }

    /// Linear index of the 6-neighbour in direction `dir` (0..6), if inside.
    #[inline]
    fn neighbor(&self, idx: usize, l: [usize; 3], dir: usize) -> Option<usize> {
        let axis = dir / 2;
        let stride = match axis {
            0 => 1,
            1 => self.dims[0],
            _ => self.dims[0] * self.dims[1],
        };
        if dir.is_multiple_of(2) {
            (l[axis] > 0).then(|| idx - stride)
        } else {
            (l[axis] + 1 < self.dims[axis]).then(|| idx + stride)
        }
    }
}

/// Dense bitset.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct BitGrid {
    words: Vec<u64>,
    len: usize,
}

impl BitGrid {
    pub fn new(len: usize) -> Self {
        BitGrid {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_fn(len: usize, f: impl Fn(usize) -> bool + Sync) -> Self {
        let words = (0..len.div_ceil(64))
            .into_par_iter()
            .map(|w| {
                let mut bits = 0u64;
                for b in 0..64 {
                    let i = w * 64 + b;
                    if i < len && f(i) {
                        bits |= 1 << b;
                    }
                }
                bits
            })
            .collect();
        BitGrid { words, len }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub fn clear(&mut self, i: usize) {
        self.words[i >> 6] &= !(1 << (i & 63));
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
        })
    }
}

/// Voxels within `cutoff` of any triangle (exact point-triangle distance).
pub fn band_from_triangles(grid: &GridSpec, region: &Region, tris: &[[Point; 3]], cutoff: f64) -> BitGrid {
    let mut band = BitGrid::new(region.len());
    let c2 = cutoff * cutoff;
    for t in tris {
        let b = Aabb::from_points(t.iter());
        let Some((lo, hi)) = index_range(grid, region, &b, cutoff) else {
            continue;
        };
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let idx = region.index([x, y, z]);
                    if band.get(idx) {
                        continue;
                    }
                    let p = grid.center_point(region.global(idx));
                    if point_triangle_distance_squared(&p, t) <= c2 {
                        band.set(idx);
                    }
                }
            }
        }
    }
    band
}

/// Local index range of voxel centers inside `bounds` grown by `margin`.
fn index_range(grid: &GridSpec, region: &Region, bounds: &Aabb, margin: f64) -> Option<([usize; 3], [usize; 3])> {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..3 {
        let l = grid.continuous_index(bounds.min[a] - margin).ceil() as i64 - region.origin[a];
        let h = grid.continuous_index(bounds.max[a] + margin).floor() as i64 - region.origin[a];
        let l = l.max(0);
        let h = h.min(region.dims[a] as i64 - 1);
        if h < l {
            return None;
        }
        lo[a] = l as usize;
        hi[a] = h as usize;
    }
    Some((lo, hi))
}

#[inline]
fn segment_key(idx: usize, axis: usize) -> u64 {
    idx as u64 * 3 + axis as u64
}

/// Center-to-center segments (between voxel `idx` and its +axis neighbour)
/// that touch a triangle. Touching an edge or vertex counts as crossing.
pub fn crossing_segments(grid: &GridSpec, region: &Region, tris: &[[Point; 3]]) -> HashSet<u64> {
    let keys: Vec<u64> = tris
        .par_iter()
        .flat_map_iter(|t| {
            let mut out = Vec::new();
            triangle_crossings(grid, region, t, &mut out);
            out
        })
        .collect();
    keys.into_iter().collect()
}

fn triangle_crossings(grid: &GridSpec, region: &Region, t: &[Point; 3], out: &mut Vec<u64>) {
    const TOL: f64 = 1e-9;
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        let (au, av) = (t[0][u], t[0][v]);
        let (bu, bv) = (t[1][u], t[1][v]);
        let (cu, cv) = (t[2][u], t[2][v]);
        let area2 = (bu - au) * (cv - av) - (bv - av) * (cu - au);
        let scale = [(bu - au).hypot(bv - av), (cu - bu).hypot(cv - bv), (au - cu).hypot(av - cv)]
            .into_iter()
            .fold(0.0, f64::max);
        if scale == 0.0 || area2.abs() <= 1e-14 * scale * scale {
            continue;
        }
        let tol = TOL * scale * scale;
        let lo_u = (grid.continuous_index(au.min(bu).min(cu)) - TOL).ceil() as i64;
        let hi_u = (grid.continuous_index(au.max(bu).max(cu)) + TOL).floor() as i64;
        let lo_v = (grid.continuous_index(av.min(bv).min(cv)) - TOL).ceil() as i64;
        let hi_v = (grid.continuous_index(av.max(bv).max(cv)) + TOL).floor() as i64;
        let lo_u = lo_u.max(region.origin[u]);
        let hi_u = hi_u.min(region.origin[u] + region.dims[u] as i64 - 1);
        let lo_v = lo_v.max(region.origin[v]);
        let hi_v = hi_v.min(region.origin[v] + region.dims[v] as i64 - 1);
        for jv in lo_v..=hi_v {
            let qv = grid.center(jv);
            for ju in lo_u..=hi_u {
                let qu = grid.center(ju);
                // edge functions, oriented by the sign of the projected area
                let w0 = (bu - qu) * (cv - qv) - (bv - qv) * (cu - qu);
                let w1 = (cu - qu) * (av - qv) - (cv - qv) * (au - qu);
                let w2 = (au - qu) * (bv - qv) - (av - qv) * (bu - qu);
                let s = area2.signum();
                if s * w0 < -tol || s * w1 < -tol || s * w2 < -tol {
                    continue;
                }
                let x = (w0 * t[0][axis] + w1 * t[1][axis] + w2 * t[2][axis]) / (w0 + w1 + w2);
                let s_idx = grid.continuous_index(x);
                let f = s_idx.floor();
                let frac = s_idx - f;
                let mut lows = vec![f as i64];
                if frac < TOL {
                    lows.push(f as i64 - 1);
                }
                if frac > 1.0 - TOL {
                    lows.push(f as i64 + 1);
                }
                for i in lows {
                    let mut g = [0i64; 3];
                    g[axis] = i;
                    g[u] = ju;
                    g[v] = jv;
                    let local = g[axis] - region.origin[axis];
                    if local < 0 || local + 1 >= region.dims[axis] as i64 {
                        continue;
                    }
                    if let Some(idx) = region.index_of_global(g) {
                        out.push(segment_key(idx, axis));
                    }
                }
            }
        }
    }
}

/// Result of the two-stage flood fill.
#[derive(Clone, Debug)]
pub struct Classification {
    /// Occupied voxels (the complement of the empty region, plus shells).
    pub occupied: BitGrid,
    /// Voxels reached by the first, threshold-only flood fill.
    pub coarse_exterior: BitGrid,
}

/// Flood fills from the region's `[0, 0, 0]` voxel. `band` marks voxels within
/// the passability threshold of the surface; `crossings` are the blocked
/// center-to-center segments from [`crossing_segments`].
pub fn classify(region: &Region, band: &BitGrid, crossings: &HashSet<u64>) -> Classification {
    let n = region.len();
    let mut coarse = BitGrid::new(n);
    if n == 0 {
        return Classification {
            occupied: BitGrid::new(0),
            coarse_exterior: coarse,
        };
    }
    let mut stack = vec![0usize];
    coarse.set(0);
    while let Some(idx) = stack.pop() {
        let l = region.local(idx);
        for dir in 0..6 {
            if let Some(nb) = region.neighbor(idx, l, dir) {
                if !coarse.get(nb) && !band.get(nb) {
                    coarse.set(nb);
                    stack.push(nb);
                }
            }
        }
    }

    let blocked = |idx: usize, nb: usize, dir: usize| -> bool {
        let lower = if dir.is_multiple_of(2) { nb } else { idx };
        crossings.contains(&segment_key(lower, dir / 2))
    };

    // second stage: walk into the band without crossing the surface
    let mut exterior = coarse.clone();
    let mut stack: Vec<usize> = Vec::new();
    for idx in coarse.iter_ones() {
        let l = region.local(idx);
        for dir in 0..6 {
            if let Some(nb) = region.neighbor(idx, l, dir) {
                if band.get(nb) && !exterior.get(nb) && !blocked(idx, nb, dir) {
                    exterior.set(nb);
                    stack.push(nb);
                }
            }
        }
    }
    while let Some(idx) = stack.pop() {
        let l = region.local(idx);
        for dir in 0..6 {
            if let Some(nb) = region.neighbor(idx, l, dir) {
                if band.get(nb) && !exterior.get(nb) && !blocked(idx, nb, dir) {
                    exterior.set(nb);
                    stack.push(nb);
                }
            }
        }
    }

    let mut occupied = BitGrid::new(n);
    for i in 0..n {
        if !exterior.get(i) {
            occupied.set(i);
        }
    }
    // surfaces with empty space on both sides keep a thin shell
    for &key in crossings {
        let idx = (key / 3) as usize;
        let axis = (key % 3) as usize;
        let l = region.local(idx);
        let Some(nb) = region.neighbor(idx, l, 2 * axis + 1) else {
            continue;
        };
        if exterior.get(idx) && exterior.get(nb) {
            for v in [idx, nb] {
                if band.get(v) {
                    occupied.set(v);
                }
            }
        }
    }
    Classification {
        occupied,
        coarse_exterior: coarse,
    }
}

/// Set of voxels stored as a bitmap over a region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoxelSet {
    pub region: Region,
    pub bits: BitGrid,
}

impl VoxelSet {
    pub fn empty() -> Self {
        VoxelSet {
            region: Region {
                origin: [0; 3],
                dims: [0; 3],
            },
            bits: BitGrid::new(0),
        }
    }

    /// Solid voxelization of a triangle set at `grid` resolution.
    pub fn from_triangles(grid: &GridSpec, tris: &[[Point; 3]]) -> Self {
        if tris.is_empty() {
            return VoxelSet::empty();
        }
        let bounds = Aabb::from_points(tris.iter().flatten());
        let region = grid.region_around(&bounds, 2);
        let band = band_from_triangles(grid, &region, tris, grid.passable_distance());
        let crossings = crossing_segments(grid, &region, tris);
        let mut bits = classify(&region, &band, &crossings).occupied;
        if bits.count_ones() == 0 {
            // geometry too thin or small to enclose a voxel center
            for t in tris {
                let c = Point::from((t[0].coords + t[1].coords + t[2].coords) / 3.0);
                let g = grid.voxel_of(&c);
                if let Some(i) = region.index_of_global(g) {
                    bits.set(i);
                }
            }
        }
        VoxelSet { region, bits }.trimmed()
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    #[inline]
    pub fn contains(&self, g: [i64; 3]) -> bool {
        self.region.index_of_global(g).is_some_and(|i| self.bits.get(i))
    }

    /// Tight region around the set bits (empty set gets an empty region).
    pub fn trimmed(&self) -> VoxelSet {
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for idx in self.bits.iter_ones() {
            let g = self.region.global(idx);
            for a in 0..3 {
                lo[a] = lo[a].min(g[a]);
                hi[a] = hi[a].max(g[a]);
            }
        }
        if lo[0] > hi[0] {
            return VoxelSet::empty();
        }
        let region = Region {
            origin: lo,
            dims: [0, 1, 2].map(|a| (hi[a] - lo[a] + 1) as usize),
        };
        self.reframed(region)
    }

    fn reframed(&self, region: Region) -> VoxelSet {
        let mut bits = BitGrid::new(region.len());
        for idx in self.bits.iter_ones() {
            if let Some(j) = region.index_of_global(self.region.global(idx)) {
                bits.set(j);
            }
        }
        VoxelSet { region, bits }
    }

    pub fn union(&self, other: &VoxelSet) -> VoxelSet {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        let mut out = self.reframed(self.region.union(&other.region));
        for idx in other.bits.iter_ones() {
            let j = out.region.index_of_global(other.region.global(idx)).unwrap();
            out.bits.set(j);
        }
        out
    }

    pub fn intersection_count(&self, other: &VoxelSet) -> usize {
        let Some(common) = self.region.intersect(&other.region) else {
            return 0;
        };
        (0..common.len())
            .filter(|&i| {
                let g = common.global(i);
                self.contains(g) && other.contains(g)
            })
            .count()
    }

    pub fn iou(&self, other: &VoxelSet) -> f64 {
        let inter = self.intersection_count(other);
        let union = self.count() + other.count() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Morphological dilation by an L1 ball of `radius` voxels.
    pub fn dilate(&self, radius: usize) -> VoxelSet {
        if self.is_empty() || radius == 0 {
            return self.clone();
        }
        let region = self.region.grow(radius);
        let mut cur = self.reframed(region).bits;
        for _ in 0..radius {
            let mut next = cur.clone();
            for idx in cur.iter_ones() {
                let l = region.local(idx);
                for dir in 0..6 {
                    if let Some(nb) = region.neighbor(idx, l, dir) {
                        next.set(nb);
                    }
                }
            }
            cur = next;
        }
        VoxelSet { region, bits: cur }
    }

    /// City-block distance from each voxel to the nearest voxel outside the
    /// set (0 outside). Indexed like `self.region`.
    pub fn depth_map(&self) -> Vec<u32> {
        let r = &self.region;
        let inf = u32::MAX / 2;
        let mut d: Vec<u32> = (0..r.len()).map(|i| if self.bits.get(i) { inf } else { 0 }).collect();
        let [nx, ny, nz] = r.dims;
        // voxels beyond the region count as outside
        let edge = |x: usize, y: usize, z: usize| -> u32 {
            let m = [x, y, z, nx - 1 - x, ny - 1 - y, nz - 1 - z].into_iter().min().unwrap();
            m as u32 + 1
        };
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let i = r.index([x, y, z]);
                    if d[i] == 0 {
                        continue;
                    }
                    let mut v = d[i].min(edge(x, y, z));
                    if x > 0 {
                        v = v.min(d[i - 1] + 1);
                    }
                    if y > 0 {
                        v = v.min(d[i - nx] + 1);
                    }
                    if z > 0 {
                        v = v.min(d[i - nx * ny] + 1);
                    }
                    d[i] = v;
                }
            }
        }
        for z in (0..nz).rev() {
            for y in (0..ny).rev() {
                for x in (0..nx).rev() {
                    let i = r.index([x, y, z]);
                    if d[i] == 0 {
                        continue;
                    }
                    let mut v = d[i];
                    if x + 1 < nx {
                        v = v.min(d[i + 1] + 1);
                    }
                    if y + 1 < ny {
                        v = v.min(d[i + nx] + 1);
                    }
                    if z + 1 < nz {
                        v = v.min(d[i + nx * ny] + 1);
                    }
                    d[i] = v;
                }
            }
        }
        d
    }
}
