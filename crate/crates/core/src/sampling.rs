//! Surface, salient-edge and point-SDF sample sets.
//!
//! Every set draws from its own ChaCha8 stream, derived from the seed, the
//! volume index and the set kind, so sets are reproducible independently of
//! each other and of thread scheduling.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvh::TriangleBvh;
use crate::error::{Error, Result};
use crate::mesh::{Point, TriangleMesh, Vec3, EPS_WELD};
use crate::watertight_field::SdfGrid;

pub const DEFAULT_SURFACE_COUNT: usize = 32768;
pub const DEFAULT_SALIENT_COUNT: usize = 16384;
pub const DEFAULT_ANGLE_THRESHOLD: f64 = 165.0;
pub const DEFAULT_SIGMA: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdfCounts {
    pub uniform: usize,
    pub near_surface: usize,
    pub near_salient: usize,
}

impl Default for SdfCounts {
    fn default() -> Self {
        SdfCounts {
            uniform: 4 * 16384,
            near_surface: 4 * 8192,
            near_salient: 4 * 8192,
        }
    }
}

/// Which random stream a set draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Surface = 1,
    Salient = 2,
    SdfUniform = 3,
    SdfNearSurface = 4,
    SdfNearSalient = 5,
}

pub fn rng_for(seed: u64, volume: u8, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(volume as u64 * 16 + stream as u64);
    rng
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OrientedPoints {
    pub points: Vec<Point>,
    pub normals: Vec<Vec3>,
}

impl OrientedPoints {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Area-weighted face choice and uniform barycentric placement.
pub fn sample_surface_uniform(mesh: &TriangleMesh, n: usize, rng: &mut impl Rng) -> Result<OrientedPoints> {
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if mesh.is_empty() || total <= 0.0 {
        return Err(Error::EmptyGeometry("cannot sample an empty surface".into()));
    }
    let mut out = OrientedPoints {
        points: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let r = rng.random::<f64>() * total;
        let f = cumulative.partition_point(|&c| c <= r).min(mesh.faces.len() - 1);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let [a, b, c] = mesh.triangle(f);
        let p = a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2);
        out.points.push(Point::from(p));
        out.normals.push(mesh.face_normal(f));
    }
    Ok(out)
}

/// Interior edge whose dihedral angle is below the threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct SalientEdge {
    pub a: Point,
    pub b: Point,
    /// Normalized bisector of the two face normals.
    pub normal: Vec3,
    pub dihedral_degrees: f64,
}

/// Dihedral angle in degrees between two faces with unit normals `n1`, `n2`
/// (180 for coplanar faces).
pub fn dihedral_degrees(n1: &Vec3, n2: &Vec3) -> f64 {
    (std::f64::consts::PI - n1.dot(n2).clamp(-1.0, 1.0).acos()).to_degrees()
}

pub fn salient_edges(mesh: &TriangleMesh, angle_threshold: f64) -> Vec<SalientEdge> {
    let ids = mesh.welded_ids(EPS_WELD);
    let mut edges: Vec<((u32, u32), Vec<u32>)> = mesh.edge_faces(&ids).into_iter().collect();
    edges.sort_unstable_by_key(|e| e.0);
    let mut out = Vec::new();
    for ((a, b), faces) in edges {
        if faces.len() != 2 {
            continue;
        }
        let n1 = mesh.face_normal(faces[0] as usize);
        let n2 = mesh.face_normal(faces[1] as usize);
        if n1 == Vec3::zeros() || n2 == Vec3::zeros() {
            continue;
        }
        let angle = dihedral_degrees(&n1, &n2);
        if angle < angle_threshold {
            let sum = n1 + n2;
            let normal = if sum.norm() > 1e-12 { sum.normalize() } else { n1 };
            out.push(SalientEdge {
                a: mesh.positions[a as usize],
                b: mesh.positions[b as usize],
                normal,
                dihedral_degrees: angle,
            });
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SalientSamples {
    pub samples: OrientedPoints,
    /// True when the mesh had no salient edge and the samples are a subset
    /// of the uniform surface samples.
    pub fallback: bool,
    pub salient_edges: usize,
}

/// Length-weighted edge choice and uniform placement along the edge. Falls
/// back to a random subset of `surface` when no edge qualifies.
pub fn sample_salient_edges(
    mesh: &TriangleMesh,
    n: usize,
    angle_threshold: f64,
    surface: &OrientedPoints,
    rng: &mut impl Rng,
) -> Result<SalientSamples> {
    if mesh.is_empty() {
        return Err(Error::EmptyGeometry("cannot sample an empty surface".into()));
    }
    let edges = salient_edges(mesh, angle_threshold);
    let total: f64 = edges.iter().map(|e| (e.b - e.a).norm()).sum();
    if edges.is_empty() || total <= 0.0 {
        let mut samples = OrientedPoints::default();
        if !surface.is_empty() {
            let picks: Vec<usize> = if n <= surface.len() {
                let mut v = sample_indices(rng, surface.len(), n).into_vec();
                v.sort_unstable();
                v
            } else {
                (0..n).map(|_| rng.random_range(0..surface.len())).collect()
            };
            for i in picks {
                samples.points.push(surface.points[i]);
                samples.normals.push(surface.normals[i]);
            }
        }
        return Ok(SalientSamples {
            samples,
            fallback: true,
            salient_edges: 0,
        });
    }
    let mut cumulative = Vec::with_capacity(edges.len());
    let mut acc = 0.0;
    for e in &edges {
        acc += (e.b - e.a).norm();
        cumulative.push(acc);
    }
    let mut samples = OrientedPoints::default();
    for _ in 0..n {
        let r = rng.random::<f64>() * total;
        let i = cumulative.partition_point(|&c| c <= r).min(edges.len() - 1);
        let t: f64 = rng.random();
        let e = &edges[i];
        samples.points.push(e.a + (e.b - e.a) * t);
        samples.normals.push(e.normal);
    }
    Ok(SalientSamples {
        samples,
        fallback: false,
        salient_edges: edges.len(),
    })
}

/// Points with signed distance values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdfSamples {
    pub points: Vec<Point>,
    pub values: Vec<f32>,
}

impl SdfSamples {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdfPairSets {
    pub uniform: SdfSamples,
    pub near_surface: SdfSamples,
    pub near_salient: SdfSamples,
}

/// Exact distance to `mesh`, negative where the grid interpolates below zero.
pub fn signed_values(grid: &SdfGrid, bvh: &TriangleBvh, points: &[Point]) -> Vec<f32> {
    points
        .par_iter()
        .map(|p| {
            let d = bvh.distance(p);
            if grid.trilinear(p) < 0.0 {
                -d as f32
            } else {
                d as f32
            }
        })
        .collect()
}

fn clamp_to_domain(p: Point) -> Point {
    Point::new(p.x.clamp(-1.0, 1.0), p.y.clamp(-1.0, 1.0), p.z.clamp(-1.0, 1.0))
}

fn perturbed(base: &[Point], count: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<Point> {
    if base.is_empty() {
        return Vec::new();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    (0..count)
        .map(|_| {
            let p = base[rng.random_range(0..base.len())];
            let off = Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
            clamp_to_domain(p + off)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdfParams {
    pub counts: SdfCounts,
    /// Standard deviation of the isotropic offsets, in object units.
    pub sigma: f64,
    pub seed: u64,
    pub volume: u8,
}

/// Uniform, near-surface and near-salient point-SDF pairs for one volume.
/// Values are exact distances to `mesh` with the sign taken from `grid`.
pub fn sample_sdf_pairs(
    grid: &SdfGrid,
    mesh: &TriangleMesh,
    surface: &[Point],
    salient: &[Point],
    params: &SdfParams,
) -> Result<SdfPairSets> {
    let SdfParams {
        counts,
        sigma,
        seed,
        volume,
    } = *params;
    if mesh.is_empty() {
        return Err(Error::EmptyGeometry("cannot sample distances to an empty mesh".into()));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Config(format!("invalid perturbation sigma {sigma}")));
    }
    let bvh = TriangleBvh::new(mesh);
    let mut rng = rng_for(seed, volume, Stream::SdfUniform);
    let uniform: Vec<Point> = (0..counts.uniform)
        .map(|_| {
            Point::new(
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
            )
        })
        .collect();
    let near_surface = perturbed(surface, counts.near_surface, sigma, &mut rng_for(seed, volume, Stream::SdfNearSurface));
    let near_salient = perturbed(salient, counts.near_salient, sigma, &mut rng_for(seed, volume, Stream::SdfNearSalient));
    let make = |points: Vec<Point>| SdfSamples {
        values: signed_values(grid, &bvh, &points),
        points,
    };
    Ok(SdfPairSets {
        uniform: make(uniform),
        near_surface: make(near_surface),
        near_salient: make(near_salient),
    })
}

/// Metadata written next to every binary sample file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub count: usize,
    pub layout: Vec<String>,
    pub dtype: String,
    pub seed: u64,
    pub volume: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback: Option<bool>,
}

fn write_with_sidecar(path: &Path, bytes: &[u8], sidecar: &SampleSidecar) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let side = path.with_extension("json");
    std::fs::write(&side, serde_json::to_string_pretty(sidecar)?).map_err(|e| Error::io(&side, e))
}

/// `x y z nx ny nz` per point, little-endian f32.
pub fn oriented_points_bytes(s: &OrientedPoints) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.len() * 24);
    for (p, n) in s.points.iter().zip(&s.normals) {
        for v in [p.x, p.y, p.z, n.x, n.y, n.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// `x y z value` per point, little-endian f32.
pub fn sdf_bytes(s: &SdfSamples) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.len() * 16);
    for (p, v) in s.points.iter().zip(&s.values) {
        for c in [p.x as f32, p.y as f32, p.z as f32, *v] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

pub fn write_oriented_points(path: &Path, s: &OrientedPoints, mut sidecar: SampleSidecar) -> Result<()> {
    sidecar.count = s.len();
    sidecar.layout = ["x", "y", "z", "nx", "ny", "nz"].map(String::from).to_vec();
    sidecar.dtype = "float32-le".into();
    write_with_sidecar(path, &oriented_points_bytes(s), &sidecar)
}

pub fn write_sdf_samples(path: &Path, s: &SdfSamples, mut sidecar: SampleSidecar) -> Result<()> {
    sidecar.count = s.len();
    sidecar.layout = ["x", "y", "z", "sdf"].map(String::from).to_vec();
    sidecar.dtype = "float32-le".into();
    write_with_sidecar(path, &sdf_bytes(s), &sidecar)
}

/// ASCII PLY with normals, for inspection.
pub fn oriented_points_ply(s: &OrientedPoints) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
         property float nx\nproperty float ny\nproperty float nz\nend_header\n",
        s.len()
    );
    for (p, n) in s.points.iter().zip(&s.normals) {
        let _ = writeln!(out, "{} {} {} {} {} {}", p.x as f32, p.y as f32, p.z as f32, n.x as f32, n.y as f32, n.z as f32);
    }
    out
}

/// ASCII PLY with the distance as a scalar property.
pub fn sdf_ply(s: &SdfSamples) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
         property float sdf\nend_header\n",
        s.len()
    );
    for (p, v) in s.points.iter().zip(&s.values) {
        let _ = writeln!(out, "{} {} {} {}", p.x as f32, p.y as f32, p.z as f32, v);
    }
    out
}

/// Reads back a file written by [`write_oriented_points`].
pub fn read_oriented_points(path: &Path) -> Result<OrientedPoints> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 24 != 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "length is not a multiple of 24 bytes".into(),
        });
    }
    let f = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
    let mut out = OrientedPoints::default();
    for rec in bytes.chunks_exact(24) {
        let v: Vec<f64> = rec.chunks_exact(4).map(f).collect();
        out.points.push(Point::new(v[0], v[1], v[2]));
        out.normals.push(Vec3::new(v[3], v[4], v[5]));
    }
    Ok(out)
}

/// Per-face sample counts, useful for checking area proportionality.
pub fn face_histogram(mesh: &TriangleMesh, points: &[Point]) -> HashMap<usize, usize> {
    let bvh = TriangleBvh::new(mesh);
    let mut h = HashMap::new();
    for p in points {
        if let Some(hit) = bvh.nearest(p) {
            *h.entry(hit.face as usize).or_default() += 1;
        }
    }
    h
}
