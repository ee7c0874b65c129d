//! Reading scene containers (binary glTF) and flat OBJ meshes, normalization
//! to the canonical cube, and writing part meshes.
//!
//! The glTF reader covers the geometry subset: scenes, the node hierarchy with
//! matrix or TRS transforms, triangle primitives (lists, strips and fans),
//! float positions and integer indices. Buffers come from the GLB binary
//! chunk or from files next to a `.gltf`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix4, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Aabb, Point, TriangleMesh};

/// Half-width of the cube objects are normalized into.
pub const NORMALIZED_HALF_EXTENT: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneNode {
    pub name: String,
    /// World-space geometry (node transforms already applied).
    pub mesh: TriangleMesh,
}

/// Uniform map `p' = p * scale + translation` applied at load.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: f64,
    pub translation: [f64; 3],
}

impl Normalization {
    pub fn identity() -> Self {
        Normalization {
            scale: 1.0,
            translation: [0.0; 3],
        }
    }

    /// Maps the box onto a centered box whose longest side is 1.9.
    pub fn fit(bounds: &Aabb) -> Self {
        let longest = bounds.extent().max();
        let scale = 2.0 * NORMALIZED_HALF_EXTENT / longest;
        let c = bounds.center();
        Normalization {
            scale,
            translation: [-c.x * scale, -c.y * scale, -c.z * scale],
        }
    }

    #[inline]
    pub fn apply(&self, p: &Point) -> Point {
        Point::new(
            p.x * self.scale + self.translation[0],
            p.y * self.scale + self.translation[1],
            p.z * self.scale + self.translation[2],
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub nodes: Vec<SceneNode>,
    pub normalization: Normalization,
    /// Faces dropped at load for repeated indices or near-zero area.
    pub degenerate_faces: usize,
}

impl SceneObject {
    pub fn num_faces(&self) -> usize {
        self.nodes.iter().map(|n| n.mesh.num_faces()).sum()
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes.iter().fold(Aabb::empty(), |b, n| b.union(&n.mesh.bounds()))
    }

    /// Rescales into the canonical cube and composes the map with the stored one.
    pub fn normalize(&mut self) {
        let n = Normalization::fit(&self.bounds());
        for node in &mut self.nodes {
            node.mesh.transform(|p| n.apply(p));
        }
        let old = self.normalization;
        self.normalization = Normalization {
            scale: old.scale * n.scale,
            translation: [0, 1, 2].map(|a| old.translation[a] * n.scale + n.translation[a]),
        };
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Glb,
    Gltf,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "glb" => Some(MeshFormat::Glb),
            "gltf" => Some(MeshFormat::Gltf),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

/// Loads, cleans and normalizes an object.
pub fn load_object(path: &Path) -> Result<SceneObject> {
    let format = MeshFormat::from_path(path).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        message: "unknown extension (expected .glb, .gltf or .obj)".into(),
    })?;
    load_object_as(path, format)
}

pub fn load_object_as(path: &Path, format: MeshFormat) -> Result<SceneObject> {
    let mut nodes = match format {
        MeshFormat::Glb => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            read_glb(&bytes, path)?
        }
        MeshFormat::Gltf => {
            let text = fs::read(path).map_err(|e| Error::io(path, e))?;
            read_gltf(&text, None, path)?
        }
        MeshFormat::Obj => read_obj(path)?,
    };
    let mut degenerate = 0;
    for n in &mut nodes {
        n.mesh.validate().map_err(|e| match e {
            Error::Validation(m) => Error::Validation(format!("{}: node {}: {m}", path.display(), n.name)),
            other => other,
        })?;
        degenerate += n.mesh.drop_degenerate_faces();
        n.mesh = n.mesh.compact();
    }
    if degenerate > 0 {
        log::warn!("{}: dropped {degenerate} degenerate faces", path.display());
    }
    nodes.retain(|n| !n.mesh.is_empty());
    if nodes.is_empty() {
        return Err(Error::EmptyGeometry(path.display().to_string()));
    }
    let mut obj = SceneObject {
        nodes,
        normalization: Normalization::identity(),
        degenerate_faces: degenerate,
    };
    obj.normalize();
    Ok(obj)
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// OBJ as one node; each `o`/`g` group becomes a face label.
fn read_obj(path: &Path) -> Result<Vec<SceneNode>> {
    let opts = tobj::LoadOptions {
        triangulate: true,
        single_index: false,
        ignore_points: true,
        ignore_lines: true,
    };
    let (models, _) = tobj::load_obj(path, &opts).map_err(|e| match e {
        tobj::LoadError::OpenFileFailed | tobj::LoadError::ReadError => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        },
        other => format_err(path, other.to_string()),
    })?;
    let mut mesh = TriangleMesh {
        face_part_id: Some(Vec::new()),
        ..Default::default()
    };
    for (label, model) in models.iter().enumerate() {
        let m = &model.mesh;
        let base = mesh.positions.len() as u32;
        mesh.positions
            .extend(m.positions.chunks_exact(3).map(|c| Point::new(c[0], c[1], c[2])));
        for t in m.indices.chunks_exact(3) {
            mesh.faces.push([t[0] + base, t[1] + base, t[2] + base]);
            mesh.face_part_id.as_mut().unwrap().push(label as u32);
        }
    }
    let name = path.file_stem().map_or("mesh".into(), |s| s.to_string_lossy().into_owned());
    Ok(vec![SceneNode { name, mesh }])
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase")]
struct GltfDoc {
    #[serde(default)]
    scene: Option<usize>,
    #[serde(default)]
    scenes: Vec<GltfScene>,
    #[serde(default)]
    nodes: Vec<GltfNode>,
    #[serde(default)]
    meshes: Vec<GltfMesh>,
    #[serde(default)]
    accessors: Vec<GltfAccessor>,
    #[serde(default)]
    buffer_views: Vec<GltfBufferView>,
    #[serde(default)]
    buffers: Vec<GltfBuffer>,
}

#[derive(Deserialize, Default)]
struct GltfScene {
    #[serde(default)]
    nodes: Vec<usize>,
}

#[derive(Deserialize, Default)]
struct GltfNode {
    name: Option<String>,
    mesh: Option<usize>,
    #[serde(default)]
    children: Vec<usize>,
    matrix: Option<[f64; 16]>,
    translation: Option<[f64; 3]>,
    rotation: Option<[f64; 4]>,
    scale: Option<[f64; 3]>,
}

#[derive(Deserialize)]
struct GltfMesh {
    name: Option<String>,
    primitives: Vec<GltfPrimitive>,
}

#[derive(Deserialize)]
struct GltfPrimitive {
    attributes: HashMap<String, usize>,
    indices: Option<usize>,
    mode: Option<u32>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct GltfAccessor {
    buffer_view: Option<usize>,
    #[serde(default)]
    byte_offset: usize,
    component_type: u32,
    count: usize,
    #[serde(rename = "type")]
    kind: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct GltfBufferView {
    buffer: usize,
    #[serde(default)]
    byte_offset: usize,
    byte_length: usize,
    byte_stride: Option<usize>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct GltfBuffer {
    byte_length: usize,
    uri: Option<String>,
}

const GLB_MAGIC: u32 = 0x4654_6c67;
const CHUNK_JSON: u32 = 0x4e4f_534a;
const CHUNK_BIN: u32 = 0x004e_4942;

fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub(crate) fn read_glb(bytes: &[u8], path: &Path) -> Result<Vec<SceneNode>> {
    if read_u32(bytes, 0) != Some(GLB_MAGIC) {
        return Err(format_err(path, "not a binary glTF file"));
    }
    if read_u32(bytes, 4) != Some(2) {
        return Err(format_err(path, "only glTF 2.0 is supported"));
    }
    let total = read_u32(bytes, 8).ok_or_else(|| format_err(path, "truncated header"))? as usize;
    let end = total.min(bytes.len());
    let mut at = 12;
    let mut json: Option<&[u8]> = None;
    let mut bin: Option<&[u8]> = None;
    while at + 8 <= end {
        let len = read_u32(bytes, at).unwrap() as usize;
        let kind = read_u32(bytes, at + 4).unwrap();
        let body = bytes
            .get(at + 8..at + 8 + len)
            .ok_or_else(|| format_err(path, "truncated chunk"))?;
        match kind {
            CHUNK_JSON if json.is_none() => json = Some(body),
            CHUNK_BIN if bin.is_none() => bin = Some(body),
            _ => {}
        }
        at += 8 + len.div_ceil(4) * 4;
    }
    let json = json.ok_or_else(|| format_err(path, "missing JSON chunk"))?;
    read_gltf(json, bin, path)
}

fn read_gltf(json: &[u8], bin: Option<&[u8]>, path: &Path) -> Result<Vec<SceneNode>> {
    let doc: GltfDoc = serde_json::from_slice(json).map_err(|e| format_err(path, format!("bad glTF JSON: {e}")))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut buffers: Vec<Vec<u8>> = Vec::with_capacity(doc.buffers.len());
    for (i, b) in doc.buffers.iter().enumerate() {
        let data = match (&b.uri, bin) {
            (None, Some(bin)) if i == 0 => bin.to_vec(),
            (Some(uri), _) if !uri.starts_with("data:") => {
                let p: PathBuf = dir.join(uri);
                fs::read(&p).map_err(|e| Error::io(&p, e))?
            }
            _ => return Err(format_err(path, format!("buffer {i} has no readable data"))),
        };
        if data.len() < b.byte_length {
            return Err(format_err(path, format!("buffer {i} is shorter than declared")));
        }
        buffers.push(data);
    }

    let mut is_child = vec![false; doc.nodes.len()];
    for n in &doc.nodes {
        for &c in &n.children {
            if c >= doc.nodes.len() {
                return Err(format_err(path, format!("child node {c} out of range")));
            }
            is_child[c] = true;
        }
    }
    let roots: Vec<usize> = match doc.scene.or(if doc.scenes.is_empty() { None } else { Some(0) }) {
        Some(s) => doc
            .scenes
            .get(s)
            .ok_or_else(|| format_err(path, format!("scene {s} out of range")))?
            .nodes
            .clone(),
        None => (0..doc.nodes.len()).filter(|&i| !is_child[i]).collect(),
    };

    let mut out = Vec::new();
    let mut stack: Vec<(usize, Matrix4<f64>, usize)> = roots.iter().rev().map(|&r| (r, Matrix4::identity(), 0)).collect();
    while let Some((ni, parent, depth)) = stack.pop() {
        let node = doc
            .nodes
            .get(ni)
            .ok_or_else(|| format_err(path, format!("node {ni} out of range")))?;
        if depth > 256 {
            return Err(format_err(path, "node hierarchy too deep or cyclic"));
        }
        let world = parent * local_transform(node);
        if let Some(mi) = node.mesh {
            let gm = doc
                .meshes
                .get(mi)
                .ok_or_else(|| format_err(path, format!("mesh {mi} out of range")))?;
            let mut mesh = TriangleMesh::default();
            for prim in &gm.primitives {
                append_primitive(&doc, &buffers, prim, &mut mesh, path)?;
            }
            let flip = world.fixed_view::<3, 3>(0, 0).determinant() < 0.0;
            mesh.transform(|p| world.transform_point(p));
            if flip {
                for f in &mut mesh.faces {
                    f.swap(1, 2);
                }
            }
            let name = node
                .name
                .clone()
                .or_else(|| gm.name.clone())
                .unwrap_or_else(|| format!("node{ni}"));
            out.push(SceneNode { name, mesh });
        }
        for &c in node.children.iter().rev() {
            stack.push((c, world, depth + 1));
        }
    }
    Ok(out)
}

fn local_transform(node: &GltfNode) -> Matrix4<f64> {
    if let Some(m) = node.matrix {
        return Matrix4::from_column_slice(&m);
    }
    let t = node.translation.unwrap_or([0.0; 3]);
    let r = node.rotation.unwrap_or([0.0, 0.0, 0.0, 1.0]);
    let s = node.scale.unwrap_or([1.0; 3]);
    let q = UnitQuaternion::from_quaternion(Quaternion::new(r[3], r[0], r[1], r[2]));
    Matrix4::new_translation(&Vector3::from(t)) * q.to_homogeneous() * Matrix4::new_nonuniform_scaling(&Vector3::from(s))
}

fn accessor_bytes<'a>(
    doc: &GltfDoc,
    buffers: &'a [Vec<u8>],
    acc: &GltfAccessor,
    elem: usize,
    path: &Path,
) -> Result<(&'a [u8], usize)> {
    let vi = acc
        .buffer_view
        .ok_or_else(|| format_err(path, "sparse or empty accessors are not supported"))?;
    let view = doc
        .buffer_views
        .get(vi)
        .ok_or_else(|| format_err(path, format!("buffer view {vi} out of range")))?;
    let buf = buffers
        .get(view.buffer)
        .ok_or_else(|| format_err(path, format!("buffer {} out of range", view.buffer)))?;
    let stride = view.byte_stride.unwrap_or(elem);
    let start = view.byte_offset + acc.byte_offset;
    let need = if acc.count == 0 { 0 } else { stride * (acc.count - 1) + elem };
    if need > view.byte_length.saturating_sub(acc.byte_offset) || view.byte_offset + view.byte_length > buf.len() {
        return Err(format_err(path, "accessor runs past its buffer view"));
    }
    Ok((&buf[start..start + need], stride))
}

fn append_primitive(doc: &GltfDoc, buffers: &[Vec<u8>], prim: &GltfPrimitive, mesh: &mut TriangleMesh, path: &Path) -> Result<()> {
    let mode = prim.mode.unwrap_or(4);
    if !(4..=6).contains(&mode) {
        return Ok(());
    }
    let pi = *prim
        .attributes
        .get("POSITION")
        .ok_or_else(|| format_err(path, "primitive without POSITION"))?;
    let pacc = doc
        .accessors
        .get(pi)
        .ok_or_else(|| format_err(path, format!("accessor {pi} out of range")))?;
    if pacc.component_type != 5126 || pacc.kind != "VEC3" {
        return Err(format_err(path, "positions must be float VEC3"));
    }
    let (bytes, stride) = accessor_bytes(doc, buffers, pacc, 12, path)?;
    let base = mesh.positions.len() as u32;
    for i in 0..pacc.count {
        let o = i * stride;
        let f = |k: usize| f32::from_le_bytes(bytes[o + 4 * k..o + 4 * k + 4].try_into().unwrap()) as f64;
        mesh.positions.push(Point::new(f(0), f(1), f(2)));
    }
    let indices: Vec<u32> = match prim.indices {
        None => (0..pacc.count as u32).collect(),
        Some(ii) => {
            let acc = doc
                .accessors
                .get(ii)
                .ok_or_else(|| format_err(path, format!("accessor {ii} out of range")))?;
            let size = match acc.component_type {
                5121 => 1,
                5123 => 2,
                5125 => 4,
                t => return Err(format_err(path, format!("unsupported index type {t}"))),
            };
            let (bytes, stride) = accessor_bytes(doc, buffers, acc, size, path)?;
            (0..acc.count)
                .map(|i| {
                    let b = &bytes[i * stride..i * stride + size];
                    match size {
                        1 => b[0] as u32,
                        2 => u16::from_le_bytes([b[0], b[1]]) as u32,
                        _ => u32::from_le_bytes([b[0], b[1], b[2], b[3]]),
                    }
                })
                .collect()
        }
    };
    if let Some(&bad) = indices.iter().find(|&&i| i as usize >= pacc.count) {
        return Err(format_err(path, format!("index {bad} out of range")));
    }
    let tri = |a: u32, b: u32, c: u32| [a + base, b + base, c + base];
    match mode {
        4 => mesh.faces.extend(indices.chunks_exact(3).map(|t| tri(t[0], t[1], t[2]))),
        5 => {
            for i in 2..indices.len() {
                let (a, b, c) = (indices[i - 2], indices[i - 1], indices[i]);
                mesh.faces.push(if i % 2 == 0 { tri(a, b, c) } else { tri(b, a, c) });
            }
        }
        _ => {
            for i in 2..indices.len() {
                mesh.faces.push(tri(indices[0], indices[i - 1], indices[i]));
            }
        }
    }
    Ok(())
}

/// Binary glTF with one node per mesh (float32 positions, u32 indices).
pub fn write_glb(nodes: &[SceneNode], path: &Path) -> Result<()> {
    let mut bin: Vec<u8> = Vec::new();
    let mut accessors = Vec::new();
    let mut views = Vec::new();
    let mut meshes = Vec::new();
    let mut gnodes = Vec::new();
    for (i, node) in nodes.iter().enumerate() {
        let b = node.mesh.bounds();
        let pos_off = bin.len();
        for p in &node.mesh.positions {
            for c in p.iter() {
                bin.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        let pos_len = bin.len() - pos_off;
        let idx_off = bin.len();
        for f in &node.mesh.faces {
            for &v in f {
                bin.extend_from_slice(&v.to_le_bytes());
            }
        }
        let idx_len = bin.len() - idx_off;
        views.push(serde_json::json!({"buffer": 0, "byteOffset": pos_off, "byteLength": pos_len}));
        views.push(serde_json::json!({"buffer": 0, "byteOffset": idx_off, "byteLength": idx_len}));
        let (lo, hi) = if b.is_empty() {
            ([0.0; 3], [0.0; 3])
        } else {
            ([b.min.x, b.min.y, b.min.z].map(|v| v as f32), [b.max.x, b.max.y, b.max.z].map(|v| v as f32))
        };
        accessors.push(serde_json::json!({
            "bufferView": 2 * i, "componentType": 5126, "count": node.mesh.positions.len(),
            "type": "VEC3", "min": lo, "max": hi
        }));
        accessors.push(serde_json::json!({
            "bufferView": 2 * i + 1, "componentType": 5125, "count": node.mesh.faces.len() * 3, "type": "SCALAR"
        }));
        meshes.push(serde_json::json!({
            "name": node.name,
            "primitives": [{"attributes": {"POSITION": 2 * i}, "indices": 2 * i + 1, "mode": 4}]
        }));
        gnodes.push(serde_json::json!({"name": node.name, "mesh": i}));
    }
    let doc = serde_json::json!({
        "asset": {"version": "2.0", "generator": "partpack"},
        "scene": 0,
        "scenes": [{"nodes": (0..nodes.len()).collect::<Vec<_>>()}],
        "nodes": gnodes,
        "meshes": meshes,
        "accessors": accessors,
        "bufferViews": views,
        "buffers": [{"byteLength": bin.len()}],
    });
    let mut json = serde_json::to_vec(&doc)?;
    while json.len() % 4 != 0 {
        json.push(b' ');
    }
    while !bin.len().is_multiple_of(4) {
        bin.push(0);
    }
    let total = 12 + 8 + json.len() + 8 + bin.len();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&GLB_MAGIC.to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(total as u32).to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&CHUNK_JSON.to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(bin.len() as u32).to_le_bytes());
    out.extend_from_slice(&CHUNK_BIN.to_le_bytes());
    out.extend_from_slice(&bin);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// OBJ text. Coordinates use the shortest representation that parses back
/// to the same `f64`.
pub fn obj_string(mesh: &TriangleMesh) -> String {
    use std::fmt::Write;
    let mut s = String::with_capacity(mesh.positions.len() * 40 + mesh.faces.len() * 24);
    for p in &mesh.positions {
        let _ = writeln!(s, "v {:?} {:?} {:?}", p.x, p.y, p.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn write_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    fs::write(path, obj_string(mesh)).map_err(|e| Error::io(path, e))
}

/// Several meshes in one OBJ file, one `o` group each.
pub fn write_obj_groups(meshes: &[(&str, &TriangleMesh)], path: &Path) -> Result<()> {
    use std::fmt::Write;
    let mut s = String::new();
    let mut base = 1;
    for (name, m) in meshes {
        let _ = writeln!(s, "o {name}");
        for p in &m.positions {
            let _ = writeln!(s, "v {:?} {:?} {:?}", p.x, p.y, p.z);
        }
        for f in &m.faces {
            let _ = writeln!(s, "f {} {} {}", f[0] + base, f[1] + base, f[2] + base);
        }
        base += m.positions.len() as u32;
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads an OBJ without normalizing it.
pub fn read_obj_raw(path: &Path) -> Result<TriangleMesh> {
    let mut nodes = read_obj(path)?;
    Ok(nodes.remove(0).mesh)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedPart {
    pub part: usize,
    pub volume: u8,
    pub group: usize,
    pub file: String,
    pub faces: usize,
    pub provenance: crate::part_extraction::Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartManifest {
    pub parts: Vec<SavedPart>,
    pub volumes: [Vec<usize>; 2],
    pub contraction: crate::bipartite_contraction::ContractionPlan,
    pub groups: Vec<Vec<usize>>,
    pub merge_log: Vec<crate::part_extraction::MergeRecord>,
    pub normalization: Normalization,
}

pub const PARTS_MANIFEST: &str = "parts.json";

/// Writes `vol{v}_part{k}.obj` per part (shared object frame) and `parts.json`.
pub fn save_part_meshes(
    parts: &crate::part_extraction::PartSet,
    assignment: &crate::volume_packing::VolumeAssignment,
    normalization: Normalization,
    dir: &Path,
) -> Result<PartManifest> {
    if parts.is_empty() {
        return Err(Error::Validation("no parts to save".into()));
    }
    if assignment.part_volume.len() != parts.len() {
        return Err(Error::Validation(format!(
            "assignment covers {} parts, expected {}",
            assignment.part_volume.len(),
            parts.len()
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let group_of = assignment.group_of_part();
    let mut saved = Vec::with_capacity(parts.len());
    let mut volumes = [Vec::new(), Vec::new()];
    for (k, mesh) in parts.parts.iter().enumerate() {
        let v = assignment.part_volume[k];
        let file = format!("vol{v}_part{k}.obj");
        write_obj(mesh, &dir.join(&file))?;
        volumes[v as usize].push(k);
        saved.push(SavedPart {
            part: k,
            volume: v,
            group: group_of[k],
            file,
            faces: mesh.num_faces(),
            provenance: parts.provenance[k],
        });
    }
    let manifest = PartManifest {
        parts: saved,
        volumes,
        contraction: assignment.plan.clone(),
        groups: assignment.groups.clone(),
        merge_log: parts.merge_log.clone(),
        normalization,
    };
    let p = dir.join(PARTS_MANIFEST);
    fs::write(&p, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&p, e))?;
    Ok(manifest)
}
