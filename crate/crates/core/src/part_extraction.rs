//! Parts from scene nodes or connected components, the three merge rules,
//! and boundary-loop repair.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Point, TriangleMesh, EPS_WELD};
use crate::mesh_io::SceneObject;
use crate::voxel::{GridSpec, VoxelSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    SceneNode,
    ConnectedComponent,
    Merged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeRule {
    SharedBoundaryLoop,
    SmallComponent,
    HighIou,
}

/// One merge action. Ids are the smallest input part id of each side at the
/// time of the merge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub part_a: usize,
    pub part_b: usize,
    pub rule: MergeRule,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PartSet {
    pub parts: Vec<TriangleMesh>,
    pub provenance: Vec<Provenance>,
    pub merge_log: Vec<MergeRecord>,
}

impl PartSet {
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn total_faces(&self) -> usize {
        self.parts.iter().map(TriangleMesh::num_faces).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLoop {
    pub part_id: usize,
    pub vertices: Vec<Point>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopDiagnostics {
    /// Edges with three or more incident faces (left out of every loop).
    pub nonmanifold_edges: usize,
    /// Boundary edge chains that could not be closed into a loop.
    pub open_chains: usize,
}

/// Thresholds of the merge rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeConfig {
    pub resolution: usize,
    pub dilation_voxels: usize,
    /// Parts with fewer faces than this are small.
    pub small_face_count: usize,
    /// Parts whose bounding-box diagonal is below this many voxel widths are small.
    pub small_diagonal_voxels: f64,
    pub iou_threshold: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            resolution: 512,
            dilation_voxels: 1,
            small_face_count: 10,
            small_diagonal_voxels: 2.0,
            iou_threshold: 0.9,
        }
    }
}

pub const CAP_MAX_VERTICES: usize = 64;
pub const CAP_MAX_PLANE_RMS: f64 = 0.02;

/// Scene nodes become parts when there are several; otherwise each connected
/// component (faces linked through positions within the weld tolerance) does.
pub fn extract_parts(obj: &SceneObject) -> Result<PartSet> {
    let nodes: Vec<&TriangleMesh> = obj.nodes.iter().map(|n| &n.mesh).filter(|m| !m.is_empty()).collect();
    if nodes.is_empty() {
        return Err(Error::EmptyGeometry("object has no triangles".into()));
    }
    if obj.nodes.len() > 1 {
        let parts: Vec<TriangleMesh> = nodes.into_iter().cloned().collect();
        let n = parts.len();
        return Ok(PartSet {
            parts,
            provenance: vec![Provenance::SceneNode; n],
            merge_log: Vec::new(),
        });
    }
    let parts = connected_components(nodes[0]);
    let n = parts.len();
    Ok(PartSet {
        parts,
        provenance: vec![Provenance::ConnectedComponent; n],
        merge_log: Vec::new(),
    })
}

/// Components ordered by their first face.
pub fn connected_components(mesh: &TriangleMesh) -> Vec<TriangleMesh> {
    let ids = mesh.welded_ids(EPS_WELD);
    let mut parent: Vec<u32> = (0..mesh.positions.len() as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    for f in &mesh.faces {
        let a = find(&mut parent, ids[f[0] as usize]);
        for &v in &f[1..] {
            let b = find(&mut parent, ids[v as usize]);
            if a != b {
                parent[b as usize] = a;
            }
        }
    }
    let mut by_root: Vec<(u32, Vec<usize>)> = Vec::new();
    let mut slot: HashMap<u32, usize> = HashMap::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        let r = find(&mut parent, ids[f[0] as usize]);
        let s = *slot.entry(r).or_insert_with(|| {
            by_root.push((r, Vec::new()));
            by_root.len() - 1
        });
        by_root[s].1.push(fi);
    }
    by_root.into_iter().map(|(_, faces)| mesh.select_faces(&faces)).collect()
}

/// Closed cycles of boundary edges (edges with exactly one incident face),
/// after welding coincident positions.
pub fn find_boundary_loops(part: &TriangleMesh, part_id: usize) -> (Vec<BoundaryLoop>, LoopDiagnostics) {
    let ids = part.welded_ids(EPS_WELD);
    let (chains, diag) = boundary_chains(part, &ids);
    let loops = chains
        .into_iter()
        .map(|c| BoundaryLoop {
            part_id,
            vertices: c.iter().map(|&v| part.positions[v as usize]).collect(),
        })
        .collect();
    (loops, diag)
}

/// Loops as welded vertex ids.
fn boundary_chains(part: &TriangleMesh, ids: &[u32]) -> (Vec<Vec<u32>>, LoopDiagnostics) {
    let mut diag = LoopDiagnostics::default();
    let mut boundary: Vec<(u32, u32)> = Vec::new();
    for (&key, faces) in &part.edge_faces(ids) {
        match faces.len() {
            1 => boundary.push(key),
            2 => {}
            _ => diag.nonmanifold_edges += 1,
        }
    }
    boundary.sort_unstable();
    let mut adj: BTreeMap<u32, Vec<(u32, usize)>> = BTreeMap::new();
    for (i, &(a, b)) in boundary.iter().enumerate() {
        adj.entry(a).or_default().push((b, i));
        adj.entry(b).or_default().push((a, i));
    }
    let mut used = vec![false; boundary.len()];
    let mut loops = Vec::new();
    for start in 0..boundary.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut cur) = boundary[start];
        let mut chain = vec![first];
        let closed = loop {
            if cur == first {
                break true;
            }
            chain.push(cur);
            let next = adj[&cur].iter().find(|&&(_, e)| !used[e]).copied();
            match next {
                Some((v, e)) => {
                    used[e] = true;
                    cur = v;
                }
                None => break false,
            }
        };
        if closed {
            loops.push(chain);
        } else {
            diag.open_chains += 1;
        }
    }
    (loops, diag)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenLoop {
    pub vertices: usize,
    pub plane_rms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RepairDiagnostics {
    pub loops_before: usize,
    pub capped: usize,
    pub left_open: Vec<OpenLoop>,
    pub nonmanifold_edges: usize,
    pub boundary_edges_before: usize,
    pub boundary_edges_after: usize,
}

/// RMS distance of `points` to their least-squares plane.
pub fn plane_rms(points: &[Point]) -> f64 {
    let n = points.len() as f64;
    let c = points.iter().fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    eig.eigenvalues.min().max(0.0).sqrt()
}

/// Welds coincident vertices (which closes matching loop pairs) and caps
/// small, nearly planar loops with a fan around their centroid. Watertight
/// input is returned unchanged.
pub fn repair_part(part: &TriangleMesh) -> (TriangleMesh, RepairDiagnostics) {
    let mut diag = RepairDiagnostics::default();
    let ids = part.welded_ids(EPS_WELD);
    let (loops, ld) = boundary_chains(part, &ids);
    diag.nonmanifold_edges = ld.nonmanifold_edges;
    diag.boundary_edges_before = count_boundary_edges(part);
    diag.loops_before = loops.len();
    if loops.is_empty() {
        diag.boundary_edges_after = diag.boundary_edges_before;
        return (part.clone(), diag);
    }

    let mut mesh = part.welded(EPS_WELD);
    mesh.drop_degenerate_faces();
    let ids: Vec<u32> = (0..mesh.positions.len() as u32).collect();
    let (loops, _) = boundary_chains(&mesh, &ids);
    let directed: HashMap<(u32, u32), ()> = mesh
        .faces
        .iter()
        .flat_map(|f| (0..3).map(move |k| ((f[k], f[(k + 1) % 3]), ())))
        .collect();
    let label = mesh.face_part_id.as_ref().and_then(|l| l.first().copied());
    for lp in loops {
        let pts: Vec<Point> = lp.iter().map(|&v| mesh.positions[v as usize]).collect();
        let rms = plane_rms(&pts);
        if lp.len() > CAP_MAX_VERTICES || rms >= CAP_MAX_PLANE_RMS {
            diag.left_open.push(OpenLoop {
                vertices: lp.len(),
                plane_rms: rms,
            });
            continue;
        }
        // the cap must traverse each edge opposite to its existing face
        let forward = directed.contains_key(&(lp[0], lp[1]));
        let centroid = Point::from(pts.iter().fold(nalgebra::Vector3::zeros(), |a, p| a + p.coords) / pts.len() as f64);
        let c = mesh.positions.len() as u32;
        mesh.positions.push(centroid);
        for k in 0..lp.len() {
            let (a, b) = (lp[k], lp[(k + 1) % lp.len()]);
            mesh.faces.push(if forward { [b, a, c] } else { [a, b, c] });
            if let (Some(labels), Some(l)) = (&mut mesh.face_part_id, label) {
                labels.push(l);
            }
        }
        diag.capped += 1;
    }
    diag.boundary_edges_after = count_boundary_edges(&mesh);
    (mesh, diag)
}

pub fn count_boundary_edges(mesh: &TriangleMesh) -> usize {
    mesh.edge_defects().0
}

/// True when every vertex of each loop lies within the weld tolerance of a
/// vertex of the other.
pub fn loops_match(a: &[Point], b: &[Point]) -> bool {
    let covered = |x: &[Point], y: &[Point]| {
        x.iter()
            .all(|p| y.iter().any(|q| (p - q).amax() <= EPS_WELD && (p - q).norm() <= EPS_WELD))
    };
    covered(a, b) && covered(b, a)
}

struct Group {
    members: Vec<usize>,
    mesh: TriangleMesh,
    provenance: Provenance,
    loops: Option<Vec<Vec<Point>>>,
    voxels: Option<VoxelSet>,
}

impl Group {
    fn rep(&self) -> usize {
        self.members[0]
    }
}

struct Merger<'a> {
    groups: Vec<Group>,
    log: Vec<MergeRecord>,
    cfg: &'a MergeConfig,
    grid: GridSpec,
}

impl Merger<'_> {
    fn ensure_voxels(&mut self) {
        let grid = self.grid;
        self.groups.par_iter_mut().filter(|g| g.voxels.is_none()).for_each(|g| {
            g.voxels = Some(voxelize(&grid, &g.mesh));
        });
    }

    fn ensure_loops(&mut self) {
        self.groups.par_iter_mut().filter(|g| g.loops.is_none()).for_each(|g| {
            let (loops, _) = find_boundary_loops(&g.mesh, 0);
            g.loops = Some(loops.into_iter().map(|l| l.vertices).collect());
        });
    }

    /// Merges the listed pairs of group indices (with union-find closure).
    fn merge_pairs(&mut self, pairs: &[(usize, usize)], rule: MergeRule) -> bool {
        let n = self.groups.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut merged = false;
        for &(a, b) in pairs {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                continue;
            }
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            parent[hi] = lo;
            self.log.push(MergeRecord {
                part_a: self.groups[a].rep().min(self.groups[b].rep()),
                part_b: self.groups[a].rep().max(self.groups[b].rep()),
                rule,
            });
            merged = true;
        }
        if !merged {
            return false;
        }
        let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            buckets.entry(r).or_default().push(i);
        }
        let old = std::mem::take(&mut self.groups);
        let mut old: Vec<Option<Group>> = old.into_iter().map(Some).collect();
        let mut next = Vec::with_capacity(buckets.len());
        for (_, idxs) in buckets {
            if idxs.len() == 1 {
                next.push(old[idxs[0]].take().unwrap());
                continue;
            }
            let parts: Vec<Group> = idxs.iter().map(|&i| old[i].take().unwrap()).collect();
            next.push(combine(parts));
        }
        next.sort_by_key(Group::rep);
        self.groups = next;
        true
    }

    fn rule_shared_loops(&mut self) -> bool {
        self.ensure_loops();
        let n = self.groups.len();
        let boxes: Vec<Vec<crate::mesh::Aabb>> = self
            .groups
            .iter()
            .map(|g| g.loops.as_ref().unwrap().iter().map(crate::mesh::Aabb::from_points).collect())
            .collect();
        let pairs: Vec<(usize, usize)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|a| {
                let boxes = &boxes;
                let groups = &self.groups;
                (a + 1..n).filter_map(move |b| {
                    let la = groups[a].loops.as_ref().unwrap();
                    let lb = groups[b].loops.as_ref().unwrap();
                    let hit = la.iter().enumerate().any(|(i, x)| {
                        lb.iter().enumerate().any(|(j, y)| {
                            boxes[a][i].intersects(&boxes[b][j], EPS_WELD) && loops_match(x, y)
                        })
                    });
                    hit.then_some((a, b))
                })
            })
            .collect();
        self.merge_pairs(&pairs, MergeRule::SharedBoundaryLoop)
    }

    fn is_small(&self, g: &Group) -> bool {
        g.mesh.num_faces() < self.cfg.small_face_count
            || g.mesh.bounds().diagonal() < self.cfg.small_diagonal_voxels * self.grid.voxel_size()
    }

    fn rule_small(&mut self) -> bool {
        let mut any = false;
        let mut i = 0;
        while i < self.groups.len() {
            if self.groups.len() < 2 || !self.is_small(&self.groups[i]) {
                i += 1;
                continue;
            }
            self.ensure_voxels();
            let r = self.cfg.dilation_voxels;
            let me = self.groups[i].voxels.as_ref().unwrap().dilate(r);
            let target = (0..self.groups.len())
                .into_par_iter()
                .filter(|&j| j != i)
                .filter_map(|j| {
                    let other = self.groups[j].voxels.as_ref().unwrap();
                    if other.is_empty() || me.region.intersect(&other.region.grow(r)).is_none() {
                        return None;
                    }
                    let overlap = me.intersection_count(&other.dilate(r));
                    (overlap > 0).then_some((overlap, j))
                })
                .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
            match target {
                Some((_, j)) => {
                    let rep = self.groups[i].rep();
                    self.merge_pairs(&[(i, j)], MergeRule::SmallComponent);
                    any = true;
                    // continue after the merged group's new position
                    i = self.groups.iter().position(|g| g.members.contains(&rep)).unwrap() + 1;
                }
                None => i += 1,
            }
        }
        any
    }

    fn rule_iou(&mut self) -> bool {
        self.ensure_voxels();
        let n = self.groups.len();
        let t = self.cfg.iou_threshold;
        let pairs: Vec<(usize, usize)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|a| {
                let groups = &self.groups;
                (a + 1..n).filter_map(move |b| {
                    let va = groups[a].voxels.as_ref().unwrap();
                    let vb = groups[b].voxels.as_ref().unwrap();
                    va.region.intersect(&vb.region)?;
                    (va.iou(vb) > t).then_some((a, b))
                })
            })
            .collect();
        self.merge_pairs(&pairs, MergeRule::HighIou)
    }
}

fn voxelize(grid: &GridSpec, mesh: &TriangleMesh) -> VoxelSet {
    let tris: Vec<[Point; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
    VoxelSet::from_triangles(grid, &tris)
}

fn combine(mut parts: Vec<Group>) -> Group {
    parts.sort_by_key(Group::rep);
    let mut members: Vec<usize> = parts.iter().flat_map(|g| g.members.iter().copied()).collect();
    members.sort_unstable();
    let mesh = TriangleMesh::concat(parts.iter().map(|g| &g.mesh));
    Group {
        members,
        mesh,
        provenance: Provenance::Merged,
        loops: None,
        voxels: None,
    }
}

/// Applies shared-loop, small-part and high-IoU merging in that order until
/// nothing changes. Merged parts concatenate their members in id order.
pub fn merge_rules(parts: &PartSet, cfg: &MergeConfig) -> PartSet {
    let mut m = Merger {
        groups: parts
            .parts
            .iter()
            .enumerate()
            .map(|(i, p)| Group {
                members: vec![i],
                mesh: p.clone(),
                provenance: parts.provenance.get(i).copied().unwrap_or(Provenance::ConnectedComponent),
                loops: None,
                voxels: None,
            })
            .collect(),
        log: parts.merge_log.clone(),
        cfg,
        grid: GridSpec::new(cfg.resolution),
    };
    loop {
        let a = m.rule_shared_loops();
        let b = m.rule_small();
        let c = m.rule_iou();
        if !(a || b || c) {
            break;
        }
    }
    PartSet {
        provenance: m.groups.iter().map(|g| g.provenance).collect(),
        parts: m.groups.into_iter().map(|g| g.mesh).collect(),
        merge_log: m.log,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionDiagnostics {
    pub merge_log: Vec<MergeRecord>,
    pub loops: Vec<LoopDiagnostics>,
    pub repairs: Vec<RepairDiagnostics>,
}

/// Repairs every part in parallel.
pub fn repair_parts(parts: &PartSet) -> (PartSet, Vec<RepairDiagnostics>) {
    let (meshes, diags): (Vec<_>, Vec<_>) = parts.parts.par_iter().map(repair_part).unzip();
    (
        PartSet {
            parts: meshes,
            provenance: parts.provenance.clone(),
            merge_log: parts.merge_log.clone(),
        },
        diags,
    )
}
