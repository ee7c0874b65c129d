//! End-to-end processing of single objects and directories of objects.
//!
//! Per-object outputs (`manifest.json`, meshes, sample files) depend only on
//! the input file and the configuration. Wall-clock timings go to
//! `report.json` and the run-level `run.json`.

use std::fs;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bipartite_contraction::{bipartize, ContractionPlan, DEFAULT_EDGE_LIMIT};
use crate::contact_graph::{contact_graph_from_voxels, voxelize_parts, ContactGraph, DEFAULT_DILATION_VOXELS, MIN_RESOLUTION};
use crate::curation::{dataset_stats, CurationReport, DatasetStats, FilterReason, StageTimings};
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::mesh_io::{load_object, save_part_meshes, write_obj, MeshFormat, Normalization, PartManifest, SceneObject};
use crate::part_extraction::{extract_parts, merge_rules, repair_parts, MergeConfig, MergeRecord, PartSet, Provenance, RepairDiagnostics};
use crate::sampling::{
    oriented_points_ply, rng_for, sample_salient_edges, sample_sdf_pairs, sample_surface_uniform, sdf_ply, write_oriented_points,
    write_sdf_samples, SampleSidecar, SdfCounts, SdfParams, Stream, DEFAULT_ANGLE_THRESHOLD, DEFAULT_SALIENT_COUNT,
    DEFAULT_SIGMA, DEFAULT_SURFACE_COUNT,
};
use crate::volume_packing::{assign_volumes, VolumeAssignment};
use crate::watertight_field::{compute_sdf_grid, marching_cubes, SdfGrid, DEFAULT_RESOLUTION};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";
pub const RUN_FILE: &str = "run.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const WORKERS_ENV: &str = "PARTPACK_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub resolution: usize,
    pub edge_limit: usize,
    pub dilation_voxels: usize,
    /// Salient edges have a dihedral angle below this, in degrees.
    pub angle_threshold: f64,
    pub small_face_count: usize,
    pub small_diagonal_voxels: f64,
    pub iou_threshold: f64,
    pub surface_samples: usize,
    pub salient_samples: usize,
    pub sdf_counts: SdfCounts,
    pub sigma: f64,
    pub seed: u64,
    /// Dump each volume's raw grid (N^3 float32).
    pub write_grids: bool,
    /// Also write PLY copies of the sample sets.
    pub write_ply: bool,
    pub emit_diagnostics: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let merge = MergeConfig::default();
        PipelineConfig {
            resolution: DEFAULT_RESOLUTION,
            edge_limit: DEFAULT_EDGE_LIMIT,
            dilation_voxels: DEFAULT_DILATION_VOXELS,
            angle_threshold: DEFAULT_ANGLE_THRESHOLD,
            small_face_count: merge.small_face_count,
            small_diagonal_voxels: merge.small_diagonal_voxels,
            iou_threshold: merge.iou_threshold,
            surface_samples: DEFAULT_SURFACE_COUNT,
            salient_samples: DEFAULT_SALIENT_COUNT,
            sdf_counts: SdfCounts::default(),
            sigma: DEFAULT_SIGMA,
            seed: 0,
            write_grids: false,
            write_ply: false,
            emit_diagnostics: false,
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < MIN_RESOLUTION {
            return Err(Error::Resolution(self.resolution));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Config(format!("sigma must be finite and non-negative, got {}", self.sigma)));
        }
        if !(self.angle_threshold > 0.0 && self.angle_threshold <= 180.0) {
            return Err(Error::Config(format!("angle threshold {} outside (0, 180]", self.angle_threshold)));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config("seed must be below 2^63".into()));
        }
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::Config(format!("IoU threshold {} outside [0, 1]", self.iou_threshold)));
        }
        Ok(())
    }

    pub fn merge_config(&self) -> MergeConfig {
        MergeConfig {
            resolution: self.resolution,
            dilation_voxels: self.dilation_voxels,
            small_face_count: self.small_face_count,
            small_diagonal_voxels: self.small_diagonal_voxels,
            iou_threshold: self.iou_threshold,
        }
    }

    /// Parses TOML, or JSON when `path` ends in `.json`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// The configuration as embedded in manifests (no output location).
    pub fn provenance(&self) -> PipelineConfig {
        PipelineConfig {
            output_dir: None,
            ..self.clone()
        }
    }
}

/// Loaded object through merging and repair.
#[derive(Clone, Debug)]
pub struct PreparedParts {
    pub object: SceneObject,
    pub parts: PartSet,
    pub repairs: Vec<RepairDiagnostics>,
}

pub fn prepare_parts(obj: SceneObject, cfg: &PipelineConfig) -> Result<PreparedParts> {
    let extracted = extract_parts(&obj)?;
    let merged = merge_rules(&extracted, &cfg.merge_config());
    let (parts, repairs) = repair_parts(&merged);
    Ok(PreparedParts {
        object: obj,
        parts,
        repairs,
    })
}

/// Contact graph plus per-part occupied voxel counts.
pub fn part_contacts(parts: &[TriangleMesh], cfg: &PipelineConfig) -> Result<(ContactGraph, Vec<usize>)> {
    if cfg.resolution < MIN_RESOLUTION {
        return Err(Error::Resolution(cfg.resolution));
    }
    if parts.is_empty() {
        return Err(Error::Validation("contact graph needs at least one part".into()));
    }
    let occ = voxelize_parts(parts, cfg.resolution);
    let counts = occ.iter().map(|v| v.count()).collect();
    Ok((contact_graph_from_voxels(&occ, cfg.dilation_voxels), counts))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub surface: usize,
    pub salient: usize,
    pub salient_fallback: bool,
    pub salient_edges: usize,
    pub sdf_uniform: usize,
    pub sdf_near_surface: usize,
    pub sdf_near_salient: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeSummary {
    pub volume: u8,
    pub parts: Vec<usize>,
    pub occupied_voxels: usize,
    pub occupancy_ratio: f64,
    pub watertight_vertices: usize,
    pub watertight_faces: usize,
    /// Files written for this volume, relative to the object directory.
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<SampleSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartsSummary {
    pub count: usize,
    pub provenance: Vec<Provenance>,
    pub faces: Vec<usize>,
    pub voxels: Vec<usize>,
    pub merge_log: Vec<MergeRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurationSummary {
    pub o1: f64,
    pub o2: f64,
    pub kept: bool,
    pub reason: FilterReason,
    pub part_count: usize,
}

/// Everything needed to interpret an object's artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectManifest {
    pub object: String,
    pub input: String,
    pub config: PipelineConfig,
    pub normalization: Normalization,
    pub degenerate_faces: usize,
    pub parts: PartsSummary,
    pub contact_graph: ContactGraph,
    pub contraction: ContractionPlan,
    pub groups: Vec<Vec<usize>>,
    pub group_volume: Vec<u8>,
    pub part_volume: Vec<u8>,
    pub volumes: Vec<VolumeSummary>,
    pub part_files: PartManifest,
    pub curation: CurationSummary,
}

#[derive(Clone, Debug)]
pub struct PackOutcome {
    pub manifest: ObjectManifest,
    pub report: CurationReport,
    pub dir: PathBuf,
}

impl PackOutcome {
    /// 0 when the object is kept, 3 when the filter discards it.
    pub fn exit_code(&self) -> i32 {
        if self.report.kept {
            0
        } else {
            3
        }
    }
}

/// Object id used for output directories.
pub fn object_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| "object".into(), |s| s.to_string_lossy().into_owned())
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Runs the whole pipeline on one file, writing into `out_dir/<object id>/`.
pub fn run_pack(input: &Path, cfg: &PipelineConfig, out_dir: &Path) -> Result<PackOutcome> {
    run_pack_as(input, &object_id(input), cfg, out_dir)
}

pub fn run_pack_as(input: &Path, id: &str, cfg: &PipelineConfig, out_dir: &Path) -> Result<PackOutcome> {
    cfg.validate().map_err(|e| e.at(id, "config"))?;
    let start = Instant::now();
    let mut timing = StageTimings::default();

    let t = Instant::now();
    let obj = load_object(input).map_err(|e| e.at(id, "load"))?;
    timing.load_ms = ms(t);

    let t = Instant::now();
    let prepared = prepare_parts(obj, cfg).map_err(|e| e.at(id, "parts"))?;
    timing.parts_ms = ms(t);
    let parts = &prepared.parts;

    let t = Instant::now();
    let (graph, voxels) = part_contacts(&parts.parts, cfg).map_err(|e| e.at(id, "contact_graph"))?;
    timing.graph_ms = ms(t);

    let t = Instant::now();
    let plan = bipartize(&graph, cfg.edge_limit);
    let assignment = assign_volumes(&graph, &plan, &voxels).map_err(|e| e.at(id, "assignment"))?;
    timing.packing_ms = ms(t);

    let dir = out_dir.join(id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e).at(id, "output"))?;
    let part_files = save_part_meshes(parts, &assignment, prepared.object.normalization, &dir.join("parts"))
        .map_err(|e| e.at(id, "save_parts"))?;

    let t = Instant::now();
    let mut volumes = Vec::with_capacity(2);
    for v in 0..2u8 {
        let summary = process_volume(parts, &assignment, v, cfg, &dir).map_err(|e| e.at(id, "volume"))?;
        volumes.push(summary);
    }
    timing.volumes_ms = ms(t);

    let (o1, o2) = (volumes[0].occupancy_ratio, volumes[1].occupancy_ratio);
    let mut report = CurationReport::new(id, o1, o2, parts.len()).map_err(|e| e.at(id, "curation"))?;

    let manifest = ObjectManifest {
        object: id.to_string(),
        input: input.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
        config: cfg.provenance(),
        normalization: prepared.object.normalization,
        degenerate_faces: prepared.object.degenerate_faces,
        parts: PartsSummary {
            count: parts.len(),
            provenance: parts.provenance.clone(),
            faces: parts.parts.iter().map(TriangleMesh::num_faces).collect(),
            voxels,
            merge_log: parts.merge_log.clone(),
        },
        contact_graph: graph,
        contraction: plan,
        groups: assignment.groups.clone(),
        group_volume: assignment.color.clone(),
        part_volume: assignment.part_volume.clone(),
        volumes,
        part_files,
        curation: CurationSummary {
            o1,
            o2,
            kept: report.kept,
            reason: report.reason,
            part_count: parts.len(),
        },
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest).map_err(|e| e.at(id, "manifest"))?;
    if cfg.emit_diagnostics {
        let diag = serde_json::json!({
            "merge_log": parts.merge_log,
            "repairs": prepared.repairs,
        });
        write_json(&dir.join("diagnostics.json"), &diag).map_err(|e| e.at(id, "manifest"))?;
    }
    timing.total_ms = ms(start);
    report.timing = Some(timing);
    write_json(&dir.join(REPORT_FILE), &report).map_err(|e| e.at(id, "manifest"))?;
    Ok(PackOutcome { manifest, report, dir })
}

/// Grid, watertight mesh and sample sets of one volume.
pub fn process_volume(parts: &PartSet, assignment: &VolumeAssignment, v: u8, cfg: &PipelineConfig, dir: &Path) -> Result<VolumeSummary> {
    let members = assignment.parts_in(v);
    let meshes: Vec<TriangleMesh> = members.iter().map(|&p| parts.parts[p].clone()).collect();
    process_meshes(&meshes, members, v, cfg, dir)
}

/// Grid, watertight mesh and sample sets for an explicit list of part
/// meshes, written to `dir/vol{v}`.
pub fn process_meshes(meshes: &[TriangleMesh], members: Vec<usize>, v: u8, cfg: &PipelineConfig, dir: &Path) -> Result<VolumeSummary> {
    let grid = compute_sdf_grid(meshes, cfg.resolution)?;
    let vdir = dir.join(format!("vol{v}"));
    fs::create_dir_all(&vdir).map_err(|e| Error::io(&vdir, e))?;
    let mut files = Vec::new();
    let push = |name: &str, files: &mut Vec<String>| files.push(format!("vol{v}/{name}"));
    if cfg.write_grids {
        grid.write_raw(&vdir.join("grid.raw"))?;
        push("grid.raw", &mut files);
        push("grid.json", &mut files);
    }
    let mesh = marching_cubes(&grid, 0.0);
    write_obj(&mesh, &vdir.join("watertight.obj"))?;
    push("watertight.obj", &mut files);
    let samples = if mesh.is_empty() {
        None
    } else {
        Some(write_samples(&grid, &mesh, v, cfg, &vdir, &mut |n| push(n, &mut files))?)
    };
    files.sort();
    Ok(VolumeSummary {
        volume: v,
        parts: members,
        occupied_voxels: grid.occupied_voxels,
        occupancy_ratio: grid.occupancy_ratio,
        watertight_vertices: mesh.positions.len(),
        watertight_faces: mesh.faces.len(),
        files,
        samples,
    })
}

fn write_samples(
    grid: &SdfGrid,
    mesh: &TriangleMesh,
    v: u8,
    cfg: &PipelineConfig,
    vdir: &Path,
    record: &mut dyn FnMut(&str),
) -> Result<SampleSummary> {
    let surface = sample_surface_uniform(mesh, cfg.surface_samples, &mut rng_for(cfg.seed, v, Stream::Surface))?;
    let salient = sample_salient_edges(
        mesh,
        cfg.salient_samples,
        cfg.angle_threshold,
        &surface,
        &mut rng_for(cfg.seed, v, Stream::Salient),
    )?;
    let sdf = sample_sdf_pairs(
        grid,
        mesh,
        &surface.points,
        &salient.samples.points,
        &SdfParams {
            counts: cfg.sdf_counts,
            sigma: cfg.sigma,
            seed: cfg.seed,
            volume: v,
        },
    )?;
    let side = |sigma: Option<f64>, angle: Option<f64>, fallback: Option<bool>| SampleSidecar {
        count: 0,
        layout: vec![],
        dtype: String::new(),
        seed: cfg.seed,
        volume: v,
        sigma,
        angle_threshold: angle,
        fallback,
    };
    write_oriented_points(&vdir.join("surface.bin"), &surface, side(None, None, None))?;
    write_oriented_points(
        &vdir.join("salient.bin"),
        &salient.samples,
        side(None, Some(cfg.angle_threshold), Some(salient.fallback)),
    )?;
    write_sdf_samples(&vdir.join("sdf_uniform.bin"), &sdf.uniform, side(None, None, None))?;
    write_sdf_samples(&vdir.join("sdf_near_surface.bin"), &sdf.near_surface, side(Some(cfg.sigma), None, None))?;
    write_sdf_samples(
        &vdir.join("sdf_near_salient.bin"),
        &sdf.near_salient,
        side(Some(cfg.sigma), Some(cfg.angle_threshold), None),
    )?;
    for name in ["surface", "salient", "sdf_uniform", "sdf_near_surface", "sdf_near_salient"] {
        record(&format!("{name}.bin"));
        record(&format!("{name}.json"));
    }
    if cfg.write_ply {
        let plys = [
            ("surface.ply", oriented_points_ply(&surface)),
            ("salient.ply", oriented_points_ply(&salient.samples)),
            ("sdf_uniform.ply", sdf_ply(&sdf.uniform)),
            ("sdf_near_surface.ply", sdf_ply(&sdf.near_surface)),
            ("sdf_near_salient.ply", sdf_ply(&sdf.near_salient)),
        ];
        for (name, text) in plys {
            let p = vdir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
            record(name);
        }
    }
    Ok(SampleSummary {
        surface: surface.len(),
        salient: salient.samples.len(),
        salient_fallback: salient.fallback,
        salient_edges: salient.salient_edges,
        sdf_uniform: sdf.uniform.len(),
        sdf_near_surface: sdf.near_surface.len(),
        sdf_near_salient: sdf.near_salient.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub object: String,
    pub input: String,
    pub stage: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub objects: usize,
    pub succeeded: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<DatasetStats>,
    pub reports: Vec<CurationReport>,
    pub failures: Vec<FailureRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<String>,
    pub workers: usize,
    pub config: PipelineConfig,
    pub objects: usize,
    pub failed: usize,
    pub elapsed_ms: f64,
}

impl RunRecord {
    pub fn new(command: &str, inputs: Vec<String>, workers: usize, cfg: &PipelineConfig) -> Self {
        RunRecord {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs,
            workers,
            config: cfg.provenance(),
            objects: 0,
            failed: 0,
            elapsed_ms: 0.0,
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        write_json(&out_dir.join(RUN_FILE), self)
    }
}

/// Supported mesh files directly inside `dir`, sorted by name.
pub fn list_inputs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && MeshFormat::from_path(p).is_some())
        .collect();
    files.sort();
    Ok(files)
}

/// Unique ids: the file stem, or stem plus extension when stems collide.
fn batch_ids(files: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = files.iter().map(|p| object_id(p)).collect();
    stems
        .iter()
        .zip(files)
        .map(|(s, p)| {
            if stems.iter().filter(|t| *t == s).count() > 1 {
                let ext = p.extension().map_or_else(String::new, |e| e.to_string_lossy().into_owned());
                format!("{s}_{ext}")
            } else {
                s.clone()
            }
        })
        .collect()
}

pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Processes every mesh in `dir` on `workers` threads. Failures (including
/// panics) are recorded per object and never stop the batch.
pub fn run_batch(dir: &Path, cfg: &PipelineConfig, workers: usize, out_dir: &Path) -> Result<BatchSummary> {
    cfg.validate()?;
    let files = list_inputs(dir)?;
    if files.is_empty() {
        return Err(Error::Validation(format!("no mesh files in {}", dir.display())));
    }
    let start = Instant::now();
    let ids = batch_ids(&files);
    let objects_dir = out_dir.join("objects");
    fs::create_dir_all(&objects_dir).map_err(|e| Error::io(&objects_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<std::result::Result<CurationReport, FailureRecord>> = pool.install(|| {
        files
            .par_iter()
            .zip(ids.par_iter())
            .map(|(file, id)| {
                let input = file.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                let run = std::panic::catch_unwind(AssertUnwindSafe(|| run_pack_as(file, id, cfg, &objects_dir)));
                match run {
                    Ok(Ok(outcome)) => Ok(outcome.report),
                    Ok(Err(e)) => {
                        log::warn!("{e}");
                        Err(FailureRecord {
                            object: id.clone(),
                            input,
                            stage: e.stage().unwrap_or("unknown").into(),
                            error: e.to_string(),
                        })
                    }
                    Err(panic) => {
                        let msg = panic
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "panic".into());
                        log::error!("{id}: panicked: {msg}");
                        Err(FailureRecord {
                            object: id.clone(),
                            input,
                            stage: "panic".into(),
                            error: msg,
                        })
                    }
                }
            })
            .collect()
    });
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(f) => failures.push(f),
        }
    }
    let summary = BatchSummary {
        objects: files.len(),
        succeeded: reports.len(),
        failed: failures.len(),
        stats: if reports.is_empty() { None } else { Some(dataset_stats(&reports)?) },
        reports,
        failures,
    };
    write_json(&out_dir.join(SUMMARY_FILE), &summary)?;
    if let Some(stats) = &summary.stats {
        let p = out_dir.join("histogram.csv");
        fs::write(&p, stats.histogram_csv()).map_err(|e| Error::io(&p, e))?;
    }
    let mut run = RunRecord::new(
        "batch",
        files.iter().map(|p| p.display().to_string()).collect(),
        workers,
        cfg,
    );
    run.objects = summary.objects;
    run.failed = summary.failed;
    run.elapsed_ms = ms(start);
    run.write(out_dir)?;
    Ok(summary)
}

/// Collects `report.json` files below `dir`.
pub fn collect_reports(dir: &Path) -> Result<Vec<CurationReport>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    let mut found = Vec::new();
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let p = e.map_err(|e| Error::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == REPORT_FILE) {
                found.push(p);
            }
        }
    }
    found.sort();
    for p in found {
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        out.push(serde_json::from_str(&text)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_cited_constants() {
        let c = PipelineConfig::default();
        assert_eq!(c.resolution, 512);
        assert_eq!(c.edge_limit, 100);
        assert_eq!(c.dilation_voxels, 1);
        assert_eq!(c.angle_threshold, 165.0);
        assert_eq!(c.surface_samples, 32768);
        assert_eq!(c.salient_samples, 16384);
        assert_eq!(c.sdf_counts.uniform, 65536);
    }

    #[test]
    fn toml_round_trip() {
        let c = PipelineConfig {
            sigma: 0.1 + 0.2,
            seed: u64::MAX >> 1,
            output_dir: Some("out".into()),
            ..Default::default()
        };
        let back: PipelineConfig = toml::from_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("resolutoin = 64").is_err());
    }

    #[test]
    fn colliding_stems_get_extensions() {
        let ids = batch_ids(&["a.obj".into(), "a.glb".into(), "b.obj".into()]);
        assert_eq!(ids, vec!["a_obj", "a_glb", "b"]);
    }
}
