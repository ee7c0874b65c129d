//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{connected_graphs, cycle, has_proper_two_coloring, random_connected, rng, small_config, weighted, write_fixture_set};
use partpack::bipartite_contraction::{bipartize, greedy_odd_cycle_contraction};
use partpack::contact_graph::{contact_graph_from_voxels, voxelize_parts, ContactGraph};
use partpack::curation::{filter_object, FilterReason, MIN_BALANCE_RATIO};
use partpack::fixtures::{box_mesh, generate_fixture, icosphere, open_box, write_fixture, FixtureSpec};
use partpack::mesh::{Point, TriangleMesh};
use partpack::mesh_io::{read_obj_raw, Normalization, SceneNode, SceneObject, PARTS_MANIFEST};
use partpack::oracle::brute_force_min_contraction;
use partpack::part_extraction::{extract_parts, find_boundary_loops, merge_rules, repair_part, MergeConfig, MergeRule};
use partpack::pipeline::{run_batch, run_pack, PipelineConfig, MANIFEST_FILE};
use partpack::sampling::{rng_for, sample_salient_edges, sample_surface_uniform, Stream};
use partpack::voxel::VoxelSet;
use partpack::watertight_field::{compute_sdf_grid, marching_cubes};
use rand::Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)*) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)*));
        }
    };
}

fn within(actual: f64, expected: f64, rel: f64) -> bool {
    ((actual - expected) / expected).abs() <= rel
}

fn complete(n: usize) -> ContactGraph {
    ContactGraph::from_edges(n, (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b, 1.0)))).unwrap()
}

fn c1_bipartization_soundness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2024);
    let mut contractions = 0;
    for i in 0..500 {
        let n = r.random_range(2..=12);
        let g = random_connected(n, 30, &mut r);
        check!(g.num_edges() <= 30, "graph {i} has {} edges", g.num_edges());
        let plan = bipartize(&g, 100);
        check!(has_proper_two_coloring(&plan.apply(&g)), "graph {i}: contracted graph not 2-colorable");
        contractions += plan.len();
    }
    let t = start.elapsed();
    check!(t < Duration::from_secs(10), "took {t:?}");
    Ok(format!("500/500 verified, {contractions} contractions, {:.2}s", t.as_secs_f64()))
}

fn c2_oracle_comparison() -> Outcome {
    let start = Instant::now();
    let mut r = rng(77);
    let mut graphs: Vec<(usize, ContactGraph)> = Vec::new();
    for n in 2..=6 {
        for edges in connected_graphs(n) {
            graphs.push((n, weighted(n, &edges, &mut r)));
        }
    }
    let exhaustive = graphs.len();
    for _ in 0..200 {
        graphs.push((7, random_connected(7, 21, &mut r)));
    }
    let results: Vec<Result<(usize, usize), String>> = graphs
        .par_iter()
        .map(|(n, g)| {
            let greedy = bipartize(g, 100);
            let oracle = brute_force_min_contraction(g).map_err(|e| e.to_string())?;
            if greedy.len() < oracle.min_cardinality {
                return Err(format!("|V|={n}: greedy {} below oracle {}", greedy.len(), oracle.min_cardinality));
            }
            Ok((greedy.len(), oracle.min_cardinality))
        })
        .collect();
    let mut ratios = Vec::new();
    let mut optimal = 0;
    for res in results {
        let (gl, ol) = res?;
        if ol > 0 {
            ratios.push(gl as f64 / ol as f64);
        }
        optimal += usize::from(gl == ol);
    }
    // lone odd cycles
    let mut cycles = 0;
    for n in [3, 5, 7, 9, 11] {
        for _ in 0..40 {
            let w: Vec<f64> = (0..n).map(|_| r.random_range(0.1..10.0)).collect();
            let g = cycle(&w);
            let plan = greedy_odd_cycle_contraction(&g, 100).map_err(|e| e.to_string())?;
            check!(plan.len() == 1, "C{n}: greedy used {}", plan.len());
            if n <= 7 {
                let o = brute_force_min_contraction(&g).map_err(|e| e.to_string())?;
                check!(o.min_cardinality == 1, "C{n}: oracle says {}", o.min_cardinality);
            }
            let best = w.iter().cloned().fold(f64::MIN, f64::max);
            check!(plan.contracted_edges[0].weight == best, "C{n}: did not pick the heaviest edge");
            cycles += 1;
        }
    }
    let t = start.elapsed();
    check!(t < Duration::from_secs(300), "took {t:?}");
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let max = ratios.iter().cloned().fold(1.0, f64::max);
    Ok(format!(
        "{} graphs ({exhaustive} exhaustive |V|<=6, 200 at |V|=7), greedy optimal on {optimal}, ratio mean {mean:.4} max {max:.3}, {cycles} lone odd cycles exact, {:.1}s",
        graphs.len(),
        t.as_secs_f64()
    ))
}

fn c3_named_fixtures() -> Outcome {
    let count = |g: &ContactGraph| greedy_odd_cycle_contraction(g, 100).map(|p| p.len()).map_err(|e| e.to_string());
    check!(count(&complete(3))? == 1, "K3");
    check!(count(&complete(4))? == 2, "K4");
    check!(count(&cycle(&[1.0; 5]))? == 1, "C5");
    for n in [4, 6, 8, 10] {
        check!(count(&cycle(&vec![1.0; n]))? == 0, "C{n}");
    }
    let mut r = rng(1);
    for _ in 0..50 {
        let n = r.random_range(2..=12);
        let edges: Vec<(usize, usize, f64)> = (1..n).map(|v| (r.random_range(0..v), v, r.random_range(0.1..10.0))).collect();
        let tree = ContactGraph::from_edges(n, edges).unwrap();
        check!(count(&tree)? == 0, "tree on {n} vertices");
    }
    Ok("K3=1, K4=2, C5=1, even cycles and 50 trees = 0".into())
}

/// Contacts between the groups placed in the same volume, recomputed from
/// the saved part files.
fn contacts_within_volumes(object_dir: &Path, resolution: usize) -> Result<[usize; 2], String> {
    let text = fs::read_to_string(object_dir.join("parts").join(PARTS_MANIFEST)).map_err(|e| e.to_string())?;
    let m: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let parts: Vec<TriangleMesh> = m["parts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| read_obj_raw(&object_dir.join("parts").join(p["file"].as_str().unwrap())).unwrap())
        .collect();
    let volume_of: Vec<u64> = m["parts"].as_array().unwrap().iter().map(|p| p["volume"].as_u64().unwrap()).collect();
    let groups: Vec<Vec<usize>> = serde_json::from_value(m["groups"].clone()).map_err(|e| e.to_string())?;
    let occ = voxelize_parts(&parts, resolution);
    let mut out = [0; 2];
    for (v, slot) in out.iter_mut().enumerate() {
        let unions: Vec<VoxelSet> = groups
            .iter()
            .filter(|g| volume_of[g[0]] == v as u64)
            .map(|g| g.iter().fold(VoxelSet::empty(), |acc, &p| acc.union(&occ[p])))
            .collect();
        *slot = contact_graph_from_voxels(&unions, 1).num_edges();
    }
    Ok(out)
}

fn c4_within_volume_disjointness() -> Outcome {
    let res = 128;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let specs = [
        ("chain5.obj", FixtureSpec::BoxesChain { resolution: res }),
        ("k3.obj", FixtureSpec::BoxesK3 { resolution: res }),
        ("nested.obj", FixtureSpec::NestedCubes { resolution: res }),
        ("boxes10.obj", FixtureSpec::RandomBoxes { parts: 10, seed: 1 }),
    ];
    let cfg = small_config(res);
    let mut notes = Vec::new();
    for (name, spec) in specs {
        let input = dir.path().join(name);
        write_fixture(&spec, &input).map_err(|e| e.to_string())?;
        let out = run_pack(&input, &cfg, &dir.path().join("out")).map_err(|e| e.to_string())?;
        let edges = contacts_within_volumes(&out.dir, res)?;
        check!(edges == [0, 0], "{name}: {edges:?} contacts inside volumes");
        notes.push(format!(
            "{}: {} parts/{} groups",
            name.trim_end_matches(".obj"),
            out.manifest.parts.count,
            out.manifest.groups.len()
        ));
    }
    Ok(format!("0 within-volume contacts at N={res} ({})", notes.join(", ")))
}

fn c5_sdf_accuracy() -> Outcome {
    let start = Instant::now();
    let r = 0.5;
    let sphere = generate_fixture(&FixtureSpec::AnalyticSphere { radius: r }).parts();
    let grid = compute_sdf_grid(&sphere, 128).map_err(|e| e.to_string())?;
    let expected_occ = 4.0 / 3.0 * std::f64::consts::PI * r * r * r / 8.0;
    check!(
        within(grid.occupancy_ratio, expected_occ, 0.02),
        "occupancy {} vs {expected_occ}",
        grid.occupancy_ratio
    );
    let mesh = marching_cubes(&grid, 0.0);
    let (boundary, nonmanifold) = mesh.edge_defects();
    check!(boundary == 0 && nonmanifold == 0, "defects {boundary}/{nonmanifold}");
    let chi = mesh.euler_characteristic();
    check!(chi == 2, "sphere chi {chi}");
    let vol = mesh.signed_volume();
    let expected_vol = 4.0 / 3.0 * std::f64::consts::PI * r * r * r;
    check!(within(vol, expected_vol, 0.02), "volume {vol} vs {expected_vol}");
    let sphere_time = start.elapsed();
    let torus = generate_fixture(&FixtureSpec::Torus { major: 0.6, minor: 0.25 }).parts();
    let tmesh = marching_cubes(&compute_sdf_grid(&torus, 128).map_err(|e| e.to_string())?, 0.0);
    let tchi = tmesh.euler_characteristic();
    check!(tchi == 0, "torus chi {tchi}");
    check!(sphere_time < Duration::from_secs(30), "sphere took {sphere_time:?}");
    Ok(format!(
        "occupancy {:.5} ({:+.2}%), volume {:.5} ({:+.2}%), chi 2/0, closed, sphere {:.1}s, total {:.1}s",
        grid.occupancy_ratio,
        100.0 * (grid.occupancy_ratio / expected_occ - 1.0),
        vol,
        100.0 * (vol / expected_vol - 1.0),
        sphere_time.as_secs_f64(),
        start.elapsed().as_secs_f64()
    ))
}

fn c6_filter_truth_table() -> Outcome {
    let table = [
        ((0.0005, 0.0005), (false, FilterReason::BothEmpty)),
        ((0.3, 0.02), (false, FilterReason::UnbalancedRatio)),
        ((0.2, 0.1), (true, FilterReason::Balanced)),
        ((0.0005, 0.3), (false, FilterReason::UnbalancedRatio)),
    ];
    for ((o1, o2), want) in table {
        let got = filter_object(o1, o2).map_err(|e| e.to_string())?;
        check!(got == want, "({o1}, {o2}) gave {got:?}, expected {want:?}");
    }
    let mut r = rng(6);
    let mut samples = 0;
    let edge_values = [0.0, 0.0009999, 0.001, 0.01, 0.0999, 0.1, 0.5, 1.0];
    let mut pairs: Vec<(f64, f64)> = edge_values.iter().flat_map(|&a| edge_values.iter().map(move |&b| (a, b))).collect();
    pairs.extend((0..100_000).map(|_| (r.random_range(0.0..=1.0), r.random_range(0.0..=1.0))));
    for (o1, o2) in pairs {
        let a = filter_object(o1, o2).map_err(|e| e.to_string())?;
        check!(a == filter_object(o2, o1).map_err(|e| e.to_string())?, "asymmetric at ({o1}, {o2})");
        if a.0 {
            check!(o1.min(o2) / o1.max(o2) >= MIN_BALANCE_RATIO, "kept unbalanced ({o1}, {o2})");
        }
        samples += 1;
    }
    Ok(format!("4/4 tuples exact, symmetry and balance hold on {samples} pairs"))
}

fn c7_sampling_contracts() -> Outcome {
    let cube = box_mesh(Point::new(-0.5, -0.5, -0.5), Point::new(0.5, 0.5, 0.5));
    let surface = sample_surface_uniform(&cube, 4096, &mut rng_for(3, 0, Stream::Surface)).map_err(|e| e.to_string())?;
    let salient =
        sample_salient_edges(&cube, 16384, 165.0, &surface, &mut rng_for(3, 0, Stream::Salient)).map_err(|e| e.to_string())?;
    check!(!salient.fallback && salient.salient_edges == 12, "cube salient edges {}", salient.salient_edges);
    let worst = salient
        .samples
        .points
        .iter()
        .map(|p| {
            let mut d: Vec<f64> = [p.x, p.y, p.z].iter().map(|c| (c.abs() - 0.5).abs()).collect();
            d.sort_by(f64::total_cmp);
            d[0].hypot(d[1])
        })
        .fold(0.0, f64::max);
    check!(worst < 1e-5, "salient sample {worst} from nearest edge");

    let fine = icosphere(Point::origin(), 0.5, 5);
    let fs_ = sample_surface_uniform(&fine, 1024, &mut rng_for(3, 0, Stream::Surface)).map_err(|e| e.to_string())?;
    let fsal = sample_salient_edges(&fine, 512, 165.0, &fs_, &mut rng_for(3, 0, Stream::Salient)).map_err(|e| e.to_string())?;
    check!(fsal.fallback, "fine sphere did not fall back");

    // near-surface concentration and reproducibility through the pipeline
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("k3.obj");
    write_fixture(&FixtureSpec::BoxesK3 { resolution: 64 }, &input).map_err(|e| e.to_string())?;
    let cfg = small_config(64);
    let a = run_pack(&input, &cfg, &dir.path().join("a")).map_err(|e| e.to_string())?;
    let b = run_pack(&input, &cfg, &dir.path().join("b")).map_err(|e| e.to_string())?;
    let mut near_total = 0;
    let mut near_ok = 0;
    let mut files = 0;
    for v in ["vol0", "vol1"] {
        let bytes = fs::read(a.dir.join(v).join("sdf_near_surface.bin")).map_err(|e| e.to_string())?;
        for rec in bytes.chunks_exact(16) {
            let val = f32::from_le_bytes(rec[12..16].try_into().unwrap());
            near_total += 1;
            near_ok += usize::from((val.abs() as f64) < 4.0 * cfg.sigma);
        }
        for e in fs::read_dir(a.dir.join(v)).map_err(|e| e.to_string())? {
            let p = e.map_err(|e| e.to_string())?.path();
            let q = b.dir.join(v).join(p.file_name().unwrap());
            check!(fs::read(&p).ok() == fs::read(&q).ok(), "{} differs between runs", p.display());
            files += 1;
        }
    }
    let frac = near_ok as f64 / near_total as f64;
    check!(frac >= 0.95, "only {:.2}% of near-surface samples within 4 sigma", 100.0 * frac);
    Ok(format!(
        "cube salient max edge distance {worst:.1e}, fine sphere fallback, near-surface {:.2}% < 4 sigma, {files} sample files identical",
        100.0 * frac
    ))
}

fn c8_part_extraction() -> Outcome {
    let halves = generate_fixture(&FixtureSpec::SeamSplitSphere { radius: 0.5 }).parts();
    let obj = |nodes: Vec<TriangleMesh>| SceneObject {
        nodes: nodes
            .into_iter()
            .enumerate()
            .map(|(i, mesh)| SceneNode {
                name: format!("n{i}"),
                mesh,
            })
            .collect(),
        normalization: Normalization::identity(),
        degenerate_faces: 0,
    };
    let cfg = MergeConfig {
        resolution: 128,
        ..MergeConfig::default()
    };
    let merged = merge_rules(&extract_parts(&obj(halves)).map_err(|e| e.to_string())?, &cfg);
    check!(merged.len() == 1, "seam sphere gave {} parts", merged.len());
    check!(
        merged.merge_log.len() == 1 && merged.merge_log[0].rule == MergeRule::SharedBoundaryLoop,
        "merge log {:?}",
        merged.merge_log
    );
    let (fixed, _) = repair_part(&open_box());
    let loops = find_boundary_loops(&fixed, 0).0.len();
    check!(loops == 0, "open box keeps {loops} loops");

    let res = 128;
    let specs = [
        FixtureSpec::BoxesChain { resolution: res },
        FixtureSpec::BoxesK3 { resolution: res },
        FixtureSpec::BoxesK4 { resolution: res },
        FixtureSpec::NestedCubes { resolution: res },
        FixtureSpec::OpenBox,
        FixtureSpec::SeamSplitSphere { radius: 0.5 },
        FixtureSpec::AnalyticSphere { radius: 0.5 },
        FixtureSpec::Torus { major: 0.6, minor: 0.25 },
        FixtureSpec::RandomBoxes { parts: 10, seed: 1 },
    ];
    for spec in &specs {
        let parts = generate_fixture(spec).parts();
        let o = if matches!(spec, FixtureSpec::SeamSplitSphere { .. }) {
            obj(parts)
        } else {
            obj(vec![TriangleMesh::concat(&parts)])
        };
        let once = merge_rules(&extract_parts(&o).map_err(|e| e.to_string())?, &cfg);
        let twice = merge_rules(&once, &cfg);
        check!(twice.parts == once.parts, "{}: second merge changed the parts", spec.kind());
    }
    Ok(format!("seam sphere -> 1 part (shared loop), open box 0 loops, fixpoint on {} fixtures", specs.len()))
}

fn object_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let objects = root.join("objects");
    for e in fs::read_dir(&objects).unwrap() {
        let d = e.unwrap().path();
        let mut files = vec![d.join(MANIFEST_FILE)];
        for v in ["vol0", "vol1"] {
            if let Ok(rd) = fs::read_dir(d.join(v)) {
                files.extend(rd.map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "bin")));
            }
        }
        for f in files {
            out.insert(f.strip_prefix(&objects).unwrap().display().to_string(), fs::read(&f).unwrap());
        }
    }
    out
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let inputs = dir.path().join("in");
    write_fixture_set(&inputs, 64);
    let cfg = small_config(64);
    let mut reference: Option<BTreeMap<String, Vec<u8>>> = None;
    for workers in [1, 4, 8] {
        let out = dir.path().join(format!("w{workers}"));
        let summary = run_batch(&inputs, &cfg, workers, &out).map_err(|e| e.to_string())?;
        check!(summary.failed == 0, "{workers} workers: {:?}", summary.failures);
        let files = object_files(&out);
        match &reference {
            None => reference = Some(files),
            Some(r) => {
                check!(r.keys().eq(files.keys()), "{workers} workers: different file sets");
                for (k, v) in r {
                    check!(files[k] == *v, "{workers} workers: {k} differs");
                }
            }
        }
    }
    let r = reference.unwrap();
    let manifests = r.keys().filter(|k| k.ends_with(MANIFEST_FILE)).count();
    Ok(format!("{manifests} manifests and {} sample files identical at 1/4/8 workers", r.len() - manifests))
}

fn c10_throughput() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("scene10.obj");
    write_fixture(&FixtureSpec::RandomBoxes { parts: 10, seed: 1 }, &input).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        resolution: 128,
        ..PipelineConfig::default()
    };
    let start = Instant::now();
    let out = run_pack(&input, &cfg, dir.path()).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    check!(out.manifest.parts.count == 10, "{} parts", out.manifest.parts.count);
    check!(t < Duration::from_secs(60), "took {t:?}");
    Ok(format!(
        "10-part scene at N=128 with default sample counts in {:.1}s on {} threads",
        t.as_secs_f64(),
        rayon::current_num_threads()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("bipartization soundness", c1_bipartization_soundness),
        ("oracle comparison", c2_oracle_comparison),
        ("named fixtures", c3_named_fixtures),
        ("within-volume disjointness", c4_within_volume_disjointness),
        ("SDF/iso-surface accuracy", c5_sdf_accuracy),
        ("filter truth table", c6_filter_truth_table),
        ("sampling contracts", c7_sampling_contracts),
        ("part extraction", c8_part_extraction),
        ("determinism and parallelism", c9_determinism),
        ("desk-scale throughput", c10_throughput),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
