//! Helpers shared by the integration tests and the acceptance harness. They
//! are written independently of the library code they check.
#![allow(dead_code)]

use std::collections::VecDeque;

use partpack::contact_graph::ContactGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// BFS two-coloring over the contracted graph's vertices; `true` when no
/// edge joins equal colors.
pub fn has_proper_two_coloring(g: &ContactGraph) -> bool {
    let n = g.num_vertices();
    let mut adj = vec![Vec::new(); n];
    for e in &g.edges {
        if e.u == e.v {
            return false;
        }
        adj[e.u].push(e.v);
        adj[e.v].push(e.u);
    }
    let mut color = vec![u8::MAX; n];
    for s in 0..n {
        if color[s] != u8::MAX {
            continue;
        }
        color[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            for &y in &adj[x] {
                if color[y] == u8::MAX {
                    color[y] = 1 - color[x];
                    q.push_back(y);
                } else if color[y] == color[x] {
                    return false;
                }
            }
        }
    }
    true
}

/// Number of simple cycles, counted as edge subsets in which every vertex
/// has degree 0 or 2 and the used edges form one connected piece.
pub fn count_cycles_by_subsets(g: &ContactGraph) -> usize {
    let m = g.num_edges();
    assert!(m <= 20, "subset count grows as 2^m");
    let n = g.num_vertices();
    let mut count = 0;
    for mask in 1u32..(1 << m) {
        let mut deg = vec![0u8; n];
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                x = p[x];
            }
            x
        }
        for (i, e) in g.edges.iter().enumerate() {
            if mask >> i & 1 == 1 {
                deg[e.u] += 1;
                deg[e.v] += 1;
                let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
                parent[a] = b;
            }
        }
        if deg.iter().any(|&d| d != 0 && d != 2) {
            continue;
        }
        let roots: std::collections::HashSet<usize> =
            (0..n).filter(|&v| deg[v] == 2).map(|v| find(&mut parent, v)).collect();
        if roots.len() == 1 {
            count += 1;
        }
    }
    count
}

pub fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for &(a, b) in edges {
            let y = if a == x {
                b
            } else if b == x {
                a
            } else {
                continue;
            };
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Every connected labelled simple graph on `n` vertices, as edge lists.
pub fn connected_graphs(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = (0..pairs.len()).filter(|&i| mask >> i & 1 == 1).map(|i| pairs[i]).collect();
        if edges.len() + 1 >= n && is_connected(n, &edges) {
            out.push(edges);
        }
    }
    out
}

/// Weighted graph with weights drawn uniformly from `[0.1, 10)`.
pub fn weighted(n: usize, edges: &[(usize, usize)], rng: &mut ChaCha8Rng) -> ContactGraph {
    ContactGraph::from_edges(n, edges.iter().map(|&(a, b)| (a, b, rng.random_range(0.1..10.0)))).unwrap()
}

/// Random connected graph: a random spanning tree plus extra random edges,
/// capped at `max_edges`.
pub fn random_connected(n: usize, max_edges: usize, rng: &mut ChaCha8Rng) -> ContactGraph {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    let all = n * (n - 1) / 2;
    let target = rng.random_range(n - 1..=max_edges.min(all));
    while edges.len() < target {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && !edges.iter().any(|&(x, y)| (x, y) == (a.min(b), a.max(b)) || (x, y) == (a.max(b), a.min(b))) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    weighted(n, &edges, rng)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cycle graph on `n` vertices with the given weights on edges (i, i+1 mod n).
pub fn cycle(weights: &[f64]) -> ContactGraph {
    let n = weights.len();
    ContactGraph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n, weights[i]))).unwrap()
}

/// Ten mesh fixtures laid out for `resolution`, written into `dir`.
pub fn write_fixture_set(dir: &std::path::Path, resolution: usize) -> Vec<std::path::PathBuf> {
    use partpack::fixtures::{write_fixture, FixtureSpec};
    let specs = [
        ("chain5.obj", FixtureSpec::BoxesChain { resolution }),
        ("k3.obj", FixtureSpec::BoxesK3 { resolution }),
        ("k4.obj", FixtureSpec::BoxesK4 { resolution }),
        ("nested.obj", FixtureSpec::NestedCubes { resolution }),
        ("open_box.obj", FixtureSpec::OpenBox),
        ("seam_sphere.glb", FixtureSpec::SeamSplitSphere { radius: 0.5 }),
        ("sphere.obj", FixtureSpec::AnalyticSphere { radius: 0.5 }),
        ("torus.obj", FixtureSpec::Torus { major: 0.6, minor: 0.25 }),
        ("boxes10a.obj", FixtureSpec::RandomBoxes { parts: 10, seed: 1 }),
        ("boxes10b.glb", FixtureSpec::RandomBoxes { parts: 10, seed: 2 }),
    ];
    std::fs::create_dir_all(dir).unwrap();
    specs
        .iter()
        .map(|(name, spec)| {
            let p = dir.join(name);
            write_fixture(spec, &p).unwrap();
            p
        })
        .collect()
}

/// Pipeline settings small enough for tests.
pub fn small_config(resolution: usize) -> partpack::pipeline::PipelineConfig {
    partpack::pipeline::PipelineConfig {
        resolution,
        surface_samples: 2048,
        salient_samples: 1024,
        sdf_counts: partpack::sampling::SdfCounts {
            uniform: 2048,
            near_surface: 1024,
            near_salient: 1024,
        },
        seed: 7,
        ..Default::default()
    }
}
