mod common;

use common::has_proper_two_coloring;
use partpack::bipartite_contraction::{bipartize, contract};
use partpack::contact_graph::{build_contact_graph, ContactGraph};
use partpack::curation::{dataset_stats, filter_object, CurationReport, MIN_BALANCE_RATIO};
use partpack::fixtures::{box_mesh, icosphere, random_boxes};
use partpack::mesh::{Point, TriangleMesh};
use partpack::mesh_io::{Normalization, SceneNode, SceneObject};
use partpack::part_extraction::{count_boundary_edges, extract_parts, merge_rules, repair_part, MergeConfig};
use partpack::volume_packing::assign_volumes;
use partpack::watertight_field::{compute_sdf_grid, marching_cubes};
use proptest::prelude::*;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = ContactGraph> {
    (2..=max_n).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n, 0.1f64..10.0), 0..=30)
            .prop_map(move |edges| ContactGraph::from_edges(n, edges).unwrap())
    })
}

fn bipartite_strategy() -> impl Strategy<Value = ContactGraph> {
    (2usize..=12).prop_flat_map(|n| {
        (proptest::collection::vec(any::<bool>(), n), proptest::collection::vec((0..n, 0..n, 0.1f64..10.0), 0..=30))
            .prop_map(move |(side, edges)| {
                ContactGraph::from_edges(n, edges.into_iter().filter(|&(a, b, _)| side[a] != side[b])).unwrap()
            })
    })
}

fn single_node(mesh: TriangleMesh) -> SceneObject {
    SceneObject {
        nodes: vec![SceneNode {
            name: "n".into(),
            mesh,
        }],
        normalization: Normalization::identity(),
        degenerate_faces: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn filter_is_symmetric(o1 in 0.0f64..=1.0, o2 in 0.0f64..=1.0) {
        prop_assert_eq!(filter_object(o1, o2).unwrap(), filter_object(o2, o1).unwrap());
    }

    #[test]
    fn kept_objects_are_balanced(o1 in 0.0f64..=1.0, o2 in 0.0f64..=1.0) {
        let (kept, _) = filter_object(o1, o2).unwrap();
        if kept {
            prop_assert!(o1.min(o2) / o1.max(o2) >= MIN_BALANCE_RATIO);
        }
    }

    #[test]
    fn histogram_accounts_for_every_report(counts in proptest::collection::vec(1usize..500, 1..60)) {
        let reports: Vec<_> = counts.iter().map(|&c| CurationReport::new("x", 0.2, 0.3, c).unwrap()).collect();
        let s = dataset_stats(&reports).unwrap();
        prop_assert_eq!(s.part_histogram.iter().map(|b| b.count).sum::<usize>(), counts.len());
        let total: f64 = s.part_histogram.iter().map(|b| b.fraction).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn bipartize_always_leaves_a_proper_coloring(g in graph_strategy(12)) {
        let plan = bipartize(&g, 100);
        prop_assert!(has_proper_two_coloring(&plan.apply(&g)));
        prop_assert_eq!(plan.to_json().unwrap(), bipartize(&g, 100).to_json().unwrap());
    }

    #[test]
    fn bipartite_graphs_get_empty_plans(g in bipartite_strategy()) {
        prop_assert!(bipartize(&g, 100).is_empty());
    }

    #[test]
    fn assignment_covers_every_part_once(g in graph_strategy(12), seed in any::<u64>()) {
        let plan = bipartize(&g, 100);
        let counts: Vec<usize> = (0..g.num_vertices()).map(|i| (seed as usize).wrapping_mul(i + 7) % 97).collect();
        let a = assign_volumes(&g, &plan, &counts).unwrap();
        let mut all: Vec<usize> = a.parts_in(0).into_iter().chain(a.parts_in(1)).collect();
        all.sort();
        prop_assert_eq!(all, (0..g.num_vertices()).collect::<Vec<_>>());
        let contracted = plan.apply(&g);
        for e in &contracted.edges {
            prop_assert_ne!(a.color[e.u], a.color[e.v]);
        }
    }

    #[test]
    fn contraction_merges_parallel_edges_by_max(g in graph_strategy(8), pick in any::<prop::sample::Index>()) {
        prop_assume!(g.num_edges() > 0);
        let e = g.edges[pick.index(g.num_edges())];
        let c = contract(&g, [(e.u, e.v)]);
        prop_assert_eq!(c.num_vertices(), g.num_vertices() - 1);
        // every surviving edge weight is the max over the original edges it stands for
        for ce in &c.edges {
            let group = |i: usize| c.vertex_parts[i].clone();
            let (gu, gv) = (group(ce.u), group(ce.v));
            let best = g
                .edges
                .iter()
                .filter(|x| (gu.contains(&x.u) && gv.contains(&x.v)) || (gu.contains(&x.v) && gv.contains(&x.u)))
                .map(|x| x.weight)
                .fold(f64::MIN, f64::max);
            prop_assert_eq!(ce.weight, best);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn separated_boxes_never_touch(gap_voxels in 3.0f64..10.0, offset in 0.0f64..1.0, size in 4.0f64..12.0) {
        let res = 64;
        let h = 2.0 / res as f64;
        let a_max = -0.5 + offset * h;
        let a = box_mesh(Point::new(a_max - size * h, -0.3, -0.3), Point::new(a_max, 0.3, 0.3));
        let b_min = a_max + gap_voxels * h;
        let b = box_mesh(Point::new(b_min, -0.3, -0.3), Point::new(b_min + size * h, 0.3, 0.3));
        let g = build_contact_graph(&[a, b], res, 1).unwrap();
        prop_assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn merging_conserves_faces_and_reaches_a_fixpoint(seed in any::<u64>(), parts in 2usize..12) {
        let boxes = random_boxes(parts, seed);
        let obj = single_node(TriangleMesh::concat(&boxes));
        let cfg = MergeConfig { resolution: 48, ..MergeConfig::default() };
        let extracted = extract_parts(&obj).unwrap();
        let once = merge_rules(&extracted, &cfg);
        prop_assert_eq!(once.total_faces(), extracted.total_faces());
        prop_assert_eq!(merge_rules(&once, &cfg).parts, once.parts);
    }

    #[test]
    fn repair_never_adds_boundary_edges(removed in proptest::collection::btree_set(0usize..320, 0..40)) {
        let sphere = icosphere(Point::origin(), 0.5, 2);
        let keep: Vec<usize> = (0..sphere.num_faces()).filter(|f| !removed.contains(f)).collect();
        let holed = sphere.select_faces(&keep);
        let (fixed, _) = repair_part(&holed);
        prop_assert!(count_boundary_edges(&fixed) <= count_boundary_edges(&holed));
    }

    #[test]
    fn normalization_is_idempotent(coords in proptest::collection::vec(-50.0f64..50.0, 9..60)) {
        let pts: Vec<Point> = coords.chunks_exact(3).map(|c| Point::new(c[0], c[1], c[2])).collect();
        let faces = (0..pts.len() as u32 / 3).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
        let mut obj = single_node(TriangleMesh::new(pts, faces));
        prop_assume!(obj.bounds().extent().max() > 1e-3);
        obj.normalize();
        let once = obj.clone();
        obj.normalize();
        for (p, q) in once.nodes[0].mesh.positions.iter().zip(&obj.nodes[0].mesh.positions) {
            prop_assert!((p - q).norm() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn extracted_surfaces_are_watertight(seed in any::<u64>()) {
        let grid = compute_sdf_grid(&random_boxes(6, seed), 32).unwrap();
        let mesh = marching_cubes(&grid, 0.0);
        prop_assert_eq!(mesh.edge_defects(), (0, 0));
        prop_assert!(grid.values.iter().all(|v| v.is_finite()));
        prop_assert!(grid.values[0] > 0.0);
    }
}
