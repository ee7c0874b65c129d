use std::collections::HashSet;

use partpack::bipartite_contraction::greedy_odd_cycle_contraction;
use partpack::contact_graph::ContactGraph;
use partpack::fixtures::{box_mesh, boxes_chain, icosphere, write_fixture, FixtureSpec};
use partpack::mesh::{Point, TriangleMesh};
use partpack::mesh_io::{
    load_object, read_obj_raw, save_part_meshes, write_glb, write_obj, write_obj_groups, Normalization, SceneNode,
};
use partpack::part_extraction::{PartSet, Provenance};
use partpack::volume_packing::assign_volumes;

fn bits(p: &Point) -> [u64; 3] {
    [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]
}

fn triangle_multiset(mesh: &TriangleMesh) -> Vec<[[u64; 3]; 3]> {
    let mut tris: Vec<[[u64; 3]; 3]> = (0..mesh.num_faces()).map(|f| mesh.triangle(f).map(|p| bits(&p))).collect();
    for t in &mut tris {
        // rotate so the smallest corner comes first, keeping orientation
        let k = (0..3).min_by_key(|&i| t[i]).unwrap();
        t.rotate_left(k);
    }
    tris.sort();
    tris
}

#[test]
fn three_node_scene_keeps_three_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("three.glb");
    let nodes: Vec<SceneNode> = (0..3)
        .map(|i| SceneNode {
            name: format!("n{i}"),
            mesh: box_mesh(Point::new(i as f64, 0.0, 0.0), Point::new(i as f64 + 0.5, 0.5, 0.5)),
        })
        .collect();
    write_glb(&nodes, &path).unwrap();
    let obj = load_object(&path).unwrap();
    assert_eq!(obj.nodes.len(), 3);
    assert_eq!(obj.num_faces(), 36);
}

#[test]
fn flat_obj_is_one_node() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.obj");
    write_fixture(&FixtureSpec::BoxesChain { resolution: 64 }, &path).unwrap();
    let obj = load_object(&path).unwrap();
    assert_eq!(obj.nodes.len(), 1);
    assert_eq!(obj.num_faces(), 60);
}

#[test]
fn size_ten_cube_is_normalized_to_1_9() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cube.obj");
    write_obj(&box_mesh(Point::new(0.0, 0.0, 0.0), Point::new(10.0, 10.0, 10.0)), &path).unwrap();
    let obj = load_object(&path).unwrap();
    let b = obj.bounds();
    for a in 0..3 {
        assert!((b.min[a] + 0.95).abs() < 1e-12, "min {a} = {}", b.min[a]);
        assert!((b.max[a] - 0.95).abs() < 1e-12, "max {a} = {}", b.max[a]);
    }
    assert!((b.extent().max() - 1.9).abs() < 1e-12);
}

#[test]
fn normalizing_twice_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sphere.obj");
    write_obj(&icosphere(Point::new(3.0, -7.0, 2.0), 4.2, 2), &path).unwrap();
    let obj = load_object(&path).unwrap();
    let mut again = obj.clone();
    again.normalize();
    for (a, b) in obj.nodes.iter().zip(&again.nodes) {
        for (p, q) in a.mesh.positions.iter().zip(&b.mesh.positions) {
            assert!((p - q).norm() <= 1e-9);
        }
    }
}

#[test]
fn obj_text_round_trips_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("odd.obj");
    let mut mesh = icosphere(Point::new(0.1, 0.2, 0.3), 0.7, 2);
    mesh.transform(|p| Point::new(p.x / 3.0, p.y * std::f64::consts::PI, p.z + 1e-13));
    write_obj(&mesh, &path).unwrap();
    let back = read_obj_raw(&path).unwrap();
    assert_eq!(back.num_faces(), mesh.num_faces());
    for f in 0..mesh.num_faces() {
        assert_eq!(mesh.triangle(f).map(|p| bits(&p)), back.triangle(f).map(|p| bits(&p)));
    }
}

fn five_part_fixture() -> (PartSet, partpack::volume_packing::VolumeAssignment) {
    let parts = boxes_chain(5, 64);
    let n = parts.len();
    let set = PartSet {
        parts,
        provenance: vec![Provenance::ConnectedComponent; n],
        merge_log: vec![],
    };
    let g = ContactGraph::from_edges(5, (0..4).map(|i| (i, i + 1, 1.0))).unwrap();
    let plan = greedy_odd_cycle_contraction(&g, 100).unwrap();
    let assignment = assign_volumes(&g, &plan, &[1; 5]).unwrap();
    (set, assignment)
}

#[test]
fn five_parts_alternating_are_saved_three_and_two() {
    let dir = tempfile::tempdir().unwrap();
    let (set, assignment) = five_part_fixture();
    assert_eq!(assignment.part_volume, vec![0, 1, 0, 1, 0]);
    let m = save_part_meshes(&set, &assignment, Normalization::identity(), dir.path()).unwrap();
    let objs = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "obj"))
        .count();
    assert_eq!(objs, 5);
    assert_eq!(m.volumes[0], vec![0, 2, 4]);
    assert_eq!(m.volumes[1], vec![1, 3]);
}

#[test]
fn saved_parts_reproduce_the_input_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let (set, assignment) = five_part_fixture();
    let m = save_part_meshes(&set, &assignment, Normalization::identity(), dir.path()).unwrap();
    let reloaded: Vec<TriangleMesh> = m.parts.iter().map(|p| read_obj_raw(&dir.path().join(&p.file)).unwrap()).collect();
    let input = TriangleMesh::concat(&set.parts);
    let output = TriangleMesh::concat(&reloaded);
    let vin: HashSet<_> = input.positions.iter().map(bits).collect();
    let vout: HashSet<_> = output.positions.iter().map(bits).collect();
    assert_eq!(vin, vout);
    assert_eq!(triangle_multiset(&input), triangle_multiset(&output));
}

#[test]
fn empty_part_set_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("parts");
    let (_, assignment) = five_part_fixture();
    assert!(save_part_meshes(&PartSet::default(), &assignment, Normalization::identity(), &target).is_err());
    assert!(!target.exists());
}

#[test]
fn obj_groups_load_as_separate_components() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("groups.obj");
    let a = box_mesh(Point::new(0.0, 0.0, 0.0), Point::new(1.0, 1.0, 1.0));
    let b = box_mesh(Point::new(2.0, 0.0, 0.0), Point::new(3.0, 1.0, 1.0));
    write_obj_groups(&[("a", &a), ("b", &b)], &path).unwrap();
    let obj = load_object(&path).unwrap();
    assert_eq!(obj.nodes.len(), 1);
    assert_eq!(obj.num_faces(), 24);
}

#[test]
fn missing_and_unknown_files_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_object(&dir.path().join("nope.obj")).is_err());
    let txt = dir.path().join("mesh.stl");
    std::fs::write(&txt, "solid").unwrap();
    assert!(load_object(&txt).is_err());
}
