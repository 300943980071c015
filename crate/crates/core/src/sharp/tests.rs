use super::*;
use crate::extract::extract_surface;
use crate::extract::tests::{assert_manifold, tree_from_cells};
use crate::fixtures::cuboid;
use crate::halfedge::tests::tetra;
use crate::optimize::init_state;
use crate::validate::validate_topology;
use proptest::prelude::*;

fn index_of(s: &crate::mesh_io::TriangleSoup) -> NearestPointIndex {
    let tris = (0..s.faces.len()).map(|f| s.triangle(f)).collect();
    NearestPointIndex::from_triangles(tris).unwrap()
}

fn unit_box() -> NearestPointIndex {
    index_of(&cuboid(Vec3::repeat(-0.5), Vec3::repeat(0.5)))
}

/// Roof z = 1 - |x| over [-1, 1] x [-1, 1].
fn roof() -> NearestPointIndex {
    let p = |x: f64, y: f64| Vec3::new(x, y, 1.0 - x.abs());
    let tris = vec![
        [p(-1.0, -1.0), p(0.0, -1.0), p(0.0, 1.0)],
        [p(-1.0, -1.0), p(0.0, 1.0), p(-1.0, 1.0)],
        [p(0.0, -1.0), p(1.0, -1.0), p(1.0, 1.0)],
        [p(0.0, -1.0), p(1.0, 1.0), p(0.0, 1.0)],
    ];
    NearestPointIndex::from_triangles(tris).unwrap()
}

/// Topology only: after subdivision the faces are not yet refitted, so
/// inversion counts are meaningless here.
fn assert_closed(m: &HalfEdgeMesh) {
    let r = validate_topology(&m.positions, &m.faces);
    assert_eq!(
        (r.boundary_edge_count, r.nonmanifold_edge_count, r.nonmanifold_vertex_count, r.misoriented_edge_count),
        (0, 0, 0, 0),
        "{r:?}"
    );
}

fn single_triangle_state(tri: [Vec3; 3]) -> OptimState {
    let m = HalfEdgeMesh::unlinked(tri.to_vec(), vec![[0, 1, 2]], vec![0]);
    init_state(m, 1.0).unwrap()
}

#[test]
fn flat_reference_flags_nothing() {
    let s = crate::fixtures::sheet(4);
    let index = index_of(&s);
    let m = HalfEdgeMesh::unlinked(s.vertices.clone(), s.faces.clone(), vec![0; s.faces.len()]);
    assert!(detect_cut_edges(&m, &index, 0.01, 1.0).is_empty());
}

#[test]
fn edge_across_roof_ridge_is_flagged() {
    let a = Vec3::new(-0.5, 0.0, 0.5);
    let b = Vec3::new(0.5, 0.3, 0.5);
    let c = Vec3::new(-0.5, 0.6, 0.5);
    let m = HalfEdgeMesh::unlinked(vec![a, b, c], vec![[0, 1, 2]], vec![0]);
    let e = detect_cut_edges(&m, &roof(), 0.01, 1.0);
    // a-c lies on the left slope; the other two cross the ridge
    assert_eq!(e, vec![[0, 1], [1, 2]]);
}

proptest! {
    #[test]
    fn flag_count_is_monotone_in_threshold(pts in prop::collection::vec((-0.9f64..0.9, -0.9f64..0.9), 6..20), t in 0.1f64..100.0) {
        let positions: Vec<Vec3> = pts.iter().map(|&(x, y)| Vec3::new(x, y, 1.0 - x.abs())).collect();
        let faces: Vec<[u32; 3]> = (0..positions.len() as u32 - 2).map(|i| [i, i + 1, i + 2]).collect();
        let tags = vec![0; faces.len()];
        let m = HalfEdgeMesh::unlinked(positions, faces, tags);
        let index = roof();
        let lo = detect_cut_edges(&m, &index, 0.01, t).len();
        let hi = detect_cut_edges(&m, &index, 0.01, t * 2.0).len();
        prop_assert!(hi <= lo);
    }
}

#[test]
fn crease_target_is_exact_line_point() {
    let delta = 0.01;
    // endpoints on the y = 0.5 and z = 0.5 faces either side of the crease
    let a = Vec3::new(0.1, 0.5, 0.5 - 2.0 * delta);
    let b = Vec3::new(0.1, 0.5 - 2.0 * delta, 0.5);
    let st = single_triangle_state([a, b, Vec3::new(0.0, 0.8, 0.8)]);
    let v = NewVertex::Blue { vertex: 0, edge: [0, 1] };
    let (t, fallback) = sharp_target(&st, &unit_box(), &v, 0.05);
    assert!(!fallback);
    // midpoint is (0.1, 0.5 - delta, 0.5 - delta); crease is y = z = 0.5
    assert!((t - Vec3::new(0.1, 0.5, 0.5)).norm() < 1e-9, "{t:?}");
}

#[test]
fn corner_target_is_exact() {
    let a = Vec3::new(0.5, 0.45, 0.45);
    let b = Vec3::new(0.45, 0.5, 0.45);
    let c = Vec3::new(0.45, 0.45, 0.5);
    let st = single_triangle_state([a, b, c]);
    let v = NewVertex::Red { vertex: 0, corners: [0, 1, 2] };
    let (t, fallback) = sharp_target(&st, &unit_box(), &v, 0.1);
    assert!(!fallback);
    assert!((t - Vec3::repeat(0.5)).norm() < 1e-12, "{t:?}");
}

#[test]
fn coplanar_crease_falls_back_to_nearest_point() {
    let s = crate::fixtures::sheet(2);
    let index = index_of(&s);
    let st = single_triangle_state([Vec3::new(0.1, 0.1, 0.0), Vec3::new(0.9, 0.8, 0.0), Vec3::new(0.1, 0.9, 0.3)]);
    let v = NewVertex::Blue { vertex: 0, edge: [0, 1] };
    let (t, fallback) = sharp_target(&st, &index, &v, 0.1);
    assert!(fallback);
    assert!((t - Vec3::new(0.5, 0.45, 0.0)).norm() < 1e-12);
}

#[test]
fn nearly_parallel_planes_fall_back() {
    let tilt = 0.5f64.to_radians();
    let a = Plane { n: Vec3::z(), d: 0.0 };
    let b = Plane { n: Vec3::new(tilt.sin(), 0.0, tilt.cos()), d: 0.0 };
    assert!(line_point(&a, &b, &Vec3::zeros()).is_none());
    let c = Plane { n: Vec3::new(0.0, 2f64.to_radians().sin(), 2f64.to_radians().cos()), d: 0.0 };
    assert!(line_point(&a, &c, &Vec3::zeros()).is_some());
}

#[test]
fn no_cuts_leaves_mesh_unchanged() {
    let mut m = tetra();
    let before = (m.positions.clone(), m.faces.clone());
    let plan = SharpCutPlan::from_edges(&m, &[]);
    assert!(subdivide(&mut m, &plan).is_empty());
    assert_eq!((m.positions, m.faces), before);
}

#[test]
fn one_cut_adds_a_face_on_each_side() {
    let mut m = tetra();
    let plan = SharpCutPlan::from_edges(&m, &[[1, 0]]);
    assert_eq!(plan.face_cuts.iter().filter(|&&c| c == 1).count(), 2);
    let created = subdivide(&mut m, &plan);
    assert_eq!(created, vec![NewVertex::Blue { vertex: 4, edge: [0, 1] }]);
    assert_eq!(m.num_faces(), 6);
    assert_closed(&m);
}

#[test]
fn three_cuts_make_a_centre_vertex() {
    let mut m = tetra();
    // all edges of face [1, 2, 3]
    let plan = SharpCutPlan::from_edges(&m, &[[1, 2], [2, 3], [1, 3]]);
    assert_eq!(plan.face_cuts[2], 3);
    let created = subdivide(&mut m, &plan);
    let red: Vec<u32> = created
        .iter()
        .filter_map(|v| match v {
            NewVertex::Red { vertex, corners } => {
                assert_eq!(*corners, [1, 2, 3]);
                Some(*vertex)
            }
            _ => None,
        })
        .collect();
    assert_eq!(red.len(), 1);
    let around = m.faces.iter().filter(|f| f.contains(&red[0])).count();
    assert_eq!(around, 6);
    assert_closed(&m);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    /// Any consistent plan on a closed manifold keeps it closed, manifold
    /// and consistently oriented, with the expected face count.
    #[test]
    fn subdivision_preserves_manifoldness(cells in prop::collection::vec((4i64..7, 4i64..7, 4i64..7), 1..12), pick in prop::collection::vec(any::<bool>(), 200)) {
        let cells: Vec<[i64; 3]> = cells.into_iter().map(|(x, y, z)| [x, y, z]).collect();
        let tree = tree_from_cells(&cells, 4);
        let (mut m, _) = extract_surface(&tree).unwrap();
        let mut edges = Vec::new();
        for f in &m.faces {
            for i in 0..3 {
                let (a, b) = (f[i], f[(i + 1) % 3]);
                if a < b && pick[(edges.len() * 7 + a as usize) % pick.len()] {
                    edges.push([a, b]);
                }
            }
        }
        let plan = SharpCutPlan::from_edges(&m, &edges);
        let extra: usize = plan.face_cuts.iter().map(|&c| [0, 1, 2, 5][c as usize]).sum();
        let before = m.num_faces();
        let chi = m.euler_characteristic();
        subdivide(&mut m, &plan);
        prop_assert_eq!(m.num_faces(), before + extra);
        prop_assert_eq!(m.euler_characteristic(), chi);
        assert_manifold(&m);
        assert_closed(&m);
    }
}
