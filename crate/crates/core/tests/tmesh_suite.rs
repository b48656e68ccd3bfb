mod common;

use iga_derham::tmesh::{Orientation, TMesh};
use iga_derham::tspline_complex::build_tspline_complex;
use iga_derham::univariate::{knot, knot_to_f64};
use iga_derham::Knot;
use rand::Rng;

const LAYOUTS: [&str; 3] = ["extension_mesh.json", "crossing_extensions.json", "square_coarse_mesh.json"];

fn sixths(v: &[i64]) -> Vec<Knot> {
    v.iter().map(|&a| knot(a, 6)).collect()
}

/// Local knot vectors of every anchor placed at `point`; repeated boundary
/// lines put several anchors on the same spot.
fn knots_at(m: &TMesh, point: [f64; 2]) -> Vec<[Vec<Knot>; 2]> {
    m.anchors()
        .unwrap()
        .into_iter()
        .filter(|&a| {
            let q = m.anchor_point(a);
            (q[0] - point[0]).abs() < 1e-12 && (q[1] - point[1]).abs() < 1e-12
        })
        .map(|a| m.local_knots(a).map(|k| k.knots().to_vec()))
        .collect()
}

#[test]
fn local_knot_vectors_by_ray_tracing() {
    let m = TMesh::from_layout(&common::layout("extension_mesh.json"), [2, 3]).unwrap();
    let corner = knots_at(&m, [1.0 / 12.0, 0.0]);
    assert!(corner.contains(&[sixths(&[0, 0, 1, 2]), sixths(&[0, 0, 0, 1, 2])]), "{corner:?}");
    let inner = knots_at(&m, [0.75, 0.5]);
    assert_eq!(inner, vec![[sixths(&[3, 4, 5, 6]), sixths(&[0, 2, 3, 4, 5])]]);
}

#[test]
fn face_and_edge_extensions() {
    let m = TMesh::from_layout(&common::layout("extension_mesh.json"), [2, 3]).unwrap();
    let ext = m.extensions();
    assert_eq!(ext.len(), 2);
    let coords = |o: Orientation, iv: [usize; 2]| -> [Knot; 2] {
        match o {
            Orientation::Horizontal => [m.x(iv[0]), m.x(iv[1])],
            Orientation::Vertical => [m.y(iv[0]), m.y(iv[1])],
        }
    };
    let h = ext.iter().find(|e| e.junction.orientation == Orientation::Horizontal).unwrap();
    assert_eq!([m.x(h.junction.vertex[0]), m.y(h.junction.vertex[1])], [knot(1, 2), knot(1, 6)]);
    assert_eq!(coords(h.junction.orientation, h.face), [knot(1, 2), knot(2, 3)]);
    assert_eq!(coords(h.junction.orientation, h.edge), [knot(1, 3), knot(1, 2)]);
    let v = ext.iter().find(|e| e.junction.orientation == Orientation::Vertical).unwrap();
    assert_eq!([m.x(v.junction.vertex[0]), m.y(v.junction.vertex[1])], [knot(5, 6), knot(2, 3)]);
    assert_eq!(coords(v.junction.orientation, v.face), [knot(2, 3), knot(1, 1)]);
    assert_eq!(coords(v.junction.orientation, v.edge), [knot(1, 2), knot(2, 3)]);
    let s = m.suitability();
    assert!(s.analysis_suitable && s.strongly_suitable);
}

#[test]
fn euler_identity_on_every_layout() {
    let mut rng = common::rng(3);
    let mut meshes: Vec<TMesh> = LAYOUTS
        .iter()
        .map(|n| TMesh::from_layout(&common::layout(n), [3, 3]).unwrap())
        .collect();
    for _ in 0..5 {
        let t = common::random_suitable_tiling(&mut rng, 2);
        meshes.push(TMesh::from_layout(&t.layout(), [2, 2]).unwrap());
    }
    for m in &meshes {
        let c = m.census().unwrap();
        let e = (c.horizontal_edges + c.vertical_edges) as i64;
        assert_eq!(c.vertices as i64 - e + c.faces as i64, 1);
        assert_eq!(c.euler_characteristic, 1);
        let t = m.t_junctions();
        let horizontal = t.iter().filter(|j| j.orientation == Orientation::Horizontal).count();
        assert_eq!(c.horizontal_t_junctions, horizontal);
        assert_eq!(c.vertical_t_junctions, t.len() - horizontal);
    }
}

#[test]
fn crossing_extensions_are_detected() {
    let m = TMesh::from_layout(&common::layout("crossing_extensions.json"), [3, 3]).unwrap();
    let s = m.suitability();
    assert!(!s.analysis_suitable);
    assert!(!s.strongly_suitable);
    assert_eq!(s.crossings, vec![[0, 1], [0, 2], [1, 3], [2, 3]]);
    let ext = m.extensions();
    for [a, b] in &s.crossings {
        assert_ne!(ext[*a].junction.orientation, ext[*b].junction.orientation);
    }
    let sq = TMesh::from_layout(&common::layout("square_coarse_mesh.json"), [3, 3]).unwrap();
    assert!(sq.suitability().analysis_suitable);
}

/// Lagrange interpolation of `f` on `(p+1)^2` points inside `[x0,x1]x[y0,y1]`.
fn tensor_interpolant(f: &dyn Fn(f64, f64) -> f64, r: [f64; 4], p: usize) -> impl Fn(f64, f64) -> f64 {
    let nodes = |a: f64, b: f64| -> Vec<f64> { (0..=p).map(|k| a + (b - a) * (k as f64 + 0.5) / (p as f64 + 1.0)).collect() };
    let xs = nodes(r[0], r[1]);
    let ys = nodes(r[2], r[3]);
    let vals: Vec<Vec<f64>> = xs.iter().map(|&x| ys.iter().map(|&y| f(x, y)).collect()).collect();
    let lag = |n: &[f64], k: usize, t: f64| -> f64 {
        n.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &s)| (t - s) / (n[k] - s)).product()
    };
    move |x, y| {
        let mut s = 0.0;
        for i in 0..=p {
            let lx = lag(&xs, i, x);
            for j in 0..=p {
                s += vals[i][j] * lx * lag(&ys, j, y);
            }
        }
        s
    }
}

#[test]
fn basis_functions_are_polynomial_on_extended_mesh_faces() {
    let mut rng = common::rng(17);
    let mut cases: Vec<TMesh> = vec![
        TMesh::from_layout(&common::layout("square_coarse_mesh.json"), [3, 3]).unwrap(),
        TMesh::from_layout(&common::layout("extension_mesh.json"), [3, 3]).unwrap(),
    ];
    for p in [2, 3] {
        let t = common::random_suitable_tiling(&mut rng, p);
        cases.push(TMesh::from_layout(&t.layout(), [p, p]).unwrap());
    }
    for m in &cases {
        let p = m.degrees[0];
        let c = build_tspline_complex(m).unwrap();
        let faces = m.extended().bezier_faces().unwrap();
        for (i, _) in c.y0.functions.iter().enumerate() {
            let f = |x: f64, y: f64| c.y0.eval(i, &[x, y])[0];
            for face in &faces {
                let r = [knot_to_f64(face.x0), knot_to_f64(face.x1), knot_to_f64(face.y0), knot_to_f64(face.y1)];
                let g = tensor_interpolant(&f, r, p);
                for _ in 0..3 {
                    let x = rng.gen_range(r[0]..r[1]);
                    let y = rng.gen_range(r[2]..r[3]);
                    assert!((f(x, y) - g(x, y)).abs() < 1e-9, "function {i} on {face:?}");
                }
            }
        }
    }
}

#[test]
fn tspline_functions_form_a_partition_of_unity() {
    let m = TMesh::from_layout(&common::layout("extension_mesh.json"), [3, 3]).unwrap();
    let c = build_tspline_complex(&m).unwrap();
    let mut rng = common::rng(2);
    for _ in 0..50 {
        let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let s: f64 = (0..c.y0.len()).map(|i| c.y0.eval(i, &x)[0]).sum();
        assert!((s - 1.0).abs() < 1e-12, "{x:?}: {s}");
    }
}
