mod common;

use iga_derham::exact::exact_rank;
use iga_derham::parametric_complex::{build_complex, entity_correspondence, verify_exactness, BoundaryCondition, TensorMesh};
use iga_derham::tmesh::{TMesh, Tiling};
use iga_derham::tspline_complex::{build_tspline_complex, extrude_complex};
use iga_derham::univariate::knot;
use iga_derham::KnotVector;
use num_rational::Rational64;
use rand::Rng;

fn tensor(degrees: &[usize], elements: &[usize]) -> iga_derham::parametric_complex::DiscreteComplex {
    let kvs = degrees.iter().zip(elements).map(|(&p, &n)| KnotVector::uniform(p, n)).collect();
    build_complex(&TensorMesh::new(kvs).unwrap()).unwrap()
}

#[test]
fn random_tensor_complexes_are_exact() {
    let mut rng = common::rng(7);
    for case in 0..20 {
        let d = rng.gen_range(2..=3);
        let degrees: Vec<usize> = (0..d).map(|_| rng.gen_range(2..=4)).collect();
        let elements: Vec<usize> = (0..d).map(|_| rng.gen_range(4..=7)).collect();
        let c = tensor(&degrees, &elements);
        let dims = c.dims();
        for bc in [BoundaryCondition::None, BoundaryCondition::Full] {
            let r = verify_exactness(&c, &bc).unwrap();
            assert!(r.exact, "case {case} {degrees:?} {elements:?} {bc:?}: {r:?}");
            assert!(r.compositions_vanish.iter().all(|&v| v));
            let rd = &r.dims;
            match bc {
                // rank(d_0) = dim X0 - 1, and d_{d-1} is onto
                BoundaryCondition::None => {
                    assert_eq!(r.ranks[0], rd[0] - 1);
                    assert_eq!(r.ranks[d - 1], rd[d]);
                }
                // d_0 is injective, and the last image misses the constants
                _ => {
                    assert_eq!(r.ranks[0], rd[0]);
                    assert_eq!(r.ranks[d - 1], rd[d] - 1);
                }
            }
        }
        for j in 0..d - 1 {
            assert!(c.diff_matrix(j + 1).unwrap().matmul(&c.diff_matrix(j).unwrap()).is_zero());
        }
        let alt: i64 = dims.iter().enumerate().map(|(j, &n)| if j % 2 == 0 { n as i64 } else { -(n as i64) }).sum();
        assert_eq!(alt, 1);
    }
}

#[test]
fn cubic_counting_formulas() {
    let c = tensor(&[3, 3, 3], &[1, 1, 1]);
    let n = 4usize;
    assert_eq!(c.dims(), vec![64, 3 * 4 * 4 * 3, 3 * 4 * 3 * 3, 27]);
    let r = verify_exactness(&c, &BoundaryCondition::None).unwrap();
    assert_eq!(r.ranks[0], 63);
    assert_eq!(r.ranks[2], (n - 1).pow(3));
    assert_eq!(r.dims[2] - r.ranks[2], 2 * n.pow(3) - 3 * n * n + 1);
}

#[test]
fn operators_match_mesh_incidence() {
    let mut rng = common::rng(11);
    for case in 0..10 {
        let d = if case % 2 == 0 { 2 } else { 3 };
        let p = [1, 3, 2, 4][case % 4];
        let elements: Vec<usize> = (0..d).map(|_| rng.gen_range(1..=4)).collect();
        let c = tensor(&vec![p; d], &elements);
        let r = entity_correspondence(&c).unwrap();
        assert!(r.holds(), "case {case} p={p} {elements:?}: {r:?}");
        if p % 2 == 1 {
            assert_eq!(r.parity, "odd");
            // the gradient is exactly the edge-vertex incidence matrix
            assert!(r.operators[0].equal);
        } else {
            assert_eq!(r.parity, "even");
        }
    }
}

#[test]
fn gradient_counts_follow_mesh_entities() {
    for p in [1, 3] {
        let c = tensor(&[p, p, p], &[2, 2, 2]);
        let census = c.mesh.census();
        assert_eq!(c.dims()[1], census.entities[1]);
        let g = c.diff_matrix(0).unwrap();
        for col in 0..g.ncols() {
            assert!(g.transpose().row(col).count() <= 6);
        }
    }
}

fn odd_degree_census_dims(m: &TMesh) -> [usize; 3] {
    let c = m.census().unwrap();
    let t = c.horizontal_t_junctions + c.vertical_t_junctions;
    [c.vertices, c.horizontal_edges + c.vertical_edges + t, c.faces + t]
}

fn check_tspline_complex(m: &TMesh, label: &str) {
    let c = build_tspline_complex(m).unwrap();
    let [y0, y1, y2] = c.dims();
    assert_eq!(y0 + y2, y1 + 1, "{label}");
    for bc in [BoundaryCondition::None, BoundaryCondition::Full] {
        let r = c.verify_exactness(&bc).unwrap();
        assert!(r.exact, "{label} {bc:?}: {r:?}");
        let rr = c.verify_exactness_rotated(&bc).unwrap();
        assert!(rr.exact, "{label} rotated {bc:?}: {rr:?}");
    }
    let r = c.verify_exactness(&BoundaryCondition::None).unwrap();
    assert_eq!(r.ranks[1], y2, "{label}: rot is onto");
    if m.degrees[0] % 2 == 1 {
        assert_eq!(c.dims(), odd_degree_census_dims(m), "{label}");
    }
}

#[test]
fn tspline_complex_on_the_square_mesh() {
    let l = common::layout("square_coarse_mesh.json");
    let m = TMesh::from_layout(&l, [3, 3]).unwrap();
    assert!(m.suitability().strongly_suitable);
    check_tspline_complex(&m, "square");
    assert_eq!(build_tspline_complex(&m).unwrap().y1.len(), 74);
}

#[test]
fn tspline_complexes_on_generated_meshes() {
    let mut rng = common::rng(23);
    for case in 0..10 {
        let p = [3, 2, 4, 3, 2][case % 5];
        let t = common::random_suitable_tiling(&mut rng, p);
        let m = TMesh::from_layout(&t.layout(), [p, p]).unwrap();
        assert!(m.suitability().strongly_suitable);
        assert_eq!(m.census().unwrap().euler_characteristic, 1);
        check_tspline_complex(&m, &format!("case {case} p={p}"));
    }
}

#[test]
fn tensor_input_equals_the_bspline_path() {
    let xs = [knot(0, 1), knot(1, 4), knot(1, 2), knot(1, 1)];
    let ys = [knot(0, 1), knot(1, 3), knot(2, 3), knot(1, 1)];
    let layout = Tiling::tensor(&xs, &ys).layout();
    for p in 1..=4 {
        let c = build_tspline_complex(&TMesh::from_layout(&layout, [p, p]).unwrap()).unwrap();
        let kx = KnotVector::with_interior(p, &xs[1..3]).unwrap();
        let ky = KnotVector::with_interior(p, &ys[1..3]).unwrap();
        let b = build_complex(&TensorMesh::new(vec![kx.clone(), ky.clone()]).unwrap()).unwrap();
        for j in 0..3 {
            assert_eq!(*c.space(j), b.function_space(j));
        }
        assert_eq!(c.grad().unwrap(), b.diff_matrix(0).unwrap().map(Rational64::from_integer));
        assert_eq!(c.rot().unwrap(), b.diff_matrix(1).unwrap().map(Rational64::from_integer));
        let z = KnotVector::uniform(p, 3);
        let e = extrude_complex(&c, &z).unwrap();
        let b3 = build_complex(&TensorMesh::new(vec![kx, ky, z.clone()]).unwrap()).unwrap();
        assert_eq!(e.dims(), b3.dims());
        // dim X1 = dim Y1 * n + dim Y0 * (n - 1)
        assert_eq!(e.dims()[1], c.y1.len() * z.dim() + c.y0.len() * (z.dim() - 1));
        for j in 0..3 {
            assert_eq!(e.diff_matrix(j).unwrap(), b3.diff_matrix(j).unwrap().map(Rational64::from_integer));
        }
    }
}

#[test]
fn tspline_gradient_matrix_acts_as_the_gradient() {
    let l = common::layout("square_coarse_mesh.json");
    let m = TMesh::from_layout(&l, [3, 3]).unwrap();
    let c = build_tspline_complex(&m).unwrap();
    let g = c.grad().unwrap().map(|r| *r.numer() as f64 / *r.denom() as f64);
    let mut rng = common::rng(5);
    let coeffs: Vec<f64> = (0..c.y0.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let dc = g.mul_vec(&coeffs);
    let field0 = |x: &[f64]| (0..c.y0.len()).map(|i| coeffs[i] * c.y0.eval(i, x)[0]).sum::<f64>();
    for _ in 0..30 {
        let x = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
        let mut v = [0.0; 2];
        for (i, &a) in dc.iter().enumerate() {
            let e = c.y1.eval(i, &x);
            v[0] += a * e[0];
            v[1] += a * e[1];
        }
        for k in 0..2 {
            let fd = common::diff4(&field0, &x, k, 1e-4);
            assert!((fd - v[k]).abs() <= 1e-6 * fd.abs().max(1.0), "{x:?} {k}: {fd} vs {}", v[k]);
        }
    }
}

#[test]
fn restricted_gradient_rank_is_the_interior_count() {
    let l = common::layout("square_coarse_mesh.json");
    let c = build_tspline_complex(&TMesh::from_layout(&l, [3, 3]).unwrap()).unwrap();
    let r = c.verify_exactness(&BoundaryCondition::Full).unwrap();
    assert_eq!(r.dims[0], 21);
    assert_eq!(exact_rank(&c.grad().unwrap()), c.y0.len() - 1);
}
