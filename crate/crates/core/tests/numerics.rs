mod common;

use iga_derham::geometry::{pullback, GeometryMap};
use iga_derham::space::FormKind;
use iga_derham::univariate::{knot, knot_to_f64};
use iga_derham::{Knot, LocalKnotVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_local(rng: &mut ChaCha8Rng) -> LocalKnotVector {
    let p = rng.gen_range(1..=5);
    let mut k: Vec<Knot> = (0..p + 2).map(|_| knot(rng.gen_range(0..=16), 16)).collect();
    k.sort();
    if k[0] == k[p + 1] {
        k[p + 1] = k[0] + knot(1, 16);
    }
    LocalKnotVector::new(k)
}

fn near_knot(k: &LocalKnotVector, x: f64, h: f64) -> bool {
    k.float_knots().iter().any(|&t| (t - x).abs() < 3.0 * h)
}

#[test]
fn derivative_decomposition_matches_finite_differences() {
    let mut rng = common::rng(1);
    let h = 1e-4;
    let mut checked = 0;
    while checked < 400 {
        let k = random_local(&mut rng);
        let t = k.float_knots();
        let x = rng.gen_range(t[0]..=t[t.len() - 1]);
        if near_knot(&k, x, h) {
            continue;
        }
        let exact: f64 = k
            .derivative_decomposition()
            .iter()
            .map(|(kv, c)| knot_to_f64(*c) * kv.eval(x))
            .sum();
        let scaled: f64 = k
            .derivative_terms()
            .iter()
            .map(|(kv, c)| *c as f64 * kv.eval_scaled(iga_derham::univariate::Scaling::D, x))
            .sum();
        let f = |y: &[f64]| k.eval(y[0]);
        let fd = common::diff4(&f, &[x], 0, h);
        let scale = fd.abs().max(1.0);
        assert!((exact - fd).abs() <= 1e-6 * scale, "{k:?} at {x}: {exact} vs {fd}");
        assert!((scaled - exact).abs() <= 1e-12 * scale);
        checked += 1;
    }
}

#[test]
fn knot_insertion_leaves_functions_unchanged() {
    let mut rng = common::rng(2);
    for _ in 0..200 {
        let k = random_local(&mut rng);
        let extra: Vec<Knot> = (0..rng.gen_range(1..=4)).map(|_| knot(rng.gen_range(1..64), 64)).collect();
        let pieces = k.refine(&extra);
        for _ in 0..10 {
            let x = rng.gen_range(0.0..=1.0);
            let refined: f64 = pieces.iter().map(|(kv, c)| knot_to_f64(*c) * kv.eval(x)).sum();
            assert!((refined - k.eval(x)).abs() <= 1e-12, "{k:?} + {extra:?} at {x}");
        }
    }
}

#[test]
fn dyadic_refinement_leaves_maps_unchanged() {
    let mut rng = common::rng(3);
    let maps = [
        GeometryMap::quarter_annulus(1.0, 2.0),
        GeometryMap::quarter_disk(1.0),
        GeometryMap::quarter_annulus(0.5, 1.5).extruded(0.0, 2.0).unwrap(),
    ];
    for g in &maps {
        let r = g.refine_dyadic().unwrap().refine_dyadic().unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..g.dim()).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let a = g.eval(&x).unwrap();
            let b = r.eval(&x).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-12, "{x:?}: {a:?} vs {b:?}");
            }
        }
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Physical test fields: a scalar, a vector field and its analytic curl and
/// divergence.
fn phi(x: &[f64]) -> f64 {
    (x[0] * x[1]).sin() + x[2] * x[2] * x[0]
}

fn grad_phi(x: &[f64]) -> [f64; 3] {
    let c = (x[0] * x[1]).cos();
    [x[1] * c + x[2] * x[2], x[0] * c, 2.0 * x[2] * x[0]]
}

fn field(x: &[f64]) -> [f64; 3] {
    [x[1] * x[2] + x[0] * x[0], (x[0] + x[2]).sin(), x[0] * x[0] * x[1] + x[2] * x[1]]
}

fn curl_field(x: &[f64]) -> [f64; 3] {
    let c = (x[0] + x[2]).cos();
    [x[0] * x[0] + x[2] - c, x[1] - 2.0 * x[0] * x[1], c - x[2]]
}

fn div_field(x: &[f64]) -> f64 {
    2.0 * x[0] + x[1]
}

#[test]
fn pullbacks_commute_with_derivatives() {
    let g = GeometryMap::quarter_annulus(1.0, 2.0).extruded(0.0, 1.0).unwrap();
    let mut rng = common::rng(4);
    let h = 1e-3;
    let pulled = |kind: FormKind, f: &dyn Fn(&[f64]) -> Vec<f64>, z: &[f64]| -> Vec<f64> {
        let j = g.jacobian(z).unwrap();
        pullback(kind, &j, &f(&j.point)).unwrap()
    };
    for _ in 0..30 {
        let z: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..0.9)).collect();
        let jac = g.jacobian(&z).unwrap();
        let x = jac.point;

        // grad of the pulled-back scalar is the H(curl) pullback of grad
        let want = pullback(FormKind::Hcurl, &jac, &grad_phi(&x)).unwrap();
        let s = |y: &[f64]| pulled(FormKind::H1, &|p| vec![phi(p)], y)[0];
        for k in 0..3 {
            let fd = common::diff4(&s, &z, k, h);
            assert!(rel_close(fd, want[k], 1e-8), "grad {k}: {fd} vs {}", want[k]);
        }

        // curl of the H(curl) pullback is the H(div) pullback of curl
        let want = pullback(FormKind::Hdiv, &jac, &curl_field(&x)).unwrap();
        let comp = |c: usize| move |y: &[f64]| pulled(FormKind::Hcurl, &|p| field(p).to_vec(), y)[c];
        let d = |c: usize, k: usize| common::diff4(&comp(c), &z, k, h);
        let curl = [d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)];
        for k in 0..3 {
            assert!(rel_close(curl[k], want[k], 1e-8), "curl {k}: {} vs {}", curl[k], want[k]);
        }

        // div of the H(div) pullback is the L2 pullback of div
        let want = pullback(FormKind::L2, &jac, &[div_field(&x)]).unwrap()[0];
        let comp = |c: usize| move |y: &[f64]| pulled(FormKind::Hdiv, &|p| field(p).to_vec(), y)[c];
        let div: f64 = (0..3).map(|k| common::diff4(&comp(k), &z, k, h)).sum();
        assert!(rel_close(div, want, 1e-8), "div: {div} vs {want}");
    }
}

#[test]
fn control_map_converges_at_second_order() {
    // start at h = 1/2; the single-element map is still pre-asymptotic
    for coarse in [GeometryMap::quarter_annulus(1.0, 2.0), GeometryMap::quarter_disk(1.0)] {
        let g = coarse.refine_dyadic().unwrap();
        let g1 = g.refine_dyadic().unwrap();
        let g2 = g1.refine_dyadic().unwrap();
        let d: Vec<f64> = [&g, &g1, &g2].iter().map(|m| m.control_distance(200).unwrap()).collect();
        for k in 0..2 {
            let ratio = d[k] / d[k + 1];
            assert!((3.2..=4.8).contains(&ratio), "distances {d:?}");
        }
    }
}

#[test]
fn affine_maps_equal_their_control_maps() {
    let id = GeometryMap::boxed(&[(0.0, 2.0), (-1.0, 1.0)]).refine_dyadic().unwrap();
    for m in id.greville_mesh().unwrap() {
        assert_eq!(m.degree(), 1);
    }
    assert!(id.control_distance(9).unwrap() < 1e-14);
}
