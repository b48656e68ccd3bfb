//! One pass/fail line per acceptance criterion. Runs without the test
//! harness so the lines appear in order; exits nonzero on any failure.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use iga_derham::benchmarks::{
    corner_refined_tiling, cylinder_exact, cylinder_sector_benchmark, rectangle_port_mode, run_straight_guide, solve_curl_free_source,
    square_benchmark, thick_l_benchmark, StraightGuide, SQUARE_COARSE, SQUARE_DOFS, SQUARE_REFINED_MODE_20, SQUARE_ZEROS, THICK_L_FIRST,
};
use iga_derham::geometry::{pullback, GeometryMap};
use iga_derham::parametric_complex::{build_complex, entity_correspondence, verify_exactness, BoundaryCondition, TensorMesh};
use iga_derham::solvers::WaveguideProblem;
use iga_derham::space::FormKind;
use iga_derham::tmesh::{Orientation, TMesh, Tiling};
use iga_derham::tspline_complex::build_tspline_complex;
use iga_derham::univariate::{knot, knot_to_f64};
use iga_derham::{Knot, KnotVector, LocalKnotVector};
use num_rational::Rational64;
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let b = square_benchmark(3, 0).map_err(|e| e.to_string())?;
    let dofs = b.system().map_err(|e| e.to_string())?.mass.nrows();
    ensure(dofs == SQUARE_DOFS[0], || format!("coarse mesh has {dofs} dofs"))?;
    let e = b.eigen(21).map_err(|e| e.to_string())?;
    ensure(e.zero_count == SQUARE_ZEROS[0], || format!("coarse zero count {}", e.zero_count))?;
    for (i, (&v, &want)) in e.nonzero().iter().zip(&SQUARE_COARSE).enumerate() {
        ensure(common::significant_match(v, want, 5), || format!("eigenvalue {i}: {v} vs {want}"))?;
    }
    let coarse_time = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let b = square_benchmark(3, 1).map_err(|e| e.to_string())?;
    let dofs = b.system().map_err(|e| e.to_string())?.mass.nrows();
    ensure(dofs == SQUARE_DOFS[1], || format!("refined mesh has {dofs} dofs"))?;
    let e = b.eigen(10).map_err(|e| e.to_string())?;
    ensure(e.zero_count == SQUARE_ZEROS[1], || format!("refined zero count {}", e.zero_count))?;
    let mode = e.nonzero().iter().copied().filter(|v| (v - 4.0).abs() < 0.1).fold(f64::INFINITY, f64::min);
    ensure((mode - SQUARE_REFINED_MODE_20).abs() <= 5e-5, || format!("mode (2,0) = {mode}"))?;
    let refined_time = start.elapsed().as_secs_f64();
    ensure(coarse_time < 30.0 && refined_time < 30.0, || format!("runtimes {coarse_time:.1}s, {refined_time:.1}s"))?;
    Ok(format!("21 eigenvalues to 5 digits, zeros 21/65, mode (2,0) = {mode:.6}, {coarse_time:.2}s + {refined_time:.2}s"))
}

fn criterion_2() -> Check {
    let mut notes = Vec::new();
    for p in [4, 5] {
        let b = square_benchmark(p, 3).map_err(|e| e.to_string())?;
        let e = b.eigen(1).map_err(|e| e.to_string())?;
        ensure(e.zero_count == b.gradient_rank(), || format!("p={p}: zero count {} vs gradient rank", e.zero_count))?;
        common::square_multiplicities(e.nonzero(), 9.5, 1e-3).map_err(|m| format!("p={p}: {m}"))?;
        notes.push(format!("p={p} {} dofs", e.dofs()));
    }
    // the reduced-size variant, reported for information only
    for p in [3, 4] {
        let b = square_benchmark(p, 1).map_err(|e| e.to_string())?;
        let e = b.eigen(1).map_err(|e| e.to_string())?;
        let verdict = match common::square_multiplicities(e.nonzero(), 9.5, 1e-3) {
            Ok(()) => "within 1e-3".to_string(),
            Err(m) => m,
        };
        println!("    info: once refined mesh, p={p}: {verdict}");
    }
    Ok(format!("768 elements, {}: all eigenvalues below 9.5 within 1e-3 with exact multiplicities", notes.join(", ")))
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let mut rng = common::rng(7);
    for case in 0..20 {
        let d = rng.gen_range(2..=3);
        let degrees: Vec<usize> = (0..d).map(|_| rng.gen_range(2..=4)).collect();
        let elements: Vec<usize> = (0..d).map(|_| rng.gen_range(4..=7)).collect();
        let kvs = degrees.iter().zip(&elements).map(|(&p, &n)| KnotVector::uniform(p, n)).collect();
        let c = build_complex(&TensorMesh::new(kvs).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for bc in [BoundaryCondition::None, BoundaryCondition::Full] {
            let r = verify_exactness(&c, &bc).map_err(|e| e.to_string())?;
            ensure(r.exact && r.compositions_vanish.iter().all(|&v| v), || format!("case {case} {degrees:?} {elements:?} {bc:?}: {r:?}"))?;
        }
        for j in 0..d - 1 {
            let dd = c.diff_matrix(j + 1).unwrap().matmul(&c.diff_matrix(j).unwrap());
            ensure(dd.is_zero(), || format!("case {case}: d{} d{j} != 0", j + 1))?;
        }
    }
    let t = start.elapsed().as_secs_f64();
    ensure(t < 60.0, || format!("took {t:.1}s"))?;
    Ok(format!("20 complexes exact with and without boundary conditions, {t:.2}s"))
}

fn criterion_4() -> Check {
    let mut rng = common::rng(11);
    for case in 0..10 {
        let d = if case % 2 == 0 { 2 } else { 3 };
        let p = [1, 3, 2, 4][case % 4];
        let elements: Vec<usize> = (0..d).map(|_| rng.gen_range(1..=4)).collect();
        let kvs = elements.iter().map(|&n| KnotVector::uniform(p, n)).collect();
        let c = build_complex(&TensorMesh::new(kvs).unwrap()).unwrap();
        let r = entity_correspondence(&c).map_err(|e| e.to_string())?;
        ensure(r.holds(), || format!("case {case} p={p} {elements:?}: {r:?}"))?;
        if p % 2 == 1 {
            ensure(r.operators[0].equal, || format!("case {case}: gradient differs from the incidence matrix"))?;
        }
    }
    Ok("10 fixtures, odd gradients equal the incidence matrix, even ones correspond".into())
}

fn sixths(v: &[i64]) -> Vec<Knot> {
    v.iter().map(|&a| knot(a, 6)).collect()
}

fn criterion_5() -> Check {
    let m = TMesh::from_layout(&common::layout("extension_mesh.json"), [2, 3]).map_err(|e| e.to_string())?;
    let at = |point: [f64; 2]| -> Vec<[Vec<Knot>; 2]> {
        m.anchors()
            .unwrap()
            .into_iter()
            .filter(|&a| {
                let q = m.anchor_point(a);
                (q[0] - point[0]).abs() < 1e-12 && (q[1] - point[1]).abs() < 1e-12
            })
            .map(|a| m.local_knots(a).map(|k| k.knots().to_vec()))
            .collect()
    };
    ensure(at([1.0 / 12.0, 0.0]).contains(&[sixths(&[0, 0, 1, 2]), sixths(&[0, 0, 0, 1, 2])]), || "corner anchor knots".into())?;
    ensure(at([0.75, 0.5]) == vec![[sixths(&[3, 4, 5, 6]), sixths(&[0, 2, 3, 4, 5])]], || "interior anchor knots".into())?;
    let ext = m.extensions();
    let find = |o: Orientation| ext.iter().find(|e| e.junction.orientation == o).cloned();
    let h = find(Orientation::Horizontal).ok_or("no horizontal extension")?;
    let v = find(Orientation::Vertical).ok_or("no vertical extension")?;
    ensure(ext.len() == 2, || format!("{} extensions", ext.len()))?;
    ensure(
        [m.x(h.face[0]), m.x(h.face[1]), m.x(h.edge[0]), m.x(h.edge[1])] == [knot(1, 2), knot(2, 3), knot(1, 3), knot(1, 2)],
        || format!("horizontal extension {h:?}"),
    )?;
    ensure(
        [m.y(v.face[0]), m.y(v.face[1]), m.y(v.edge[0]), m.y(v.edge[1])] == [knot(2, 3), knot(1, 1), knot(1, 2), knot(2, 3)],
        || format!("vertical extension {v:?}"),
    )?;
    for name in ["extension_mesh.json", "crossing_extensions.json", "square_coarse_mesh.json"] {
        let c = TMesh::from_layout(&common::layout(name), [3, 3]).unwrap().census().map_err(|e| e.to_string())?;
        let lhs = c.faces + c.vertices;
        let rhs = c.horizontal_edges + c.vertical_edges + 1;
        ensure(lhs == rhs, || format!("{name}: F+V = {lhs}, E+1 = {rhs}"))?;
    }
    let s = TMesh::from_layout(&common::layout("crossing_extensions.json"), [3, 3]).unwrap().suitability();
    ensure(!s.analysis_suitable && !s.strongly_suitable, || format!("crossing mesh verdicts {s:?}"))?;
    let s = m.suitability();
    ensure(s.analysis_suitable && s.strongly_suitable, || format!("extension mesh verdicts {s:?}"))?;
    Ok("local knot vectors, extensions, Euler identity on 3 fixtures, crossing verdicts".into())
}

fn check_tspline(m: &TMesh, label: &str) -> Result<(), String> {
    let c = build_tspline_complex(m).map_err(|e| format!("{label}: {e}"))?;
    let [y0, y1, y2] = c.dims();
    ensure(y0 + y2 == y1 + 1, || format!("{label}: dims {:?}", c.dims()))?;
    for bc in [BoundaryCondition::None, BoundaryCondition::Full] {
        let r = c.verify_exactness(&bc).map_err(|e| e.to_string())?;
        ensure(r.exact, || format!("{label} {bc:?}: {r:?}"))?;
    }
    Ok(())
}

fn criterion_6() -> Check {
    let sq = TMesh::from_layout(&common::layout("square_coarse_mesh.json"), [3, 3]).unwrap();
    check_tspline(&sq, "square mesh")?;
    let mut rng = common::rng(23);
    for case in 0..10 {
        let p = [3, 2, 4, 3, 2][case % 5];
        let t = common::random_suitable_tiling(&mut rng, p);
        let m = TMesh::from_layout(&t.layout(), [p, p]).unwrap();
        ensure(m.suitability().strongly_suitable, || format!("case {case} not suitable"))?;
        check_tspline(&m, &format!("case {case} p={p}"))?;
    }
    let xs = [knot(0, 1), knot(1, 4), knot(1, 2), knot(1, 1)];
    let ys = [knot(0, 1), knot(1, 3), knot(2, 3), knot(1, 1)];
    let layout = Tiling::tensor(&xs, &ys).layout();
    for p in 1..=4 {
        let c = build_tspline_complex(&TMesh::from_layout(&layout, [p, p]).unwrap()).unwrap();
        let kx = KnotVector::with_interior(p, &xs[1..3]).unwrap();
        let ky = KnotVector::with_interior(p, &ys[1..3]).unwrap();
        let b = build_complex(&TensorMesh::new(vec![kx, ky]).unwrap()).unwrap();
        let same = (0..3).all(|j| *c.space(j) == b.function_space(j))
            && c.grad().unwrap() == b.diff_matrix(0).unwrap().map(Rational64::from_integer)
            && c.rot().unwrap() == b.diff_matrix(1).unwrap().map(Rational64::from_integer);
        ensure(same, || format!("tensor input differs from the B-spline path for p={p}"))?;
    }
    Ok("square mesh and 10 generated meshes exact, tensor input identical for p=1..4".into())
}

fn criterion_7() -> Check {
    let mut rng = common::rng(1);
    let mut worst_fd: f64 = 0.0;
    let mut checked = 0;
    while checked < 400 {
        let p = rng.gen_range(1..=5);
        let mut k: Vec<Knot> = (0..p + 2).map(|_| knot(rng.gen_range(0..=16), 16)).collect();
        k.sort();
        if k[0] == k[p + 1] {
            k[p + 1] = k[0] + knot(1, 16);
        }
        let k = LocalKnotVector::new(k);
        let t = k.float_knots();
        let h = 1e-4;
        let x = rng.gen_range(t[0]..=t[t.len() - 1]);
        if t.iter().any(|&s| (s - x).abs() < 3.0 * h) {
            continue;
        }
        let exact: f64 = k.derivative_decomposition().iter().map(|(kv, c)| knot_to_f64(*c) * kv.eval(x)).sum();
        let fd = common::diff4(&|y: &[f64]| k.eval(y[0]), &[x], 0, h);
        worst_fd = worst_fd.max((exact - fd).abs() / fd.abs().max(1.0));
        checked += 1;
    }
    ensure(worst_fd <= 1e-6, || format!("derivative decomposition off by {worst_fd:e}"))?;

    let g = GeometryMap::quarter_annulus(1.0, 2.0).extruded(0.0, 1.0).unwrap();
    let scalar = |x: &[f64]| (x[0] * x[1]).sin() + x[2] * x[2] * x[0];
    let grad = |x: &[f64]| {
        let c = (x[0] * x[1]).cos();
        [x[1] * c + x[2] * x[2], x[0] * c, 2.0 * x[2] * x[0]]
    };
    let mut worst_pb: f64 = 0.0;
    for _ in 0..30 {
        let z: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..0.9)).collect();
        let jac = g.jacobian(&z).unwrap();
        let want = pullback(FormKind::Hcurl, &jac, &grad(&jac.point)).unwrap();
        let s = |y: &[f64]| scalar(&g.jacobian(y).unwrap().point);
        for k in 0..3 {
            let fd = common::diff4(&s, &z, k, 1e-3);
            worst_pb = worst_pb.max((fd - want[k]).abs() / want[k].abs().max(1.0));
        }
    }
    ensure(worst_pb <= 1e-8, || format!("pullback diagram off by {worst_pb:e}"))?;

    let mut worst_ins: f64 = 0.0;
    let a = GeometryMap::quarter_annulus(1.0, 2.0);
    let r = a.refine_dyadic().unwrap().refine_dyadic().unwrap();
    for _ in 0..100 {
        let x = [rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0)];
        let (u, v) = (a.eval(&x).unwrap(), r.eval(&x).unwrap());
        worst_ins = worst_ins.max((u[0] - v[0]).abs().max((u[1] - v[1]).abs()));
    }
    ensure(worst_ins <= 1e-12, || format!("knot insertion moved the map by {worst_ins:e}"))?;

    let g0 = a.refine_dyadic().unwrap();
    let g1 = g0.refine_dyadic().unwrap();
    let g2 = g1.refine_dyadic().unwrap();
    let d: Vec<f64> = [&g0, &g1, &g2].iter().map(|m| m.control_distance(200).unwrap()).collect();
    let ratios = [d[0] / d[1], d[1] / d[2]];
    ensure(ratios.iter().all(|r| (3.2..=4.8).contains(r)), || format!("control distance ratios {ratios:?}"))?;
    Ok(format!(
        "FD {worst_fd:.1e}, pullback {worst_pb:.1e}, insertion {worst_ins:.1e}, control ratios {:.2}, {:.2}",
        ratios[0], ratios[1]
    ))
}

fn criterion_8() -> Check {
    let start = Instant::now();
    let mut gaps = Vec::new();
    let mut dofs = Vec::new();
    for level in 1..=3 {
        let t = corner_refined_tiling(4, 4, level).map_err(|e| e.to_string())?;
        let b = thick_l_benchmark(4, &t, 1).map_err(|e| e.to_string())?;
        let e = b.eigen(1).map_err(|e| e.to_string())?;
        let first = *e.nonzero().first().ok_or("no nonzero eigenvalue")?;
        gaps.push((first - THICK_L_FIRST).abs() / THICK_L_FIRST);
        dofs.push(e.dofs());
    }
    let t = start.elapsed().as_secs_f64();
    ensure(dofs.iter().all(|&n| n <= 8000), || format!("dofs {dofs:?} exceed the budget"))?;
    ensure(gaps[1] < 1e-3 && gaps[2] < 1e-3, || format!("relative gaps {gaps:?}"))?;
    ensure(gaps[0] > gaps[1] && gaps[1] > gaps[2], || format!("gaps not decreasing: {gaps:?}"))?;
    ensure(t < 600.0, || format!("took {t:.0}s"))?;
    Ok(format!("dofs {dofs:?}, relative gaps {:.2e} {:.2e} {:.2e}, {t:.1}s", gaps[0], gaps[1], gaps[2]))
}

fn criterion_9() -> Check {
    let mut bspline = Vec::new();
    for n in [2, 4, 8] {
        let b = cylinder_sector_benchmark(3, &Tiling::uniform(n, n), 4).map_err(|e| e.to_string())?;
        let total = b.system().map_err(|e| e.to_string())?.mass.nrows();
        let r = solve_curl_free_source(&b, &cylinder_exact, 6).map_err(|e| e.to_string())?;
        bspline.push((r.dofs, total, r.error.total()));
    }
    let errors: Vec<f64> = bspline.iter().map(|r| r.2).collect();
    ensure(errors[0] > errors[1] && errors[1] > errors[2], || format!("B-spline errors {errors:?}"))?;
    let (free_b, total_b, err_b) = bspline[2];
    let t = corner_refined_tiling(4, 3, 2).map_err(|e| e.to_string())?;
    let b = cylinder_sector_benchmark(3, &t, 4).map_err(|e| e.to_string())?;
    let total_t = b.system().map_err(|e| e.to_string())?.mass.nrows();
    let r = solve_curl_free_source(&b, &cylinder_exact, 6).map_err(|e| e.to_string())?;
    let err_t = r.error.total();
    ensure(err_t <= err_b, || format!("T-spline error {err_t:e} above {err_b:e}"))?;
    ensure(r.dofs < free_b && total_t < total_b, || format!("T-spline dofs {}/{total_t} vs {free_b}/{total_b}", r.dofs))?;
    Ok(format!(
        "B-spline errors {:.3e} {:.3e} {:.3e}; T-spline {err_t:.3e} with {} free / {total_t} total dofs vs {free_b} / {total_b}",
        errors[0], errors[1], errors[2], r.dofs
    ))
}

fn criterion_10() -> Check {
    let g = StraightGuide {
        width: 2.0,
        height: 1.0,
        length: 1.0,
        degree: 3,
        elements: [4, 2, 4],
        problem: WaveguideProblem { omega: 2.2, mu0: 1.0, eps0: 1.0, z1: 0.0, z2: 1.0 },
    };
    let s = run_straight_guide(&g).map_err(|e| e.to_string())?.scattering;
    let (r, t) = (s.r.norm(), s.t.norm());
    ensure(r < 0.01 && (t - 1.0).abs() < 0.01, || format!("|R| = {r}, |T| = {t}"))?;
    let (_, mode) = rectangle_port_mode(PI, PI, 3, [8, 8]).map_err(|e| e.to_string())?;
    let k = mode.k10_squared;
    ensure((k - 1.0).abs() <= 1e-6, || format!("k10² = {k}"))?;
    Ok(format!("|R| = {r:.2e}, |T| = {t:.6}, k10² on (0,π)² = {k:.9}"))
}

fn main() -> ExitCode {
    let criteria: [fn() -> Check; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    let mut failed = 0;
    for (i, f) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS ({secs:.1}s) {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL ({secs:.1}s) {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
