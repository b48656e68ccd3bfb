//! Builders for the benchmark problems: meshes, geometries, exact data and
//! end-to-end drivers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_load, assemble_port_boundary, eval_field, field_error, FieldError, SystemMatrices};
use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::multipatch::{build_glue, Glue, Interface, Patch, PatchComplex, PatchSet};
use crate::parametric_complex::{build_complex, TensorMesh};
use crate::solvers::{solve_generalized_eig, solve_port_mode, solve_time_harmonic_source, solve_waveguide, EigenResult, PortMode, Scattering, WaveguideProblem};
use crate::tmesh::{restore_suitability, Rect, TMesh, Tiling};
use crate::tspline_complex::{build_tspline_complex, extrude_complex};
use crate::univariate::{knot, Knot, KnotVector};

/// Smallest nonzero eigenvalues on `(0,π)²` for `p = 3` and the coarse
/// T-mesh, followed by the dofs and zero counts of the first two meshes.
pub const SQUARE_COARSE: [f64; 21] = [
    1.00001, 1.00005, 2.00016, 4.00396, 4.03882, 5.00395, 5.10164, 8.05454, 9.06255, 9.12399, 10.0614, 10.2361, 12.8159,
    13.2002, 17.9413, 19.8934, 19.9586, 20.8937, 21.4707, 24.0689, 26.1844,
];
pub const SQUARE_DOFS: [usize; 2] = [74, 184];
pub const SQUARE_ZEROS: [usize; 2] = [21, 65];
/// The `(2,0)` mode on the once refined mesh.
pub const SQUARE_REFINED_MODE_20: f64 = 4.00004;

/// First Maxwell eigenvalue of the thick L-shaped domain.
pub const THICK_L_FIRST: f64 = 9.63972384472;

/// Coarse T-mesh of the square: 2 x 4 squares on the left half and 2 x 2
/// rectangles on the right half, each face split into four `refinements`
/// times.
pub fn square_tiling(refinements: usize) -> Tiling {
    let mut t = Tiling::uniform(4, 4);
    t.faces.retain(|f| f.x0 < knot(1, 2));
    for i in 2..4 {
        for j in 0..2 {
            t.faces.push(Rect::new(knot(i, 4), knot(i + 1, 4), knot(j, 2), knot(j + 1, 2)));
        }
    }
    for _ in 0..refinements {
        t.subdivide(|_| true);
    }
    t
}

/// Planar T-spline patch on a tiling.
pub fn planar_patch(tiling: &Tiling, degree: usize, geometry: GeometryMap) -> Result<Patch> {
    let mesh = TMesh::from_layout(&tiling.layout(), [degree, degree])?;
    let c = build_tspline_complex(&mesh)?;
    Ok(Patch { geometry, complex: PatchComplex::from_tspline(&c)? })
}

/// T-spline patch on a tiling times `nz` uniform elements in the third
/// direction.
pub fn extruded_patch(tiling: &Tiling, degree: usize, nz: usize, geometry: GeometryMap) -> Result<Patch> {
    let mesh = TMesh::from_layout(&tiling.layout(), [degree, degree])?;
    let c = build_tspline_complex(&mesh)?;
    let e = extrude_complex(&c, &KnotVector::uniform(degree, nz))?;
    Ok(Patch { geometry, complex: PatchComplex::from_extruded(&e)? })
}

/// A problem on glued patches with Dirichlet faces `(patch, face)`.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub set: PatchSet,
    pub glue: Glue,
    pub dirichlet: Vec<(usize, usize)>,
}

impl Benchmark {
    pub fn new(set: PatchSet, dirichlet: Vec<(usize, usize)>) -> Result<Self> {
        let glue = build_glue(&set)?;
        Ok(Benchmark { set, glue, dirichlet })
    }

    /// Mass and stiffness of the glued 1-forms.
    pub fn system(&self) -> Result<SystemMatrices> {
        SystemMatrices::new(&self.set, &self.glue, 1, &self.dirichlet)
    }

    /// Eigenvalues of the curl-curl (or rot-rot) problem on the free dofs.
    pub fn eigen(&self, pairs: usize) -> Result<EigenResult> {
        let r = self.system()?.reduced();
        solve_generalized_eig(&r.stiffness, &r.mass, pairs)
    }

    /// Gradient image dimension on the free dofs: the expected number of
    /// zero eigenvalues.
    pub fn gradient_rank(&self) -> usize {
        let free0 = self.glue.free(&self.set, 0, &self.dirichlet);
        let free1 = self.glue.free(&self.set, 1, &self.dirichlet);
        crate::exact::exact_rank(&self.glue.global_operator(&self.set, 0).select(&free1, &free0))
    }
}

/// `(0,π)²` with tangential Dirichlet conditions on the whole boundary.
pub fn square_benchmark(degree: usize, refinements: usize) -> Result<Benchmark> {
    square_benchmark_on(degree, &square_tiling(refinements))
}

/// `(0,π)²` on any tiling of the parametric square.
pub fn square_benchmark_on(degree: usize, tiling: &Tiling) -> Result<Benchmark> {
    let patch = planar_patch(tiling, degree, GeometryMap::boxed(&[(0.0, PI), (0.0, PI)]))?;
    let set = PatchSet::single(patch);
    let faces = set.boundary_faces();
    Benchmark::new(set, faces)
}

/// Corner refinement of an `n x n` tiling towards the parametric origin:
/// step `l` splits the faces inside `[0, s_l]²`, with `s_1 = 3/n` and
/// `s_l = 2^{2-l}/n` afterwards, and restores analysis-suitability.
pub fn corner_refined_tiling(n: usize, degree: usize, levels: usize) -> Result<Tiling> {
    let mut t = Tiling::uniform(n, n);
    for l in 1..=levels {
        let s: Knot = if l == 1 { knot(3, n as i64) } else { knot(1, n as i64) * knot(2, 1 << (l - 1)) };
        t.subdivide(|f| f.x1 <= s && f.y1 <= s);
        t = restore_suitability(&t, [degree, degree], 50)?;
    }
    Ok(t)
}

/// `(−1,1)² ∖ [−1,0]²` times `(0,1)` as three patches, each the unit cube
/// rotated so the reentrant edge is at the parametric origin.
pub fn thick_l_benchmark(degree: usize, tiling: &Tiling, nz: usize) -> Result<Benchmark> {
    let base = GeometryMap::boxed(&[(0.0, 1.0), (0.0, 1.0)]);
    let maps = [base.clone(), base.rotated(PI / 2.0), base.rotated(-PI / 2.0)];
    let patches = maps
        .into_iter()
        .map(|g| extruded_patch(tiling, degree, nz, g.extruded(0.0, 1.0)?))
        .collect::<Result<Vec<_>>>()?;
    let set = PatchSet::new(patches, vec![Interface::new((0, 0), (1, 2)), Interface::new((0, 2), (2, 0))])?;
    let faces = set.boundary_faces();
    Benchmark::new(set, faces)
}

/// Planar L-shaped section with the same patch layout.
pub fn l_shape_benchmark(degree: usize, tiling: &Tiling) -> Result<Benchmark> {
    let base = GeometryMap::boxed(&[(0.0, 1.0), (0.0, 1.0)]);
    let maps = [base.clone(), base.rotated(PI / 2.0), base.rotated(-PI / 2.0)];
    let patches = maps.into_iter().map(|g| planar_patch(tiling, degree, g)).collect::<Result<Vec<_>>>()?;
    let set = PatchSet::new(patches, vec![Interface::new((0, 0), (1, 2)), Interface::new((0, 2), (2, 0))])?;
    let faces = set.boundary_faces();
    Benchmark::new(set, faces)
}

/// Three quarters of the unit cylinder, `0 < θ < 3π/2`, `0 < z < 1`, from
/// three rotated quarter disks; Dirichlet faces are the planes `θ = 0` and
/// `θ = 3π/2`.
pub fn cylinder_sector_benchmark(degree: usize, tiling: &Tiling, nz: usize) -> Result<Benchmark> {
    let patches = (0..3)
        .map(|k| extruded_patch(tiling, degree, nz, GeometryMap::quarter_disk(1.0).rotated(k as f64 * PI / 2.0).extruded(0.0, 1.0)?))
        .collect::<Result<Vec<_>>>()?;
    let set = PatchSet::new(patches, vec![Interface::new((0, 0), (1, 2)), Interface::new((1, 0), (2, 2))])?;
    Benchmark::new(set, vec![(0, 2), (2, 0)])
}

/// `u = grad(r^{2/3} sin(2θ/3) sin(πz))`, which is curl-free and solves
/// `curl curl u + u = u` with the sector's boundary conditions.
pub fn cylinder_exact(x: &[f64; 3]) -> [f64; 3] {
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        return [0.0; 3];
    }
    let mut th = x[1].atan2(x[0]);
    if th < 0.0 {
        th += 2.0 * PI;
    }
    let (sz, cz) = (PI * x[2]).sin_cos();
    let (s, c) = (2.0 * th / 3.0).sin_cos();
    let dr = 2.0 / 3.0 * r.powf(-1.0 / 3.0) * s * sz;
    let dt = 2.0 / 3.0 * r.powf(-1.0 / 3.0) * c * sz;
    let (st, ct) = th.sin_cos();
    [dr * ct - dt * st, dr * st + dt * ct, PI * r.powf(2.0 / 3.0) * s * cz]
}

/// Solution and error of the cylinder-sector source problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SourceResult {
    pub dofs: usize,
    pub error: FieldError,
    pub relative: f64,
}

/// Solves `curl curl u + u = f` and measures the H(curl) error against
/// `exact`, whose curl vanishes.
pub fn solve_curl_free_source(b: &Benchmark, exact: &(dyn Fn(&[f64; 3]) -> [f64; 3] + Sync), extra: usize) -> Result<SourceResult> {
    let mut sys = b.system()?;
    sys.load = Some(assemble_load(&b.set, &b.glue, 1, exact, extra)?);
    let u = solve_time_harmonic_source(&sys)?;
    let zero = |_: &[f64; 3]| [0.0; 3];
    let error = field_error(&b.set, &b.glue, 1, &u, exact, &zero, extra)?;
    let zeros = vec![0.0; u.len()];
    let norm = field_error(&b.set, &b.glue, 1, &zeros, exact, &zero, extra)?;
    Ok(SourceResult { dofs: sys.dofs(), relative: error.total() / norm.total(), error })
}

/// Data of a straight rectangular guide `(0,a) x (0,b) x (0,length)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StraightGuide {
    pub width: f64,
    pub height: f64,
    pub length: f64,
    pub degree: usize,
    /// Elements along x, y and z.
    pub elements: [usize; 3],
    pub problem: WaveguideProblem,
}

/// Port mode, scattering data and dofs of a guide run.
#[derive(Clone, Debug)]
pub struct WaveguideRun {
    pub mode: PortMode,
    pub scattering: Scattering,
    pub dofs: usize,
}

/// Lowest port mode of the cross-section `(0,a) x (0,b)`.
pub fn rectangle_port_mode(width: f64, height: f64, degree: usize, elements: [usize; 2]) -> Result<(Benchmark, PortMode)> {
    let kvs = vec![KnotVector::uniform(degree, elements[0]), KnotVector::uniform(degree, elements[1])];
    let c = build_complex(&TensorMesh::new(kvs)?)?;
    let set = PatchSet::single(Patch {
        geometry: GeometryMap::boxed(&[(0.0, width), (0.0, height)]),
        complex: PatchComplex::from_tensor(&c)?,
    });
    let faces = set.boundary_faces();
    let b = Benchmark::new(set, faces)?;
    let mode = solve_port_mode(&b.system()?)?;
    Ok((b, mode))
}

/// Excites the guide with its own lowest mode at `z = 0` and solves for the
/// field with transparent port conditions at both ends.
pub fn run_straight_guide(g: &StraightGuide) -> Result<WaveguideRun> {
    if g.problem.z1 != 0.0 || g.problem.z2 != g.length {
        return Err(Error::InvalidProblem("ports must sit at z = 0 and z = length".into()));
    }
    let kvs: Vec<KnotVector> = g.elements.iter().map(|&n| KnotVector::uniform(g.degree, n)).collect();
    let c = build_complex(&TensorMesh::new(kvs)?)?;
    let geometry = GeometryMap::boxed(&[(0.0, g.width), (0.0, g.height), (0.0, g.length)]);
    let set = PatchSet::single(Patch { geometry: geometry.clone(), complex: PatchComplex::from_tensor(&c)? });
    let walls: Vec<(usize, usize)> = (0..4).map(|f| (0, f)).collect();
    let b = Benchmark::new(set, walls)?;
    let (port, mode) = rectangle_port_mode(g.width, g.height, g.degree, [g.elements[0], g.elements[1]])?;
    let port_space = &port.set.patches[0].complex.spaces[1];
    let port_map = geometry.face_map(2, 0)?;
    let coeffs = mode.coeffs.clone();
    let incident = move |_: usize, x: &[f64; 3], _: &[f64; 3]| -> [f64; 3] {
        match eval_field(port_space, &coeffs, &port_map, &x[..2]) {
            Ok((v, _)) => [v[0], v[1], 0.0],
            Err(_) => [f64::NAN; 3],
        }
    };
    let terms = assemble_port_boundary(&b.set, &b.glue, &[(0, 4), (0, 5)], Some(&incident))?;
    let sys = b.system()?;
    let (_, scattering) = solve_waveguide(&sys, &terms, &g.problem, mode.k10())?;
    Ok(WaveguideRun { mode, scattering, dofs: sys.dofs() })
}

/// Tensor-product closure of a tiling: every line extended across the
/// whole patch.
pub fn tensor_closure(t: &Tiling) -> Tiling {
    let mut xs: Vec<Knot> = t.faces.iter().flat_map(|f| [f.x0, f.x1]).collect();
    let mut ys: Vec<Knot> = t.faces.iter().flat_map(|f| [f.y0, f.y1]).collect();
    xs.sort();
    xs.dedup();
    ys.sort();
    ys.dedup();
    Tiling::tensor(&xs, &ys)
}
