//! Galerkin assembly on the Bézier elements of mapped multi-patch domains.
//!
//! Every basis function is evaluated from its local knot vectors, pushed
//! forward with the transform of its form degree, and integrated with
//! tensor Gauss rules on the elements where all functions are polynomials.
//! Element contributions are computed in parallel and summed in element
//! order, so results do not depend on the thread count.

use std::collections::HashMap;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::multipatch::{face_of, Element, Glue, PatchSet};
use crate::parametric_complex::multi_indices;
use crate::space::{FormKind, FunctionSpace, Operator};
use crate::sparse::CsrMatrix;
use crate::tspline_complex::{extrude_complex, ExtrudedComplex, TSplineComplex};
use crate::univariate::{eval_float_knots, KnotVector, Scaling};

/// Elements per parallel batch; bounds the memory held by local matrices.
const BATCH: usize = 32;

/// The four spaces of a planar T-spline complex times splines of the same
/// degree in the third direction.
pub fn tensor3d(planar: &TSplineComplex, vertical: &KnotVector) -> Result<ExtrudedComplex> {
    extrude_complex(planar, vertical)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "empty quadrature rule");
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        nodes.push(0.5 * (1.0 - z));
        weights.push(1.0 / ((1.0 - z * z) * dp * dp));
    }
    (nodes, weights)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// Tensor Gauss rule on one element: parametric points and weights.
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// 1D nodes per direction, for factorised evaluation.
    nodes: Vec<Vec<f64>>,
}

impl QuadratureRule {
    /// `n` points per direction; `None` for elements of zero measure.
    pub fn on(element: &Element, n: usize) -> Option<Self> {
        if element.iter().any(|&(a, b)| b - a <= 0.0) {
            return None;
        }
        Some(Self::tensor(element, n))
    }

    /// Rule on the face `x_dir = at` of an element, with surface weights in
    /// parameter space.
    pub fn on_face(element: &Element, dir: usize, at: f64, n: usize) -> Self {
        let mut e = element.clone();
        e[dir] = (at, at);
        Self::tensor(&e, n)
    }

    /// Degenerate directions get the single node `a` with weight one.
    fn tensor(element: &Element, n: usize) -> Self {
        let (g, w) = gauss_legendre(n);
        let d = element.len();
        let mut nodes = Vec::with_capacity(d);
        let mut wts = Vec::with_capacity(d);
        for &(a, b) in element {
            if a == b {
                nodes.push(vec![a]);
                wts.push(vec![1.0]);
            } else {
                nodes.push(g.iter().map(|&t| a + (b - a) * t).collect::<Vec<_>>());
                wts.push(w.iter().map(|&v| v * (b - a)).collect::<Vec<_>>());
            }
        }
        let sizes: Vec<usize> = nodes.iter().map(|v| v.len()).collect();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for ix in multi_indices(&sizes) {
            let mut x = [0.0; 3];
            let mut wt = 1.0;
            for k in 0..d {
                x[k] = nodes[k][ix[k]];
                wt *= wts[k][ix[k]];
            }
            points.push(x);
            weights.push(wt);
        }
        QuadratureRule { points, weights, nodes }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Float form of a function space for fast evaluation.
struct Compiled {
    dim: usize,
    kind: FormKind,
    knots: Vec<Vec<Vec<f64>>>,
    factor: Vec<f64>,
    component: Vec<usize>,
    support: Vec<Vec<(f64, f64)>>,
    degree: usize,
}

impl Compiled {
    fn new(space: &FunctionSpace) -> Self {
        let mut c = Compiled {
            dim: space.dim,
            kind: space.kind,
            knots: Vec::with_capacity(space.len()),
            factor: Vec::with_capacity(space.len()),
            component: Vec::with_capacity(space.len()),
            support: Vec::with_capacity(space.len()),
            degree: 0,
        };
        for f in &space.functions {
            c.knots.push(f.knots.iter().map(|k| k.float_knots()).collect());
            c.factor.push(
                f.knots
                    .iter()
                    .zip(&f.scaling)
                    .map(|(k, &s)| if s == Scaling::D { k.curry_factor() } else { 1.0 })
                    .product(),
            );
            c.component.push(f.component);
            c.support.push(f.support_f64());
            c.degree = c.degree.max(f.knots.iter().map(|k| k.degree()).max().unwrap_or(0));
        }
        c
    }

    fn len(&self) -> usize {
        self.factor.len()
    }

    /// Functions whose support meets the interior of the box (or, for a
    /// degenerate direction, contains the coordinate).
    fn active(&self, element: &[(f64, f64)]) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                self.support[i].iter().zip(element).all(|(&(lo, hi), &(a, b))| {
                    if a == b {
                        lo <= a && a <= hi && lo < hi
                    } else {
                        lo < b && hi > a
                    }
                })
            })
            .collect()
    }
}

/// Physical values (and derivatives) of the active functions at the points
/// of a rule. Entry `[a * npts + q]`.
struct Evaluated {
    active: Vec<usize>,
    weights: Vec<f64>,
    physical: Vec<[f64; 3]>,
    values: Vec<[f64; 3]>,
    derivs: Vec<[f64; 3]>,
}

fn evaluate(c: &Compiled, geometry: &GeometryMap, rule: &QuadratureRule, active: Vec<usize>, derivs: bool) -> Result<Evaluated> {
    let d = c.dim;
    let n1: Vec<usize> = rule.nodes.iter().map(|v| v.len()).collect();
    let npts = rule.len();
    let dkind = if derivs && c.kind != FormKind::L2 { Some(FormKind::of(d, form_degree(d, c.kind) + 1)) } else { None };
    let op = dkind.map(|_| Operator::standard(d, form_degree(d, c.kind)));
    let mut weights = Vec::with_capacity(npts);
    let mut physical = Vec::with_capacity(npts);
    let mut a_val = Vec::with_capacity(npts);
    let mut a_der = Vec::with_capacity(npts);
    for (x, &w) in rule.points.iter().zip(&rule.weights) {
        let jac = geometry.jacobian(&x[..d])?;
        a_val.push(jac.push_forward_matrix(c.kind)?);
        if let Some(k) = dkind {
            a_der.push(jac.push_forward_matrix(k)?);
        }
        weights.push(w * jac.det.abs());
        physical.push(jac.point);
    }
    let multi = multi_indices(&n1);
    let mut values = vec![[0.0; 3]; active.len() * npts];
    let mut dvals = if dkind.is_some() { vec![[0.0; 3]; active.len() * npts] } else { vec![] };
    let mut table: Vec<Vec<(f64, f64)>> = vec![vec![]; d];
    for (ai, &i) in active.iter().enumerate() {
        for k in 0..d {
            table[k] = rule.nodes[k].iter().map(|&x| eval_float_knots(&c.knots[i][k], x)).collect();
        }
        let comp = c.component[i];
        let terms = op.map(|o| o.terms(d, comp)).unwrap_or_default();
        for (q, ix) in multi.iter().enumerate() {
            let mut s = c.factor[i];
            for k in 0..d {
                s *= table[k][ix[k]].0;
            }
            let av = &a_val[q];
            values[ai * npts + q] = [s * av[0][comp], s * av[1][comp], s * av[2][comp]];
            if dkind.is_some() {
                let mut grad = [0.0; 3];
                for (m, g) in grad.iter_mut().enumerate().take(d) {
                    let mut v = c.factor[i];
                    for k in 0..d {
                        v *= if k == m { table[k][ix[k]].1 } else { table[k][ix[k]].0 };
                    }
                    *g = v;
                }
                let mut dp = [0.0; 3];
                for &(tc, dir, sign) in &terms {
                    dp[tc] += sign as f64 * grad[dir];
                }
                let ad = &a_der[q];
                let mut out = [0.0; 3];
                for (r, o) in out.iter_mut().enumerate() {
                    *o = ad[r][0] * dp[0] + ad[r][1] * dp[1] + ad[r][2] * dp[2];
                }
                dvals[ai * npts + q] = out;
            }
        }
    }
    Ok(Evaluated { active, weights, physical, values, derivs: dvals })
}

fn form_degree(d: usize, kind: FormKind) -> usize {
    match kind {
        FormKind::H1 => 0,
        FormKind::Hcurl => 1,
        FormKind::Hdiv => 2,
        FormKind::L2 => d,
    }
}

/// Gram matrix `Σ_q w_q f_a(q)·f_b(q)` of the rows of `f`.
fn gram(f: &[[f64; 3]], weights: &[f64], n: usize, comps: usize) -> Mat<f64> {
    let npts = weights.len();
    let a = Mat::from_fn(n, npts * comps, |i, col| {
        let (q, c) = (col / comps, col % comps);
        weights[q].sqrt() * f[i * npts + q][c]
    });
    &a * a.transpose()
}

/// Bilinear forms assembled by [`assemble`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    Mass,
    CurlCurl,
    RotRot,
    GradGrad,
}

impl MatrixKind {
    fn check(self, d: usize, j: usize) -> Result<()> {
        let ok = match self {
            MatrixKind::Mass => true,
            MatrixKind::GradGrad => j == 0,
            MatrixKind::CurlCurl => d == 3 && j == 1,
            MatrixKind::RotRot => d == 2 && j == 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("{self:?} on {j}-forms in dimension {d}")))
        }
    }
}

/// Row-wise accumulator; values of one entry are summed in insertion order.
struct Accumulator {
    ncols: usize,
    rows: Vec<HashMap<usize, f64>>,
}

impl Accumulator {
    fn new(nrows: usize, ncols: usize) -> Self {
        Accumulator { ncols, rows: vec![HashMap::new(); nrows] }
    }

    fn add_local(&mut self, local: &Mat<f64>, map: &[(usize, i8)], active: &[usize]) {
        for (a, &i) in active.iter().enumerate() {
            let (gi, si) = map[i];
            let row = &mut self.rows[gi];
            for (b, &k) in active.iter().enumerate() {
                let (gk, sk) = map[k];
                *row.entry(gk).or_insert(0.0) += (si * sk) as f64 * local[(a, b)];
            }
        }
    }

    fn finish(self) -> CsrMatrix<f64> {
        let nrows = self.rows.len();
        let mut trip = Vec::new();
        for (r, row) in self.rows.into_iter().enumerate() {
            let mut entries: Vec<_> = row.into_iter().collect();
            entries.sort_unstable_by_key(|e| e.0);
            trip.extend(entries.into_iter().map(|(c, v)| (r, c, v)));
        }
        CsrMatrix::from_triplets(nrows, self.ncols, &trip)
    }
}

fn points_per_direction(c: &Compiled, extra: usize) -> usize {
    c.degree + 1 + extra
}

/// Global matrices of the requested kinds on the glued `j`-forms, with
/// `p + 1` Gauss points per direction and element.
pub fn assemble(set: &PatchSet, glue: &Glue, j: usize, kinds: &[MatrixKind]) -> Result<Vec<CsrMatrix<f64>>> {
    let d = set.dim();
    for k in kinds {
        k.check(d, j)?;
    }
    let n = glue.dims[j];
    let mut acc: Vec<Accumulator> = kinds.iter().map(|_| Accumulator::new(n, n)).collect();
    let need_der = kinds.iter().any(|&k| k != MatrixKind::Mass);
    for (pk, patch) in set.patches.iter().enumerate() {
        let c = Compiled::new(&patch.complex.spaces[j]);
        let comps = c.kind.components(d);
        let dcomps = if need_der { FormKind::of(d, j + 1).components(d) } else { 0 };
        let npd = points_per_direction(&c, 0);
        for batch in patch.complex.elements.chunks(BATCH) {
            let locals: Vec<Option<(Vec<usize>, Vec<Mat<f64>>)>> = batch
                .par_iter()
                .map(|e| {
                    let Some(rule) = QuadratureRule::on(e, npd) else { return Ok(None) };
                    let active = c.active(e);
                    if active.is_empty() {
                        return Ok(None);
                    }
                    let ev = evaluate(&c, &patch.geometry, &rule, active, need_der)?;
                    let mats = kinds
                        .iter()
                        .map(|&k| match k {
                            MatrixKind::Mass => gram(&ev.values, &ev.weights, ev.active.len(), comps),
                            _ => gram(&ev.derivs, &ev.weights, ev.active.len(), dcomps),
                        })
                        .collect();
                    Ok(Some((ev.active, mats)))
                })
                .collect::<Result<_>>()?;
            for (active, mats) in locals.into_iter().flatten() {
                for (a, m) in acc.iter_mut().zip(&mats) {
                    a.add_local(m, &glue.map[j][pk], &active);
                }
            }
        }
    }
    Ok(acc.into_iter().map(Accumulator::finish).collect())
}

pub fn assemble_matrix(set: &PatchSet, glue: &Glue, j: usize, kind: MatrixKind) -> Result<CsrMatrix<f64>> {
    Ok(assemble(set, glue, j, &[kind])?.remove(0))
}

/// Physical vector field evaluated at physical points.
pub type Field<'a> = dyn Fn(&[f64; 3]) -> [f64; 3] + Sync + 'a;

/// `∫ f · v` for every glued `j`-form `v`, with `extra` additional Gauss
/// points per direction for non-polynomial data.
pub fn assemble_load(set: &PatchSet, glue: &Glue, j: usize, f: &Field, extra: usize) -> Result<Vec<f64>> {
    let d = set.dim();
    let mut load = vec![0.0; glue.dims[j]];
    for (pk, patch) in set.patches.iter().enumerate() {
        let c = Compiled::new(&patch.complex.spaces[j]);
        let comps = c.kind.components(d);
        let npd = points_per_direction(&c, extra);
        for batch in patch.complex.elements.chunks(BATCH) {
            let locals: Vec<Option<(Vec<usize>, Vec<f64>)>> = batch
                .par_iter()
                .map(|e| {
                    let Some(rule) = QuadratureRule::on(e, npd) else { return Ok(None) };
                    let ev = evaluate(&c, &patch.geometry, &rule, c.active(e), false)?;
                    let npts = ev.weights.len();
                    let data: Vec<[f64; 3]> = ev.physical.iter().map(|x| f(x)).collect();
                    let v = (0..ev.active.len())
                        .map(|a| {
                            (0..npts)
                                .map(|q| {
                                    let val = &ev.values[a * npts + q];
                                    ev.weights[q] * (0..comps).map(|k| val[k] * data[q][k]).sum::<f64>()
                                })
                                .sum()
                        })
                        .collect();
                    Ok(Some((ev.active, v)))
                })
                .collect::<Result<_>>()?;
            for (active, v) in locals.into_iter().flatten() {
                for (&i, x) in active.iter().zip(v) {
                    let (g, s) = glue.map[j][pk][i];
                    load[g] += s as f64 * x;
                }
            }
        }
    }
    Ok(load)
}

/// Errors of a discrete field against an exact one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    /// `‖u - u_h‖` in L².
    pub value: f64,
    /// L² norm of the error in the exterior derivative.
    pub derivative: f64,
}

impl FieldError {
    /// Graph norm, e.g. the H(curl) error for 1-forms.
    pub fn total(&self) -> f64 {
        self.value.hypot(self.derivative)
    }
}

/// Error of the glued `j`-form with global coefficients `coeffs` against
/// `exact` and its derivative `exact_derivative`.
pub fn field_error(
    set: &PatchSet,
    glue: &Glue,
    j: usize,
    coeffs: &[f64],
    exact: &Field,
    exact_derivative: &Field,
    extra: usize,
) -> Result<FieldError> {
    let d = set.dim();
    let mut ev2 = 0.0;
    let mut ed2 = 0.0;
    for (pk, patch) in set.patches.iter().enumerate() {
        let c = Compiled::new(&patch.complex.spaces[j]);
        let local = glue.gather(j, pk, coeffs);
        let npd = points_per_direction(&c, extra);
        let der = c.kind != FormKind::L2;
        let parts: Vec<(f64, f64)> = patch
            .complex
            .elements
            .par_iter()
            .map(|e| {
                let Some(rule) = QuadratureRule::on(e, npd) else { return Ok((0.0, 0.0)) };
                let ev = evaluate(&c, &patch.geometry, &rule, c.active(e), der)?;
                let npts = ev.weights.len();
                let (mut a, mut b) = (0.0, 0.0);
                for q in 0..npts {
                    let mut u = [0.0; 3];
                    let mut du = [0.0; 3];
                    for (ai, &i) in ev.active.iter().enumerate() {
                        for k in 0..3 {
                            u[k] += local[i] * ev.values[ai * npts + q][k];
                            if der {
                                du[k] += local[i] * ev.derivs[ai * npts + q][k];
                            }
                        }
                    }
                    let x = &ev.physical[q];
                    let (ue, due) = (exact(x), exact_derivative(x));
                    let kc = c.kind.components(d);
                    a += ev.weights[q] * (0..kc).map(|k| (u[k] - ue[k]).powi(2)).sum::<f64>();
                    if der {
                        let dc = FormKind::of(d, form_degree(d, c.kind) + 1).components(d);
                        b += ev.weights[q] * (0..dc).map(|k| (du[k] - due[k]).powi(2)).sum::<f64>();
                    }
                }
                Ok((a, b))
            })
            .collect::<Result<_>>()?;
        for (a, b) in parts {
            ev2 += a;
            ed2 += b;
        }
    }
    Ok(FieldError { value: ev2.sqrt(), derivative: ed2.sqrt() })
}

/// Value and exterior derivative of a field with coefficients `coeffs` in
/// `space`, pushed forward through `geometry`, at the parametric point `x`.
pub fn eval_field(space: &FunctionSpace, coeffs: &[f64], geometry: &GeometryMap, x: &[f64]) -> Result<([f64; 3], [f64; 3])> {
    let c = Compiled::new(space);
    let pt: Element = x.iter().map(|&v| (v, v)).collect();
    let rule = QuadratureRule {
        points: vec![{
            let mut p = [0.0; 3];
            p[..x.len()].copy_from_slice(x);
            p
        }],
        weights: vec![1.0],
        nodes: x.iter().map(|&v| vec![v]).collect(),
    };
    let ev = evaluate(&c, geometry, &rule, c.active(&pt), c.kind != FormKind::L2)?;
    let mut u = [0.0; 3];
    let mut du = [0.0; 3];
    for (a, &i) in ev.active.iter().enumerate() {
        for k in 0..3 {
            u[k] += coeffs[i] * ev.values[a][k];
            if !ev.derivs.is_empty() {
                du[k] += coeffs[i] * ev.derivs[a][k];
            }
        }
    }
    Ok((u, du))
}

/// Incident tangential field on a port: `(patch, parametric point, physical
/// point) -> field`.
pub type PortField<'a> = dyn Fn(usize, &[f64; 3], &[f64; 3]) -> [f64; 3] + Sync + 'a;

/// Surface terms of the port boundary condition.
#[derive(Clone, Debug)]
pub struct PortTerms {
    /// `∫ (n×E)·(n×G)` over all port faces.
    pub matrix: CsrMatrix<f64>,
    /// `∫ (n×e)·(n×G)` for the incident field `e`, per port face.
    pub loads: Vec<Vec<f64>>,
    /// `∫ (n×e)·(n×e)` per port face.
    pub norms: Vec<f64>,
}

/// Port terms for glued 1-forms on the faces `(patch, face)` of a
/// three-dimensional domain.
pub fn assemble_port_boundary(set: &PatchSet, glue: &Glue, ports: &[(usize, usize)], incident: Option<&PortField>) -> Result<PortTerms> {
    let d = set.dim();
    if d != 3 {
        return Err(Error::Unsupported(format!("port boundary in dimension {d}")));
    }
    let boundary = set.boundary_faces();
    for p in ports {
        if !boundary.contains(p) {
            return Err(Error::InvalidProblem(format!("port face {} of patch {} is not on the boundary", p.1, p.0)));
        }
    }
    let n = glue.dims[1];
    let mut acc = Accumulator::new(n, n);
    let mut loads = Vec::with_capacity(ports.len());
    let mut norms = Vec::with_capacity(ports.len());
    for &(pk, face) in ports {
        let patch = &set.patches[pk];
        let (dir, side) = face_of(face);
        let at = side as f64;
        let c = Compiled::new(&patch.complex.spaces[1]);
        let npd = points_per_direction(&c, 0);
        let (t1, t2) = match dir {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mut load = vec![0.0; n];
        let mut norm = 0.0;
        for e in patch.complex.elements.iter().filter(|e| if side == 0 { e[dir].0 == 0.0 } else { e[dir].1 == 1.0 }) {
            if e.iter().enumerate().any(|(k, &(a, b))| k != dir && b <= a) {
                continue;
            }
            let mut fe = e.clone();
            fe[dir] = (at, at);
            let rule = QuadratureRule::on_face(e, dir, at, npd);
            let active = c.active(&fe);
            if active.is_empty() {
                continue;
            }
            let mut ev = evaluate(&c, &patch.geometry, &rule, active, false)?;
            let npts = rule.len();
            // replace volume weights with surface measure and project onto
            // the tangent plane
            let mut normals = Vec::with_capacity(npts);
            for (q, x) in rule.points.iter().enumerate() {
                let jac = patch.geometry.jacobian(&x[..3])?;
                let cr = cross(&jac.column(t1), &jac.column(t2));
                let area = norm3(&cr);
                ev.weights[q] = rule.weights[q] * area;
                normals.push([cr[0] / area, cr[1] / area, cr[2] / area]);
            }
            for a in 0..ev.active.len() {
                for q in 0..npts {
                    ev.values[a * npts + q] = tangential_part(&ev.values[a * npts + q], &normals[q]);
                }
            }
            let local = gram(&ev.values, &ev.weights, ev.active.len(), 3);
            acc.add_local(&local, &glue.map[1][pk], &ev.active);
            if let Some(inc) = incident {
                for q in 0..npts {
                    let ei = tangential_part(&inc(pk, &rule.points[q], &ev.physical[q]), &normals[q]);
                    norm += ev.weights[q] * dot(&ei, &ei);
                    for (a, &i) in ev.active.iter().enumerate() {
                        let (g, s) = glue.map[1][pk][i];
                        load[g] += s as f64 * ev.weights[q] * dot(&ei, &ev.values[a * npts + q]);
                    }
                }
            }
        }
        loads.push(load);
        norms.push(norm);
    }
    Ok(PortTerms { matrix: acc.finish(), loads, norms })
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// `v - (v·n) n`, whose squared length equals `|n × v|²`.
fn tangential_part(v: &[f64; 3], n: &[f64; 3]) -> [f64; 3] {
    let s = dot(v, n);
    [v[0] - s * n[0], v[1] - s * n[1], v[2] - s * n[2]]
}

/// Assembled system on the glued spaces with its dof split.
#[derive(Clone, Debug)]
pub struct SystemMatrices {
    pub mass: CsrMatrix<f64>,
    pub stiffness: CsrMatrix<f64>,
    pub boundary: Option<CsrMatrix<f64>>,
    pub load: Option<Vec<f64>>,
    pub free: Vec<usize>,
    pub constrained: Vec<usize>,
}

impl SystemMatrices {
    /// Mass and derivative Gram matrix of the glued `j`-forms, with the
    /// forms tracing on `dirichlet` faces `(patch, face)` marked constrained.
    pub fn new(set: &PatchSet, glue: &Glue, j: usize, dirichlet: &[(usize, usize)]) -> Result<Self> {
        let d = set.dim();
        let stiff = match (d, j) {
            (_, 0) => MatrixKind::GradGrad,
            (2, 1) => MatrixKind::RotRot,
            (3, 1) => MatrixKind::CurlCurl,
            _ => return Err(Error::Unsupported(format!("stiffness of {j}-forms in dimension {d}"))),
        };
        let mut m = assemble(set, glue, j, &[MatrixKind::Mass, stiff])?;
        let stiffness = m.pop().expect("two matrices");
        let mass = m.pop().expect("two matrices");
        Ok(SystemMatrices {
            mass,
            stiffness,
            boundary: None,
            load: None,
            free: glue.free(set, j, dirichlet),
            constrained: glue.constrained(set, j, dirichlet),
        })
    }

    pub fn dofs(&self) -> usize {
        self.free.len()
    }

    /// Rows and columns of the constrained dofs removed. Constrained values
    /// are zero, so the load is simply restricted.
    pub fn reduced(&self) -> SystemMatrices {
        impose_dirichlet(self, &self.free)
    }

    /// Extends a vector on the free dofs by zeros.
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mass.nrows()];
        for (&g, &v) in self.free.iter().zip(free_values) {
            out[g] = v;
        }
        out
    }
}

/// Keeps only the listed dofs of every matrix and of the load.
pub fn impose_dirichlet(system: &SystemMatrices, free: &[usize]) -> SystemMatrices {
    let n = free.len();
    SystemMatrices {
        mass: system.mass.select(free, free),
        stiffness: system.stiffness.select(free, free),
        boundary: system.boundary.as_ref().map(|b| b.select(free, free)),
        load: system.load.as_ref().map(|l| free.iter().map(|&g| l[g]).collect()),
        free: (0..n).collect(),
        constrained: vec![],
    }
}
