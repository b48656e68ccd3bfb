//! Spline and NURBS geometry maps, the pullbacks between physical and
//! parametric fields, and the degree-one control complex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parametric_complex::{build_complex, multi_indices, DiscreteComplex, TensorMesh};
use crate::space::FormKind;
use crate::univariate::{knot_to_f64, KnotVector};

/// Map from `[0,1]^d` to `R^d` given by tensor-product B-splines, or NURBS
/// when weights are present. Control points are ordered lexicographically
/// with the first direction running fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryFile", into = "GeometryFile")]
pub struct GeometryMap {
    kvs: Vec<KnotVector>,
    points: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFile {
    knots: Vec<KnotVector>,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

impl TryFrom<GeometryFile> for GeometryMap {
    type Error = Error;
    fn try_from(g: GeometryFile) -> Result<Self> {
        GeometryMap::new(g.knots, g.points, g.weights)
    }
}

impl From<GeometryMap> for GeometryFile {
    fn from(g: GeometryMap) -> Self {
        GeometryFile { knots: g.kvs, points: g.points, weights: g.weights }
    }
}

/// Jacobian matrix of a map at a point, padded to 3x3 in two dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jacobian {
    pub dim: usize,
    pub point: [f64; 3],
    /// `m[i][j] = ∂F_i/∂ζ_j`.
    pub m: [[f64; 3]; 3],
    pub det: f64,
}

const SINGULAR: f64 = 1e-12;

impl Jacobian {
    pub fn new(dim: usize, point: [f64; 3], m: [[f64; 3]; 3]) -> Self {
        let det = det3(&m);
        Jacobian { dim, point, m, det }
    }

    pub fn identity(dim: usize, point: [f64; 3]) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Jacobian { dim, point, m, det: 1.0 }
    }

    pub fn check(&self) -> Result<()> {
        if self.det.abs() < SINGULAR || !self.det.is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "singular Jacobian (det {:e}) at {:?}",
                self.det,
                &self.point[..self.dim]
            )));
        }
        Ok(())
    }

    /// Matrix `A` with `physical = A · parametric` for the push-forward of
    /// `kind`; scalars use the first entry.
    pub fn push_forward_matrix(&self, kind: FormKind) -> Result<[[f64; 3]; 3]> {
        self.check()?;
        let mut a = [[0.0; 3]; 3];
        match kind {
            FormKind::H1 => a[0][0] = 1.0,
            FormKind::L2 => a[0][0] = 1.0 / self.det,
            FormKind::Hcurl => {
                let c = cofactor(&self.m);
                for i in 0..3 {
                    for j in 0..3 {
                        a[i][j] = c[i][j] / self.det;
                    }
                }
            }
            FormKind::Hdiv => {
                for i in 0..3 {
                    for j in 0..3 {
                        a[i][j] = self.m[i][j] / self.det;
                    }
                }
            }
        }
        Ok(a)
    }

    /// Column `j` of `DF`.
    pub fn column(&self, j: usize) -> [f64; 3] {
        [self.m[0][j], self.m[1][j], self.m[2][j]]
    }

    /// `DF v`.
    pub fn apply(&self, v: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|j| self.m[i][j] * v[j]).sum();
        }
        out
    }

    /// `DFᵀ v`.
    pub fn apply_transpose(&self, v: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|j| self.m[j][i] * v[j]).sum();
        }
        out
    }

    /// `DF^{-T} v`, through the adjugate: `DF^{-T} = cof(DF) / det`.
    pub fn apply_inverse_transpose(&self, v: &[f64; 3]) -> Result<[f64; 3]> {
        self.check()?;
        let c = cofactor(&self.m);
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|j| c[i][j] * v[j]).sum::<f64>() / self.det;
        }
        Ok(out)
    }

    /// `DF^{-1} v`.
    pub fn apply_inverse(&self, v: &[f64; 3]) -> Result<[f64; 3]> {
        self.check()?;
        let c = cofactor(&self.m);
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..3).map(|j| c[j][i] * v[j]).sum::<f64>() / self.det;
        }
        Ok(out)
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn cofactor(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            c[i][j] = m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1];
        }
    }
    c
}

impl GeometryMap {
    pub fn new(kvs: Vec<KnotVector>, points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let d = kvs.len();
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGeometry(format!("{d} parametric directions")));
        }
        let n: usize = kvs.iter().map(|k| k.dim()).product();
        if points.len() != n {
            return Err(Error::InvalidGeometry(format!("{} control points, expected {n}", points.len())));
        }
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::InvalidGeometry(format!("control point {p:?} is not {d}-dimensional")));
        }
        if let Some(w) = &weights {
            if w.len() != n {
                return Err(Error::InvalidGeometry(format!("{} weights, expected {n}", w.len())));
            }
            if let Some(bad) = w.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
                return Err(Error::InvalidGeometry(format!("non-positive weight {bad}")));
            }
        }
        Ok(GeometryMap { kvs, points, weights })
    }

    /// `F(ζ) = ζ` on `[0,1]^d` with degree one.
    pub fn identity(d: usize) -> Self {
        Self::boxed(&vec![(0.0, 1.0); d])
    }

    /// Affine map onto an axis-aligned box.
    pub fn boxed(bounds: &[(f64, f64)]) -> Self {
        let d = bounds.len();
        let kvs = vec![KnotVector::uniform(1, 1); d];
        let points = multi_indices(&vec![2; d])
            .into_iter()
            .map(|ix| ix.iter().zip(bounds).map(|(&i, &(a, b))| if i == 0 { a } else { b }).collect())
            .collect();
        GeometryMap { kvs, points, weights: None }
    }

    /// Quarter annulus `r_in < r < r_out`, `0 < θ < π/2`, as a biquadratic
    /// NURBS with the radius along the first direction.
    pub fn quarter_annulus(r_in: f64, r_out: f64) -> Self {
        let w = std::f64::consts::FRAC_1_SQRT_2;
        let dirs = [([1.0, 0.0], 1.0), ([1.0, 1.0], w), ([0.0, 1.0], 1.0)];
        let radii = [r_in, 0.5 * (r_in + r_out), r_out];
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (dir, wt) in dirs {
            for r in radii {
                points.push(vec![r * dir[0], r * dir[1]]);
                weights.push(wt);
            }
        }
        let kv = KnotVector::uniform(2, 1);
        GeometryMap { kvs: vec![kv.clone(), kv], points, weights: Some(weights) }
    }

    /// Quarter disk of the given radius as a single biquadratic
    /// NURBS patch. The corner `ζ = (0,0)` is the centre, the edges `ζ₂ = 0`
    /// and `ζ₁ = 0` lie on the positive x and y axes, and the two remaining
    /// edges are the arcs from angle 0 to π/4 and from π/2 to π/4. The two
    /// arcs meet at a straight angle, where the Jacobian vanishes.
    pub fn quarter_disk(radius: f64) -> Self {
        let t = (std::f64::consts::PI / 8.0).tan();
        let c = (std::f64::consts::PI / 8.0).cos();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let net = [
            ([0.0, 0.0], 1.0),
            ([0.5, 0.0], 1.0),
            ([1.0, 0.0], 1.0),
            ([0.0, 0.5], 1.0),
            ([0.55, 0.55], 1.0),
            ([1.0, t], c),
            ([0.0, 1.0], 1.0),
            ([t, 1.0], c),
            ([h, h], 1.0),
        ];
        let kv = KnotVector::uniform(2, 1);
        GeometryMap {
            kvs: vec![kv.clone(), kv],
            points: net.iter().map(|(p, _)| vec![radius * p[0], radius * p[1]]).collect(),
            weights: Some(net.iter().map(|&(_, w)| w).collect()),
        }
    }

    /// Rotation of a planar map (or of the first two coordinates of a
    /// spatial one) by `angle` about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let mut g = self.clone();
        for p in &mut g.points {
            let (x, y) = (p[0], p[1]);
            p[0] = c * x - s * y;
            p[1] = s * x + c * y;
        }
        g
    }

    /// Restriction to the face `ζ_dir = side` of a map whose face lies in the
    /// plane `x_dir = const`; the constant coordinate is dropped.
    pub fn face_map(&self, dir: usize, side: usize) -> Result<Self> {
        let d = self.dim();
        if d < 2 || dir >= d || side > 1 {
            return Err(Error::InvalidGeometry(format!("no face ({dir}, {side}) of a {d}-dimensional map")));
        }
        let sizes = self.sizes();
        let fixed = if side == 0 { 0 } else { sizes[dir] - 1 };
        let mut face_sizes = sizes.clone();
        face_sizes[dir] = 1;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut level = None;
        for ix in multi_indices(&face_sizes) {
            let mut flat = 0;
            let mut stride = 1;
            for k in 0..d {
                flat += if k == dir { fixed } else { ix[k] } * stride;
                stride *= sizes[k];
            }
            let p = &self.points[flat];
            let l = *level.get_or_insert(p[dir]);
            if (p[dir] - l).abs() > 1e-12 * (1.0 + l.abs()) {
                return Err(Error::InvalidGeometry(format!("face ({dir}, {side}) is not planar and axis-aligned")));
            }
            points.push(p.iter().enumerate().filter(|&(k, _)| k != dir).map(|(_, &v)| v).collect());
            if let Some(w) = &self.weights {
                weights.push(w[flat]);
            }
        }
        let kvs = self.kvs.iter().enumerate().filter(|&(k, _)| k != dir).map(|(_, kv)| kv.clone()).collect();
        GeometryMap::new(kvs, points, self.weights.as_ref().map(|_| weights))
    }

    /// Product of a planar map with the segment `(z0, z1)`, linear in the new
    /// third direction.
    pub fn extruded(&self, z0: f64, z1: f64) -> Result<Self> {
        if self.dim() != 2 {
            return Err(Error::InvalidGeometry("only planar maps can be extruded".into()));
        }
        let mut kvs = self.kvs.clone();
        kvs.push(KnotVector::uniform(1, 1));
        let mut points = Vec::new();
        for z in [z0, z1] {
            points.extend(self.points.iter().map(|p| vec![p[0], p[1], z]));
        }
        let weights = self.weights.as_ref().map(|w| w.iter().chain(w.iter()).copied().collect());
        GeometryMap::new(kvs, points, weights)
    }

    pub fn dim(&self) -> usize {
        self.kvs.len()
    }

    pub fn knot_vectors(&self) -> &[KnotVector] {
        &self.kvs
    }

    pub fn control_points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_rational(&self) -> bool {
        self.weights.is_some()
    }

    fn sizes(&self) -> Vec<usize> {
        self.kvs.iter().map(|k| k.dim()).collect()
    }

    /// Point and Jacobian at `ζ`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Jacobian> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch(format!("{}-point for a {d}-dimensional map", x.len())));
        }
        let sizes = self.sizes();
        let local: Vec<(usize, Vec<(f64, f64)>)> =
            self.kvs.iter().zip(x).map(|(k, &xi)| k.nonzero_basis(xi)).collect::<Result<_>>()?;
        // homogeneous sums: value and partial derivatives of Σ w B C and Σ w B
        let mut num = [[0.0f64; 4]; 3];
        let mut den = [0.0f64; 4];
        let counts: Vec<usize> = local.iter().map(|l| l.1.len()).collect();
        for ix in multi_indices(&counts) {
            let mut flat = 0;
            let mut stride = 1;
            for k in 0..d {
                flat += (local[k].0 + ix[k]) * stride;
                stride *= sizes[k];
            }
            let w = self.weights.as_ref().map_or(1.0, |w| w[flat]);
            let mut vals = [0.0f64; 4];
            vals[0] = w;
            for k in 0..d {
                vals[0] *= local[k].1[ix[k]].0;
            }
            for j in 0..d {
                let mut v = w;
                for k in 0..d {
                    v *= if k == j { local[k].1[ix[k]].1 } else { local[k].1[ix[k]].0 };
                }
                vals[j + 1] = v;
            }
            for q in 0..=d {
                den[q] += vals[q];
                for i in 0..d {
                    num[i][q] += vals[q] * self.points[flat][i];
                }
            }
        }
        let mut point = [0.0; 3];
        let mut m = [[0.0; 3]; 3];
        for i in 0..d {
            point[i] = num[i][0] / den[0];
            for j in 0..d {
                // quotient rule
                m[i][j] = (num[i][j + 1] - point[i] * den[j + 1]) / den[0];
            }
        }
        for (i, row) in m.iter_mut().enumerate().skip(d) {
            row[i] = 1.0;
        }
        Ok(Jacobian::new(d, point, m))
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jacobian(x)?.point[..self.dim()].to_vec())
    }

    /// Refinement by inserting all span midpoints in every direction. The
    /// map is unchanged; NURBS are refined in homogeneous coordinates.
    pub fn refine_dyadic(&self) -> Result<GeometryMap> {
        let d = self.dim();
        let mut kvs = self.kvs.clone();
        // homogeneous control values (w C, w)
        let mut coeffs: Vec<Vec<f64>> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let w = self.weights.as_ref().map_or(1.0, |w| w[i]);
                let mut h: Vec<f64> = p.iter().map(|c| c * w).collect();
                h.push(w);
                h
            })
            .collect();
        for dir in 0..d {
            let sizes: Vec<usize> = kvs.iter().map(|k| k.dim()).collect();
            let lines = line_indices(&sizes, dir);
            let mut refined_kv = None;
            let mut new_lines = Vec::with_capacity(lines.len());
            for line in &lines {
                let vals: Vec<Vec<f64>> = line.iter().map(|&i| coeffs[i].clone()).collect();
                let (kv, out) = kvs[dir].refine_dyadic(&vals)?;
                refined_kv = Some(kv);
                new_lines.push(out);
            }
            let kv = refined_kv.expect("at least one line");
            let mut new_sizes = sizes.clone();
            new_sizes[dir] = kv.dim();
            let mut next = vec![vec![]; new_sizes.iter().product()];
            for (line, vals) in line_indices(&new_sizes, dir).iter().zip(new_lines) {
                for (&i, v) in line.iter().zip(vals) {
                    next[i] = v;
                }
            }
            kvs[dir] = kv;
            coeffs = next;
        }
        let (points, weights): (Vec<Vec<f64>>, Vec<f64>) = coeffs
            .into_iter()
            .map(|h| {
                let w = h[d];
                (h[..d].iter().map(|c| c / w).collect(), w)
            })
            .unzip();
        GeometryMap::new(kvs, points, self.weights.as_ref().map(|_| weights))
    }

    /// Degree-one knot vectors through the Greville sites.
    pub fn greville_mesh(&self) -> Result<Vec<KnotVector>> {
        self.kvs
            .iter()
            .map(|k| {
                k.greville_knot_vector().map_err(|e| {
                    Error::InvalidGeometry(format!("coincident Greville sites in {k}: {e}"))
                })
            })
            .collect()
    }

    /// Multilinear interpolant of the control points on the Greville mesh.
    pub fn control_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.greville_mesh()?;
        let d = self.dim();
        let sizes = self.sizes();
        let local: Vec<(usize, Vec<(f64, f64)>)> =
            g.iter().zip(x).map(|(k, &xi)| k.nonzero_basis(xi)).collect::<Result<_>>()?;
        let counts: Vec<usize> = local.iter().map(|l| l.1.len()).collect();
        let mut out = vec![0.0; d];
        for ix in multi_indices(&counts) {
            let mut flat = 0;
            let mut stride = 1;
            let mut b = 1.0;
            for k in 0..d {
                flat += (local[k].0 + ix[k]) * stride;
                stride *= sizes[k];
                b *= local[k].1[ix[k]].0;
            }
            for i in 0..d {
                out[i] += b * self.points[flat][i];
            }
        }
        Ok(out)
    }

    /// Largest distance between the map and its control map over a uniform
    /// grid of `samples` points per direction.
    pub fn control_distance(&self, samples: usize) -> Result<f64> {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for ix in multi_indices(&vec![samples; d]) {
            let x: Vec<f64> = ix.iter().map(|&i| i as f64 / (samples - 1).max(1) as f64).collect();
            let f = self.eval(&x)?;
            let c = self.control_map(&x)?;
            let dist = f.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(dist);
        }
        Ok(worst)
    }
}

/// Flat indices of all lines of a tensor grid running in direction `dir`.
fn line_indices(sizes: &[usize], dir: usize) -> Vec<Vec<usize>> {
    let mut others = sizes.to_vec();
    others[dir] = 1;
    multi_indices(&others)
        .into_iter()
        .map(|base| {
            (0..sizes[dir])
                .map(|i| {
                    let mut ix = base.clone();
                    ix[dir] = i;
                    flat_index(sizes, &ix)
                })
                .collect()
        })
        .collect()
}

fn flat_index(sizes: &[usize], ix: &[usize]) -> usize {
    let mut flat = 0;
    let mut stride = 1;
    for (k, &i) in ix.iter().enumerate() {
        flat += i * stride;
        stride *= sizes[k];
    }
    flat
}

/// Transformation rule used for fields of a given Sobolev type: composition
/// (H1), covariant (H(curl)), contravariant Piola (H(div)) or density (L2).
/// `value` is the field at the mapped point; the result is the parametric
/// field at `ζ`.
pub fn pullback(kind: FormKind, jac: &Jacobian, value: &[f64]) -> Result<Vec<f64>> {
    let d = jac.dim;
    match kind {
        FormKind::H1 => Ok(value.to_vec()),
        FormKind::L2 => Ok(vec![jac.det * value[0]]),
        FormKind::Hcurl => Ok(jac.apply_transpose(&pad(value))[..d].to_vec()),
        FormKind::Hdiv => {
            let v = jac.apply_inverse(&pad(value))?;
            Ok(v[..d].iter().map(|c| c * jac.det).collect())
        }
    }
}

/// Inverse of [`pullback`].
pub fn push_forward(kind: FormKind, jac: &Jacobian, value: &[f64]) -> Result<Vec<f64>> {
    let n = kind.components(jac.dim);
    Ok(push_forward3(kind, jac, &pad(value))?[..n].to_vec())
}

/// [`push_forward`] on padded vectors; scalars live in the first entry.
pub fn push_forward3(kind: FormKind, jac: &Jacobian, v: &[f64; 3]) -> Result<[f64; 3]> {
    jac.check()?;
    Ok(match kind {
        FormKind::H1 => *v,
        FormKind::L2 => [v[0] / jac.det, 0.0, 0.0],
        FormKind::Hcurl => jac.apply_inverse_transpose(v)?,
        FormKind::Hdiv => {
            let w = jac.apply(v);
            [w[0] / jac.det, w[1] / jac.det, w[2] / jac.det]
        }
    })
}

fn pad(v: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    out[..v.len()].copy_from_slice(&v[..v.len().min(3)]);
    out
}

/// Degree-one complex on the Greville mesh of a map, whose coefficients are
/// identified with those of the spline complex.
#[derive(Clone, Debug)]
pub struct ControlComplex {
    pub greville: Vec<KnotVector>,
    pub complex: DiscreteComplex,
}

pub fn build_control_complex(map: &GeometryMap, complex: &DiscreteComplex) -> Result<ControlComplex> {
    if complex.mesh.kvs != map.kvs {
        return Err(Error::DimensionMismatch(
            "the complex and the map use different knot vectors".into(),
        ));
    }
    let greville = map.greville_mesh()?;
    let z = build_complex(&TensorMesh::new(greville.clone())?)?;
    Ok(ControlComplex { greville, complex: z })
}

/// Greville sites as floats, per direction.
pub fn greville_sites(kvs: &[KnotVector]) -> Vec<Vec<f64>> {
    kvs.iter().map(|k| k.greville().into_iter().map(knot_to_f64).collect()).collect()
}
