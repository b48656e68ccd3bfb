//! Multi-patch domains: conformity checks across interfaces and global
//! numbering of the glued spaces.

use std::collections::HashMap;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeometryMap;
use crate::parametric_complex::{exactness_report, multi_indices, DiscreteComplex, ExactnessReport};
use crate::space::{FormKind, FunctionSpace};
use crate::sparse::CsrMatrix;
use crate::tmesh::{Rect, TMesh};
use crate::tspline_complex::{ExtrudedComplex, TSplineComplex};
use crate::univariate::{knot_to_f64, KnotVector, LocalKnotVector, Scaling};

/// Parametric box `[(lo, hi); d]`.
pub type Element = Vec<(f64, f64)>;

/// The discrete complex of one patch together with the elements on which
/// all of its functions are polynomials.
#[derive(Clone, Debug)]
pub struct PatchComplex {
    pub spaces: Vec<FunctionSpace>,
    pub ops: Vec<CsrMatrix<Rational64>>,
    pub elements: Vec<Element>,
}

fn rect_box(r: &Rect) -> Element {
    vec![(knot_to_f64(r.x0), knot_to_f64(r.x1)), (knot_to_f64(r.y0), knot_to_f64(r.y1))]
}

fn spans(kv: &KnotVector) -> Vec<(f64, f64)> {
    kv.spans().into_iter().map(|(a, b)| (knot_to_f64(a), knot_to_f64(b))).collect()
}

/// Bézier elements of a T-mesh (the faces of its extended mesh).
pub fn bezier_elements(mesh: &TMesh) -> Result<Vec<Element>> {
    Ok(mesh.extended().bezier_faces()?.iter().map(rect_box).collect())
}

impl PatchComplex {
    pub fn from_tensor(c: &DiscreteComplex) -> Result<Self> {
        let d = c.dim();
        let spaces = (0..=d).map(|j| c.function_space(j)).collect();
        let ops = (0..d)
            .map(|j| Ok(c.diff_matrix(j)?.map(Rational64::from_integer)))
            .collect::<Result<_>>()?;
        let per_dir: Vec<Vec<(f64, f64)>> = c.mesh.kvs.iter().map(spans).collect();
        let counts: Vec<usize> = per_dir.iter().map(|s| s.len()).collect();
        let elements = multi_indices(&counts)
            .into_iter()
            .map(|ix| ix.iter().enumerate().map(|(k, &i)| per_dir[k][i]).collect())
            .collect();
        Ok(PatchComplex { spaces, ops, elements })
    }

    /// Planar complex with grad and rot.
    pub fn from_tspline(c: &TSplineComplex) -> Result<Self> {
        Ok(PatchComplex {
            spaces: vec![c.y0.clone(), c.y1.clone(), c.y2.clone()],
            ops: vec![c.grad()?, c.rot()?],
            elements: bezier_elements(&c.meshes.m0)?,
        })
    }

    pub fn from_extruded(c: &ExtrudedComplex) -> Result<Self> {
        let planar = bezier_elements(&c.planar.meshes.m0)?;
        let zs = spans(&c.z);
        let mut elements = Vec::with_capacity(planar.len() * zs.len());
        for &z in &zs {
            for e in &planar {
                let mut b = e.clone();
                b.push(z);
                elements.push(b);
            }
        }
        Ok(PatchComplex {
            spaces: c.spaces.clone(),
            ops: (0..3).map(|j| c.diff_matrix(j)).collect::<Result<_>>()?,
            elements,
        })
    }

    pub fn dim(&self) -> usize {
        self.spaces[0].dim
    }
}

#[derive(Clone, Debug)]
pub struct Patch {
    pub geometry: GeometryMap,
    pub complex: PatchComplex,
}

/// A face is `2 * direction + side`.
pub fn face_of(face: usize) -> (usize, usize) {
    (face / 2, face % 2)
}

/// Two patch faces identified with each other. The `i`-th tangential
/// direction of face `a` (in increasing order) runs along the `perm[i]`-th
/// tangential direction of face `b`, reversed when `flip[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interface {
    pub a: [usize; 2],
    pub b: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perm: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flip: Vec<bool>,
}

impl Interface {
    pub fn new(a: (usize, usize), b: (usize, usize)) -> Self {
        Interface { a: [a.0, a.1], b: [b.0, b.1], perm: None, flip: vec![] }
    }

    fn perm(&self, d: usize) -> Vec<usize> {
        self.perm.clone().unwrap_or_else(|| (0..d - 1).collect())
    }

    fn flip(&self, d: usize) -> Vec<bool> {
        let mut f = self.flip.clone();
        f.resize(d - 1, false);
        f
    }
}

fn tangential(d: usize, dir: usize) -> Vec<usize> {
    (0..d).filter(|&k| k != dir).collect()
}

/// Sign relating the oriented tangential frames of the two faces, as seen
/// by the normal components of div-conforming fields.
fn frame_sign(d: usize, ia: &Interface) -> i8 {
    let (da, _) = face_of(ia.a[1]);
    let (db, _) = face_of(ia.b[1]);
    let perm = ia.perm(d);
    let mut s: i8 = if (da + db) % 2 == 0 { 1 } else { -1 };
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                s = -s;
            }
        }
    }
    for f in ia.flip(d) {
        if f {
            s = -s;
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct TraceKey {
    component: usize,
    knots: Vec<LocalKnotVector>,
    scaling: Vec<Scaling>,
}

/// Trace key of function `i` of `space` on face `face`, written in the
/// tangential frame of the partner face, with the sign of the glued copy.
fn trace_key(space: &FunctionSpace, i: usize, face: usize, ia: &Interface, as_a: bool) -> (TraceKey, i8) {
    let d = space.dim;
    let f = &space.functions[i];
    let (dir, _) = face_of(face);
    let t = tangential(d, dir);
    let (perm, flip) = if as_a { (ia.perm(d), ia.flip(d)) } else { ((0..d - 1).collect(), vec![false; d - 1]) };
    let mut knots = vec![LocalKnotVector(vec![]); d - 1];
    let mut scaling = vec![Scaling::B; d - 1];
    for i in 0..d - 1 {
        let k = &f.knots[t[i]];
        knots[perm[i]] = if flip[i] { k.reflected() } else { k.clone() };
        scaling[perm[i]] = f.scaling[t[i]];
    }
    let (component, sign) = match space.kind {
        FormKind::H1 | FormKind::L2 => (0, 1),
        FormKind::Hcurl => {
            let i = t.iter().position(|&k| k == f.component).expect("tangential component");
            (perm[i], if flip[i] { -1 } else { 1 })
        }
        FormKind::Hdiv => (d, if as_a { frame_sign(d, ia) } else { 1 }),
    };
    (TraceKey { component, knots, scaling }, sign)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConformityReport {
    pub interface: usize,
    /// Largest distance between the two images of sampled interface points.
    pub geometry_gap: f64,
    pub geometry_ok: bool,
    /// Whether the trace spaces of `X^j` agree, for `j < d`.
    pub traces_match: Vec<bool>,
    pub first_mismatch: Option<String>,
}

impl ConformityReport {
    pub fn ok(&self) -> bool {
        self.geometry_ok && self.traces_match.iter().all(|&b| b)
    }
}

#[derive(Clone, Debug)]
pub struct PatchSet {
    pub patches: Vec<Patch>,
    pub interfaces: Vec<Interface>,
}

const GEOMETRY_TOL: f64 = 1e-10;

impl PatchSet {
    pub fn new(patches: Vec<Patch>, interfaces: Vec<Interface>) -> Result<Self> {
        let d = patches.first().map(|p| p.complex.dim()).ok_or_else(|| Error::InvalidMesh("no patches".into()))?;
        for (k, p) in patches.iter().enumerate() {
            if p.complex.dim() != d || p.geometry.dim() != d {
                return Err(Error::DimensionMismatch(format!("patch {k} is not {d}-dimensional")));
            }
        }
        for (n, ia) in interfaces.iter().enumerate() {
            for [p, f] in [ia.a, ia.b] {
                if p >= patches.len() || f >= 2 * d {
                    return Err(Error::InterfaceMismatch(format!("interface {n}: no face {f} on patch {p}")));
                }
            }
            if ia.a == ia.b {
                return Err(Error::Unsupported(format!("interface {n} glues a face to itself")));
            }
            let perm = ia.perm(d);
            let mut sorted = perm.clone();
            sorted.sort_unstable();
            if sorted != (0..d - 1).collect::<Vec<_>>() || ia.flip.len() > d - 1 {
                return Err(Error::InterfaceMismatch(format!("interface {n}: bad permutation or flips")));
            }
        }
        Ok(PatchSet { patches, interfaces })
    }

    pub fn single(patch: Patch) -> Self {
        PatchSet { patches: vec![patch], interfaces: vec![] }
    }

    pub fn dim(&self) -> usize {
        self.patches[0].complex.dim()
    }

    /// Faces not covered by an interface.
    pub fn boundary_faces(&self) -> Vec<(usize, usize)> {
        let d = self.dim();
        let mut out = Vec::new();
        for k in 0..self.patches.len() {
            for f in 0..2 * d {
                if !self.interfaces.iter().any(|ia| ia.a == [k, f] || ia.b == [k, f]) {
                    out.push((k, f));
                }
            }
        }
        out
    }

    /// Parameter on face `b` of the point with parameter `x` on face `a`.
    pub fn map_to_b(&self, ia: &Interface, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let (da, _) = face_of(ia.a[1]);
        let (db, sb) = face_of(ia.b[1]);
        let ta = tangential(d, da);
        let tb = tangential(d, db);
        let perm = ia.perm(d);
        let flip = ia.flip(d);
        let mut y = vec![0.0; d];
        y[db] = sb as f64;
        for i in 0..d - 1 {
            let v = x[ta[i]];
            y[tb[perm[i]]] = if flip[i] { 1.0 - v } else { v };
        }
        y
    }

    pub fn check_conformity(&self) -> Result<Vec<ConformityReport>> {
        let d = self.dim();
        let mut out = Vec::new();
        for (n, ia) in self.interfaces.iter().enumerate() {
            let (pa, pb) = (&self.patches[ia.a[0]], &self.patches[ia.b[0]]);
            let (da, sa) = face_of(ia.a[1]);
            let ta = tangential(d, da);
            let mut gap: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for ix in multi_indices(&vec![7; d - 1]) {
                let mut x = vec![0.0; d];
                x[da] = sa as f64;
                for i in 0..d - 1 {
                    x[ta[i]] = ix[i] as f64 / 6.0;
                }
                let y = self.map_to_b(ia, &x);
                let fa = pa.geometry.eval(&x)?;
                let fb = pb.geometry.eval(&y)?;
                for c in 0..d {
                    gap = gap.max((fa[c] - fb[c]).abs());
                    scale = scale.max(fa[c].abs());
                }
            }
            let mut traces_match = Vec::new();
            let mut first_mismatch = None;
            for j in 0..d {
                let sa = &pa.complex.spaces[j];
                let sb = &pb.complex.spaces[j];
                let ka: Vec<TraceKey> = trace_indices(sa, ia.a[1])
                    .into_iter()
                    .map(|i| trace_key(sa, i, ia.a[1], ia, true).0)
                    .collect();
                let kb: Vec<TraceKey> = trace_indices(sb, ia.b[1])
                    .into_iter()
                    .map(|i| trace_key(sb, i, ia.b[1], ia, false).0)
                    .collect();
                let mut ok = ka.len() == kb.len();
                for k in &ka {
                    if !kb.contains(k) {
                        ok = false;
                        if first_mismatch.is_none() {
                            let desc: Vec<String> = k.knots.iter().map(|k| k.to_string()).collect();
                            first_mismatch = Some(format!(
                                "{j}-forms: trace {} (component {}) of patch {} has no partner on patch {}",
                                desc.join(" x "),
                                k.component,
                                ia.a[0],
                                ia.b[0]
                            ));
                        }
                    }
                }
                if ok {
                    let mut a = ka.clone();
                    let mut b = kb.clone();
                    a.sort();
                    b.sort();
                    ok = a == b;
                }
                traces_match.push(ok);
            }
            out.push(ConformityReport {
                interface: n,
                geometry_gap: gap,
                geometry_ok: gap <= GEOMETRY_TOL * (1.0 + scale),
                traces_match,
                first_mismatch,
            });
        }
        Ok(out)
    }
}

fn trace_indices(space: &FunctionSpace, face: usize) -> Vec<usize> {
    let (dir, side) = face_of(face);
    (0..space.len()).filter(|&i| space.has_trace(i, dir, side)).collect()
}

/// Global numbering of the glued spaces: `map[j][patch][local] = (global,
/// sign)`. The orientation of every shared function is that of its copy on
/// the lowest-indexed patch.
#[derive(Clone, Debug)]
pub struct Glue {
    pub map: Vec<Vec<Vec<(usize, i8)>>>,
    pub dims: Vec<usize>,
}

struct SignedUnionFind {
    parent: Vec<usize>,
    // sign of a node relative to its parent
    sign: Vec<i8>,
}

impl SignedUnionFind {
    fn new(n: usize) -> Self {
        SignedUnionFind { parent: (0..n).collect(), sign: vec![1; n] }
    }

    fn find(&mut self, x: usize) -> (usize, i8) {
        let p = self.parent[x];
        if p == x {
            return (x, 1);
        }
        let (r, s) = self.find(p);
        self.parent[x] = r;
        self.sign[x] *= s;
        (r, self.sign[x])
    }

    /// Records `value(x) = s * value(y)`; false on contradiction.
    fn union(&mut self, x: usize, y: usize, s: i8) -> bool {
        let (rx, sx) = self.find(x);
        let (ry, sy) = self.find(y);
        if rx == ry {
            return sx == s * sy;
        }
        // x = sx rx, y = sy ry, x = s y  =>  rx = sx s sy ry
        let (lo, hi) = if rx < ry { (rx, ry) } else { (ry, rx) };
        self.parent[hi] = lo;
        self.sign[hi] = sx * s * sy;
        true
    }
}

pub fn build_glue(set: &PatchSet) -> Result<Glue> {
    let d = set.dim();
    let mut map = Vec::with_capacity(d + 1);
    let mut dims = Vec::with_capacity(d + 1);
    for j in 0..=d {
        let offsets: Vec<usize> = set
            .patches
            .iter()
            .scan(0, |acc, p| {
                let o = *acc;
                *acc += p.complex.spaces[j].len();
                Some(o)
            })
            .collect();
        let total: usize = set.patches.iter().map(|p| p.complex.spaces[j].len()).sum();
        let mut uf = SignedUnionFind::new(total);
        if j < d {
            for (n, ia) in set.interfaces.iter().enumerate() {
                let sa = &set.patches[ia.a[0]].complex.spaces[j];
                let sb = &set.patches[ia.b[0]].complex.spaces[j];
                let mut partners: HashMap<TraceKey, usize> = HashMap::new();
                for i in trace_indices(sb, ia.b[1]) {
                    partners.insert(trace_key(sb, i, ia.b[1], ia, false).0, i);
                }
                let ours = trace_indices(sa, ia.a[1]);
                if ours.len() != partners.len() {
                    return Err(Error::InterfaceMismatch(format!(
                        "interface {n}: {} traces of {j}-forms on patch {} against {} on patch {}",
                        ours.len(),
                        ia.a[0],
                        partners.len(),
                        ia.b[0]
                    )));
                }
                for i in ours {
                    let (key, s) = trace_key(sa, i, ia.a[1], ia, true);
                    let k = *partners.get(&key).ok_or_else(|| {
                        Error::InterfaceMismatch(format!(
                            "interface {n}: {j}-form {i} of patch {} has no partner",
                            ia.a[0]
                        ))
                    })?;
                    if !uf.union(offsets[ia.a[0]] + i, offsets[ia.b[0]] + k, s) {
                        return Err(Error::InterfaceMismatch(format!(
                            "interface {n}: inconsistent orientation of {j}-form {i} of patch {}",
                            ia.a[0]
                        )));
                    }
                }
            }
        }
        // roots are the smallest members, so numbering by root follows the
        // patch order and the root carries the reference orientation
        let mut number = vec![usize::MAX; total];
        let mut next = 0;
        let mut per_patch = Vec::with_capacity(set.patches.len());
        for (k, p) in set.patches.iter().enumerate() {
            let mut local = Vec::with_capacity(p.complex.spaces[j].len());
            for i in 0..p.complex.spaces[j].len() {
                let (r, s) = uf.find(offsets[k] + i);
                if number[r] == usize::MAX {
                    number[r] = next;
                    next += 1;
                }
                local.push((number[r], s));
            }
            per_patch.push(local);
        }
        map.push(per_patch);
        dims.push(next);
    }
    Ok(Glue { map, dims })
}

impl Glue {
    /// `n_global x n_local` scatter matrix of patch `k` for `j`-forms.
    pub fn scatter(&self, j: usize, k: usize) -> CsrMatrix<f64> {
        let t: Vec<_> = self.map[j][k].iter().enumerate().map(|(i, &(g, s))| (g, i, s as f64)).collect();
        CsrMatrix::from_triplets(self.dims[j], self.map[j][k].len(), &t)
    }

    /// Global operator from `j`-forms to `j+1`-forms. Each global row is
    /// read off one patch carrying the corresponding function.
    pub fn global_operator(&self, set: &PatchSet, j: usize) -> CsrMatrix<Rational64> {
        let mut rep: Vec<Option<(usize, usize, i8)>> = vec![None; self.dims[j + 1]];
        for (k, local) in self.map[j + 1].iter().enumerate() {
            for (i, &(g, s)) in local.iter().enumerate() {
                if rep[g].is_none() {
                    rep[g] = Some((k, i, s));
                }
            }
        }
        let mut trip = Vec::new();
        for (g, r) in rep.iter().enumerate() {
            let (k, i, s) = r.expect("every global function has a patch copy");
            for (q, v) in set.patches[k].complex.ops[j].row(i) {
                let (gc, sc) = self.map[j][k][q];
                trip.push((g, gc, v * Rational64::from_integer((s * sc) as i64)));
            }
        }
        CsrMatrix::from_triplets(self.dims[j + 1], self.dims[j], &trip)
    }

    /// Global `j`-forms with a nonzero trace on any of the faces
    /// `(patch, face)`.
    pub fn constrained(&self, set: &PatchSet, j: usize, faces: &[(usize, usize)]) -> Vec<usize> {
        let mut flag = vec![false; self.dims[j]];
        for &(k, f) in faces {
            let space = &set.patches[k].complex.spaces[j];
            for i in trace_indices(space, f) {
                flag[self.map[j][k][i].0] = true;
            }
        }
        (0..self.dims[j]).filter(|&g| flag[g]).collect()
    }

    pub fn free(&self, set: &PatchSet, j: usize, faces: &[(usize, usize)]) -> Vec<usize> {
        let c = self.constrained(set, j, faces);
        let mut flag = vec![true; self.dims[j]];
        for g in c {
            flag[g] = false;
        }
        (0..self.dims[j]).filter(|&g| flag[g]).collect()
    }

    /// Exactness of the glued complex with the functions tracing on the
    /// given faces removed.
    pub fn exactness(&self, set: &PatchSet, faces: &[(usize, usize)], expected: Option<Vec<usize>>) -> ExactnessReport {
        let d = set.dim();
        let free: Vec<Vec<usize>> = (0..=d).map(|j| self.free(set, j, faces)).collect();
        let ops: Vec<_> = (0..d).map(|j| self.global_operator(set, j).select(&free[j + 1], &free[j])).collect();
        let dims: Vec<usize> = free.iter().map(|f| f.len()).collect();
        exactness_report(&dims, &ops, expected)
    }

    /// Global coefficient vector restricted to patch `k`.
    pub fn gather(&self, j: usize, k: usize, global: &[f64]) -> Vec<f64> {
        self.map[j][k].iter().map(|&(g, s)| s as f64 * global[g]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parametric_complex::{build_complex, BoundaryCondition, TensorMesh};

    fn unit_cube_patch(shift: f64, kvs: Vec<KnotVector>) -> Patch {
        let c = build_complex(&TensorMesh::new(kvs).unwrap()).unwrap();
        Patch {
            geometry: GeometryMap::boxed(&[(shift, shift + 1.0), (0.0, 1.0), (0.0, 1.0)]),
            complex: PatchComplex::from_tensor(&c).unwrap(),
        }
    }

    fn two_cubes(refine_second: bool) -> PatchSet {
        let kv = KnotVector::uniform(2, 2);
        let mut second = vec![kv.clone(); 3];
        if refine_second {
            second[1] = KnotVector::uniform(2, 4);
        }
        PatchSet::new(
            vec![unit_cube_patch(0.0, vec![kv; 3]), unit_cube_patch(1.0, second)],
            vec![Interface::new((0, 1), (1, 0))],
        )
        .unwrap()
    }

    #[test]
    fn matching_cubes_conform() {
        let r = two_cubes(false).check_conformity().unwrap();
        assert!(r[0].ok(), "{r:?}");
    }

    #[test]
    fn refined_interface_is_rejected() {
        let set = two_cubes(true);
        let r = set.check_conformity().unwrap();
        assert!(!r[0].ok());
        assert!(r[0].first_mismatch.is_some());
        assert!(build_glue(&set).is_err());
    }

    #[test]
    fn glued_dimensions_and_exactness() {
        let set = two_cubes(false);
        let g = build_glue(&set).unwrap();
        // S_2 on two elements has 4 functions per direction; the shared face
        // carries 4 x 4 of them
        assert_eq!(g.dims[0], 2 * 64 - 16);
        let r = g.exactness(&set, &[], BoundaryCondition::None.expected_betti(3));
        assert!(r.exact, "{r:?}");
        let faces = set.boundary_faces();
        let r = g.exactness(&set, &faces, BoundaryCondition::Full.expected_betti(3));
        assert!(r.exact, "{r:?}");
    }

    #[test]
    fn single_patch_glue_is_identity() {
        let kv = KnotVector::uniform(1, 2);
        let set = PatchSet::single(unit_cube_patch(0.0, vec![kv; 3]));
        let g = build_glue(&set).unwrap();
        for j in 0..4 {
            assert!(g.map[j][0].iter().enumerate().all(|(i, &(k, s))| i == k && s == 1));
        }
    }

    #[test]
    fn face_glued_to_itself_is_unsupported() {
        let kv = KnotVector::uniform(1, 1);
        let p = unit_cube_patch(0.0, vec![kv; 3]);
        let r = PatchSet::new(vec![p], vec![Interface::new((0, 1), (0, 1))]);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }
}
