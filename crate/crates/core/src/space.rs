//! Basis functions described purely by local knot vectors.
//!
//! Every space used here, tensor-product or T-spline, is a list of functions
//! that are products of univariate B-splines (optionally Curry–Schoenberg
//! scaled) times a coordinate unit vector. Differential operators are then
//! computed by matching the local knot vectors of the derivative terms
//! against the target space.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use num_rational::Rational64;
use crate::univariate::{knot_to_f64, Knot, LocalKnotVector, Scaling};

/// Sobolev type of a space, which decides what its boundary trace is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    H1,
    Hcurl,
    Hdiv,
    L2,
}

impl FormKind {
    /// Kind of the `j`-forms in `d` dimensions for the standard sequence
    /// grad, curl (rot), div.
    pub fn of(d: usize, j: usize) -> FormKind {
        match (d, j) {
            (_, 0) => FormKind::H1,
            (d, j) if j == d => FormKind::L2,
            (3, 1) | (2, 1) => FormKind::Hcurl,
            (3, 2) => FormKind::Hdiv,
            _ => panic!("no {j}-forms in dimension {d}"),
        }
    }

    pub fn components(self, d: usize) -> usize {
        match self {
            FormKind::H1 | FormKind::L2 => 1,
            FormKind::Hcurl | FormKind::Hdiv => d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BasisFunction {
    pub knots: Vec<LocalKnotVector>,
    pub scaling: Vec<Scaling>,
    pub component: usize,
}

impl BasisFunction {
    pub fn eval_scalar(&self, x: &[f64]) -> f64 {
        self.knots
            .iter()
            .zip(&self.scaling)
            .zip(x)
            .map(|((k, &s), &xi)| k.eval_scaled(s, xi))
            .product()
    }

    /// Gradient of the scalar factor.
    pub fn grad_scalar(&self, x: &[f64]) -> Vec<f64> {
        let d = self.knots.len();
        let vd: Vec<(f64, f64)> = self
            .knots
            .iter()
            .zip(&self.scaling)
            .zip(x)
            .map(|((k, &s), &xi)| {
                let (v, dv) = k.eval_with_derivative(xi);
                let f = if s == Scaling::D { k.curry_factor() } else { 1.0 };
                (f * v, f * dv)
            })
            .collect();
        (0..d)
            .map(|j| (0..d).map(|i| if i == j { vd[i].1 } else { vd[i].0 }).product())
            .collect()
    }

    pub fn support(&self) -> Vec<(Knot, Knot)> {
        self.knots.iter().map(|k| (k.first(), k.last())).collect()
    }

    pub fn support_f64(&self) -> Vec<(f64, f64)> {
        self.knots.iter().map(|k| (knot_to_f64(k.first()), knot_to_f64(k.last()))).collect()
    }
}

/// An ordered family of basis functions of one form degree.
#[derive(Clone, Debug)]
pub struct FunctionSpace {
    pub dim: usize,
    pub kind: FormKind,
    pub functions: Vec<BasisFunction>,
    lookup: HashMap<(usize, Vec<LocalKnotVector>), usize>,
}

impl PartialEq for FunctionSpace {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.kind == other.kind && self.functions == other.functions
    }
}

impl FunctionSpace {
    pub fn new(dim: usize, kind: FormKind, functions: Vec<BasisFunction>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(functions.len());
        for (i, f) in functions.iter().enumerate() {
            if f.knots.len() != dim || f.scaling.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "function {i} has {} directions in a {dim}-dimensional space",
                    f.knots.len()
                )));
            }
            if lookup.insert((f.component, f.knots.clone()), i).is_some() {
                return Err(Error::InvalidMesh(format!("duplicate basis function {i}")));
            }
        }
        Ok(FunctionSpace { dim, kind, functions, lookup })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn find(&self, component: usize, knots: &[LocalKnotVector]) -> Option<usize> {
        self.lookup.get(&(component, knots.to_vec())).copied()
    }

    pub fn components(&self) -> usize {
        self.kind.components(self.dim)
    }

    /// Number of functions per component.
    pub fn component_sizes(&self) -> Vec<usize> {
        let mut n = vec![0; self.components()];
        for f in &self.functions {
            n[f.component] += 1;
        }
        n
    }

    /// Whether function `i` has a nonzero trace on the face `x_dir = side`.
    pub fn has_trace(&self, i: usize, dir: usize, side: usize) -> bool {
        let f = &self.functions[i];
        let component_ok = match self.kind {
            FormKind::H1 => true,
            FormKind::Hcurl => f.component != dir,
            FormKind::Hdiv => f.component == dir,
            FormKind::L2 => false,
        };
        component_ok && f.knots[dir].interpolates_at(side)
    }

    /// Indices of functions with a nonzero trace on any of the given faces
    /// `(dir, side)`.
    pub fn boundary_functions(&self, faces: &[(usize, usize)]) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| faces.iter().any(|&(d, s)| self.has_trace(i, d, s)))
            .collect()
    }

    /// Subspace with the listed functions removed.
    pub fn without(&self, removed: &[usize]) -> Result<FunctionSpace> {
        let mut drop = vec![false; self.len()];
        for &i in removed {
            drop[i] = true;
        }
        let kept = self
            .functions
            .iter()
            .zip(&drop)
            .filter(|(_, &d)| !d)
            .map(|(f, _)| f.clone())
            .collect();
        FunctionSpace::new(self.dim, self.kind, kept)
    }

    /// Parametric value of function `i` as a vector with `components()`
    /// entries.
    pub fn eval(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let f = &self.functions[i];
        let mut v = vec![0.0; self.components()];
        v[f.component] = f.eval_scalar(x);
        v
    }
}

/// Parametric exterior derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    /// Gradient (also the derivative in one dimension).
    Grad,
    /// Three-dimensional curl.
    Curl,
    /// Divergence.
    Div,
    /// Scalar rotation of a planar vector field, `∂1 u2 - ∂2 u1`.
    Rot,
    /// Vector rotation of a scalar, `(∂2 u, -∂1 u)`.
    RotVec,
}

impl Operator {
    /// `(target component, derivative direction, sign)` terms applied to the
    /// scalar factor of a function with the given component.
    pub fn terms(self, d: usize, component: usize) -> Vec<(usize, usize, i64)> {
        match self {
            Operator::Grad => (0..d).map(|j| (j, j, 1)).collect(),
            Operator::Div => vec![(0, component, 1)],
            Operator::Rot => match component {
                0 => vec![(0, 1, -1)],
                _ => vec![(0, 0, 1)],
            },
            Operator::RotVec => vec![(0, 1, 1), (1, 0, -1)],
            Operator::Curl => {
                let c = component;
                (0..3)
                    .filter(|&j| j != c)
                    .map(|j| {
                        let k = 3 - j - c;
                        (k, j, levi_civita(j, c, k))
                    })
                    .collect()
            }
        }
    }

    /// Operator of the standard sequence leaving `j`-forms in `d`
    /// dimensions.
    pub fn standard(d: usize, j: usize) -> Operator {
        match (d, j) {
            (_, 0) => Operator::Grad,
            (2, 1) => Operator::Rot,
            (3, 1) => Operator::Curl,
            (3, 2) => Operator::Div,
            _ => panic!("no exterior derivative of {j}-forms in dimension {d}"),
        }
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> i64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1,
        _ => 0,
    }
}

/// Integer matrix of `op` from `source` to `target`, found by locating every
/// derivative term among the target functions by exact local knot vectors.
pub fn differentiate(op: Operator, source: &FunctionSpace, target: &FunctionSpace) -> Result<CsrMatrix<i64>> {
    let d = source.dim;
    let mut trip = Vec::new();
    for (col, f) in source.functions.iter().enumerate() {
        for (k, j, sign) in op.terms(d, f.component) {
            if f.scaling[j] != Scaling::B {
                return Err(Error::Unsupported(format!(
                    "function {col} is not a plain B-spline in direction {j}"
                )));
            }
            for (kv, c) in f.knots[j].derivative_terms() {
                if c == 0 {
                    continue;
                }
                let mut knots = f.knots.clone();
                knots[j] = kv;
                let row = target.find(k, &knots).ok_or_else(|| {
                    let desc: Vec<String> = knots.iter().map(|k| k.to_string()).collect();
                    Error::TargetNotFound(format!(
                        "component {k}, knots {} (from source function {col})",
                        desc.join(" x ")
                    ))
                })?;
                if target.functions[row].scaling[j] != Scaling::D {
                    return Err(Error::TargetNotFound(format!(
                        "target function {row} is not Curry–Schoenberg scaled in direction {j}"
                    )));
                }
                trip.push((row, col, sign * c));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(target.len(), source.len(), &trip))
}

/// Like [`differentiate`], but a derivative term without an exact target is
/// expanded by knot insertion in one of the other directions into target
/// functions sharing the remaining local knot vectors. Coefficients are then
/// rational. Fails only if no such expansion lands inside the target space.
pub fn differentiate_refined(
    op: Operator,
    source: &FunctionSpace,
    target: &FunctionSpace,
) -> Result<CsrMatrix<Rational64>> {
    let d = source.dim;
    // (component, free direction, knots with the free direction blanked)
    let mut lines: HashMap<(usize, usize, Vec<LocalKnotVector>), Vec<usize>> = HashMap::new();
    for (i, f) in target.functions.iter().enumerate() {
        for free in 0..d {
            let mut key = f.knots.clone();
            key[free] = LocalKnotVector(vec![]);
            lines.entry((f.component, free, key)).or_default().push(i);
        }
    }
    let mut trip = Vec::new();
    for (col, f) in source.functions.iter().enumerate() {
        for (k, j, sign) in op.terms(d, f.component) {
            if f.scaling[j] != Scaling::B {
                return Err(Error::Unsupported(format!(
                    "function {col} is not a plain B-spline in direction {j}"
                )));
            }
            for (kv, c) in f.knots[j].derivative_terms() {
                if c == 0 {
                    continue;
                }
                let mut knots = f.knots.clone();
                knots[j] = kv;
                let coeff = Rational64::from_integer(sign * c);
                let pieces = match target.find(k, &knots) {
                    Some(row) => vec![(row, coeff)],
                    None => (0..d)
                        .filter(|&free| free != j)
                        .find_map(|free| expand(target, &lines, f, k, &knots, free))
                        .ok_or_else(|| {
                            let desc: Vec<String> = knots.iter().map(|k| k.to_string()).collect();
                            Error::TargetNotFound(format!(
                                "component {k}, knots {} (from source function {col})",
                                desc.join(" x ")
                            ))
                        })?
                        .into_iter()
                        .map(|(row, w)| (row, coeff * w))
                        .collect(),
                };
                for (row, v) in pieces {
                    if target.functions[row].scaling[j] != Scaling::D {
                        return Err(Error::TargetNotFound(format!(
                            "target function {row} is not Curry–Schoenberg scaled in direction {j}"
                        )));
                    }
                    trip.push((row, col, v));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(target.len(), source.len(), &trip))
}

/// Expansion of the term `knots` in direction `free` against the target
/// functions on the same line.
fn expand(
    target: &FunctionSpace,
    lines: &HashMap<(usize, usize, Vec<LocalKnotVector>), Vec<usize>>,
    source: &BasisFunction,
    component: usize,
    knots: &[LocalKnotVector],
    free: usize,
) -> Option<Vec<(usize, Rational64)>> {
    let mut key = knots.to_vec();
    let xi = std::mem::replace(&mut key[free], LocalKnotVector(vec![]));
    let line = lines.get(&(component, free, key))?;
    let (lo, hi) = (xi.first(), xi.last());
    // knots missing from Ξ, with the largest multiplicity any overlapping
    // target function on the line asks for
    let mut need: Vec<(Knot, usize)> = Vec::new();
    for &i in line {
        let t = &target.functions[i].knots[free];
        if t.last() <= lo || t.first() >= hi {
            continue;
        }
        let mut vals: Vec<Knot> = t.0.iter().copied().filter(|&v| v > lo && v < hi).collect();
        vals.dedup();
        for v in vals {
            let m = t.0.iter().filter(|&&w| w == v).count();
            let have = xi.0.iter().filter(|&&w| w == v).count();
            if m > have {
                match need.iter_mut().find(|e| e.0 == v) {
                    Some(e) => e.1 = e.1.max(m - have),
                    None => need.push((v, m - have)),
                }
            }
        }
    }
    if need.is_empty() {
        return None;
    }
    let ts: Vec<Knot> = need.iter().flat_map(|&(v, m)| std::iter::repeat(v).take(m)).collect();
    let scaled = source.scaling[free] == Scaling::D;
    let mut out = Vec::new();
    for (piece, w) in xi.refine(&ts) {
        let mut kk = knots.to_vec();
        kk[free] = piece.clone();
        let row = target.find(component, &kk)?;
        if target.functions[row].scaling[free] != source.scaling[free] {
            return None;
        }
        // D[Ξ] = (p/|Ξ|) N[Ξ]
        let w = if scaled { w * piece.support_length() / xi.support_length() } else { w };
        out.push((row, w));
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::univariate::KnotVector;

    fn line_spaces(kv: &KnotVector) -> (FunctionSpace, FunctionSpace) {
        let d = kv.derived().unwrap();
        let s0 = kv
            .all_local_knots()
            .into_iter()
            .map(|k| BasisFunction { knots: vec![k], scaling: vec![Scaling::B], component: 0 })
            .collect();
        let s1 = d
            .all_local_knots()
            .into_iter()
            .map(|k| BasisFunction { knots: vec![k], scaling: vec![Scaling::D], component: 0 })
            .collect();
        (
            FunctionSpace::new(1, FormKind::H1, s0).unwrap(),
            FunctionSpace::new(1, FormKind::L2, s1).unwrap(),
        )
    }

    #[test]
    fn matching_route_equals_bidiagonal_matrix() {
        let kv: KnotVector = "3; 0:4 1/4:1 1/2:2 1:4".parse().unwrap();
        let (s0, s1) = line_spaces(&kv);
        let m = differentiate(Operator::Grad, &s0, &s1).unwrap();
        let expect = CsrMatrix::from_triplets(kv.dim() - 1, kv.dim(), &kv.derivative_triplets());
        assert_eq!(m, expect);
    }

    #[test]
    fn missing_target_is_reported() {
        let kv: KnotVector = "2; 0:3 1/2:1 1:3".parse().unwrap();
        let (s0, s1) = line_spaces(&kv);
        let partial = s1.without(&[1]).unwrap();
        assert!(matches!(
            differentiate(Operator::Grad, &s0, &partial),
            Err(Error::TargetNotFound(_))
        ));
    }

    #[test]
    fn curl_terms_follow_cross_product() {
        // curl(f e1) = (0, ∂3 f, -∂2 f)
        let t = Operator::Curl.terms(3, 0);
        assert_eq!(t, vec![(2, 1, -1), (1, 2, 1)]);
    }

    #[test]
    fn trace_rules() {
        let kv: KnotVector = "2; 0:3 1:3".parse().unwrap();
        let (s0, _) = line_spaces(&kv);
        assert!(s0.has_trace(0, 0, 0));
        assert!(!s0.has_trace(1, 0, 0));
        assert!(s0.has_trace(2, 0, 1));
    }
}
