//! Tensor-product spline complexes on the parametric domain `[0,1]^d`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{exact_rank, sign_equivalent, ExactEntries};
use crate::space::{differentiate, BasisFunction, FormKind, FunctionSpace, Operator};
use crate::sparse::{CsrMatrix, Scalar};
use crate::univariate::{KnotVector, Scaling};

/// Tensor mesh given by one open knot vector per direction.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorMesh {
    pub kvs: Vec<KnotVector>,
}

impl TensorMesh {
    pub fn new(kvs: Vec<KnotVector>) -> Result<Self> {
        if kvs.is_empty() || kvs.len() > 3 {
            return Err(Error::Unsupported(format!("dimension {}", kvs.len())));
        }
        Ok(TensorMesh { kvs })
    }

    pub fn uniform(d: usize, degree: usize, elements: usize) -> Self {
        TensorMesh { kvs: vec![KnotVector::uniform(degree, elements); d] }
    }

    pub fn dim(&self) -> usize {
        self.kvs.len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.kvs.iter().map(|k| k.degree()).collect()
    }

    /// Number of index-space lines per direction.
    pub fn line_counts(&self) -> Vec<usize> {
        self.kvs.iter().map(|k| k.mesh_lines().len()).collect()
    }

    /// Counts of index-space vertices, edges, faces and cells (up to the
    /// dimension), including zero-measure ones, and how many of each have
    /// zero measure.
    pub fn census(&self) -> MeshCensus {
        let lines: Vec<Vec<_>> = self.kvs.iter().map(|k| k.mesh_lines()).collect();
        let d = self.dim();
        let mut total = vec![0usize; d + 1];
        let mut degenerate = vec![0usize; d + 1];
        for s in 0..(1usize << d) {
            let dirs: Vec<usize> = (0..d).filter(|i| s >> i & 1 == 1).collect();
            for base in cell_bases(&lines.iter().map(|l| l.len()).collect::<Vec<_>>(), &dirs, false) {
                total[dirs.len()] += 1;
                if dirs.iter().any(|&i| lines[i][base[i]] == lines[i][base[i] + 1]) {
                    degenerate[dirs.len()] += 1;
                }
            }
        }
        MeshCensus { entities: total, zero_measure: degenerate }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MeshCensus {
    /// Entities by dimension: vertices, edges, faces, cells.
    pub entities: Vec<usize>,
    pub zero_measure: Vec<usize>,
}

/// One scalar tensor-product factor of a spline space.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineSpace {
    pub kvs: Vec<KnotVector>,
    pub scaling: Vec<Scaling>,
    pub component: usize,
}

impl SplineSpace {
    pub fn sizes(&self) -> Vec<usize> {
        self.kvs.iter().map(|k| k.dim()).collect()
    }

    pub fn len(&self) -> usize {
        self.sizes().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Functions in lexicographic order with the first direction fastest.
    pub fn functions(&self) -> Vec<BasisFunction> {
        let locals: Vec<_> = self.kvs.iter().map(|k| k.all_local_knots()).collect();
        multi_indices(&self.sizes())
            .into_iter()
            .map(|idx| BasisFunction {
                knots: idx.iter().enumerate().map(|(d, &i)| locals[d][i].clone()).collect(),
                scaling: self.scaling.clone(),
                component: self.component,
            })
            .collect()
    }
}

/// Multi-indices with the first index fastest.
pub fn multi_indices(sizes: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(total);
    for mut flat in 0..total {
        let mut idx = Vec::with_capacity(sizes.len());
        for &n in sizes {
            idx.push(flat % n);
            flat /= n;
        }
        out.push(idx);
    }
    out
}

/// The spline complex `X^0 -> ... -> X^d` on a tensor mesh.
#[derive(Clone, Debug)]
pub struct DiscreteComplex {
    pub mesh: TensorMesh,
    /// `spaces[j]` lists the tensor components of the `j`-forms.
    pub spaces: Vec<Vec<SplineSpace>>,
}

/// Which directions use the derived knot vector in component `c` of the
/// `j`-forms.
fn derived_directions(d: usize, j: usize, c: usize) -> Vec<bool> {
    match FormKind::of(d, j) {
        FormKind::H1 => vec![false; d],
        FormKind::L2 => vec![true; d],
        FormKind::Hcurl => (0..d).map(|i| i == c).collect(),
        FormKind::Hdiv => (0..d).map(|i| i != c).collect(),
    }
}

pub fn build_complex(mesh: &TensorMesh) -> Result<DiscreteComplex> {
    let d = mesh.dim();
    let derived: Vec<KnotVector> = mesh.kvs.iter().map(|k| k.derived()).collect::<Result<_>>()?;
    let mut spaces = Vec::with_capacity(d + 1);
    for j in 0..=d {
        let kind = FormKind::of(d, j);
        let comps = (0..kind.components(d))
            .map(|c| {
                let dd = derived_directions(d, j, c);
                SplineSpace {
                    kvs: (0..d)
                        .map(|i| if dd[i] { derived[i].clone() } else { mesh.kvs[i].clone() })
                        .collect(),
                    scaling: dd.iter().map(|&x| if x { Scaling::D } else { Scaling::B }).collect(),
                    component: c,
                }
            })
            .collect();
        spaces.push(comps);
    }
    Ok(DiscreteComplex { mesh: mesh.clone(), spaces })
}

impl DiscreteComplex {
    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn space_dim(&self, j: usize) -> usize {
        self.spaces[j].iter().map(|s| s.len()).sum()
    }

    pub fn dims(&self) -> Vec<usize> {
        (0..=self.dim()).map(|j| self.space_dim(j)).collect()
    }

    fn offsets(&self, j: usize) -> Vec<usize> {
        let mut off = vec![0];
        for s in &self.spaces[j] {
            off.push(off.last().unwrap() + s.len());
        }
        off
    }

    /// All functions of the `j`-forms, components concatenated.
    pub fn function_space(&self, j: usize) -> FunctionSpace {
        let funcs = self.spaces[j].iter().flat_map(|s| s.functions()).collect();
        FunctionSpace::new(self.dim(), FormKind::of(self.dim(), j), funcs)
            .expect("tensor spaces have distinct functions")
    }

    /// Exterior derivative on the `j`-forms built from Kronecker products of
    /// univariate derivative matrices.
    pub fn diff_matrix(&self, j: usize) -> Result<CsrMatrix<i64>> {
        let d = self.dim();
        if j >= d {
            return Err(Error::Unsupported(format!("no derivative of {j}-forms in dimension {d}")));
        }
        let op = Operator::standard(d, j);
        let src_off = self.offsets(j);
        let tgt_off = self.offsets(j + 1);
        let mut trip = Vec::new();
        for (c, src) in self.spaces[j].iter().enumerate() {
            for (k, dir, sign) in op.terms(d, c) {
                // factors listed from the last direction (slowest) to the first
                let mut block = CsrMatrix::from_triplets(1, 1, &[(0, 0, sign)]);
                for i in (0..d).rev() {
                    let factor = if i == dir {
                        let kv = &src.kvs[i];
                        CsrMatrix::from_triplets(kv.dim() - 1, kv.dim(), &kv.derivative_triplets())
                    } else {
                        identity(src.kvs[i].dim())
                    };
                    block = kron(&block, &factor);
                }
                for (r, col, v) in block.triplets() {
                    trip.push((tgt_off[k] + r, src_off[c] + col, v));
                }
            }
        }
        Ok(CsrMatrix::from_triplets(self.space_dim(j + 1), self.space_dim(j), &trip))
    }

    /// Same operator obtained by matching local knot vectors.
    pub fn diff_matrix_by_matching(&self, j: usize) -> Result<CsrMatrix<i64>> {
        differentiate(
            Operator::standard(self.dim(), j),
            &self.function_space(j),
            &self.function_space(j + 1),
        )
    }

    pub fn eval_field(&self, j: usize, coeffs: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let space = self.function_space(j);
        if coeffs.len() != space.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a space of dimension {}",
                coeffs.len(),
                space.len()
            )));
        }
        if let Some(&bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfDomain(bad));
        }
        let mut out = vec![0.0; space.components()];
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let f = &space.functions[i];
            let sup = f.support_f64();
            if x.iter().zip(&sup).any(|(&xi, &(a, b))| xi < a || xi > b) {
                continue;
            }
            out[f.component] += c * f.eval_scalar(x);
        }
        Ok(out)
    }

    /// Subcomplex with vanishing traces on the listed faces `(dir, side)`.
    pub fn restrict_boundary(&self, faces: &[(usize, usize)]) -> Result<RestrictedComplex> {
        let full: Vec<FunctionSpace> = (0..=self.dim()).map(|j| self.function_space(j)).collect();
        let ops: Vec<CsrMatrix<i64>> = (0..self.dim()).map(|j| self.diff_matrix(j)).collect::<Result<_>>()?;
        RestrictedComplex::new(&full, &ops, faces)
    }
}

pub fn identity(n: usize) -> CsrMatrix<i64> {
    let t: Vec<_> = (0..n).map(|i| (i, i, 1)).collect();
    CsrMatrix::from_triplets(n, n, &t)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CsrMatrix<i64>, b: &CsrMatrix<i64>) -> CsrMatrix<i64> {
    let mut t = Vec::with_capacity(a.nnz() * b.nnz());
    for (ra, ca, va) in a.triplets() {
        for (rb, cb, vb) in b.triplets() {
            t.push((ra * b.nrows() + rb, ca * b.ncols() + cb, va * vb));
        }
    }
    CsrMatrix::from_triplets(a.nrows() * b.nrows(), a.ncols() * b.ncols(), &t)
}

/// A complex with some functions removed to impose boundary conditions.
#[derive(Clone, Debug)]
pub struct RestrictedComplex<T = i64> {
    pub kept: Vec<Vec<usize>>,
    pub spaces: Vec<FunctionSpace>,
    pub ops: Vec<CsrMatrix<T>>,
}

impl<T: Scalar> RestrictedComplex<T> {
    pub fn new(spaces: &[FunctionSpace], ops: &[CsrMatrix<T>], faces: &[(usize, usize)]) -> Result<Self> {
        let mut kept = Vec::new();
        let mut out = Vec::new();
        for s in spaces {
            let removed = s.boundary_functions(faces);
            let mut flag = vec![true; s.len()];
            for &i in &removed {
                flag[i] = false;
            }
            kept.push((0..s.len()).filter(|&i| flag[i]).collect::<Vec<_>>());
            out.push(s.without(&removed)?);
        }
        let ops = ops.iter().enumerate().map(|(j, d)| d.select(&kept[j + 1], &kept[j])).collect();
        Ok(RestrictedComplex { kept, spaces: out, ops })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.len()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactnessReport {
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    /// Dimensions of the discrete cohomology groups.
    pub betti: Vec<usize>,
    /// Whether each composition `D_{j+1} D_j` vanishes identically.
    pub compositions_vanish: Vec<bool>,
    pub expected_betti: Option<Vec<usize>>,
    pub exact: bool,
}

/// Ranks and cohomology of the chain of integer operators.
pub fn exactness_report<T: ExactEntries>(dims: &[usize], ops: &[CsrMatrix<T>], expected: Option<Vec<usize>>) -> ExactnessReport {
    let ranks: Vec<usize> = ops.iter().map(exact_rank).collect();
    let n = dims.len();
    let betti = (0..n)
        .map(|j| {
            let out = if j < ops.len() { ranks[j] } else { 0 };
            let inc = if j > 0 { ranks[j - 1] } else { 0 };
            dims[j] - out - inc
        })
        .collect::<Vec<_>>();
    let compositions_vanish = ops.windows(2).map(|w| w[1].matmul(&w[0]).is_zero()).collect::<Vec<_>>();
    let exact = compositions_vanish.iter().all(|&b| b)
        && expected.as_ref().map(|e| *e == betti).unwrap_or(true);
    ExactnessReport { dims: dims.to_vec(), ranks, betti, compositions_vanish, expected_betti: expected, exact }
}

/// Boundary conditions for exactness checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    None,
    Full,
    Faces(Vec<(usize, usize)>),
}

impl BoundaryCondition {
    pub fn faces(&self, d: usize) -> Vec<(usize, usize)> {
        match self {
            BoundaryCondition::None => vec![],
            BoundaryCondition::Full => (0..d).flat_map(|i| [(i, 0), (i, 1)]).collect(),
            BoundaryCondition::Faces(f) => f.clone(),
        }
    }

    /// Cohomology of a contractible domain without or with full boundary
    /// conditions.
    pub fn expected_betti(&self, d: usize) -> Option<Vec<usize>> {
        let mut b = vec![0; d + 1];
        match self {
            BoundaryCondition::None => b[0] = 1,
            BoundaryCondition::Full => b[d] = 1,
            BoundaryCondition::Faces(f) if f.is_empty() => b[0] = 1,
            BoundaryCondition::Faces(_) => return None,
        }
        Some(b)
    }
}

pub fn verify_exactness(complex: &DiscreteComplex, bc: &BoundaryCondition) -> Result<ExactnessReport> {
    let d = complex.dim();
    let r = complex.restrict_boundary(&bc.faces(d))?;
    Ok(exactness_report(&r.dims(), &r.ops, bc.expected_betti(d)))
}

/// Index-space cells spanning the directions `dirs`, first direction fastest.
/// With `interior`, the non-spanning directions skip the outermost lines.
fn cell_bases(lines: &[usize], dirs: &[usize], interior: bool) -> Vec<Vec<usize>> {
    let d = lines.len();
    let sizes: Vec<usize> = (0..d)
        .map(|i| {
            if dirs.contains(&i) {
                lines[i] - 1
            } else if interior {
                lines[i].saturating_sub(2)
            } else {
                lines[i]
            }
        })
        .collect();
    let shift: Vec<usize> =
        (0..d).map(|i| usize::from(interior && !dirs.contains(&i))).collect();
    multi_indices(&sizes)
        .into_iter()
        .map(|mut b| {
            for i in 0..d {
                b[i] += shift[i];
            }
            b
        })
        .collect()
}

/// Oriented boundary of the cubical complex between cell types `from` (k
/// spanning directions) and the `(k-1)`-cells, restricted to the listed
/// cell orders.
fn boundary_matrix(
    rows: &[(Vec<usize>, Vec<usize>)],
    cols: &[(Vec<usize>, Vec<usize>)],
) -> CsrMatrix<i64> {
    let index: HashMap<&(Vec<usize>, Vec<usize>), usize> = rows.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut trip = Vec::new();
    for (ci, (dirs, base)) in cols.iter().enumerate() {
        for (m, &s) in dirs.iter().enumerate() {
            let sign = if m % 2 == 0 { 1 } else { -1 };
            let face_dirs: Vec<usize> = dirs.iter().copied().filter(|&x| x != s).collect();
            let mut hi = base.clone();
            hi[s] += 1;
            if let Some(&r) = index.get(&(face_dirs.clone(), hi)) {
                trip.push((r, ci, sign));
            }
            if let Some(&r) = index.get(&(face_dirs.clone(), base.clone())) {
                trip.push((r, ci, -sign));
            }
        }
    }
    CsrMatrix::from_triplets(rows.len(), cols.len(), &trip)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatorCorrespondence {
    pub form: usize,
    /// Equal to the incidence matrix without any sign changes.
    pub equal: bool,
    /// Equal up to a sign per row and per column.
    pub sign_equivalent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IncidenceReport {
    pub parity: String,
    pub operators: Vec<OperatorCorrespondence>,
}

impl IncidenceReport {
    pub fn holds(&self) -> bool {
        self.operators.iter().all(|o| o.sign_equivalent)
            && (self.parity != "odd" || self.operators.first().map(|o| o.equal).unwrap_or(true))
    }
}

/// Compares the spline operators with the (co)boundary operators of the
/// index-space mesh: for odd degrees the `j`-forms sit on `j`-cells, for even
/// degrees on interior `(d - j)`-cells.
pub fn entity_correspondence(complex: &DiscreteComplex) -> Result<IncidenceReport> {
    let d = complex.dim();
    let degs = complex.mesh.degrees();
    let odd = degs.iter().all(|p| p % 2 == 1);
    let even = degs.iter().all(|p| p % 2 == 0);
    if !odd && !even {
        return Err(Error::Unsupported("mixed degree parities".into()));
    }
    let lines = complex.mesh.line_counts();
    // cells carrying the j-forms, in the order of the spline functions
    let cells_of = |j: usize| -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut out = Vec::new();
        for c in 0..FormKind::of(d, j).components(d) {
            let der = derived_directions(d, j, c);
            let dirs: Vec<usize> = if odd {
                (0..d).filter(|&i| der[i]).collect()
            } else {
                (0..d).filter(|&i| !der[i]).collect()
            };
            for b in cell_bases(&lines, &dirs, even) {
                out.push((dirs.clone(), b));
            }
        }
        out
    };
    let mut ops = Vec::new();
    for j in 0..d {
        let dj = complex.diff_matrix(j)?;
        let src = cells_of(j);
        let tgt = cells_of(j + 1);
        if src.len() != dj.ncols() || tgt.len() != dj.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "entity counts {}x{} against operator {}x{}",
                tgt.len(),
                src.len(),
                dj.nrows(),
                dj.ncols()
            )));
        }
        let inc = if odd {
            boundary_matrix(&src, &tgt).transpose()
        } else {
            boundary_matrix(&tgt, &src)
        };
        ops.push(OperatorCorrespondence {
            form: j,
            equal: inc == dj,
            sign_equivalent: sign_equivalent(&dj, &inc).is_some(),
        });
    }
    Ok(IncidenceReport { parity: if odd { "odd" } else { "even" }.into(), operators: ops })
}
