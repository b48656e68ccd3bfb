//! T-spline complexes on analysis-suitable T-meshes, in two dimensions and
//! extruded by a univariate spline space to three.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::parametric_complex::{exactness_report, BoundaryCondition, ExactnessReport, RestrictedComplex};
use num_rational::Rational64;

use crate::exact::unit_entries;
use crate::space::{differentiate_refined, BasisFunction, FormKind, FunctionSpace, Operator};
use crate::sparse::CsrMatrix;
use crate::tmesh::{Axis, Orientation, TMesh};
use crate::univariate::{KnotVector, Scaling};

/// The four meshes carrying the spaces of the planar complex.
#[derive(Clone, Debug)]
pub struct DerivedMeshes {
    /// Degrees `(p, p)`.
    pub m0: TMesh,
    /// Degrees `(p - 1, p)`.
    pub m11: TMesh,
    /// Degrees `(p, p - 1)`.
    pub m12: TMesh,
    /// Degrees `(p - 1, p - 1)`.
    pub m2: TMesh,
}

/// For odd `p` the derived meshes gain the first bay of the face extensions
/// of the T-junctions in the lowered direction; for even `p` they lose the
/// outermost index-space line on both sides of that direction.
pub fn derived_meshes(mesh: &TMesh) -> Result<DerivedMeshes> {
    let [p1, p2] = mesh.degrees;
    if p1 != p2 || p1 == 0 {
        return Err(Error::Unsupported(format!("degree pair ({p1}, {p2})")));
    }
    let p = p1;
    let (m11, m12, m2) = if p % 2 == 1 {
        let h = mesh.with_first_bay(Orientation::Horizontal);
        let v = mesh.with_first_bay(Orientation::Vertical);
        let both = h.with_first_bay(Orientation::Vertical);
        (h, v, both)
    } else {
        let h = mesh.strip_boundary(Axis::X);
        let v = mesh.strip_boundary(Axis::Y);
        let both = h.strip_boundary(Axis::Y);
        (h, v, both)
    };
    Ok(DerivedMeshes {
        m0: mesh.clone(),
        m11: m11.with_degrees([p - 1, p]),
        m12: m12.with_degrees([p, p - 1]),
        m2: m2.with_degrees([p - 1, p - 1]),
    })
}

impl DerivedMeshes {
    /// Whether all four meshes have the same extended Bézier mesh.
    pub fn extensions_agree(&self) -> Result<bool> {
        let e0 = self.m0.extended().bezier_faces()?;
        for m in [&self.m11, &self.m12, &self.m2] {
            if m.extended().bezier_faces()? != e0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Blending functions of a T-mesh for its degree pair.
pub fn tspline_functions(mesh: &TMesh, scaling: [Scaling; 2], component: usize) -> Result<Vec<BasisFunction>> {
    Ok(mesh
        .anchors()?
        .into_iter()
        .map(|a| {
            let [kx, ky] = mesh.local_knots(a);
            BasisFunction { knots: vec![kx, ky], scaling: scaling.to_vec(), component }
        })
        .collect())
}

/// Planar T-spline complex with both the curl-conforming and the
/// div-conforming one-forms.
#[derive(Clone, Debug)]
pub struct TSplineComplex {
    pub degree: usize,
    pub meshes: DerivedMeshes,
    pub y0: FunctionSpace,
    pub y1: FunctionSpace,
    pub y1_star: FunctionSpace,
    pub y2: FunctionSpace,
}

use Scaling::{B, D};

pub fn build_tspline_complex(mesh: &TMesh) -> Result<TSplineComplex> {
    let s = mesh.suitability();
    if !s.analysis_suitable {
        return Err(Error::NotAnalysisSuitable(format!(
            "{} crossing extension pairs",
            s.crossings.len()
        )));
    }
    let meshes = derived_meshes(mesh)?;
    let y0 = FunctionSpace::new(2, FormKind::H1, tspline_functions(&meshes.m0, [B, B], 0)?)?;
    let mut f1 = tspline_functions(&meshes.m11, [D, B], 0)?;
    f1.extend(tspline_functions(&meshes.m12, [B, D], 1)?);
    let y1 = FunctionSpace::new(2, FormKind::Hcurl, f1)?;
    let mut f1s = tspline_functions(&meshes.m12, [B, D], 0)?;
    f1s.extend(tspline_functions(&meshes.m11, [D, B], 1)?);
    let y1_star = FunctionSpace::new(2, FormKind::Hdiv, f1s)?;
    let y2 = FunctionSpace::new(2, FormKind::L2, tspline_functions(&meshes.m2, [D, D], 0)?)?;
    Ok(TSplineComplex { degree: mesh.degrees[0], meshes, y0, y1, y1_star, y2 })
}

impl TSplineComplex {
    pub fn dims(&self) -> [usize; 3] {
        [self.y0.len(), self.y1.len(), self.y2.len()]
    }

    pub fn grad(&self) -> Result<CsrMatrix<Rational64>> {
        differentiate_refined(Operator::Grad, &self.y0, &self.y1)
    }

    pub fn rot(&self) -> Result<CsrMatrix<Rational64>> {
        differentiate_refined(Operator::Rot, &self.y1, &self.y2)
    }

    pub fn rot_vec(&self) -> Result<CsrMatrix<Rational64>> {
        differentiate_refined(Operator::RotVec, &self.y0, &self.y1_star)
    }

    pub fn div(&self) -> Result<CsrMatrix<Rational64>> {
        differentiate_refined(Operator::Div, &self.y1_star, &self.y2)
    }

    fn report(&self, spaces: [&FunctionSpace; 3], ops: [CsrMatrix<Rational64>; 2], bc: &BoundaryCondition) -> Result<ExactnessReport> {
        let spaces: Vec<FunctionSpace> = spaces.iter().map(|s| (*s).clone()).collect();
        let r = RestrictedComplex::new(&spaces, &ops, &bc.faces(2))?;
        Ok(exactness_report(&r.dims(), &r.ops, bc.expected_betti(2)))
    }

    /// Exactness of `Y0 -> Y1 -> Y2` under grad and rot.
    pub fn verify_exactness(&self, bc: &BoundaryCondition) -> Result<ExactnessReport> {
        self.report([&self.y0, &self.y1, &self.y2], [self.grad()?, self.rot()?], bc)
    }

    /// Exactness of `Y0 -> Y1* -> Y2` under the vector rotation and div.
    pub fn verify_exactness_rotated(&self, bc: &BoundaryCondition) -> Result<ExactnessReport> {
        self.report([&self.y0, &self.y1_star, &self.y2], [self.rot_vec()?, self.div()?], bc)
    }

    /// Planar `j`-forms of the curl-conforming sequence.
    pub fn space(&self, j: usize) -> &FunctionSpace {
        match j {
            0 => &self.y0,
            1 => &self.y1,
            2 => &self.y2,
            _ => panic!("no {j}-forms in two dimensions"),
        }
    }
}

/// Three-dimensional complex: a planar T-spline complex times splines in the
/// third direction.
#[derive(Clone, Debug)]
pub struct ExtrudedComplex {
    pub planar: TSplineComplex,
    pub z: KnotVector,
    pub spaces: Vec<FunctionSpace>,
}

fn extrude(planar: &FunctionSpace, comps: &[(usize, usize)], z: &KnotVector, zs: Scaling, out: &mut Vec<BasisFunction>) {
    // comps maps planar component -> 3D component
    let zl = z.all_local_knots();
    for &(pc, c3) in comps {
        for kz in &zl {
            for f in planar.functions.iter().filter(|f| f.component == pc) {
                let mut knots = f.knots.clone();
                knots.push(kz.clone());
                let mut scaling = f.scaling.clone();
                scaling.push(zs);
                out.push(BasisFunction { knots, scaling, component: c3 });
            }
        }
    }
}

pub fn extrude_complex(planar: &TSplineComplex, z: &KnotVector) -> Result<ExtrudedComplex> {
    if z.degree() != planar.degree {
        return Err(Error::Unsupported(format!(
            "degree {} in the third direction with planar degree {}",
            z.degree(),
            planar.degree
        )));
    }
    let zd = z.derived()?;
    let mut x0 = Vec::new();
    extrude(&planar.y0, &[(0, 0)], z, B, &mut x0);
    let mut x1 = Vec::new();
    extrude(&planar.y1, &[(0, 0), (1, 1)], z, B, &mut x1);
    extrude(&planar.y0, &[(0, 2)], &zd, D, &mut x1);
    let mut x2 = Vec::new();
    extrude(&planar.y1_star, &[(0, 0), (1, 1)], &zd, D, &mut x2);
    extrude(&planar.y2, &[(0, 2)], z, B, &mut x2);
    let mut x3 = Vec::new();
    extrude(&planar.y2, &[(0, 0)], &zd, D, &mut x3);
    let spaces = vec![
        FunctionSpace::new(3, FormKind::H1, x0)?,
        FunctionSpace::new(3, FormKind::Hcurl, x1)?,
        FunctionSpace::new(3, FormKind::Hdiv, x2)?,
        FunctionSpace::new(3, FormKind::L2, x3)?,
    ];
    Ok(ExtrudedComplex { planar: planar.clone(), z: z.clone(), spaces })
}

impl ExtrudedComplex {
    pub fn dims(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.len()).collect()
    }

    pub fn diff_matrix(&self, j: usize) -> Result<CsrMatrix<Rational64>> {
        differentiate_refined(Operator::standard(3, j), &self.spaces[j], &self.spaces[j + 1])
    }

    pub fn verify_exactness(&self, bc: &BoundaryCondition) -> Result<ExactnessReport> {
        let ops: Vec<_> = (0..3).map(|j| self.diff_matrix(j)).collect::<Result<_>>()?;
        let r = RestrictedComplex::new(&self.spaces, &ops, &bc.faces(3))?;
        Ok(exactness_report(&r.dims(), &r.ops, bc.expected_betti(3)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComplexSummary {
    pub degree: usize,
    pub dims: [usize; 3],
    pub dims_rotated: [usize; 3],
    pub extensions_agree: bool,
    /// Whether all four operator matrices have entries in {-1, 0, 1}. Local
    /// knot vectors of a derivative need not appear in the target space, in
    /// which case the derivative is a rational combination of targets.
    pub unit_entries: bool,
    pub exact: ExactnessReport,
    pub exact_with_boundary: ExactnessReport,
    pub exact_rotated: ExactnessReport,
}

pub fn summarize(c: &TSplineComplex) -> Result<ComplexSummary> {
    Ok(ComplexSummary {
        degree: c.degree,
        dims: c.dims(),
        dims_rotated: [c.y0.len(), c.y1_star.len(), c.y2.len()],
        extensions_agree: c.meshes.extensions_agree()?,
        unit_entries: [c.grad()?, c.rot()?, c.rot_vec()?, c.div()?].iter().all(unit_entries),
        exact: c.verify_exactness(&BoundaryCondition::None)?,
        exact_with_boundary: c.verify_exactness(&BoundaryCondition::Full)?,
        exact_rotated: c.verify_exactness_rotated(&BoundaryCondition::None)?,
    })
}
