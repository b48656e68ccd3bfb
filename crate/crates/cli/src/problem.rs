//! Problem files: JSON documents tagged by `kind`, validated before any
//! computation. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use iga_derham::benchmarks::{
    corner_refined_tiling, cylinder_sector_benchmark, l_shape_benchmark, square_benchmark_on, square_tiling, thick_l_benchmark, Benchmark,
    StraightGuide,
};
use iga_derham::tmesh::{TMeshLayout, Tiling};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemFile {
    CheckComplex(CheckComplexSpec),
    TmeshCheck(TmeshCheckSpec),
    SolveEig(EigSpec),
    SolveSource(SourceSpec),
    SolveWaveguide(StraightGuide),
    Convergence(ConvergenceSpec),
}

impl ProblemFile {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemFile::CheckComplex(_) => "check-complex",
            ProblemFile::TmeshCheck(_) => "tmesh-check",
            ProblemFile::SolveEig(_) => "solve-eig",
            ProblemFile::SolveSource(_) => "solve-source",
            ProblemFile::SolveWaveguide(_) => "solve-waveguide",
            ProblemFile::Convergence(_) => "convergence",
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let p: ProblemFile = serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("problem file: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Checks that do not need any mesh or matrix.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Invalid(m));
        match self {
            ProblemFile::CheckComplex(c) => {
                if c.degrees.is_empty() || c.degrees.len() > 3 || c.degrees.len() != c.elements.len() {
                    return bad("check-complex needs 1 to 3 degrees and as many element counts".into());
                }
                if c.degrees.iter().any(|&p| p == 0) || c.elements.iter().any(|&n| n == 0) {
                    return bad("degrees and element counts must be positive".into());
                }
            }
            ProblemFile::TmeshCheck(t) => {
                if t.degrees.iter().any(|&p| p == 0) {
                    return bad("degrees must be positive".into());
                }
            }
            ProblemFile::SolveEig(e) => {
                e.domain.check_mesh(&e.mesh, e.nz)?;
                if e.degree == 0 {
                    return bad("degree must be positive".into());
                }
                if let Some(t) = e.zero_tolerance {
                    if !(0.0..1.0).contains(&t) {
                        return bad(format!("zero tolerance {t} outside [0, 1)"));
                    }
                }
                if e.domain == Domain::CylinderSector {
                    return bad("the cylinder sector is a source problem".into());
                }
            }
            ProblemFile::SolveSource(s) => {
                if s.domain != Domain::CylinderSector {
                    return bad("source problems are defined on the cylinder sector".into());
                }
                s.domain.check_mesh(&s.mesh, Some(s.nz))?;
                if s.degree == 0 {
                    return bad("degree must be positive".into());
                }
            }
            ProblemFile::SolveWaveguide(g) => {
                if g.degree == 0 || g.elements.iter().any(|&n| n == 0) {
                    return bad("degree and element counts must be positive".into());
                }
                if !(g.width > 0.0 && g.height > 0.0 && g.length > 0.0) {
                    return bad("guide dimensions must be positive".into());
                }
                if g.problem.z1 != 0.0 || g.problem.z2 != g.length {
                    return bad("ports must sit at z = 0 and z = length".into());
                }
                if !(g.problem.omega > 0.0 && g.problem.mu0 > 0.0 && g.problem.eps0 > 0.0) {
                    return bad("frequency and material constants must be positive".into());
                }
            }
            ProblemFile::Convergence(c) => {
                if c.series.is_empty() || c.series.iter().any(|s| s.meshes.is_empty()) {
                    return bad("convergence needs at least one non-empty series".into());
                }
                let mut names: Vec<&str> = c.series.iter().map(|s| s.name.as_str()).collect();
                names.sort();
                names.dedup();
                if names.len() != c.series.len() || names.iter().any(|n| n.is_empty() || !n.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '-' || ch == '_')) {
                    return bad("series names must be distinct, non-empty and use [A-Za-z0-9_-]".into());
                }
                for s in &c.series {
                    for m in &s.meshes {
                        c.domain.check_mesh(m, c.nz)?;
                    }
                }
                if c.domain != Domain::CylinderSector && c.reference.is_none() {
                    return bad("eigenvalue convergence needs a reference value".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundarySpec {
    None,
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckComplexSpec {
    pub degrees: Vec<usize>,
    pub elements: Vec<usize>,
    #[serde(default = "default_boundary")]
    pub boundary: BoundarySpec,
}

fn default_boundary() -> BoundarySpec {
    BoundarySpec::None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmeshCheckSpec {
    /// Layout file, relative to the problem file.
    pub mesh: PathBuf,
    pub degrees: [usize; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// `(0,π)²`, fully Dirichlet.
    Square,
    /// Three-patch L-shape times `(0,1)`.
    ThickL,
    /// Three-patch planar L-shape.
    LShape,
    /// Three quarters of the unit cylinder.
    CylinderSector,
}

impl Domain {
    fn three_d(self) -> bool {
        matches!(self, Domain::ThickL | Domain::CylinderSector)
    }

    fn check_mesh(self, mesh: &MeshSpec, nz: Option<usize>) -> Result<(), CliError> {
        match (self.three_d(), nz) {
            (true, None) | (true, Some(0)) => return Err(CliError::Invalid("three-dimensional domains need nz > 0".into())),
            (false, Some(_)) => return Err(CliError::Invalid("nz only applies to three-dimensional domains".into())),
            _ => {}
        }
        match mesh {
            MeshSpec::Uniform { n } | MeshSpec::CornerRefined { n, .. } if *n == 0 => Err(CliError::Invalid("n must be positive".into())),
            _ => Ok(()),
        }
    }

    /// Benchmark on a tiling of each patch's parameter square.
    pub fn build(self, degree: usize, tiling: &Tiling, nz: Option<usize>) -> iga_derham::Result<Benchmark> {
        match self {
            Domain::Square => square_benchmark_on(degree, tiling),
            Domain::ThickL => thick_l_benchmark(degree, tiling, nz.unwrap_or(1)),
            Domain::LShape => l_shape_benchmark(degree, tiling),
            Domain::CylinderSector => cylinder_sector_benchmark(degree, tiling, nz.unwrap_or(1)),
        }
    }
}

/// Per-patch parametric mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeshSpec {
    /// `n x n` uniform grid.
    Uniform { n: usize },
    /// `n x n` grid refined `levels` times towards the parametric origin,
    /// with analysis-suitability restored after each step.
    CornerRefined { n: usize, levels: usize },
    /// The square benchmark's coarse T-mesh, split `refinements` times.
    SquareCoarse { refinements: usize },
    /// Layout file relative to the problem file.
    File { path: PathBuf },
}

impl MeshSpec {
    pub fn tiling(&self, degree: usize, base: &Path) -> Result<Tiling, CliError> {
        Ok(match self {
            MeshSpec::Uniform { n } => Tiling::uniform(*n, *n),
            MeshSpec::CornerRefined { n, levels } => corner_refined_tiling(*n, degree, *levels)?,
            MeshSpec::SquareCoarse { refinements } => square_tiling(*refinements),
            MeshSpec::File { path } => load_layout(&base.join(path))?.tiling(),
        })
    }
}

pub fn load_layout(path: &Path) -> Result<TMeshLayout, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    let layout: TMeshLayout = serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
    layout.validate()?;
    Ok(layout)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigSpec {
    pub domain: Domain,
    pub degree: usize,
    pub mesh: MeshSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nz: Option<usize>,
    /// Number of nonzero eigenvalues to report.
    pub eigencount: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub domain: Domain,
    pub degree: usize,
    pub mesh: MeshSpec,
    pub nz: usize,
    /// Gauss points added per direction for the singular data.
    #[serde(default = "default_extra")]
    pub quadrature_extra: usize,
}

fn default_extra() -> usize {
    6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub name: String,
    pub meshes: Vec<MeshSpec>,
}

/// Eigenvalue gap (relative to `reference`) or source error per mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub domain: Domain,
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nz: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(default = "default_extra")]
    pub quadrature_extra: usize,
    pub series: Vec<Series>,
}
