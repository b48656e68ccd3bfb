//! The subcommands as pure functions from inputs to output files.

use std::path::Path;

use iga_derham::benchmarks::{cylinder_exact, run_straight_guide, solve_curl_free_source, StraightGuide};
use iga_derham::parametric_complex::{build_complex, verify_exactness, BoundaryCondition, ExactnessReport, TensorMesh};
use iga_derham::solvers::{format_value, solve_generalized_eig_with, ConvergenceTable, ZERO_TOLERANCE};
use iga_derham::tmesh::{Orientation, TMesh, TMeshCensus, TMeshLayout};
use iga_derham::tspline_complex::{build_tspline_complex, summarize, ComplexSummary};
use iga_derham::univariate::{format_knot, Knot, LocalKnotVector};
use iga_derham::KnotVector;
use serde::Serialize;

use crate::problem::{BoundarySpec, CheckComplexSpec, ConvergenceSpec, Domain, EigSpec, MeshSpec, SourceSpec};
use crate::CliError;

/// Files to write into the output directory, and a one-paragraph summary
/// for the terminal.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub summary: String,
}

impl Outcome {
    fn json<T: Serialize>(name: &str, value: &T) -> Result<(String, String), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invalid(e.to_string()))?;
        text.push('\n');
        Ok((name.to_string(), text))
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Invalid(format!("{}: {e}", dir.display())))?;
        for (name, text) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, t)| t.as_str())
    }
}

#[derive(Serialize)]
struct ComplexReport {
    degrees: Vec<usize>,
    elements: Vec<usize>,
    boundary: BoundarySpec,
    dims: Vec<usize>,
    exactness: ExactnessReport,
}

pub fn check_complex(spec: &CheckComplexSpec) -> Result<Outcome, CliError> {
    let kvs = spec.degrees.iter().zip(&spec.elements).map(|(&p, &n)| KnotVector::uniform(p, n)).collect();
    let c = build_complex(&TensorMesh::new(kvs)?)?;
    let bc = match spec.boundary {
        BoundarySpec::None => BoundaryCondition::None,
        BoundarySpec::Full => BoundaryCondition::Full,
    };
    let exactness = verify_exactness(&c, &bc)?;
    let summary = format!("dims {:?} ranks {:?} betti {:?} exact {}", exactness.dims, exactness.ranks, exactness.betti, exactness.exact);
    let report = ComplexReport {
        degrees: spec.degrees.clone(),
        elements: spec.elements.clone(),
        boundary: spec.boundary,
        dims: c.dims(),
        exactness,
    };
    Ok(Outcome { files: vec![Outcome::json("report.json", &report)?], summary })
}

fn knots(v: &LocalKnotVector) -> Vec<String> {
    v.knots().iter().map(|&k| format_knot(k)).collect()
}

#[derive(Serialize)]
struct ExtensionReport {
    orientation: Orientation,
    /// Coordinates of the T-junction.
    junction: [String; 2],
    /// Coordinate of the line carrying the extension.
    line: String,
    /// Face and edge parts as coordinate intervals along the line.
    face: [String; 2],
    edge: [String; 2],
}

#[derive(Serialize)]
struct AnchorReport {
    point: [f64; 2],
    knots: [Vec<String>; 2],
}

#[derive(Serialize)]
struct TMeshReport {
    degrees: [usize; 2],
    census: TMeshCensus,
    euler_holds: bool,
    extensions: Vec<ExtensionReport>,
    analysis_suitable: bool,
    strongly_suitable: bool,
    /// Index pairs into `extensions`.
    crossings: Vec<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    anchors: Option<Vec<AnchorReport>>,
}

pub fn tmesh_check(layout: &TMeshLayout, degrees: [usize; 2], with_anchors: bool) -> Result<Outcome, CliError> {
    let mesh = TMesh::from_layout(layout, degrees)?;
    let census = mesh.census()?;
    let s = mesh.suitability();
    let interval = |a: Knot, b: Knot| [format_knot(a), format_knot(b)];
    let extensions = mesh
        .extensions()
        .into_iter()
        .map(|e| {
            let [i, j] = e.junction.vertex;
            let (line, face, edge) = match e.junction.orientation {
                Orientation::Horizontal => (mesh.y(e.line), interval(mesh.x(e.face[0]), mesh.x(e.face[1])), interval(mesh.x(e.edge[0]), mesh.x(e.edge[1]))),
                Orientation::Vertical => (mesh.x(e.line), interval(mesh.y(e.face[0]), mesh.y(e.face[1])), interval(mesh.y(e.edge[0]), mesh.y(e.edge[1]))),
            };
            ExtensionReport {
                orientation: e.junction.orientation,
                junction: [format_knot(mesh.x(i)), format_knot(mesh.y(j))],
                line: format_knot(line),
                face,
                edge,
            }
        })
        .collect::<Vec<_>>();
    let anchors = if with_anchors {
        Some(
            mesh.anchors()?
                .into_iter()
                .map(|a| {
                    let [kx, ky] = mesh.local_knots(a);
                    AnchorReport { point: mesh.anchor_point(a), knots: [knots(&kx), knots(&ky)] }
                })
                .collect(),
        )
    } else {
        None
    };
    let summary = format!(
        "{} faces, {} T-junctions, analysis-suitable {}, strongly {}",
        census.faces - census.zero_measure_faces,
        extensions.len(),
        s.analysis_suitable,
        s.strongly_suitable
    );
    let report = TMeshReport {
        degrees,
        euler_holds: census.euler_characteristic == 1,
        census,
        extensions,
        analysis_suitable: s.analysis_suitable,
        strongly_suitable: s.strongly_suitable,
        crossings: s.crossings,
        anchors,
    };
    Ok(Outcome { files: vec![Outcome::json("report.json", &report)?], summary })
}

pub fn tmesh_complex(layout: &TMeshLayout, degree: usize) -> Result<Outcome, CliError> {
    let mesh = TMesh::from_layout(layout, [degree, degree])?;
    if !mesh.suitability().strongly_suitable {
        return Err(CliError::Invalid("the T-spline complex needs a strongly analysis-suitable mesh".into()));
    }
    let c = build_tspline_complex(&mesh)?;
    let s: ComplexSummary = summarize(&c)?;
    let summary = format!("dims {:?} exact {} (boundary {}) unit entries {}", s.dims, s.exact.exact, s.exact_with_boundary.exact, s.unit_entries);
    Ok(Outcome { files: vec![Outcome::json("report.json", &s)?], summary })
}

#[derive(Serialize)]
pub struct EigReport {
    pub domain: Domain,
    pub degree: usize,
    /// Dimension of the glued edge space.
    pub dofs: usize,
    /// Unknowns left after the Dirichlet conditions.
    pub free_dofs: usize,
    pub zero_count: usize,
    pub gradient_rank: Option<usize>,
    pub threshold: f64,
    pub eigenvalues: Vec<f64>,
    pub max_residual: f64,
}

pub fn solve_eig(spec: &EigSpec, base: &Path, tol: Option<f64>) -> Result<Outcome, CliError> {
    let tiling = spec.mesh.tiling(spec.degree, base)?;
    let b = spec.domain.build(spec.degree, &tiling, spec.nz)?;
    let r = b.system()?.reduced();
    let zt = tol.or(spec.zero_tolerance).unwrap_or(ZERO_TOLERANCE);
    let e = solve_generalized_eig_with(&r.stiffness, &r.mass, spec.eigencount, zt)?;
    let eigenvalues: Vec<f64> = e.nonzero().iter().take(spec.eigencount).copied().collect();
    // the exact rank is cheap on small meshes and a useful cross-check
    let gradient_rank = if e.dofs() <= 2000 { Some(b.gradient_rank()) } else { None };
    let report = EigReport {
        domain: spec.domain,
        degree: spec.degree,
        dofs: b.glue.dims[1],
        free_dofs: e.dofs(),
        zero_count: e.zero_count,
        gradient_rank,
        threshold: e.threshold,
        eigenvalues,
        max_residual: e.max_residual,
    };
    let mut csv = String::from("index,value\n");
    for (i, v) in report.eigenvalues.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, format_value(*v)));
    }
    let summary = format!(
        "{} dofs ({} free), {} zero eigenvalues, first nonzero {:?}",
        report.dofs,
        report.free_dofs,
        report.zero_count,
        report.eigenvalues.iter().take(5).collect::<Vec<_>>()
    );
    Ok(Outcome { files: vec![Outcome::json("report.json", &report)?, ("eigenvalues.csv".into(), csv)], summary })
}

#[derive(Serialize)]
struct SourceReport {
    dofs: usize,
    free_dofs: usize,
    error_l2: f64,
    error_curl: f64,
    error_hcurl: f64,
    relative: f64,
}

fn source_run(domain: Domain, degree: usize, mesh: &MeshSpec, nz: usize, extra: usize, base: &Path) -> Result<SourceReport, CliError> {
    let tiling = mesh.tiling(degree, base)?;
    let b = domain.build(degree, &tiling, Some(nz))?;
    let r = solve_curl_free_source(&b, &cylinder_exact, extra)?;
    Ok(SourceReport {
        dofs: b.glue.dims[1],
        free_dofs: r.dofs,
        error_l2: r.error.value,
        error_curl: r.error.derivative,
        error_hcurl: r.error.total(),
        relative: r.relative,
    })
}

pub fn solve_source(spec: &SourceSpec, base: &Path) -> Result<Outcome, CliError> {
    let r = source_run(spec.domain, spec.degree, &spec.mesh, spec.nz, spec.quadrature_extra, base)?;
    let summary = format!("{} free dofs, H(curl) error {:e} (relative {:e})", r.free_dofs, r.error_hcurl, r.relative);
    Ok(Outcome { files: vec![Outcome::json("report.json", &r)?], summary })
}

#[derive(Serialize)]
struct WaveguideReport {
    dofs: usize,
    k10_squared: f64,
    beta: f64,
    r: [f64; 2],
    t: [f64; 2],
    abs_r: f64,
    abs_t: f64,
}

pub fn solve_waveguide(guide: &StraightGuide) -> Result<Outcome, CliError> {
    let run = run_straight_guide(guide)?;
    let s = run.scattering;
    let report = WaveguideReport {
        dofs: run.dofs,
        k10_squared: run.mode.k10_squared,
        beta: s.beta,
        r: [s.r.re, s.r.im],
        t: [s.t.re, s.t.im],
        abs_r: s.r.norm(),
        abs_t: s.t.norm(),
    };
    let summary = format!("k10² {:.10} |R| {:e} |T| {:.12}", report.k10_squared, report.abs_r, report.abs_t);
    Ok(Outcome { files: vec![Outcome::json("report.json", &report)?], summary })
}

#[derive(Serialize)]
pub struct SeriesReport {
    pub name: String,
    /// Free dofs and metric per mesh.
    pub rows: Vec<(usize, f64)>,
    /// First eigenvalue per mesh, for eigenvalue studies.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub eigenvalues: Vec<f64>,
    pub decreasing: bool,
}

/// Per series: free dofs against the relative gap of the first eigenvalue,
/// or against the H(curl) error for the source problem.
pub fn convergence(spec: &ConvergenceSpec, base: &Path, tol: Option<f64>) -> Result<(Outcome, Vec<SeriesReport>), CliError> {
    let mut reports = Vec::new();
    let mut files = Vec::new();
    for (k, series) in spec.series.iter().enumerate() {
        let mut table = ConvergenceTable::default();
        let mut eigenvalues = Vec::new();
        for mesh in &series.meshes {
            if spec.domain == Domain::CylinderSector {
                let r = source_run(spec.domain, spec.degree, mesh, spec.nz.unwrap_or(1), spec.quadrature_extra, base)?;
                table.push(r.free_dofs, r.error_hcurl);
            } else {
                let reference = spec.reference.ok_or_else(|| CliError::Invalid("missing reference value".into()))?;
                let tiling = mesh.tiling(spec.degree, base)?;
                let b = spec.domain.build(spec.degree, &tiling, spec.nz)?;
                let r = b.system()?.reduced();
                let e = solve_generalized_eig_with(&r.stiffness, &r.mass, 0, tol.unwrap_or(ZERO_TOLERANCE))?;
                let first = *e.nonzero().first().ok_or_else(|| CliError::Numerical("no nonzero eigenvalue".into()))?;
                eigenvalues.push(first);
                table.push(e.dofs(), ((first - reference) / reference).abs());
            }
        }
        let csv = table.to_csv();
        if k == 0 {
            files.push(("convergence.csv".to_string(), csv.clone()));
        }
        files.push((format!("convergence_{}.csv", series.name), csv));
        reports.push(SeriesReport { name: series.name.clone(), decreasing: table.is_decreasing(), rows: table.rows, eigenvalues });
    }
    let summary = reports
        .iter()
        .map(|s| format!("{}: {:?} decreasing {}", s.name, s.rows, s.decreasing))
        .collect::<Vec<_>>()
        .join("\n");
    files.insert(0, Outcome::json("report.json", &reports)?);
    Ok((Outcome { files, summary }, reports))
}
