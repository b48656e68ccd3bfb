use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use iga_derham_cli::commands::{self, Outcome};
use iga_derham_cli::problem::{load_layout, BoundarySpec, CheckComplexSpec, ProblemFile};
use iga_derham_cli::CliError;

#[derive(Parser)]
#[command(name = "derham", version, about = "Spline De Rham complexes, T-meshes and Maxwell benchmarks")]
struct Cli {
    /// Directory for reports and tables.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for assembly; solves always run on one thread.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Zero-eigenvalue tolerance relative to the largest eigenvalue.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ranks and cohomology of a tensor-product spline complex.
    CheckComplex {
        /// Degree per direction, e.g. `3,3,3`.
        #[arg(long, value_delimiter = ',')]
        degrees: Vec<usize>,
        /// Uniform element count per direction.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Impose homogeneous boundary conditions on every face.
        #[arg(long)]
        full_boundary: bool,
        /// A `check-complex` problem file instead of the flags.
        #[arg(long, conflicts_with_all = ["degrees", "n"])]
        problem: Option<PathBuf>,
    },
    /// T-mesh analysis.
    Tmesh {
        #[command(subcommand)]
        action: TmeshCommand,
    },
    /// Maxwell eigenvalues on a square, L-shaped or thick-L domain.
    SolveEig(ProblemArg),
    /// Curl-curl source problem on the cylinder sector with its H(curl) error.
    SolveSource(ProblemArg),
    /// Reflection and transmission of a straight rectangular guide.
    SolveWaveguide(ProblemArg),
    /// Error or eigenvalue gap over series of meshes.
    Convergence(ProblemArg),
}

#[derive(Subcommand)]
enum TmeshCommand {
    /// Census, T-junctions, extensions and suitability verdicts.
    Check {
        /// Layout file of the mesh.
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Two degrees, e.g. `3,3`.
        #[arg(long, value_delimiter = ',')]
        degrees: Vec<usize>,
        /// Also list anchors with their local knot vectors.
        #[arg(long)]
        anchors: bool,
        /// A `tmesh-check` problem file instead of `--mesh` and `--degrees`.
        #[arg(long, conflicts_with_all = ["mesh", "degrees"])]
        problem: Option<PathBuf>,
    },
    /// Dimensions and exactness of the T-spline complex of equal degree.
    Complex {
        /// Layout file of the mesh.
        #[arg(long)]
        mesh: PathBuf,
        /// Degree in both directions.
        #[arg(long)]
        degree: usize,
    },
}

#[derive(Args)]
struct ProblemArg {
    /// Problem file (JSON) of the matching kind.
    #[arg(long)]
    problem: PathBuf,
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn wrong_kind(p: &ProblemFile, expected: &str) -> CliError {
    CliError::Invalid(format!("problem file has kind {}, expected {expected}", p.kind()))
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if let Some(t) = cli.tol {
        if !(0.0..1.0).contains(&t) {
            return Err(CliError::Invalid(format!("--tol {t} outside [0, 1)")));
        }
    }
    match &cli.command {
        Command::CheckComplex { degrees, n, full_boundary, problem } => {
            let spec = match problem {
                Some(path) => match ProblemFile::load(path)? {
                    ProblemFile::CheckComplex(s) => s,
                    other => return Err(wrong_kind(&other, "check-complex")),
                },
                None => {
                    let spec = ProblemFile::CheckComplex(CheckComplexSpec {
                        degrees: degrees.clone(),
                        elements: n.clone(),
                        boundary: if *full_boundary { BoundarySpec::Full } else { BoundarySpec::None },
                    });
                    spec.validate()?;
                    match spec {
                        ProblemFile::CheckComplex(s) => s,
                        _ => unreachable!(),
                    }
                }
            };
            commands::check_complex(&spec)
        }
        Command::Tmesh { action: TmeshCommand::Check { mesh, degrees, anchors, problem } } => {
            let (path, degrees) = match (problem, mesh) {
                (Some(p), _) => match ProblemFile::load(p)? {
                    ProblemFile::TmeshCheck(s) => (base_dir(p).join(s.mesh), s.degrees),
                    other => return Err(wrong_kind(&other, "tmesh-check")),
                },
                (None, Some(m)) => {
                    let d: [usize; 2] = degrees
                        .as_slice()
                        .try_into()
                        .map_err(|_| CliError::Invalid("--degrees takes two values".into()))?;
                    (m.clone(), d)
                }
                (None, None) => return Err(CliError::Invalid("give --mesh or --problem".into())),
            };
            if degrees.contains(&0) {
                return Err(CliError::Invalid("degrees must be positive".into()));
            }
            commands::tmesh_check(&load_layout(&path)?, degrees, *anchors)
        }
        Command::Tmesh { action: TmeshCommand::Complex { mesh, degree } } => {
            if *degree == 0 {
                return Err(CliError::Invalid("degree must be positive".into()));
            }
            commands::tmesh_complex(&load_layout(mesh)?, *degree)
        }
        Command::SolveEig(a) => match ProblemFile::load(&a.problem)? {
            ProblemFile::SolveEig(s) => commands::solve_eig(&s, &base_dir(&a.problem), cli.tol),
            other => Err(wrong_kind(&other, "solve-eig")),
        },
        Command::SolveSource(a) => match ProblemFile::load(&a.problem)? {
            ProblemFile::SolveSource(s) => commands::solve_source(&s, &base_dir(&a.problem)),
            other => Err(wrong_kind(&other, "solve-source")),
        },
        Command::SolveWaveguide(a) => match ProblemFile::load(&a.problem)? {
            ProblemFile::SolveWaveguide(g) => commands::solve_waveguide(&g),
            other => Err(wrong_kind(&other, "solve-waveguide")),
        },
        Command::Convergence(a) => match ProblemFile::load(&a.problem)? {
            ProblemFile::Convergence(s) => commands::convergence(&s, &base_dir(&a.problem), cli.tol).map(|(o, _)| o),
            other => Err(wrong_kind(&other, "convergence")),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(CliError::Invalid("--threads must be positive".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(CliError::Invalid(format!("thread pool: {e}"))),
        },
        None => run(&cli),
    };
    match result.and_then(|o| o.write(&cli.out).map(|_| o)) {
        Ok(o) => {
            println!("{}", o.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("derham: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
