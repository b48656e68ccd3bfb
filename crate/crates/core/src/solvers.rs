//! Dense generalized eigenproblems, time-harmonic solves, port modes and
//! scattering coefficients.
//!
//! Everything here runs on one thread and is deterministic.

use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::{Mat, Par, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly::{PortTerms, SystemMatrices};
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Eigenvalues below this multiple of the largest one count as zero.
pub const ZERO_TOLERANCE: f64 = 1e-8;

/// Solution of `K v = λ M v`.
#[derive(Clone, Debug)]
pub struct EigenResult {
    /// All eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub zero_count: usize,
    pub threshold: f64,
    /// The first nonzero eigenpairs that were requested, `M`-normalized,
    /// with a positive first significant component.
    pub pairs: Vec<(f64, Vec<f64>)>,
    /// Largest `‖Kv − λMv‖ / max(‖Kv‖, ‖λMv‖)` over the returned pairs.
    pub max_residual: f64,
}

impl EigenResult {
    pub fn nonzero(&self) -> &[f64] {
        &self.eigenvalues[self.zero_count..]
    }

    pub fn dofs(&self) -> usize {
        self.eigenvalues.len()
    }
}

fn run_sequential<T>(f: impl FnOnce() -> T) -> T {
    let old = faer::get_global_parallelism();
    faer::set_global_parallelism(Par::Seq);
    let out = f();
    faer::set_global_parallelism(old);
    out
}

fn symmetrize(a: &mut Mat<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Dense reduction through the Cholesky factor of `M`, followed by a
/// symmetric eigensolve. Eigenvectors are only formed for the first
/// `pairs` nonzero eigenvalues.
pub fn solve_generalized_eig(k: &CsrMatrix<f64>, m: &CsrMatrix<f64>, pairs: usize) -> Result<EigenResult> {
    solve_generalized_eig_with(k, m, pairs, ZERO_TOLERANCE)
}

/// As [`solve_generalized_eig`] with eigenvalues below `zero_tolerance`
/// times the largest one counted as zero.
pub fn solve_generalized_eig_with(k: &CsrMatrix<f64>, m: &CsrMatrix<f64>, pairs: usize, zero_tolerance: f64) -> Result<EigenResult> {
    if !(zero_tolerance >= 0.0 && zero_tolerance < 1.0) {
        return Err(Error::InvalidProblem(format!("zero tolerance {zero_tolerance} outside [0, 1)")));
    }
    let n = k.nrows();
    if m.nrows() != n || k.ncols() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!("K is {}x{}, M is {}x{}", n, k.ncols(), m.nrows(), m.ncols())));
    }
    if n == 0 {
        return Ok(EigenResult { eigenvalues: vec![], zero_count: 0, threshold: 0.0, pairs: vec![], max_residual: 0.0 });
    }
    run_sequential(|| {
        let mut md = m.to_dense();
        symmetrize(&mut md);
        let llt = md.llt(Side::Lower).map_err(|_| Error::Numerical("mass matrix is not positive definite".into()))?;
        drop(md);
        let l = llt.L();
        // C = L⁻¹ K L⁻ᵀ
        let mut c = k.to_dense();
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
        let mut ct = c.transpose().to_owned();
        drop(c);
        faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, ct.as_mut(), Par::Seq);
        symmetrize(&mut ct);
        let (eigenvalues, vectors) = if pairs == 0 {
            let v = ct.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Numerical(format!("eigensolver: {e:?}")))?;
            (v, None)
        } else {
            let evd = ct.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical(format!("eigensolver: {e:?}")))?;
            let s = evd.S().column_vector();
            let v: Vec<f64> = (0..n).map(|i| s[i]).collect();
            (v, Some(evd.U().to_owned()))
        };
        drop(ct);
        let lmax = eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let threshold = zero_tolerance * lmax;
        let zero_count = eigenvalues.iter().filter(|&&v| v < threshold).count();
        let mut out = Vec::new();
        let mut max_residual = 0.0f64;
        if let Some(mut u) = vectors {
            let hi = (zero_count + pairs).min(n);
            let mut y = u.subcols_mut(zero_count, hi - zero_count).to_owned();
            drop(u);
            // v = L⁻ᵀ y
            faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), y.as_mut(), Par::Seq);
            for (col, idx) in (zero_count..hi).enumerate() {
                let mut v: Vec<f64> = (0..n).map(|i| y[(i, col)]).collect();
                fix_sign(&mut v);
                let lambda = eigenvalues[idx];
                let kv = k.mul_vec(&v);
                let mv = m.mul_vec(&v);
                let num = kv.iter().zip(&mv).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
                let den = kv.iter().map(|a| a * a).sum::<f64>().sqrt().max(lambda.abs() * mv.iter().map(|a| a * a).sum::<f64>().sqrt());
                max_residual = max_residual.max(num / den);
                out.push((lambda, v));
            }
        }
        Ok(EigenResult { eigenvalues, zero_count, threshold, pairs: out, max_residual })
    })
}

/// Makes the first entry above round-off positive.
fn fix_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn residual_ratio(a: &CsrMatrix<f64>, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

/// Dense solve of a symmetric positive definite system, with LU as a
/// fallback.
pub fn solve_dense(a: &CsrMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if b.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; n]);
    }
    let x = run_sequential(|| {
        let ad = a.to_dense();
        let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
        let sol = match ad.llt(Side::Lower) {
            Ok(llt) => llt.solve(&rhs),
            Err(_) => ad.partial_piv_lu().solve(&rhs),
        };
        (0..n).map(|i| sol[(i, 0)]).collect::<Vec<f64>>()
    });
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("singular system".into()));
    }
    let r = residual_ratio(a, &x, b);
    if r > 1e-10 {
        return Err(Error::Numerical(format!("relative residual {r:e}")));
    }
    Ok(x)
}

/// Solves `∫ curl u · curl v + ∫ u · v = ∫ f · v` on the free dofs of an
/// assembled system with a load; returns all coefficients, constrained ones
/// zero.
pub fn solve_time_harmonic_source(system: &SystemMatrices) -> Result<Vec<f64>> {
    let load = system.load.as_ref().ok_or_else(|| Error::InvalidProblem("system has no load".into()))?;
    let r = system.reduced();
    let a = r.stiffness.add(&r.mass, 1.0);
    let b: Vec<f64> = system.free.iter().map(|&g| load[g]).collect();
    Ok(system.expand(&solve_dense(&a, &b)?))
}

/// Lowest nonzero mode of a port cross-section.
#[derive(Clone, Debug)]
pub struct PortMode {
    pub k10_squared: f64,
    /// Coefficients on all glued dofs of the port space, `M`-normalized.
    pub coeffs: Vec<f64>,
}

impl PortMode {
    pub fn k10(&self) -> f64 {
        self.k10_squared.sqrt()
    }
}

/// Smallest nonzero eigenpair of the rot-rot problem on the port.
pub fn solve_port_mode(system: &SystemMatrices) -> Result<PortMode> {
    let r = system.reduced();
    let eig = solve_generalized_eig(&r.stiffness, &r.mass, 1)?;
    let (k2, v) = eig
        .pairs
        .into_iter()
        .next()
        .ok_or_else(|| Error::Numerical("all port eigenvalues are below the zero tolerance".into()))?;
    Ok(PortMode { k10_squared: k2, coeffs: system.expand(&v) })
}

/// Frequency and material data of a waveguide run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideProblem {
    /// Angular frequency in rad/s.
    pub omega: f64,
    pub mu0: f64,
    pub eps0: f64,
    /// Axial positions of the input and output ports.
    pub z1: f64,
    pub z2: f64,
}

impl WaveguideProblem {
    pub fn wavenumber(&self) -> f64 {
        self.omega * (self.mu0 * self.eps0).sqrt()
    }

    /// Propagation constant of the mode with cutoff `k10`; the frequency has
    /// to lie above the cutoff.
    pub fn beta(&self, k10: f64) -> Result<f64> {
        let k = self.wavenumber();
        if !(k > k10) {
            return Err(Error::InvalidProblem(format!("wavenumber {k} is not above the cutoff {k10}")));
        }
        Ok((k * k - k10 * k10).sqrt())
    }
}

/// Reflection and transmission coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scattering {
    pub r: Complex64,
    pub t: Complex64,
    pub beta: f64,
}

/// `R = e^{-iβz₁} ∫_{Γ₁}E·e / ∫e·e − e^{-2iβz₁}` and
/// `T = e^{iβz₂} ∫_{Γ₂}E·e / ∫e·e`; the overlaps are given.
pub fn compute_scattering(overlap1: Complex64, norm1: f64, overlap2: Complex64, norm2: f64, beta: f64, z1: f64, z2: f64) -> Result<Scattering> {
    if norm1 == 0.0 || norm2 == 0.0 {
        return Err(Error::InvalidProblem("port mode has zero norm".into()));
    }
    let e = |phase: f64| Complex64::new(phase.cos(), phase.sin());
    let r = e(-beta * z1) * overlap1 / norm1 - e(-2.0 * beta * z1);
    let t = e(beta * z2) * overlap2 / norm2;
    Ok(Scattering { r, t, beta })
}

/// Solves `∫curl E·curl G − k²∫E·G + iβ∫_{Γ₁∪Γ₂}(n×E)·(n×G) = 2iβ∫_{Γ₁}E^inc·G`
/// with `E^inc = e₁₀ e^{-iβz}`. `ports.loads` hold `∫_{Γ}(n×e₁₀)·(n×G)`
/// for the two ports. Returns the coefficients and the scattering data.
pub fn solve_waveguide(system: &SystemMatrices, ports: &PortTerms, problem: &WaveguideProblem, k10: f64) -> Result<(Vec<Complex64>, Scattering)> {
    if ports.loads.len() != 2 {
        return Err(Error::InvalidProblem(format!("{} ports, expected 2", ports.loads.len())));
    }
    let k = problem.wavenumber();
    let beta = problem.beta(k10)?;
    let free = &system.free;
    let n = free.len();
    let kk = system.stiffness.select(free, free);
    let mm = system.mass.select(free, free);
    let bb = ports.matrix.select(free, free);
    let mut a = Mat::<Complex64>::zeros(n, n);
    for (r, c, v) in kk.triplets() {
        a[(r, c)] += Complex64::new(v, 0.0);
    }
    for (r, c, v) in mm.triplets() {
        a[(r, c)] -= Complex64::new(k * k * v, 0.0);
    }
    for (r, c, v) in bb.triplets() {
        a[(r, c)] += Complex64::new(0.0, beta * v);
    }
    let phase = Complex64::new((-beta * problem.z1).cos(), (-beta * problem.z1).sin());
    let scale = Complex64::new(0.0, 2.0 * beta) * phase;
    let rhs = Mat::from_fn(n, 1, |i, _| scale * ports.loads[0][free[i]]);
    let sol = run_sequential(|| a.partial_piv_lu().solve(&rhs));
    let x: Vec<Complex64> = (0..n).map(|i| sol[(i, 0)]).collect();
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical("singular waveguide system".into()));
    }
    // relative residual
    let mut res = 0.0;
    let mut nb = 0.0;
    for i in 0..n {
        let mut s = -rhs[(i, 0)];
        for j in 0..n {
            s += a[(i, j)] * x[j];
        }
        res += s.norm_sqr();
        nb += rhs[(i, 0)].norm_sqr();
    }
    if res.sqrt() > 1e-10 * nb.sqrt().max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!("waveguide residual {:e}", (res / nb).sqrt())));
    }
    let mut full = vec![Complex64::new(0.0, 0.0); system.mass.nrows()];
    for (&g, &v) in free.iter().zip(&x) {
        full[g] = v;
    }
    let overlap = |load: &[f64]| full.iter().zip(load).fold(Complex64::new(0.0, 0.0), |acc, (c, &b)| acc + c * b);
    let s = compute_scattering(
        overlap(&ports.loads[0]),
        ports.norms[0],
        overlap(&ports.loads[1]),
        ports.norms[1],
        beta,
        problem.z1,
        problem.z2,
    )?;
    Ok((full, s))
}

/// Rows `(dofs, value)` of a convergence study.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<(usize, f64)>,
}

/// Shortest exact decimal form with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

impl ConvergenceTable {
    pub fn push(&mut self, dofs: usize, value: f64) {
        self.rows.push((dofs, value));
    }

    /// `dofs,value` with LF line endings.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dofs,value\n");
        for (d, v) in &self.rows {
            let _ = writeln!(s, "{d},{}", format_value(*v));
        }
        s
    }

    pub fn is_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].1 < w[0].1)
    }
}

/// Runs `level` for every refinement level and tabulates its `(dofs,
/// value)` result.
pub fn run_convergence(levels: usize, mut level: impl FnMut(usize) -> Result<(usize, f64)>) -> Result<ConvergenceTable> {
    let mut t = ConvergenceTable::default();
    for l in 0..levels {
        let (d, v) = level(l)?;
        t.push(d, v);
    }
    Ok(t)
}
