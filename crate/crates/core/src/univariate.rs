//! Univariate B-splines on open knot vectors in [0, 1] with exact rational
//! knots.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact knot value.
pub type Knot = Rational64;

pub fn knot(n: i64, d: i64) -> Knot {
    Rational64::new(n, d)
}

pub fn knot_to_f64(k: Knot) -> f64 {
    k.to_f64().expect("rational knot converts to f64")
}

/// Parses `3`, `-1/2`, `1/4`.
pub fn parse_knot(s: &str) -> Result<Knot> {
    let s = s.trim();
    let bad = || Error::InvalidKnotVector(format!("bad rational '{s}'"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Rational64::new(n, d))
        }
        None => Ok(Rational64::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub fn format_knot(k: Knot) -> String {
    if k.is_integer() {
        k.numer().to_string()
    } else {
        format!("{}/{}", k.numer(), k.denom())
    }
}

/// Which normalisation a basis function carries: the plain B-spline, or the
/// Curry–Schoenberg scaling `(len - 1) / |support| * N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scaling {
    B,
    D,
}

/// Knot sequence of a single B-spline: `degree + 2` non-decreasing knots.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalKnotVector(pub Vec<Knot>);

impl LocalKnotVector {
    pub fn new(knots: Vec<Knot>) -> Self {
        debug_assert!(knots.len() >= 2);
        debug_assert!(knots.windows(2).all(|w| w[0] <= w[1]));
        LocalKnotVector(knots)
    }

    pub fn knots(&self) -> &[Knot] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 2
    }

    pub fn first(&self) -> Knot {
        self.0[0]
    }

    pub fn last(&self) -> Knot {
        *self.0.last().unwrap()
    }

    pub fn support_length(&self) -> Knot {
        self.last() - self.first()
    }

    pub fn is_degenerate(&self) -> bool {
        self.support_length().is_zero()
    }

    /// First `len - 1` knots.
    pub fn lower(&self) -> LocalKnotVector {
        LocalKnotVector(self.0[..self.0.len() - 1].to_vec())
    }

    /// Last `len - 1` knots.
    pub fn upper(&self) -> LocalKnotVector {
        LocalKnotVector(self.0[1..].to_vec())
    }

    /// `x -> 1 - x` applied to the knots.
    pub fn reflected(&self) -> LocalKnotVector {
        LocalKnotVector(self.0.iter().rev().map(|&k| Knot::one() - k).collect())
    }

    /// Whether the function interpolates at `side` (0 for the left end, 1 for
    /// the right end), i.e. the end knot is repeated `len - 1` times.
    pub fn interpolates_at(&self, side: usize) -> bool {
        let n = self.0.len();
        let k = &self.0;
        if side == 0 {
            k[..n - 1].iter().all(|&x| x == k[0])
        } else {
            k[1..].iter().all(|&x| x == k[n - 1])
        }
    }

    pub fn float_knots(&self) -> Vec<f64> {
        self.0.iter().map(|&k| knot_to_f64(k)).collect()
    }

    /// `N[Ξ](ζ)` by the Cox–de Boor recursion; half-open spans except at the
    /// right end of the unit interval, which is taken as a left limit.
    pub fn eval(&self, x: f64) -> f64 {
        eval_local(&self.float_knots(), x)
    }

    /// Value and first derivative.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        eval_float_knots(&self.float_knots(), x)
    }

    /// Factor turning `N[Ξ]` into the Curry–Schoenberg spline `D[Ξ]`.
    pub fn curry_factor(&self) -> f64 {
        let len = self.support_length();
        if len.is_zero() {
            0.0
        } else {
            (self.0.len() - 1) as f64 / knot_to_f64(len)
        }
    }

    pub fn eval_scaled(&self, scaling: Scaling, x: f64) -> f64 {
        match scaling {
            Scaling::B => self.eval(x),
            Scaling::D => self.curry_factor() * self.eval(x),
        }
    }

    /// `d/dζ N[Ξ] = D[Ξ⁻] - D[Ξ⁺]`, returned as `(Ξ⁻, +1), (Ξ⁺, -1)` with
    /// the coefficient of a degenerate neighbour set to zero.
    pub fn derivative_terms(&self) -> [(LocalKnotVector, i64); 2] {
        let lo = self.lower();
        let hi = self.upper();
        let cl = if lo.is_degenerate() { 0 } else { 1 };
        let ch = if hi.is_degenerate() { 0 } else { -1 };
        [(lo, cl), (hi, ch)]
    }

    /// Same decomposition against the unscaled neighbours: coefficients
    /// `p/|Ξ⁻|` and `-p/|Ξ⁺|`.
    pub fn derivative_decomposition(&self) -> [(LocalKnotVector, Knot); 2] {
        let p = Knot::from_integer(self.degree() as i64);
        let lo = self.lower();
        let hi = self.upper();
        let cl = if lo.is_degenerate() { Knot::zero() } else { p / lo.support_length() };
        let ch = if hi.is_degenerate() { Knot::zero() } else { -p / hi.support_length() };
        [(lo, cl), (hi, ch)]
    }
}

impl LocalKnotVector {
    /// Splits `N[Ξ]` by inserting `t` into `Ξ`: `N[Ξ] = a N[Ξ'] + b N[Ξ'']`
    /// where `Ξ'`, `Ξ''` are the first and last `p + 2` knots of `Ξ ∪ {t}`.
    /// Pieces with zero weight are dropped.
    pub fn insert(&self, t: Knot) -> Vec<(LocalKnotVector, Knot)> {
        let k = &self.0;
        let p = self.degree();
        let mut merged = k.clone();
        let at = merged.partition_point(|&x| x <= t);
        merged.insert(at, t);
        let ratio = |num: Knot, den: Knot| {
            if den.is_zero() {
                Knot::one()
            } else {
                (num / den).min(Knot::one())
            }
        };
        let a = ratio(t - k[0], k[p] - k[0]);
        let b = ratio(k[p + 1] - t, k[p + 1] - k[1]);
        let mut out = Vec::with_capacity(2);
        if a > Knot::zero() {
            out.push((LocalKnotVector(merged[..p + 2].to_vec()), a));
        }
        if b > Knot::zero() {
            out.push((LocalKnotVector(merged[1..].to_vec()), b));
        }
        out
    }

    /// `N[Ξ]` as a combination of B-splines on `Ξ` refined by the given
    /// knots (only those inside the support are used). Pieces are sorted.
    pub fn refine(&self, knots: &[Knot]) -> Vec<(LocalKnotVector, Knot)> {
        let mut pieces = vec![(self.clone(), Knot::one())];
        for &t in knots {
            let mut next: Vec<(LocalKnotVector, Knot)> = Vec::new();
            for (kv, c) in pieces {
                if t <= kv.first() || t >= kv.last() {
                    next.push((kv, c));
                    continue;
                }
                for (sub, w) in kv.insert(t) {
                    match next.iter_mut().find(|(k, _)| *k == sub) {
                        Some(e) => e.1 += c * w,
                        None => next.push((sub, c * w)),
                    }
                }
            }
            pieces = next;
        }
        pieces.retain(|(_, c)| !c.is_zero());
        pieces.sort();
        pieces
    }
}

impl fmt::Display for LocalKnotVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|&k| format_knot(k)).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Indicator of `[t0, t1)`, closed on the right at the end of the domain.
fn indicator(t0: f64, t1: f64, x: f64) -> f64 {
    if (t0 <= x && x < t1) || (x == 1.0 && t1 == 1.0 && t0 < 1.0) {
        1.0
    } else {
        0.0
    }
}

const MAX_KNOTS: usize = 32;

fn eval_local(t: &[f64], x: f64) -> f64 {
    eval_float_knots(t, x).0
}

/// Value and derivative of the B-spline on the float knots `t`, without
/// allocating. Supports up to 31 knots.
pub fn eval_float_knots(t: &[f64], x: f64) -> (f64, f64) {
    let m = t.len() - 1;
    assert!(m < MAX_KNOTS, "degree too high");
    if x < t[0] || x > t[m] {
        return (0.0, 0.0);
    }
    let mut n = [0.0f64; MAX_KNOTS];
    for j in 0..m {
        n[j] = indicator(t[j], t[j + 1], x);
    }
    let mut below = (n[0], if m > 1 { n[1] } else { 0.0 });
    for q in 1..m {
        if q == m - 1 {
            below = (n[0], n[1]);
        }
        for j in 0..m - q {
            let mut v = 0.0;
            let dl = t[j + q] - t[j];
            if dl > 0.0 {
                v += (x - t[j]) / dl * n[j];
            }
            let dr = t[j + q + 1] - t[j + 1];
            if dr > 0.0 {
                v += (t[j + q + 1] - x) / dr * n[j + 1];
            }
            n[j] = v;
        }
    }
    let p = m - 1;
    if p == 0 {
        return (n[0], 0.0);
    }
    let mut d = 0.0;
    let lo = t[m - 1] - t[0];
    if lo > 0.0 {
        d += p as f64 / lo * below.0;
    }
    let hi = t[m] - t[1];
    if hi > 0.0 {
        d -= p as f64 / hi * below.1;
    }
    (n[0], d)
}

/// Anchor of a univariate basis function: its index and a representative
/// parameter value (the central knot for odd degree, the midpoint of the
/// central span for even degree).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Anchor1D {
    pub index: usize,
    pub position: Knot,
}

/// p-open knot vector on [0, 1] stored as breakpoints with multiplicities.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KnotVector {
    degree: usize,
    breaks: Vec<Knot>,
    mults: Vec<usize>,
}

impl KnotVector {
    pub fn new(degree: usize, breaks: Vec<Knot>, mults: Vec<usize>) -> Result<Self> {
        if breaks.len() != mults.len() {
            return Err(Error::InvalidKnotVector(
                "breakpoint and multiplicity counts differ".into(),
            ));
        }
        if breaks.len() < 2 {
            return Err(Error::InvalidKnotVector("need at least two breakpoints".into()));
        }
        if breaks[0] != Knot::zero() || *breaks.last().unwrap() != Knot::one() {
            return Err(Error::InvalidKnotVector("domain must be [0, 1]".into()));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidKnotVector("breakpoints must increase".into()));
        }
        let last = mults.len() - 1;
        for (i, &m) in mults.iter().enumerate() {
            if i == 0 || i == last {
                if m != degree + 1 {
                    return Err(Error::InvalidKnotVector(format!(
                        "boundary multiplicity {m} is not degree + 1 = {}",
                        degree + 1
                    )));
                }
            } else if m == 0 || m > degree + 1 {
                return Err(Error::InvalidKnotVector(format!(
                    "interior multiplicity {m} outside 1..={}",
                    degree + 1
                )));
            }
        }
        Ok(KnotVector { degree, breaks, mults })
    }

    /// Open knot vector from the expanded knot sequence.
    pub fn from_knots(degree: usize, knots: &[Knot]) -> Result<Self> {
        if knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidKnotVector("knots must be non-decreasing".into()));
        }
        let mut breaks = Vec::new();
        let mut mults: Vec<usize> = Vec::new();
        for &k in knots {
            if breaks.last() == Some(&k) {
                *mults.last_mut().unwrap() += 1;
            } else {
                breaks.push(k);
                mults.push(1);
            }
        }
        Self::new(degree, breaks, mults)
    }

    /// `elements` equal spans with simple interior knots.
    pub fn uniform(degree: usize, elements: usize) -> Self {
        assert!(elements >= 1);
        let breaks = (0..=elements).map(|i| knot(i as i64, elements as i64)).collect();
        let mut mults = vec![1; elements + 1];
        mults[0] = degree + 1;
        mults[elements] = degree + 1;
        KnotVector { degree, breaks, mults }
    }

    /// Open knot vector with the given interior breakpoints, all simple.
    pub fn with_interior(degree: usize, interior: &[Knot]) -> Result<Self> {
        let mut breaks = vec![Knot::zero()];
        breaks.extend_from_slice(interior);
        breaks.push(Knot::one());
        let mut mults = vec![1; breaks.len()];
        mults[0] = degree + 1;
        *mults.last_mut().unwrap() = degree + 1;
        Self::new(degree, breaks, mults)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn breakpoints(&self) -> &[Knot] {
        &self.breaks
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.mults
    }

    pub fn knots(&self) -> Vec<Knot> {
        let mut out = Vec::with_capacity(self.mults.iter().sum());
        for (&b, &m) in self.breaks.iter().zip(&self.mults) {
            out.extend(std::iter::repeat(b).take(m));
        }
        out
    }

    /// Number of basis functions.
    pub fn dim(&self) -> usize {
        self.mults.iter().sum::<usize>() - self.degree - 1
    }

    pub fn local_knots(&self, i: usize) -> LocalKnotVector {
        let t = self.knots();
        LocalKnotVector(t[i..i + self.degree + 2].to_vec())
    }

    pub fn all_local_knots(&self) -> Vec<LocalKnotVector> {
        let t = self.knots();
        (0..self.dim()).map(|i| LocalKnotVector(t[i..i + self.degree + 2].to_vec())).collect()
    }

    /// Nonzero-length spans `(a, b)`.
    pub fn spans(&self) -> Vec<(Knot, Knot)> {
        self.breaks.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Values of all `dim()` basis functions at `x`.
    pub fn eval_basis(&self, x: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&x) || x.is_nan() {
            return Err(Error::OutOfDomain(x));
        }
        let t: Vec<f64> = self.knots().iter().map(|&k| knot_to_f64(k)).collect();
        let p = self.degree;
        let n = self.dim();
        // span index k with t[k] <= x < t[k+1], p <= k <= n-1
        let k = if x >= t[n] {
            n - 1
        } else {
            let mut k = p;
            while t[k + 1] <= x {
                k += 1;
            }
            k
        };
        let mut vals = vec![0.0; p + 1];
        vals[0] = 1.0;
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        for j in 1..=p {
            left[j] = x - t[k + 1 - j];
            right[j] = t[k + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let tmp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            vals[j] = saved;
        }
        let mut out = vec![0.0; n];
        for (r, v) in vals.into_iter().enumerate() {
            out[k - p + r] = v;
        }
        Ok(out)
    }

    /// Index of the first of the `p + 1` functions that may be nonzero at
    /// `x`, with their values and derivatives.
    pub fn nonzero_basis(&self, x: f64) -> Result<(usize, Vec<(f64, f64)>)> {
        if !(0.0..=1.0).contains(&x) || x.is_nan() {
            return Err(Error::OutOfDomain(x));
        }
        let t: Vec<f64> = self.knots().iter().map(|&k| knot_to_f64(k)).collect();
        let p = self.degree;
        let n = self.dim();
        let k = if x >= t[n] { n - 1 } else { t[..=n].partition_point(|&v| v <= x) - 1 };
        let first = k - p;
        let vals = (first..=k).map(|i| eval_float_knots(&t[i..i + p + 2], x)).collect();
        Ok((first, vals))
    }

    /// `Ξ'`: drop the first and last knot, degree `p - 1`.
    pub fn derived(&self) -> Result<KnotVector> {
        if self.degree == 0 {
            return Err(Error::Unsupported("derived space of a degree-0 knot vector".into()));
        }
        let last = self.mults.len() - 1;
        if self.mults[1..last].iter().any(|&m| m > self.degree) {
            return Err(Error::Unsupported(
                "interior multiplicity p + 1 makes the derived space discontinuous".into(),
            ));
        }
        let mut mults = self.mults.clone();
        mults[0] -= 1;
        mults[last] -= 1;
        Ok(KnotVector { degree: self.degree - 1, breaks: self.breaks.clone(), mults })
    }

    /// The `(dim - 1) x dim` matrix of `d/dζ` from `S_p(Ξ)` to the
    /// Curry–Schoenberg basis of `S_{p-1}(Ξ')`, as `(row, col, ±1)` triples.
    pub fn derivative_triplets(&self) -> Vec<(usize, usize, i64)> {
        let n = self.dim();
        let mut out = Vec::with_capacity(2 * n);
        for k in 0..n.saturating_sub(1) {
            out.push((k, k, -1));
            out.push((k, k + 1, 1));
        }
        out
    }

    pub fn anchors(&self) -> Vec<Anchor1D> {
        let t = self.knots();
        let p = self.degree;
        (0..self.dim())
            .map(|i| {
                let position = if p % 2 == 1 {
                    t[i + (p + 1) / 2]
                } else {
                    (t[i + p / 2] + t[i + p / 2 + 1]) / Knot::from_integer(2)
                };
                Anchor1D { index: i, position }
            })
            .collect()
    }

    /// Greville sites: averages of the `p` inner knots of each function.
    pub fn greville(&self) -> Vec<Knot> {
        let t = self.knots();
        let p = self.degree;
        (0..self.dim())
            .map(|i| {
                if p == 0 {
                    (t[i] + t[i + 1]) / Knot::from_integer(2)
                } else {
                    let s: Knot = t[i + 1..=i + p].iter().copied().sum();
                    s / Knot::from_integer(p as i64)
                }
            })
            .collect()
    }

    /// Degree-1 knot vector whose nodes are the Greville sites.
    pub fn greville_knot_vector(&self) -> Result<KnotVector> {
        let g = self.greville();
        let mut knots = vec![Knot::zero()];
        knots.extend(g.iter().copied());
        knots.push(Knot::one());
        KnotVector::from_knots(1, &knots)
    }

    /// Breakpoints of the index-space mesh: every breakpoint repeated with its
    /// multiplicity, except that the boundary ones keep `floor(p/2) + 1`.
    pub fn mesh_lines(&self) -> Vec<Knot> {
        let b = self.degree / 2 + 1;
        let last = self.mults.len() - 1;
        let mut out = Vec::new();
        for (i, (&x, &m)) in self.breaks.iter().zip(&self.mults).enumerate() {
            let m = if i == 0 || i == last { b } else { m };
            out.extend(std::iter::repeat(x).take(m));
        }
        out
    }

    fn insertion_span(&self, x: Knot) -> Result<usize> {
        if x < Knot::zero() || x > Knot::one() {
            return Err(Error::OutOfDomain(knot_to_f64(x)));
        }
        if let Some(pos) = self.breaks.iter().position(|&b| b == x) {
            if self.mults[pos] + 1 > self.degree + 1 || pos == 0 || pos == self.breaks.len() - 1 {
                return Err(Error::InvalidKnotVector(format!(
                    "inserting {} exceeds multiplicity p + 1",
                    format_knot(x)
                )));
            }
        }
        let t = self.knots();
        let mut k = self.degree;
        while t[k + 1] <= x {
            k += 1;
        }
        Ok(k)
    }

    /// Refined knot vector and the exact coefficients `α_j` such that new
    /// control values are `α_j c_j + (1 - α_j) c_{j-1}`.
    pub fn insertion_alphas(&self, x: Knot) -> Result<(KnotVector, Vec<Knot>)> {
        let k = self.insertion_span(x)?;
        let t = self.knots();
        let p = self.degree;
        let n = self.dim();
        let alphas = (0..=n)
            .map(|j| {
                if j + p <= k {
                    Knot::one()
                } else if j <= k {
                    (x - t[j]) / (t[j + p] - t[j])
                } else {
                    Knot::zero()
                }
            })
            .collect();
        let mut knots = t;
        knots.insert(k + 1, x);
        Ok((KnotVector::from_knots(p, &knots)?, alphas))
    }

    /// Knot insertion on control values of arbitrary dimension.
    pub fn insert_knot<C: AsRef<[f64]>>(
        &self,
        coeffs: &[C],
        x: Knot,
    ) -> Result<(KnotVector, Vec<Vec<f64>>)> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} basis functions",
                coeffs.len(),
                self.dim()
            )));
        }
        let (kv, alphas) = self.insertion_alphas(x)?;
        let out = alphas
            .iter()
            .enumerate()
            .map(|(j, &a)| {
                let a = knot_to_f64(a);
                let width = coeffs[j.min(coeffs.len() - 1)].as_ref().len();
                (0..width)
                    .map(|c| {
                        let cur = if j < coeffs.len() { coeffs[j].as_ref()[c] } else { 0.0 };
                        let prev = if j > 0 { coeffs[j - 1].as_ref()[c] } else { 0.0 };
                        a * cur + (1.0 - a) * prev
                    })
                    .collect()
            })
            .collect();
        Ok((kv, out))
    }

    /// Midpoints of every nonzero span.
    pub fn dyadic_midpoints(&self) -> Vec<Knot> {
        self.breaks
            .windows(2)
            .map(|w| (w[0] + w[1]) / Knot::from_integer(2))
            .collect()
    }

    /// Dyadic refinement applied to control values.
    pub fn refine_dyadic<C: AsRef<[f64]>>(&self, coeffs: &[C]) -> Result<(KnotVector, Vec<Vec<f64>>)> {
        let mut kv = self.clone();
        let mut c: Vec<Vec<f64>> = coeffs.iter().map(|r| r.as_ref().to_vec()).collect();
        for m in self.dyadic_midpoints() {
            let (k2, c2) = kv.insert_knot(&c, m)?;
            kv = k2;
            c = c2;
        }
        Ok((kv, c))
    }

    /// Degree and simple interior knots unchanged, breakpoints refined by
    /// inserting span midpoints.
    pub fn dyadic_refined(&self) -> KnotVector {
        let mut breaks = Vec::new();
        let mut mults = Vec::new();
        for (i, w) in self.breaks.windows(2).enumerate() {
            breaks.push(w[0]);
            mults.push(self.mults[i]);
            breaks.push((w[0] + w[1]) / Knot::from_integer(2));
            mults.push(1);
        }
        breaks.push(*self.breaks.last().unwrap());
        mults.push(*self.mults.last().unwrap());
        KnotVector { degree: self.degree, breaks, mults }
    }
}

impl fmt::Display for KnotVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};", self.degree)?;
        for (&b, &m) in self.breaks.iter().zip(&self.mults) {
            write!(f, " {}:{}", format_knot(b), m)?;
        }
        Ok(())
    }
}

impl FromStr for KnotVector {
    type Err = Error;

    /// `p; b1:m1 b2:m2 ...` with rational breakpoints such as `1/3`.
    fn from_str(s: &str) -> Result<Self> {
        let (deg, rest) = s
            .split_once(';')
            .ok_or_else(|| Error::InvalidKnotVector(format!("missing ';' in '{s}'")))?;
        let degree: usize = deg
            .trim()
            .parse()
            .map_err(|_| Error::InvalidKnotVector(format!("bad degree '{deg}'")))?;
        let mut breaks = Vec::new();
        let mut mults = Vec::new();
        for tok in rest.split_whitespace() {
            let (b, m) = tok
                .split_once(':')
                .ok_or_else(|| Error::InvalidKnotVector(format!("bad token '{tok}'")))?;
            breaks.push(parse_knot(b)?);
            mults.push(
                m.parse()
                    .map_err(|_| Error::InvalidKnotVector(format!("bad multiplicity '{m}'")))?,
            );
        }
        KnotVector::new(degree, breaks, mults)
    }
}

impl serde::Serialize for KnotVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> serde::Deserialize<'de> for KnotVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde helpers writing knots as rational strings such as `"1/3"`.
pub mod knot_strings {
    use super::{format_knot, parse_knot, Knot};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Knot], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&k| format_knot(k)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Knot>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter().map(|s| parse_knot(s).map_err(serde::de::Error::custom)).collect()
    }
}

/// Absolute value helper for rationals used by callers comparing knots.
#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn kv(s: &str) -> KnotVector {
        s.parse().unwrap()
    }

    fn ks(v: &[(i64, i64)]) -> Vec<Knot> {
        v.iter().map(|&(n, d)| knot(n, d)).collect()
    }

    // exact-rational textbook recursion on the full knot sequence
    fn oracle(t: &[Knot], i: usize, p: usize, x: Knot) -> Knot {
        if p == 0 {
            let last = *t.last().unwrap();
            return if (t[i] <= x && x < t[i + 1]) || (x == last && t[i + 1] == last && t[i] < last) {
                Knot::one()
            } else {
                Knot::zero()
            };
        }
        let mut v = Knot::zero();
        let dl = t[i + p] - t[i];
        if !dl.is_zero() {
            v += (x - t[i]) / dl * oracle(t, i, p - 1, x);
        }
        let dr = t[i + p + 1] - t[i + 1];
        if !dr.is_zero() {
            v += (t[i + p + 1] - x) / dr * oracle(t, i + 1, p - 1, x);
        }
        v
    }

    #[test]
    fn quadratic_example_values() {
        let k = kv("2; 0:3 1/2:1 1:3");
        assert_eq!(k.dim(), 4);
        let v = k.eval_basis(0.25).unwrap();
        let expect = [0.25, 0.625, 0.125, 0.0];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let t = k.knots();
        for i in 0..4 {
            let o = knot_to_f64(oracle(&t, i, 2, knot(1, 4)));
            assert!((v[i] - o).abs() < 1e-15);
        }
    }

    #[test]
    fn right_endpoint_is_left_limit() {
        let k = kv("2; 0:3 1/2:1 1:3");
        let v = k.eval_basis(1.0).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0, 1.0]);
        let loc = k.local_knots(3);
        assert_eq!(loc.eval(1.0), 1.0);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let k = kv("2; 0:3 1:3");
        assert!(matches!(k.eval_basis(1.5), Err(Error::OutOfDomain(_))));
        assert!(matches!(k.eval_basis(-0.1), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn invalid_vectors_rejected() {
        assert!("2; 0:2 1:3".parse::<KnotVector>().is_err());
        assert!("2; 0:3 1/2:4 1:3".parse::<KnotVector>().is_err());
        assert!(KnotVector::new(1, ks(&[(0, 1), (1, 2), (1, 4), (1, 1)]), vec![2, 1, 1, 2]).is_err());
    }

    #[test]
    fn derived_vector_example() {
        let k = kv("2; 0:3 1/2:1 1:3");
        let d = k.derived().unwrap();
        assert_eq!(d.to_string(), "1; 0:2 1/2:1 1:2");
        assert_eq!(d.dim(), 3);
        assert!(matches!(kv("2; 0:3 1/2:3 1:3").derived(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn anchors_by_parity() {
        let k = kv("2; 0:3 1/2:1 1:3");
        let pos: Vec<Knot> = k.anchors().into_iter().map(|a| a.position).collect();
        assert_eq!(pos, ks(&[(0, 1), (1, 4), (3, 4), (1, 1)]));
        let c = kv("3; 0:4 1/2:1 1:4");
        let pos: Vec<Knot> = c.anchors().into_iter().map(|a| a.position).collect();
        assert_eq!(pos, ks(&[(0, 1), (0, 1), (1, 2), (1, 1), (1, 1)]));
    }

    #[test]
    fn greville_example() {
        let k = kv("2; 0:3 1/2:1 1:3");
        assert_eq!(k.greville(), ks(&[(0, 1), (1, 4), (3, 4), (1, 1)]));
    }

    #[test]
    fn insertion_example_matches_pointwise_oracle() {
        let k = kv("2; 0:3 1/2:1 1:3");
        let (k2, alphas) = k.insertion_alphas(knot(1, 4)).unwrap();
        assert_eq!(k2.to_string(), "2; 0:3 1/4:1 1/2:1 1:3");
        assert_eq!(alphas, ks(&[(1, 1), (1, 2), (1, 4), (0, 1), (0, 1)]));
        let c = vec![vec![1.0], vec![-2.0], vec![0.5], vec![3.0]];
        let (_, c2) = k.insert_knot(&c, knot(1, 4)).unwrap();
        for s in 0..=40 {
            let x = s as f64 / 40.0;
            let a: f64 = k.eval_basis(x).unwrap().iter().zip(&c).map(|(b, c)| b * c[0]).sum();
            let b: f64 = k2.eval_basis(x).unwrap().iter().zip(&c2).map(|(b, c)| b * c[0]).sum();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn insertion_overflow_rejected() {
        let k = kv("2; 0:3 1/2:3 1:3");
        assert!(k.insertion_alphas(knot(1, 2)).is_err());
        assert!(k.insertion_alphas(knot(0, 1)).is_err());
    }

    #[test]
    fn curry_scaled_example() {
        let l = LocalKnotVector::new(ks(&[(0, 1), (0, 1), (1, 1)]));
        assert_eq!(l.eval_scaled(Scaling::D, 0.0), 2.0);
    }

    #[test]
    fn derivative_decomposition_example() {
        let k = kv("2; 0:3 1/2:1 1:3");
        let l = k.local_knots(1);
        let [(lo, cl), (hi, ch)] = l.derivative_decomposition();
        assert_eq!(lo.knots(), &ks(&[(0, 1), (0, 1), (1, 2)])[..]);
        assert_eq!(cl, knot(4, 1));
        assert_eq!(hi.knots(), &ks(&[(0, 1), (1, 2), (1, 1)])[..]);
        assert_eq!(ch, knot(-2, 1));
        // first function: the left neighbour is degenerate
        let [(_, c0), _] = k.local_knots(0).derivative_decomposition();
        assert!(c0.is_zero());
    }

    #[test]
    fn mesh_lines_keep_half_boundary() {
        let k = kv("2; 0:3 1/2:1 1:3");
        assert_eq!(k.mesh_lines(), ks(&[(0, 1), (0, 1), (1, 2), (1, 1), (1, 1)]));
        let c = kv("3; 0:4 1/2:1 1:4");
        assert_eq!(c.mesh_lines().len(), c.dim());
    }

    #[test]
    fn text_round_trip() {
        let k = kv("3; 0:4 1/3:2 1:4");
        let s = k.to_string();
        assert_eq!(s.parse::<KnotVector>().unwrap(), k);
    }

    fn arb_kv() -> impl Strategy<Value = KnotVector> {
        (1usize..=4, proptest::collection::btree_set(1i64..16, 0..5), 1usize..=3).prop_map(
            |(p, interior, m)| {
                let mut breaks = vec![Knot::zero()];
                breaks.extend(interior.iter().map(|&i| knot(i, 16)));
                breaks.push(Knot::one());
                let mut mults = vec![m.min(p); breaks.len()];
                mults[0] = p + 1;
                *mults.last_mut().unwrap() = p + 1;
                KnotVector::new(p, breaks, mults).unwrap()
            },
        )
    }

    #[test]
    fn single_function_refinement() {
        let l = LocalKnotVector(ks(&[(0, 1), (0, 1), (0, 1), (0, 1), (1, 2)]));
        let pieces = l.refine(&[knot(1, 4)]);
        assert_eq!(
            pieces,
            vec![
                (LocalKnotVector(ks(&[(0, 1), (0, 1), (0, 1), (0, 1), (1, 4)])), knot(1, 1)),
                (LocalKnotVector(ks(&[(0, 1), (0, 1), (0, 1), (1, 4), (1, 2)])), knot(1, 2)),
            ]
        );
    }

    proptest! {
        #[test]
        fn refinement_reproduces_function(k in arb_kv(), extra in prop::collection::vec(1i64..16, 1..4), x in 0.0f64..=1.0) {
            let ts: Vec<Knot> = extra.iter().map(|&n| knot(n, 16)).collect();
            for l in k.all_local_knots() {
                let pieces = l.refine(&ts);
                let sum: f64 = pieces.iter().map(|(q, c)| knot_to_f64(*c) * q.eval(x)).sum();
                prop_assert!((sum - l.eval(x)).abs() < 1e-12);
            }
        }

        #[test]
        fn nonzero_basis_matches_full_evaluation(k in arb_kv(), x in 0.0f64..=1.0) {
            let full = k.eval_basis(x).unwrap();
            let (first, vals) = k.nonzero_basis(x).unwrap();
            let locals = k.all_local_knots();
            for (i, &v) in full.iter().enumerate() {
                let got = if i >= first && i < first + vals.len() { vals[i - first].0 } else { 0.0 };
                prop_assert!((got - v).abs() < 1e-12);
                if i >= first && i < first + vals.len() {
                    prop_assert!((vals[i - first].1 - locals[i].eval_with_derivative(x).1).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn partition_of_unity(k in arb_kv(), x in 0.0f64..=1.0) {
            let v = k.eval_basis(x).unwrap();
            prop_assert!(v.iter().all(|&b| b >= -1e-15));
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn local_matches_global(k in arb_kv(), x in 0.0f64..=1.0) {
            let v = k.eval_basis(x).unwrap();
            for (i, l) in k.all_local_knots().iter().enumerate() {
                prop_assert!((l.eval(x) - v[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn derivative_identity(k in arb_kv(), x in 0.01f64..0.99) {
            let d = k.derived().unwrap();
            for (i, l) in k.all_local_knots().iter().enumerate() {
                let (_, dv) = l.eval_with_derivative(x);
                let h = 1e-6;
                let fd = (l.eval((x + h).min(1.0)) - l.eval((x - h).max(0.0))) / (2.0 * h);
                let mut sum = 0.0;
                for &(r, c, s) in &k.derivative_triplets() {
                    if c == i {
                        sum += s as f64 * d.local_knots(r).eval_scaled(Scaling::D, x);
                    }
                }
                prop_assert!((dv - sum).abs() < 1e-9 * (1.0 + dv.abs()));
                // skip points right next to a breakpoint for the difference quotient
                let near = k.breakpoints().iter().any(|&b| (knot_to_f64(b) - x).abs() < 1e-4);
                if !near {
                    prop_assert!((dv - fd).abs() < 1e-5 * (1.0 + dv.abs()));
                }
            }
        }

        #[test]
        fn insertion_preserves_curve(k in arb_kv(), n in 1i64..63, seed in any::<u64>()) {
            let x = knot(n, 64);
            prop_assume!(k.insertion_alphas(x).is_ok());
            let c: Vec<Vec<f64>> = (0..k.dim())
                .map(|i| vec![((seed.wrapping_mul(i as u64 + 7) % 1000) as f64) / 100.0 - 5.0])
                .collect();
            let (k2, c2) = k.insert_knot(&c, x).unwrap();
            for s in 0..=32 {
                let t = s as f64 / 32.0;
                let a: f64 = k.eval_basis(t).unwrap().iter().zip(&c).map(|(b, c)| b * c[0]).sum();
                let b: f64 = k2.eval_basis(t).unwrap().iter().zip(&c2).map(|(b, c)| b * c[0]).sum();
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn greville_non_decreasing(k in arb_kv()) {
            let g = k.greville();
            prop_assert!(g.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(g[0], Knot::zero());
            prop_assert_eq!(*g.last().unwrap(), Knot::one());
        }
    }
}
