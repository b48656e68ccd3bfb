//! Exact integer linear algebra: rank over the rationals by fraction-free
//! elimination, and sign-equivalence of integer matrices.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::Rational64;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::sparse::CsrMatrix;

type Row<T> = Vec<(usize, T)>;

trait Exact: Clone + PartialEq {
    fn from_i64(v: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn combine(a: &Self, x: &Self, b: &Self, y: &Self) -> Option<Self>;
    fn gcd_with(&self, other: &Self) -> Self;
    fn div_exact(&self, d: &Self) -> Self;
    fn is_unit(&self) -> bool;
}

impl Exact for i128 {
    fn from_i64(v: i64) -> Self {
        v as i128
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn combine(a: &Self, x: &Self, b: &Self, y: &Self) -> Option<Self> {
        a.checked_mul(*x)?.checked_sub(b.checked_mul(*y)?)
    }
    fn gcd_with(&self, other: &Self) -> Self {
        self.gcd(other)
    }
    fn div_exact(&self, d: &Self) -> Self {
        self / d
    }
    fn is_unit(&self) -> bool {
        self.abs() == 1
    }
}

impl Exact for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn combine(a: &Self, x: &Self, b: &Self, y: &Self) -> Option<Self> {
        Some(a * x - b * y)
    }
    fn gcd_with(&self, other: &Self) -> Self {
        Integer::gcd(self, other)
    }
    fn div_exact(&self, d: &Self) -> Self {
        self / d
    }
    fn is_unit(&self) -> bool {
        self.abs().is_one()
    }
}

/// `a*r - b*p` on sparse rows, then divided by the content.
fn reduce<T: Exact>(r: &Row<T>, p: &Row<T>) -> Option<Row<T>> {
    let a = p[0].1.clone();
    let b = r[0].1.clone();
    let zero = T::from_i64(0);
    let mut out: Row<T> = Vec::with_capacity(r.len() + p.len());
    let (mut i, mut j) = (1, 1);
    while i < r.len() || j < p.len() {
        let ci = r.get(i).map(|e| e.0).unwrap_or(usize::MAX);
        let cj = p.get(j).map(|e| e.0).unwrap_or(usize::MAX);
        let (col, x, y) = if ci < cj {
            i += 1;
            (ci, &r[i - 1].1, &zero)
        } else if cj < ci {
            j += 1;
            (cj, &zero, &p[j - 1].1)
        } else {
            i += 1;
            j += 1;
            (ci, &r[i - 1].1, &p[j - 1].1)
        };
        let v = T::combine(&a, x, &b, y)?;
        if !v.is_zero() {
            out.push((col, v));
        }
    }
    if let Some(first) = out.first() {
        let mut g = first.1.clone();
        for (_, v) in &out[1..] {
            if g.is_unit() {
                break;
            }
            g = g.gcd_with(v);
        }
        if !g.is_unit() && !g.is_zero() {
            for e in &mut out {
                e.1 = e.1.div_exact(&g);
            }
        }
    }
    Some(out)
}

fn rank_generic<T: Exact>(m: &CsrMatrix<i64>) -> Option<usize> {
    let mut pivots: BTreeMap<usize, Row<T>> = BTreeMap::new();
    for r in 0..m.nrows() {
        let mut row: Row<T> = m.row(r).map(|(c, v)| (c, T::from_i64(v))).collect();
        while let Some(&(lead, _)) = row.first() {
            match pivots.get(&lead) {
                Some(p) => row = reduce(&row, p)?,
                None => {
                    pivots.insert(lead, row);
                    break;
                }
            }
        }
    }
    Some(pivots.len())
}

/// Rank over Q. Uses 128-bit arithmetic and falls back to big integers on
/// overflow.
pub fn rank(m: &CsrMatrix<i64>) -> usize {
    match rank_generic::<i128>(m) {
        Some(r) => r,
        None => rank_generic::<BigInt>(m).expect("big integer elimination cannot overflow"),
    }
}

/// Matrices whose rank can be computed exactly.
pub trait ExactEntries: crate::sparse::Scalar {
    /// A matrix with the same row space and integer entries.
    fn integer_rows(m: &CsrMatrix<Self>) -> CsrMatrix<i64>;

    fn is_unit(v: Self) -> bool;
}

impl ExactEntries for i64 {
    fn integer_rows(m: &CsrMatrix<i64>) -> CsrMatrix<i64> {
        m.clone()
    }

    fn is_unit(v: i64) -> bool {
        v.abs() == 1
    }
}

impl ExactEntries for Rational64 {
    fn integer_rows(m: &CsrMatrix<Rational64>) -> CsrMatrix<i64> {
        let mut trip = Vec::with_capacity(m.nnz());
        for r in 0..m.nrows() {
            let l = m.row(r).fold(1i64, |l, (_, v)| l.lcm(v.denom()));
            for (c, v) in m.row(r) {
                let n = v.numer().checked_mul(l / v.denom()).expect("row scaling overflows i64");
                trip.push((r, c, n));
            }
        }
        CsrMatrix::from_triplets(m.nrows(), m.ncols(), &trip)
    }

    fn is_unit(v: Rational64) -> bool {
        v.abs().is_one()
    }
}

/// Rank over Q of an integer or rational matrix.
pub fn exact_rank<T: ExactEntries>(m: &CsrMatrix<T>) -> usize {
    rank(&T::integer_rows(m))
}

/// Whether every stored entry is `±1`.
pub fn unit_entries<T: ExactEntries>(m: &CsrMatrix<T>) -> bool {
    m.triplets().into_iter().all(|(_, _, v)| T::is_unit(v))
}

/// Whether `a = diag(s) * b * diag(t)` for some sign vectors `s`, `t`.
/// Returns the row and column signs when they exist.
pub fn sign_equivalent(a: &CsrMatrix<i64>, b: &CsrMatrix<i64>) -> Option<(Vec<i64>, Vec<i64>)> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return None;
    }
    for r in 0..a.nrows() {
        let ra: Vec<_> = a.row(r).map(|(c, v)| (c, v.abs())).collect();
        let rb: Vec<_> = b.row(r).map(|(c, v)| (c, v.abs())).collect();
        if ra != rb {
            return None;
        }
    }
    // bipartite sign propagation: a_rc * b_rc = s_r * t_c
    let n = a.nrows() + a.ncols();
    let mut adj: Vec<Vec<(usize, i64)>> = vec![vec![]; n];
    for (r, c, v) in a.triplets() {
        let s = (v * b.get(r, c)).signum();
        adj[r].push((a.nrows() + c, s));
        adj[a.nrows() + c].push((r, s));
    }
    let mut sign = vec![0i64; n];
    for start in 0..n {
        if sign[start] != 0 {
            continue;
        }
        sign[start] = 1;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &(w, s) in &adj[u] {
                let want = sign[u] * s;
                if sign[w] == 0 {
                    sign[w] = want;
                    stack.push(w);
                } else if sign[w] != want {
                    return None;
                }
            }
        }
    }
    let t = sign.split_off(a.nrows());
    Some((sign, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_rank_scales_rows() {
        let h = Rational64::new(1, 2);
        let one = Rational64::from_integer(1);
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, h), (0, 1, one), (1, 0, one), (1, 1, one + one)]);
        assert_eq!(exact_rank(&m), 1);
        assert!(!unit_entries(&m));
    }

    #[test]
    fn rank_of_incidence_path() {
        // edge-vertex incidence of a path with 4 vertices
        let t: Vec<_> = (0..3).flat_map(|k| [(k, k, -1i64), (k, k + 1, 1)]).collect();
        let m = CsrMatrix::from_triplets(3, 4, &t);
        assert_eq!(rank(&m), 3);
        assert_eq!(rank(&m.transpose()), 3);
    }

    #[test]
    fn rank_detects_dependence() {
        let m = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2), (0, 1, 4), (1, 0, 1), (1, 1, 2), (2, 2, 7), (1, 2, 0)],
        );
        assert_eq!(rank(&m), 2);
    }

    #[test]
    fn big_entries_fall_back() {
        let big = 1i64 << 62;
        let m = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, big), (0, 1, 3), (1, 0, 5), (1, 1, big - 1), (2, 0, big), (2, 2, big - 3)],
        );
        assert_eq!(rank(&m), 3);
    }

    #[test]
    fn sign_equivalence() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1i64), (0, 1, -1), (1, 1, 1)]);
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 0, -1i64), (0, 1, 1), (1, 1, 1)]);
        assert!(sign_equivalent(&a, &b).is_some());
        let c = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1i64), (0, 1, 1), (1, 0, 1), (1, 1, -1)]);
        let d = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1i64), (0, 1, 1), (1, 0, 1), (1, 1, 1)]);
        assert!(sign_equivalent(&c, &d).is_none());
    }
}
