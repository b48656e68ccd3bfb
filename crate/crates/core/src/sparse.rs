//! Compressed sparse row matrices with deterministic assembly.

use std::ops::{Add, Mul, Neg};

use faer::Mat;
use num_traits::Zero;

pub trait Scalar: Copy + Zero + Add<Output = Self> + Mul<Output = Self> + PartialEq + Send + Sync {}
impl<T: Copy + Zero + Add<Output = T> + Mul<Output = T> + PartialEq + Send + Sync> Scalar for T {}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: vec![], values: vec![] }
    }

    /// Sums duplicates; entries are sorted by (row, col) so the result does
    /// not depend on the triplet order beyond floating-point summation order
    /// within a duplicate group, which follows the input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1, k));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                let l = values.len() - 1;
                values[l] = values[l] + v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = CsrMatrix { nrows, ncols, indptr, indices, values };
        m.prune();
        m
    }

    fn prune(&mut self) {
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != T::zero() {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r).find(|&(j, _)| j == c).map(|(_, v)| v).unwrap_or_else(T::zero)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        (0..self.nrows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).fold(T::zero(), |acc, (c, v)| acc + v * x[c]))
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut trip = Vec::new();
        let mut acc: Vec<Option<T>> = vec![None; other.ncols];
        let mut touched = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    match &mut acc[c] {
                        Some(v) => *v = *v + a * b,
                        slot @ None => {
                            *slot = Some(a * b);
                            touched.push(c);
                        }
                    }
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                trip.push((r, c, acc[c].take().unwrap()));
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, &trip)
    }

    /// Rows and columns picked (and reordered) by index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut colmap = vec![usize::MAX; self.ncols];
        for (j, &c) in cols.iter().enumerate() {
            colmap[c] = j;
        }
        let mut trip = Vec::new();
        for (i, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if colmap[c] != usize::MAX {
                    trip.push((i, colmap[c], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &trip)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (r, c, f(v))).collect();
        CsrMatrix::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn is_zero(&self) -> bool {
        self.nnz() == 0
    }
}

impl<T: Scalar + Neg<Output = T>> CsrMatrix<T> {
    pub fn neg(&self) -> Self {
        self.map(|v| -v)
    }
}

impl CsrMatrix<f64> {
    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn add(&self, other: &Self, scale: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, scale * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ax = self.mul_vec(y);
        x.iter().zip(ax).map(|(a, b)| a * b).sum()
    }
}

impl CsrMatrix<i64> {
    pub fn to_f64(&self) -> CsrMatrix<f64> {
        self.map(|v| v as f64)
    }
}
