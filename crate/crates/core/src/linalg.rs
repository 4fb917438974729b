//! Small dense row-major matrices.
//!
//! Layer widths in this domain are tens of neurons, so a plain `Vec`-backed
//! matrix with explicit loops is enough and keeps summation order fixed,
//! which the bit-exact forward-equivalence checks depend on.

#![allow(clippy::needless_range_loop)]

use serde::{Deserialize, Serialize};

use crate::scalar::{neg, pos, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    /// Builds from row vectors. Returns `None` on ragged input.
    pub fn from_rows(rows: &[Vec<S>]) -> Option<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return None;
        }
        Some(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &S> {
        self.data.iter()
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == S::zero())
    }

    pub fn max_abs(&self) -> S {
        self.data.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    /// Induced ∞-norm: maximum absolute row sum.
    pub fn inf_norm(&self) -> S {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<S>())
            .fold(S::zero(), S::max)
    }

    /// `self · x`, accumulating each row left to right starting from zero.
    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows);
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                let src = rhs.row(k);
                let dst = out.row_mut(i);
                for j in 0..rhs.cols {
                    dst[j] += a * src[j];
                }
            }
        }
        out
    }

    /// Sign-split product bounding `self · Z` for `lo ≤ Z ≤ hi` (entrywise):
    /// returns `(self⁺·lo + self⁻·hi, self⁺·hi + self⁻·lo)`.
    pub fn split_matmul(&self, lo: &Self, hi: &Self) -> (Self, Self) {
        assert_eq!(self.cols, lo.rows);
        assert_eq!((lo.rows, lo.cols), (hi.rows, hi.cols));
        let mut out_lo = Self::zeros(self.rows, lo.cols);
        let mut out_hi = Self::zeros(self.rows, lo.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                let (for_lo, for_hi) = if a > S::zero() {
                    (lo.row(k), hi.row(k))
                } else {
                    (hi.row(k), lo.row(k))
                };
                for j in 0..lo.cols {
                    out_lo.data[i * lo.cols + j] += a * for_lo[j];
                    out_hi.data[i * lo.cols + j] += a * for_hi[j];
                }
            }
        }
        (out_lo, out_hi)
    }

    /// Vector analogue of [`Matrix::split_matmul`].
    pub fn split_matvec(&self, lo: &[S], hi: &[S]) -> (Vec<S>, Vec<S>) {
        assert_eq!(self.cols, lo.len());
        assert_eq!(lo.len(), hi.len());
        let mut out_lo = vec![S::zero(); self.rows];
        let mut out_hi = vec![S::zero(); self.rows];
        for i in 0..self.rows {
            for (k, &a) in self.row(i).iter().enumerate() {
                out_lo[i] += pos(a) * lo[k] + neg(a) * hi[k];
                out_hi[i] += pos(a) * hi[k] + neg(a) * lo[k];
            }
        }
        (out_lo, out_hi)
    }

    pub fn scale_row(&mut self, i: usize, by: S) {
        for v in self.row_mut(i) {
            *v *= by;
        }
    }
}

impl<S> std::ops::Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn add_vec<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn l2_norm<S: Scalar>(v: &[S]) -> S {
    v.iter().map(|&x| x * x).sum::<S>().sqrt()
}
