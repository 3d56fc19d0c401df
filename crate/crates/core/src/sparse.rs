//! Compressed-row sparse matrices.

use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Square CSR matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds an `n x n` matrix from `(row, col, value)` triplets, summing
    /// duplicates in the order they appear.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= n || *c >= n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.max(c) + 1,
            });
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Dense row-major input; zeros are dropped.
    pub fn from_dense(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, trip)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> (&[usize], &mut [T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &mut self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j)
            .map(|k| vals[k])
            .unwrap_or_else(|_| T::zero())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[T]) -> T {
        self.mul_vec(x).iter().zip(x).map(|(&a, &b)| a * b).sum()
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry magnitude.
    pub fn asymmetry(&self) -> T {
        let scale = self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if scale == T::zero() {
            return T::zero();
        }
        let mut worst = T::zero();
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// True when the sparsity pattern is structurally symmetric.
    pub fn pattern_is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (cols, _) = self.row(i);
            cols.iter()
                .all(|&j| self.row(j).0.binary_search(&i).is_ok())
        })
    }

    /// `alpha * self + beta * other`; both operands must share a dimension.
    pub fn linear_combination(&self, alpha: T, other: &Self, beta: T) -> Result<Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            let (c, v) = self.row(i);
            trip.extend(c.iter().zip(v).map(|(&c, &v)| (i, c, alpha * v)));
            let (c, v) = other.row(i);
            trip.extend(c.iter().zip(v).map(|(&c, &v)| (i, c, beta * v)));
        }
        Self::from_triplets(self.n, trip)
    }

    /// Coordinate-format ASCII dump: one `row col value` line per stored entry.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "% {} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                writeln!(out, "{i} {j} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m =
            CsrMatrix::from_triplets(2, vec![(1, 0, 2.0), (0, 0, 1.0), (1, 0, 3.0), (0, 1, -1.0)])
                .unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 0), 5.0);
        assert_eq!(m.mul_vec(&[1.0, 2.0]), vec![-1.0, 5.0]);
        assert!(m.pattern_is_symmetric());
        assert!(m.asymmetry() > 0.5);
        assert!(CsrMatrix::from_triplets(2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn triplet_dump_format() {
        let m = CsrMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let mut buf = Vec::new();
        m.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "% 2 2 4");
        assert!(lines[1].starts_with("0 0 4.0"));
        assert_eq!(lines.len(), 5);
    }
}
