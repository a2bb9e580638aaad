//! Sparse and banded linear algebra used by the finite-difference solvers.
//!
//! Generators on the wealth-major state ordering only couple nodes whose
//! indices differ by at most the number of income nodes, so every implicit
//! system is banded with a tiny bandwidth. The systems are nonsingular
//! M-matrices and are factored without pivoting.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a square matrix from `(row, col, value)` triplets. Duplicate
    /// entries are summed; explicit zeros are kept so that the sparsity
    /// pattern does not depend on the data.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r)
            .filter(|&(j, _)| j == c)
            .map(|(_, v)| v)
            .sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `Aᵀ y`.
    pub fn mul_transpose_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n);
        let mut out = vec![0.0; self.n];
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                out[c] += v * y[r];
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                trip.push((c, r, v));
            }
        }
        SparseMatrix::from_triplets(self.n, trip)
    }

    /// Largest `|row - col|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0;
        for r in 0..self.n {
            for (c, _) in self.row(r) {
                bw = bw.max(r.abs_diff(c));
            }
        }
        bw
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }
}

/// Square matrix with equal lower and upper bandwidth, row-major band storage.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedMatrix {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    /// `shift·I + scale·A` (or `scale·Aᵀ` when `transpose`).
    pub fn shifted(a: &SparseMatrix, shift: f64, scale: f64, transpose: bool) -> Self {
        let bw = a.bandwidth();
        let mut m = BandedMatrix::zeros(a.dim(), bw);
        for i in 0..a.dim() {
            m.add(i, i, shift);
        }
        for (r, c, v) in a.triplets() {
            if transpose {
                m.add(c, r, scale * v);
            } else {
                m.add(r, c, scale * v);
            }
        }
        m
    }

    /// `shift·I + scale·A` from the entries of `A`, all within `bw` of the
    /// diagonal.
    pub fn from_triplets(
        n: usize,
        bw: usize,
        triplets: &[(usize, usize, f64)],
        shift: f64,
        scale: f64,
    ) -> Self {
        let mut m = BandedMatrix::zeros(n, bw);
        for i in 0..n {
            m.add(i, i, shift);
        }
        for &(r, c, v) in triplets {
            assert!(r.abs_diff(c) <= bw, "entry ({r}, {c}) outside bandwidth {bw}");
            m.add(r, c, scale * v);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Replaces row `i` with the unit row `e_i`.
    pub fn set_unit_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.bw);
        let hi = (i + self.bw).min(self.n - 1);
        for j in lo..=hi {
            let s = self.slot(i, j);
            self.data[s] = if i == j { 1.0 } else { 0.0 };
        }
    }

    /// LU factorization without pivoting. Fails on a pivot that is tiny
    /// relative to the row scale, which for the M-matrices built here means
    /// the operator is singular (e.g. reducible).
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, bw) = (self.n, self.bw);
        let width = 2 * bw + 1;
        for k in 0..n {
            let pivot = self.data[k * width + bw];
            let row_scale: f64 = self.data[k * width..(k + 1) * width]
                .iter()
                .map(|v| v.abs())
                .fold(0.0, f64::max);
            if !(pivot.abs() > 1e-13 * row_scale.max(f64::MIN_POSITIVE)) || !pivot.is_finite() {
                return Err(Error::LinearSolve {
                    row: k,
                    pivot,
                    margin: row_scale,
                });
            }
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let ik = i * width + (k + bw - i);
                let l = self.data[ik] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                for j in k + 1..=last {
                    let kj = k * width + (j + bw - k);
                    let ij = i * width + (j + bw - i);
                    self.data[ij] -= l * self.data[kj];
                }
            }
        }
        let inv_diag = (0..n).map(|k| 1.0 / self.data[k * width + bw]).collect();
        Ok(BandedLu {
            n,
            bw,
            data: self.data,
            inv_diag,
        })
    }
}

/// Factored banded matrix.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    data: Vec<f64>,
    /// Reciprocals of the `U` diagonal.
    inv_diag: Vec<f64>,
}

impl BandedLu {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, bw) = (self.n, self.bw);
        let width = 2 * bw + 1;
        for i in 0..n {
            let first = i.saturating_sub(bw);
            let row = &self.data[i * width + (first + bw - i)..i * width + bw];
            let acc = row.iter().zip(&b[first..i]).fold(b[i], |acc, (l, x)| acc - l * x);
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let last = (i + bw).min(n - 1);
            let row = &self.data[i * width + bw..i * width + bw + (last - i) + 1];
            let acc = row[1..]
                .iter()
                .zip(&b[i + 1..=last])
                .fold(b[i], |acc, (u, x)| acc - u * x);
            b[i] = acc * self.inv_diag[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        // Gaussian elimination with partial pivoting, reference only.
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| m[i][k].abs().partial_cmp(&m[j][k].abs()).unwrap())
                .unwrap();
            m.swap(k, p);
            x.swap(k, p);
            for i in k + 1..n {
                let l = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= l * m[k][j];
                }
                x[i] -= l * x[k];
            }
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
            x[i] = (x[i] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseMatrix::from_triplets(2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, -1.0)]);
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.bandwidth(), 1);
    }

    #[test]
    fn banded_matches_dense_reference() {
        let n = 9;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, -3.0 - i as f64 * 0.1));
            if i + 2 < n {
                trip.push((i, i + 2, 1.0));
            }
            if i >= 1 {
                trip.push((i, i - 1, 0.5 + 0.05 * i as f64));
            }
        }
        let a = SparseMatrix::from_triplets(n, trip);
        let m = BandedMatrix::shifted(&a, 5.0, -1.0, false);
        let lu = m.factor().unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = lu.solve(&b);
        let dense: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 5.0 } else { 0.0 } - a.get(i, j))
                    .collect()
            })
            .collect();
        let xr = dense_solve(&dense, &b);
        for (u, v) in x.iter().zip(&xr) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_solve_matches_transpose_matrix() {
        let a = SparseMatrix::from_triplets(
            3,
            vec![(0, 0, -1.0), (0, 1, 1.0), (1, 0, 2.0), (1, 1, -2.0), (2, 1, 0.5), (2, 2, -0.5)],
        );
        let x1 = BandedMatrix::shifted(&a, 1.0, -0.3, true)
            .factor()
            .unwrap()
            .solve(&[1.0, 2.0, 3.0]);
        let x2 = BandedMatrix::shifted(&a.transpose(), 1.0, -0.3, false)
            .factor()
            .unwrap()
            .solve(&[1.0, 2.0, 3.0]);
        assert_eq!(x1, x2);
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = SparseMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)]);
        let err = BandedMatrix::shifted(&a, 0.0, 1.0, false).factor().unwrap_err();
        assert!(matches!(err, Error::LinearSolve { row: 1, .. }));
    }
}
