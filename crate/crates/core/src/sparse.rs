//! Compressed sparse row storage and the factorizations used by the solvers.
//!
//! Assembly and matrix products run on [`CsrMatrix`]; factorizations are
//! delegated to faer's supernodal sparse Cholesky and LU.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` entries, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in entries {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; entries.len()];
        let mut vals = vec![0.0; entries.len()];
        for &(r, c, v) in entries {
            cols[fill[r]] = c;
            vals[fill[r]] = v;
            fill[r] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        indptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..nrows {
            let (lo, hi) = (counts[r], counts[r + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_unstable_by_key(|&k| cols[k]);
            let mut last: Option<usize> = None;
            for &k in &order {
                if last == Some(cols[k]) {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    indices.push(cols[k]);
                    values.push(vals[k]);
                    last = Some(cols[k]);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        CsrMatrix {
            nrows: diag.len(),
            ncols: diag.len(),
            indptr: (0..=diag.len()).collect(),
            indices: (0..diag.len()).collect(),
            values: diag.to_vec(),
        }
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

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Iterates over stored `(row, col, value)` entries in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `y = selfᵀ x`
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut fill = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                indices[fill[j]] = i;
                values[fill[j]] = v;
                fill[j] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr: counts,
            indices,
            values,
        }
    }

    /// Sparse product `self · rhs` (row-by-row accumulation).
    pub fn matmul(&self, rhs: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, rhs.nrows, "inner dimensions differ");
        let mut acc = vec![0.0; rhs.ncols];
        let mut mark = vec![usize::MAX; rhs.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..self.nrows {
            touched.clear();
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (rcols, rvals) = rhs.row(k);
                for (&j, &b) in rcols.iter().zip(rvals) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                indices.push(j);
                values.push(acc[j]);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: rhs.ncols,
            indptr,
            indices,
            values,
        }
    }

    /// Extracts `self[rows, cols]` with the given index lists defining the
    /// new row and column order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut entries = Vec::new();
        for (ni, &oi) in rows.iter().enumerate() {
            let (c, v) = self.row(oi);
            for (&j, &x) in c.iter().zip(v) {
                let nj = col_map[j];
                if nj != usize::MAX {
                    entries.push((ni, nj, x));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), &entries)
    }

    pub fn scale(&self, factor: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `xᵀ self y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        (0..self.nrows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                x[i] * cols.iter().zip(vals).map(|(&j, &v)| v * y[j]).sum::<f64>()
            })
            .sum()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// Largest `|a_ij − a_ji|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }

    /// Column `j` as a dense vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    pub(crate) fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let entries: Vec<_> = self
            .triplets()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &entries)
            .map_err(|e| Error::Internal(format!("sparse conversion failed: {e:?}")))
    }
}

fn solve_columns<S: Solve<f64>>(solver: &S, n: usize, rhs: &mut [f64], ncols: usize) {
    assert_eq!(rhs.len(), n * ncols);
    let mat = MatMut::from_column_major_slice_mut(rhs, n, ncols);
    solver.solve_in_place(mat);
}

/// Sparse `LLᵀ` factorization of a symmetric positive definite matrix.
pub struct SparseCholesky {
    n: usize,
    llt: Llt<usize, f64>,
}

impl SparseCholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Internal("Cholesky of a non-square matrix".into()));
        }
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Singular(format!("Cholesky factorization failed: {e}")))?;
        Ok(SparseCholesky { n: a.nrows(), llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        solve_columns(&self.llt, self.n, b, 1);
    }

    /// Solves for several right-hand sides stored column-major in `b`.
    pub fn solve_many_in_place(&self, b: &mut [f64], ncols: usize) {
        solve_columns(&self.llt, self.n, b, ncols);
    }
}

/// Sparse LU with partial pivoting, used for the indefinite saddle systems.
pub struct SparseLu {
    n: usize,
    lu: Lu<usize, f64>,
}

impl SparseLu {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Internal("LU of a non-square matrix".into()));
        }
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::Singular(format!("LU factorization failed: {e:?}")))?;
        Ok(SparseLu { n: a.nrows(), lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        solve_columns(&self.lu, self.n, &mut x, 1);
        x
    }

    pub fn solve_many_in_place(&self, b: &mut [f64], ncols: usize) {
        solve_columns(&self.lu, self.n, b, ncols);
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += alpha · x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}
