//! Small dense kernels: symmetric eigendecomposition and a rank-revealing
//! Cholesky for positive semidefinite Gram matrices.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, SparseCholesky};

/// Eigenpairs of a dense symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Internal(format!("symmetric eigensolver failed: {e:?}")))?;
    let n = a.nrows();
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[i].total_cmp(&s[j]));
    let values = order.iter().map(|&k| s[k]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok((values, vectors))
}

/// Diagonally pivoted Cholesky `P A Pᵀ = L Lᵀ` that stops once the largest
/// remaining pivot falls below `tol · max diag(A)`.
///
/// For a consistent semidefinite system the solve returns the basic solution
/// with zero components on the dropped pivots.
#[derive(Clone, Debug)]
pub struct PivotedCholesky {
    n: usize,
    rank: usize,
    perm: Vec<usize>,
    // row-major n × n, only the leading `rank` columns of the lower triangle used
    factor: Vec<f64>,
}

impl PivotedCholesky {
    pub fn new(a: &[f64], n: usize, tol: f64) -> Self {
        assert_eq!(a.len(), n * n);
        let mut w = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
        let threshold = tol * scale;
        let mut rank = 0;
        for k in 0..n {
            let (piv, &best) = (k..n)
                .map(|i| (i, &w[i * n + i]))
                .max_by(|x, y| x.1.total_cmp(y.1))
                .unwrap();
            if !(best > threshold) {
                break;
            }
            if piv != k {
                perm.swap(k, piv);
                for c in 0..n {
                    w.swap(k * n + c, piv * n + c);
                }
                for r in 0..n {
                    w.swap(r * n + k, r * n + piv);
                }
            }
            let d = w[k * n + k].sqrt();
            w[k * n + k] = d;
            for i in k + 1..n {
                w[i * n + k] /= d;
            }
            for j in k + 1..n {
                let ljk = w[j * n + k];
                if ljk == 0.0 {
                    continue;
                }
                for i in j..n {
                    w[i * n + j] -= w[i * n + k] * ljk;
                }
            }
            // keep the trailing block symmetric for the pivot search
            for j in k + 1..n {
                for i in j + 1..n {
                    w[j * n + i] = w[i * n + j];
                }
            }
            rank += 1;
        }
        PivotedCholesky {
            n,
            rank,
            perm,
            factor: w,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Original indices of the pivots that were dropped.
    pub fn dropped(&self) -> Vec<usize> {
        let mut d = self.perm[self.rank..].to_vec();
        d.sort_unstable();
        d
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, r) = (self.n, self.rank);
        let l = |i: usize, j: usize| self.factor[i * n + j];
        let mut y: Vec<f64> = (0..r).map(|k| b[self.perm[k]]).collect();
        for i in 0..r {
            let s: f64 = (0..i).map(|j| l(i, j) * y[j]).sum();
            y[i] = (y[i] - s) / l(i, i);
        }
        for i in (0..r).rev() {
            let s: f64 = (i + 1..r).map(|j| l(j, i) * y[j]).sum();
            y[i] = (y[i] - s) / l(i, i);
        }
        let mut x = vec![0.0; n];
        for k in 0..r {
            x[self.perm[k]] = y[k];
        }
        x
    }
}

/// Relative pivot threshold separating numerically null Gram directions.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Dense sizes beyond this are never factorized with the dense fallback.
pub const DENSE_LIMIT: usize = 4000;

/// Solver for symmetric positive (semi)definite systems: sparse Cholesky
/// when the matrix is numerically definite, dense pivoted Cholesky otherwise.
pub enum SpdSolver {
    Sparse(SparseCholesky),
    Dense(PivotedCholesky),
}

impl SpdSolver {
    /// Factorizes `a`. With `allow_semidefinite` a rank-deficient `a` falls
    /// back to the pivoted dense factorization instead of failing.
    pub fn new(a: &CsrMatrix, allow_semidefinite: bool) -> Result<Self> {
        match SparseCholesky::new(a) {
            Ok(c) => Ok(SpdSolver::Sparse(c)),
            Err(e) if allow_semidefinite && a.nrows() <= DENSE_LIMIT => {
                log::debug!("sparse Cholesky failed ({e}); using pivoted dense factorization");
                let n = a.nrows();
                let dense: Vec<f64> = a.to_dense().into_iter().flatten().collect();
                Ok(SpdSolver::Dense(PivotedCholesky::new(
                    &dense,
                    n,
                    RANK_TOLERANCE,
                )))
            }
            Err(e) => Err(e),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            SpdSolver::Sparse(c) => c.solve(b),
            SpdSolver::Dense(c) => c.solve(b),
        }
    }

    pub fn rank(&self) -> Option<usize> {
        match self {
            SpdSolver::Sparse(c) => Some(c.dim()),
            SpdSolver::Dense(c) => Some(c.rank()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_is_ascending_and_orthonormal() {
        let a = Mat::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => 2.0,
            (1, 1) => 3.0,
            (2, 2) => 1.0,
            (0, 1) | (1, 0) => 0.5,
            _ => 0.0,
        });
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|k| vecs[(k, i)] * vecs[(k, j)]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pivoted_cholesky_detects_rank_one_deficiency() {
        // a = v vᵀ + w wᵀ with v, w in R³ -> rank 2
        let v = [1.0, 2.0, 0.5];
        let w = [0.0, 1.0, -1.0];
        let a: Vec<f64> = (0..9)
            .map(|k| {
                let (i, j) = (k / 3, k % 3);
                v[i] * v[j] + w[i] * w[j]
            })
            .collect();
        let f = PivotedCholesky::new(&a, 3, 1e-12);
        assert_eq!(f.rank(), 2);
        // consistent right-hand side a·x0
        let x0 = [0.3, -0.2, 0.7];
        let b: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| a[i * 3 + j] * x0[j]).sum())
            .collect();
        let x = f.solve(&b);
        let r: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| a[i * 3 + j] * x[j]).sum::<f64>() - b[i])
            .collect();
        assert!(r.iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn pivoted_cholesky_full_rank_matches_exact_solve() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let f = PivotedCholesky::new(&a, 2, 1e-12);
        assert_eq!(f.rank(), 2);
        let x = f.solve(&[1.0, 2.0]);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }
}
