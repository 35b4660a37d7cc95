//! Constraint-energy-minimizing velocity basis on oversampled patches.
//!
//! For a basis pair `(i, j)` the velocity `ψ` and multiplier `μ` on the patch
//! `K_{i,ℓ}` satisfy
//!
//! ```text
//! A ψ − Bᵀ μ = 0
//! B ψ + W Wᵀ μ = S p_j^i,      W = S P_loc
//! ```
//!
//! where `P_loc` holds the auxiliary columns of the patch elements. Because
//! those columns are s-orthonormal, `W Wᵀ` is the matrix of `s(πμ, πq)`.
//! The system is solved in the symmetric augmented form
//!
//! ```text
//! [ A   −Bᵀ   0 ] [ψ]   [   0    ]
//! [ −B   0   −W ] [μ] = [ −S p_j ]
//! [ 0   −Wᵀ   I ] [z]   [   0    ]
//! ```
//!
//! which keeps every block sparse. One factorization serves all `J` columns
//! of the patch.

use rayon::prelude::*;

use crate::assembly::FineOperators;
use crate::dense::{PivotedCholesky, DENSE_LIMIT, RANK_TOLERANCE};
use crate::error::{Error, Result};
use crate::grid::{GridHierarchy, Patch};
use crate::sparse::{norm, CsrMatrix, SparseCholesky, SparseLu};
use crate::spectral::AuxiliarySpace;

/// Relative saddle residual accepted for a basis function.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// One basis function and its multiplier, stored on patch DOFs.
#[derive(Clone, Debug)]
pub struct CemColumn {
    pub element: usize,
    pub index: usize,
    /// Global interior edges of the patch; `psi` is indexed the same way.
    pub edges: Vec<usize>,
    pub psi: Vec<f64>,
    /// Global patch cells; `mu` is indexed the same way.
    pub cells: Vec<usize>,
    pub mu: Vec<f64>,
    /// Relative residual of the saddle system after the solve.
    pub residual: f64,
}

/// Local saddle-point operators of one oversampled patch.
pub struct PatchSystem {
    pub patch: Patch,
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    /// `S P_loc`, patch cells × patch auxiliary columns.
    pub w: CsrMatrix,
    /// Global auxiliary columns in `w`.
    pub aux_columns: Vec<usize>,
    pub s: Vec<f64>,
}

impl PatchSystem {
    pub fn new(
        g: &GridHierarchy,
        ops: &FineOperators,
        aux: &AuxiliarySpace,
        element: usize,
        layers: usize,
    ) -> Result<Self> {
        let patch = g.oversample(element, layers)?;
        let a = ops
            .velocity_mass
            .submatrix(&patch.interior_edges, &patch.interior_edges);
        let b = ops.div.submatrix(&patch.cells, &patch.interior_edges);
        let s: Vec<f64> = patch.cells.iter().map(|&c| aux.s_mass[c]).collect();
        let mut aux_columns = Vec::new();
        let mut entries = Vec::new();
        for &k in &patch.elements {
            let sp = &aux.spectra[k];
            for (jj, col) in aux.element_columns(k).enumerate() {
                let local = aux_columns.len();
                aux_columns.push(col);
                for (&c, &v) in sp.cells.iter().zip(&sp.eigenvectors[jj]) {
                    let lc = patch
                        .local_cell(c)
                        .ok_or_else(|| Error::Internal(format!("cell {c} outside patch")))?;
                    entries.push((lc, local, s[lc] * v));
                }
            }
        }
        let w = CsrMatrix::from_triplets(patch.num_cells(), aux_columns.len(), &entries);
        Ok(PatchSystem {
            patch,
            a,
            b,
            w,
            aux_columns,
            s,
        })
    }

    fn sizes(&self) -> (usize, usize, usize) {
        (self.a.nrows(), self.b.nrows(), self.w.ncols())
    }

    /// The symmetric augmented matrix.
    pub fn augmented(&self) -> CsrMatrix {
        let (ne, nc, m) = self.sizes();
        let mut entries: Vec<(usize, usize, f64)> = self.a.triplets().collect();
        for (r, c, v) in self.b.triplets() {
            entries.push((ne + r, c, -v));
            entries.push((c, ne + r, -v));
        }
        for (r, c, v) in self.w.triplets() {
            entries.push((ne + r, ne + nc + c, -v));
            entries.push((ne + nc + c, ne + r, -v));
        }
        for k in 0..m {
            entries.push((ne + nc + k, ne + nc + k, 1.0));
        }
        CsrMatrix::from_triplets(ne + nc + m, ne + nc + m, &entries)
    }

    /// Residual of the reduced equations relative to the size of their terms.
    pub fn residual(&self, psi: &[f64], mu: &[f64], rhs: &[f64]) -> f64 {
        let a_psi = self.a.mul_vec(psi);
        let bt_mu = self.b.transpose_mul_vec(mu);
        let b_psi = self.b.mul_vec(psi);
        let wwt_mu = self.w.mul_vec(&self.w.transpose_mul_vec(mu));
        let r1: Vec<f64> = a_psi.iter().zip(&bt_mu).map(|(x, y)| x - y).collect();
        let r2: Vec<f64> = (0..rhs.len())
            .map(|c| b_psi[c] + wwt_mu[c] - rhs[c])
            .collect();
        let scale = norm(&a_psi) + norm(&bt_mu) + norm(&b_psi) + norm(&wwt_mu) + norm(rhs);
        if scale == 0.0 {
            return 0.0;
        }
        (norm(&r1).powi(2) + norm(&r2).powi(2)).sqrt() / scale
    }
}

/// Solves for the basis functions of element `element`, columns `indices`
/// (local eigenvector numbers), with right-hand sides `S p_j`.
pub fn solve_patch(
    sys: &PatchSystem,
    element: usize,
    rhs_cells: &[Vec<f64>],
) -> Result<Vec<(Vec<f64>, Vec<f64>, f64)>> {
    let (ne, nc, m) = sys.sizes();
    let n = ne + nc + m;
    let k = sys.augmented();
    let lu = SparseLu::new(&k)
        .map_err(|e| Error::Singular(format!("CEM patch of element {element}: {e}")))?;
    let cols = rhs_cells.len();
    let mut x = vec![0.0; n * cols];
    for (c, r) in rhs_cells.iter().enumerate() {
        for (lc, &v) in r.iter().enumerate() {
            x[c * n + ne + lc] = -v;
        }
    }
    let b0 = x.clone();
    lu.solve_many_in_place(&mut x, cols);
    // one step of iterative refinement on the augmented system
    let mut corr = vec![0.0; n * cols];
    for c in 0..cols {
        let xc = &x[c * n..(c + 1) * n];
        let kx = k.mul_vec(xc);
        for i in 0..n {
            corr[c * n + i] = b0[c * n + i] - kx[i];
        }
    }
    lu.solve_many_in_place(&mut corr, cols);
    x.iter_mut().zip(&corr).for_each(|(a, b)| *a += b);

    let mut out = Vec::with_capacity(cols);
    for (c, r) in rhs_cells.iter().enumerate() {
        let xc = &x[c * n..(c + 1) * n];
        let psi = xc[..ne].to_vec();
        let mu = xc[ne..ne + nc].to_vec();
        let res = sys.residual(&psi, &mu, r);
        if !(res <= RESIDUAL_TOLERANCE) {
            return Err(Error::Singular(format!(
                "CEM patch of element {element}: residual {res:e} exceeds {RESIDUAL_TOLERANCE:e}"
            )));
        }
        out.push((psi, mu, res));
    }
    Ok(out)
}

/// Builds the basis pair `(i, j)` alone.
pub fn build_cem_basis(
    g: &GridHierarchy,
    ops: &FineOperators,
    aux: &AuxiliarySpace,
    element: usize,
    j: usize,
    layers: usize,
) -> Result<CemColumn> {
    let sys = PatchSystem::new(g, ops, aux, element, layers)?;
    let rhs = element_rhs(&sys, aux, element, &[j])?;
    let (psi, mu, residual) = solve_patch(&sys, element, &rhs)?.remove(0);
    Ok(CemColumn {
        element,
        index: j,
        edges: sys.patch.interior_edges.clone(),
        psi,
        cells: sys.patch.cells.clone(),
        mu,
        residual,
    })
}

/// `S p_j` on the patch cells for the listed local eigenvectors.
fn element_rhs(
    sys: &PatchSystem,
    aux: &AuxiliarySpace,
    element: usize,
    indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let sp = &aux.spectra[element];
    indices
        .iter()
        .map(|&j| {
            if j >= sp.retained {
                return Err(Error::Config(format!(
                    "basis index {j} not retained on element {element}"
                )));
            }
            let mut r = vec![0.0; sys.patch.num_cells()];
            for (&c, &v) in sp.cells.iter().zip(&sp.eigenvectors[j]) {
                let lc = sys.patch.local_cell(c).unwrap();
                r[lc] = sys.s[lc] * v;
            }
            Ok(r)
        })
        .collect()
}

/// How the Gram matrix `ΨᵀAΨ` was found to behave.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GramStatus {
    Definite,
    /// Numerically singular only along `c₀ = Pᵀ S 1`, whose velocity
    /// `Ψ c₀` vanishes when the patches cover the domain.
    ConstantNull,
}

#[derive(Clone, Debug)]
pub struct CemVelocityBasis {
    pub layers: usize,
    pub columns: Vec<CemColumn>,
    /// Fine edges × M.
    pub basis: CsrMatrix,
    pub gram_status: GramStatus,
}

pub fn assemble_velocity_space(
    g: &GridHierarchy,
    ops: &FineOperators,
    aux: &AuxiliarySpace,
    columns: Vec<CemColumn>,
    layers: usize,
) -> Result<CemVelocityBasis> {
    if columns.len() != aux.dim() {
        return Err(Error::Internal(format!(
            "{} velocity columns for {} pressure columns",
            columns.len(),
            aux.dim()
        )));
    }
    let mut entries = Vec::new();
    for (col, c) in columns.iter().enumerate() {
        for (&e, &v) in c.edges.iter().zip(&c.psi) {
            if v != 0.0 {
                entries.push((e, col, v));
            }
        }
    }
    let basis = CsrMatrix::from_triplets(g.num_edges(), columns.len(), &entries);
    let gram = gram_matrix(&ops.velocity_mass, &basis);
    let gram_status = check_gram(ops, aux, &basis, &gram)?;
    Ok(CemVelocityBasis {
        layers,
        columns,
        basis,
        gram_status,
    })
}

/// `Ψᵀ A Ψ`, symmetrized.
pub fn gram_matrix(a: &CsrMatrix, psi: &CsrMatrix) -> CsrMatrix {
    let g = psi.transpose().matmul(&a.matmul(psi));
    let gt = g.transpose();
    let entries: Vec<_> = g
        .triplets()
        .chain(gt.triplets())
        .map(|(i, j, v)| (i, j, 0.5 * v))
        .collect();
    CsrMatrix::from_triplets(g.nrows(), g.ncols(), &entries)
}

/// Coefficients of the constant pressure in `Q_ms`.
pub fn constant_coefficients(aux: &AuxiliarySpace) -> Vec<f64> {
    aux.s_coefficients(&vec![1.0; aux.s_mass.len()])
}

fn check_gram(
    ops: &FineOperators,
    aux: &AuxiliarySpace,
    basis: &CsrMatrix,
    gram: &CsrMatrix,
) -> Result<GramStatus> {
    if SparseCholesky::new(gram).is_ok() && gram.nrows() > DENSE_LIMIT {
        return Ok(GramStatus::Definite);
    }
    if gram.nrows() > DENSE_LIMIT {
        return Err(Error::RankDeficient(format!(
            "Gram matrix of size {} is not positive definite",
            gram.nrows()
        )));
    }
    let n = gram.nrows();
    let dense: Vec<f64> = gram.to_dense().into_iter().flatten().collect();
    let f = PivotedCholesky::new(&dense, n, RANK_TOLERANCE);
    let dropped = f.dropped();
    match dropped.len() {
        0 => Ok(GramStatus::Definite),
        1 => {
            let c0 = constant_coefficients(aux);
            let v0 = basis.mul_vec(&c0);
            let energy = ops.velocity_mass.quad_form(&v0);
            let diag_max = gram.diagonal_values().into_iter().fold(0.0, f64::max);
            let c0_sq: f64 = c0.iter().map(|x| x * x).sum();
            if energy <= RANK_TOLERANCE * diag_max * c0_sq {
                Ok(GramStatus::ConstantNull)
            } else {
                Err(rank_error(&dropped))
            }
        }
        _ => Err(rank_error(&dropped)),
    }
}

fn rank_error(dropped: &[usize]) -> Error {
    Error::RankDeficient(format!(
        "velocity Gram matrix is singular; dependent columns {dropped:?}"
    ))
}

impl CemVelocityBasis {
    /// Solves every patch (in parallel over coarse elements) and assembles `Ψ`.
    pub fn build(
        g: &GridHierarchy,
        ops: &FineOperators,
        aux: &AuxiliarySpace,
        layers: usize,
    ) -> Result<Self> {
        let per_element = (0..g.num_elements())
            .into_par_iter()
            .map(|k| -> Result<Vec<CemColumn>> {
                let sys = PatchSystem::new(g, ops, aux, k, layers)?;
                let indices: Vec<usize> = (0..aux.spectra[k].retained).collect();
                let rhs = element_rhs(&sys, aux, k, &indices)?;
                let sols = solve_patch(&sys, k, &rhs)?;
                Ok(sols
                    .into_iter()
                    .zip(indices)
                    .map(|((psi, mu, residual), j)| CemColumn {
                        element: k,
                        index: j,
                        edges: sys.patch.interior_edges.clone(),
                        psi,
                        cells: sys.patch.cells.clone(),
                        mu,
                        residual,
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let columns = per_element.into_iter().flatten().collect();
        assemble_velocity_space(g, ops, aux, columns, layers)
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// `ψ` of column `col` on every fine edge.
    pub fn psi_field(&self, col: usize, num_edges: usize) -> Vec<f64> {
        let c = &self.columns[col];
        let mut out = vec![0.0; num_edges];
        for (&e, &v) in c.edges.iter().zip(&c.psi) {
            out[e] = v;
        }
        out
    }
}
