//! Local spectral problems and the auxiliary pressure space `Q_ms`.
//!
//! On each coarse element the velocity is eliminated through the local
//! interior-edge mass, leaving the symmetric pencil `T p = λ S p` with
//! `T = B A⁻¹ Bᵀ` and `S` the κ̃-weighted cell mass. Zero normal flux on the
//! element boundary makes the constant an exact null vector of `T`, so the
//! first pair is set to `(0, 1)` exactly.
//!
//! κ̃ varies over many orders of magnitude in high-contrast media, which
//! makes `S^{-1/2} T S^{-1/2}` badly graded. The eigenvalues are computed as
//! squared singular values of a factor of it with one-sided Jacobi, which
//! keeps small eigenvalues accurate relative to their size.

use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side};
use rayon::prelude::*;

use crate::assembly::FineOperators;
use crate::error::{Error, Result};
use crate::grid::{GridHierarchy, Patch};
use crate::sparse::{CsrMatrix, SparseCholesky};

/// Extra eigenpairs computed beyond the retained ones (for `Λ`).
pub const EXTRA_PAIRS: usize = 1;

/// Relative floor applied to `S` entries that vanish.
pub const S_FLOOR: f64 = 1e-14;

/// Eigenpairs of one coarse element, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct ElementSpectrum {
    pub element: usize,
    /// Global ids of the element's cells; vectors are indexed the same way.
    pub cells: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    /// s-orthonormal eigenvectors, one `Vec` per computed pair.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Number of pairs retained in `Q_ms`.
    pub retained: usize,
    /// True when the `S` floor had to be applied on this element.
    pub floored: bool,
}

/// Local interior-edge mass and divergence of a patch.
pub(crate) fn local_operators(ops: &FineOperators, patch: &Patch) -> (CsrMatrix, CsrMatrix) {
    let a = ops
        .velocity_mass
        .submatrix(&patch.interior_edges, &patch.interior_edges);
    let b = ops.div.submatrix(&patch.cells, &patch.interior_edges);
    (a, b)
}

/// Dense `T = B A⁻¹ Bᵀ` for a single element.
pub fn schur_operator(ops: &FineOperators, patch: &Patch) -> Result<Mat<f64>> {
    let n = patch.num_cells();
    if patch.interior_edges.is_empty() {
        return Ok(Mat::zeros(n, n));
    }
    let (a, b) = local_operators(ops, patch);
    let ne = a.nrows();
    let factor = SparseCholesky::new(&a)?;
    // columns of Bᵀ, column-major
    let bt = b.transpose();
    let mut x = vec![0.0; ne * n];
    for (e, c, v) in bt.triplets() {
        x[c * ne + e] = v;
    }
    factor.solve_many_in_place(&mut x, n);
    let mut t = Mat::zeros(n, n);
    for c in 0..n {
        let col = &x[c * ne..(c + 1) * ne];
        for r in 0..n {
            let (cols, vals) = b.row(r);
            t[(r, c)] = cols.iter().zip(vals).map(|(&e, &w)| w * col[e]).sum();
        }
    }
    for r in 0..n {
        for c in r + 1..n {
            let avg = 0.5 * (t[(r, c)] + t[(c, r)]);
            t[(r, c)] = avg;
            t[(c, r)] = avg;
        }
    }
    Ok(t)
}

pub fn solve_local_spectral(
    g: &GridHierarchy,
    ops: &FineOperators,
    element: usize,
    n_retain: usize,
    n_extra: usize,
) -> Result<ElementSpectrum> {
    let patch = Patch::element(g, element);
    let n = patch.num_cells();
    if n_retain == 0 || n_retain > n {
        return Err(Error::Config(format!(
            "J = {n_retain} must lie in 1..={n} (cells per coarse element)"
        )));
    }
    if ops.s_mass.len() != g.num_cells() {
        return Err(Error::Internal(
            "s-weight not installed on fine operators".into(),
        ));
    }
    let s_max = ops.s_mass.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut s: Vec<f64> = patch.cells.iter().map(|&c| ops.s_mass[c]).collect();
    if let Some(v) = s.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Domain(format!(
            "s-weight {v} is not nonnegative on element {element}"
        )));
    }
    let floor = S_FLOOR * s_max;
    let mut floored = false;
    for v in s.iter_mut() {
        if *v < floor {
            *v = floor;
            floored = true;
        }
    }
    if floored {
        log::warn!("κ̃ vanishes on part of element {element}; S floored at {floor:e}");
    }

    let inv_sqrt: Vec<f64> = s.iter().map(|v| 1.0 / v.sqrt()).collect();
    // S^{1/2}·1 spans the exact null space of C
    let mut u: Vec<f64> = s.iter().map(|v| v.sqrt()).collect();
    let un = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    u.iter_mut().for_each(|x| *x /= un);

    let count = (n_retain + n_extra).min(n);
    let mut eigenvalues = vec![0.0];
    let mut ys: Vec<Vec<f64>> = vec![u.clone()];
    if n > 1 {
        let x = weighted_factor(ops, &patch, &inv_sqrt)?;
        let (vals, vecs) = gram_eigen(&x, element)?;
        // the smallest pair is the null direction, replaced by u
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        for &k in &order[1..count] {
            let mut y = vecs[k].clone();
            let d: f64 = y.iter().zip(&u).map(|(a, b)| a * b).sum();
            y.iter_mut().zip(&u).for_each(|(a, b)| *a -= d * b);
            let yn = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            y.iter_mut().for_each(|a| *a /= yn);
            eigenvalues.push(vals[k]);
            ys.push(y);
        }
    }

    let eigenvectors = ys
        .into_iter()
        .map(|y| {
            let mut p: Vec<f64> = y.iter().zip(&inv_sqrt).map(|(a, b)| a * b).collect();
            fix_sign(&mut p);
            p
        })
        .collect();

    Ok(ElementSpectrum {
        element,
        cells: patch.cells,
        eigenvalues,
        eigenvectors,
        retained: n_retain,
        floored,
    })
}

/// `X = L⁻¹ D Bᵀ S^{-1/2}` where `D = diag(A)^{-1/2}` and `D A D = L Lᵀ`,
/// so that `Xᵀ X = S^{-1/2} T S^{-1/2}` without forming `T`.
fn weighted_factor(ops: &FineOperators, patch: &Patch, inv_sqrt_s: &[f64]) -> Result<Mat<f64>> {
    let (a, b) = local_operators(ops, patch);
    let ne = a.nrows();
    let d: Vec<f64> = a.diagonal_values().iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut scaled = Mat::zeros(ne, ne);
    for (i, j, v) in a.triplets() {
        scaled[(i, j)] = d[i] * v * d[j];
    }
    let llt = scaled
        .llt(Side::Lower)
        .map_err(|e| Error::Internal(format!("local velocity mass is not definite: {e:?}")))?;
    let mut x = Mat::zeros(ne, b.nrows());
    for (c, e, v) in b.triplets() {
        x[(e, c)] = d[e] * v * inv_sqrt_s[c];
    }
    solve_lower_triangular_in_place(llt.L(), x.as_mut(), Par::Seq);
    Ok(x)
}

pub const JACOBI_MAX_SWEEPS: usize = 80;

/// Eigenpairs of `XᵀX` (unsorted) by column-pivoted QR `X P = Q R`
/// followed by one-sided Jacobi on `Rᵀ`. Small eigenvalues keep their
/// relative accuracy when the columns of `X` are badly scaled.
fn gram_eigen(x: &Mat<f64>, element: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = x.ncols();
    let qr = x.col_piv_qr();
    let r = qr.thin_R();
    let (fwd, _) = qr.P().arrays();
    // columns of Rᵀ are the rows of R
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| if k >= i { r[(i, k)] } else { 0.0 })
                .collect()
        })
        .collect();
    let tol = f64::EPSILON * (n as f64).sqrt();
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (zi, zj) = pair_mut(&mut z, i, j);
                let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
                for (p, q) in zi.iter().zip(zj.iter()) {
                    a += p * p;
                    b += q * q;
                    c += p * q;
                }
                if c == 0.0 || c.abs() <= tol * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for (p, q) in zi.iter_mut().zip(zj.iter_mut()) {
                    let (u, v) = (*p, *q);
                    *p = cs * u - sn * v;
                    *q = sn * u + cs * v;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("Jacobi sweeps did not converge on element {element}");
    }
    let mut vals = Vec::with_capacity(n);
    let mut vecs = Vec::with_capacity(n);
    for col in z {
        let norm2: f64 = col.iter().map(|v| v * v).sum();
        let norm = norm2.sqrt();
        let mut y = vec![0.0; n];
        if norm > 0.0 {
            for (k, v) in col.iter().enumerate() {
                y[fwd[k]] = v / norm;
            }
        }
        vals.push(norm2);
        vecs.push(y);
    }
    Ok((vals, vecs))
}

fn pair_mut(z: &mut [Vec<f64>], i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
    let (lo, hi) = z.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

/// Makes the entry of largest magnitude positive (first index on ties).
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// The auxiliary space `Q_ms` spanned by the retained local eigenvectors.
#[derive(Clone, Debug)]
pub struct AuxiliarySpace {
    pub spectra: Vec<ElementSpectrum>,
    /// First global column of each element.
    pub offsets: Vec<usize>,
    /// `(element, j)` for every column.
    pub columns: Vec<(usize, usize)>,
    /// Pressure basis, fine cells × M, disjoint column supports per element.
    pub basis: CsrMatrix,
    /// `min_i λ_{J_i+1}^i`, absent when some element retained its whole space.
    pub lambda: Option<f64>,
    /// Diagonal of `s(·,·)` used by the basis (after flooring).
    pub s_mass: Vec<f64>,
}

pub fn build_auxiliary_space(
    g: &GridHierarchy,
    ops: &FineOperators,
    spectra: Vec<ElementSpectrum>,
) -> Result<AuxiliarySpace> {
    if spectra.len() != g.num_elements() {
        return Err(Error::Internal(format!(
            "auxiliary space needs {} element blocks, got {}",
            g.num_elements(),
            spectra.len()
        )));
    }
    for (k, sp) in spectra.iter().enumerate() {
        if sp.element != k {
            return Err(Error::Internal(format!("element block {k} missing")));
        }
    }
    let mut offsets = Vec::with_capacity(spectra.len());
    let mut columns = Vec::new();
    let mut entries = Vec::new();
    for sp in &spectra {
        offsets.push(columns.len());
        for j in 0..sp.retained {
            let col = columns.len();
            columns.push((sp.element, j));
            for (&c, &v) in sp.cells.iter().zip(&sp.eigenvectors[j]) {
                entries.push((c, col, v));
            }
        }
    }
    let basis = CsrMatrix::from_triplets(g.num_cells(), columns.len(), &entries);
    let lambda = spectra
        .iter()
        .map(|sp| sp.eigenvalues.get(sp.retained).copied())
        .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)));

    let s_max = ops.s_mass.iter().fold(0.0f64, |m, &v| m.max(v));
    let s_mass = ops.s_mass.iter().map(|&v| v.max(S_FLOOR * s_max)).collect();
    Ok(AuxiliarySpace {
        spectra,
        offsets,
        columns,
        basis,
        lambda,
        s_mass,
    })
}

impl AuxiliarySpace {
    /// Solves every local spectral problem and assembles `Q_ms` with `J`
    /// functions per element.
    pub fn build(g: &GridHierarchy, ops: &FineOperators, n_basis: usize) -> Result<Self> {
        let spectra = (0..g.num_elements())
            .into_par_iter()
            .map(|k| solve_local_spectral(g, ops, k, n_basis, EXTRA_PAIRS))
            .collect::<Result<Vec<_>>>()?;
        build_auxiliary_space(g, ops, spectra)
    }

    /// Dimension `M` of `Q_ms`.
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Global columns belonging to element `k`.
    pub fn element_columns(&self, k: usize) -> std::ops::Range<usize> {
        let start = self.offsets[k];
        start..start + self.spectra[k].retained
    }

    /// Coefficients `s(p_col, q)` of `q` against every column.
    pub fn s_coefficients(&self, q: &[f64]) -> Vec<f64> {
        let sq: Vec<f64> = q.iter().zip(&self.s_mass).map(|(a, b)| a * b).collect();
        self.basis.transpose_mul_vec(&sq)
    }

    /// s-orthogonal projection `π q = Σ s(p_j^i, q) p_j^i`.
    pub fn project_pi(&self, q: &[f64]) -> Vec<f64> {
        self.basis.mul_vec(&self.s_coefficients(q))
    }

    /// `s(p, q)` on the fine cells.
    pub fn s_inner(&self, p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .zip(&self.s_mass)
            .map(|((a, b), s)| a * b * s)
            .sum()
    }
}
