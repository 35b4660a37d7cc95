//! Dense reference implementations used as test oracles.
//!
//! Everything here is written against explicit basis functions and nalgebra
//! dense linear algebra, without reusing the library's assembly or solvers.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Two-point Gauss rule on [0, 1].
pub const GAUSS2: [(f64, f64); 2] = [
    (0.5 - 0.288_675_134_594_812_9, 0.5),
    (0.5 + 0.288_675_134_594_812_9, 0.5),
];

/// Three-point Gauss rule on [0, 1].
pub const GAUSS3: [(f64, f64); 3] = [
    (0.5 - 0.387_298_334_620_741_7, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.5 + 0.387_298_334_620_741_7, 5.0 / 18.0),
];

/// Fine-grid numbering written out independently: vertical edges first
/// (`j (n+1) + i`), then horizontal edges (`n (n+1) + j n + i`).
pub struct Numbering {
    pub n: usize,
}

impl Numbering {
    pub fn cells(&self) -> usize {
        self.n * self.n
    }
    pub fn edges(&self) -> usize {
        2 * self.n * (self.n + 1)
    }
    pub fn v_edge(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }
    pub fn h_edge(&self, i: usize, j: usize) -> usize {
        self.n * (self.n + 1) + j * self.n + i
    }
    /// Edges of cell (i, j) with the RT0 shape function on the reference
    /// square: value of the unit-flux basis at local point (s, t) ∈ [0,1]².
    pub fn cell_basis(&self, i: usize, j: usize) -> [(usize, fn(f64, f64, f64) -> [f64; 2]); 4] {
        [
            (self.v_edge(i, j), |s, _t, h| [(1.0 - s) / h, 0.0]),
            (self.v_edge(i + 1, j), |s, _t, h| [s / h, 0.0]),
            (self.h_edge(i, j), |_s, t, h| [0.0, (1.0 - t) / h]),
            (self.h_edge(i, j + 1), |_s, t, h| [0.0, t / h]),
        ]
    }
    pub fn is_boundary(&self, e: usize) -> bool {
        let n = self.n;
        if e < n * (n + 1) {
            let i = e % (n + 1);
            i == 0 || i == n
        } else {
            let j = (e - n * (n + 1)) / n;
            j == 0 || j == n
        }
    }
}

/// Velocity mass by tensor Gauss quadrature of the explicit basis.
pub fn quadrature_velocity_mass(n: usize, kappa: &[f64]) -> DMatrix<f64> {
    let num = Numbering { n };
    let h = 1.0 / n as f64;
    let mut a = DMatrix::zeros(num.edges(), num.edges());
    for j in 0..n {
        for i in 0..n {
            let basis = num.cell_basis(i, j);
            for &(s, ws) in &GAUSS2 {
                for &(t, wt) in &GAUSS2 {
                    let w = ws * wt * h * h / kappa[j * n + i];
                    for &(ea, fa) in &basis {
                        for &(eb, fb) in &basis {
                            let (u, v) = (fa(s, t, h), fb(s, t, h));
                            a[(ea, eb)] += w * (u[0] * v[0] + u[1] * v[1]);
                        }
                    }
                }
            }
        }
    }
    a
}

/// `∫_c div φ_e` by the divergence theorem on each cell.
pub fn dense_div(n: usize) -> DMatrix<f64> {
    let num = Numbering { n };
    let mut b = DMatrix::zeros(num.cells(), num.edges());
    for j in 0..n {
        for i in 0..n {
            let c = j * n + i;
            b[(c, num.v_edge(i, j))] = -1.0;
            b[(c, num.v_edge(i + 1, j))] = 1.0;
            b[(c, num.h_edge(i, j))] = -1.0;
            b[(c, num.h_edge(i, j + 1))] = 1.0;
        }
    }
    b
}

/// Bilinear stiffness over a set of cells by 2×2 Gauss quadrature, all
/// vertices `(n+1)²` kept.
pub fn quadrature_nodal_stiffness(n: usize, kappa: &[f64], cells: &[usize]) -> DMatrix<f64> {
    let h = 1.0 / n as f64;
    let nv = (n + 1) * (n + 1);
    let mut k = DMatrix::zeros(nv, nv);
    for &c in cells {
        let (i, j) = (c % n, c / n);
        let verts = [
            j * (n + 1) + i,
            j * (n + 1) + i + 1,
            (j + 1) * (n + 1) + i,
            (j + 1) * (n + 1) + i + 1,
        ];
        for &(s, ws) in &GAUSS2 {
            for &(t, wt) in &GAUSS2 {
                let grads = [
                    [-(1.0 - t) / h, -(1.0 - s) / h],
                    [(1.0 - t) / h, -s / h],
                    [-t / h, (1.0 - s) / h],
                    [t / h, s / h],
                ];
                let w = ws * wt * h * h * kappa[c];
                for a in 0..4 {
                    for b in 0..4 {
                        k[(verts[a], verts[b])] +=
                            w * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                    }
                }
            }
        }
    }
    k
}

pub fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Number of negative eigenvalues of a symmetric matrix.
pub fn negative_count(m: &DMatrix<f64>) -> usize {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .filter(|&&x| x < 0.0)
        .count()
}

/// Eigenvalues of the pencil `a φ − bᵀ p = 0, b φ = λ s p` by bisection on
/// the inertia of `[a, bᵀ; b, λ s]`: its negative count equals the number
/// of pencil eigenvalues above λ.
pub fn pencil_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>, s: &[f64], count: usize) -> Vec<f64> {
    let ne = a.nrows();
    let nc = b.nrows();
    let g = |lambda: f64| {
        let mut m = DMatrix::zeros(ne + nc, ne + nc);
        m.view_mut((0, 0), (ne, ne)).copy_from(a);
        m.view_mut((ne, 0), (nc, ne)).copy_from(b);
        m.view_mut((0, ne), (ne, nc)).copy_from(&b.transpose());
        for k in 0..nc {
            m[(ne + k, ne + k)] = lambda * s[k];
        }
        m
    };
    // number of eigenvalues ≤ λ
    let below = |lambda: f64| nc - negative_count(&g(lambda));
    let mut hi = 1.0;
    while below(hi) < nc {
        hi *= 2.0;
    }
    (0..count)
        .map(|k| {
            // smallest λ with below(λ) ≥ k + 1
            let (mut lo, mut up) = (-1e-9 * hi, hi);
            for _ in 0..200 {
                let mid = 0.5 * (lo + up);
                if below(mid) >= k + 1 {
                    up = mid;
                } else {
                    lo = mid;
                }
                if up - lo <= 1e-14 * up.abs().max(1.0) {
                    break;
                }
            }
            0.5 * (lo + up)
        })
        .collect()
}

/// A pressure eigenvector for eigenvalue λ: null vector of the full pencil
/// matrix `[a, −bᵀ; b, −λ s]`, s-normalized with the largest entry positive.
pub fn pencil_eigenvector(a: &DMatrix<f64>, b: &DMatrix<f64>, s: &[f64], lambda: f64) -> Vec<f64> {
    let ne = a.nrows();
    let nc = b.nrows();
    let mut m = DMatrix::zeros(ne + nc, ne + nc);
    m.view_mut((0, 0), (ne, ne)).copy_from(a);
    m.view_mut((ne, 0), (nc, ne)).copy_from(b);
    m.view_mut((0, ne), (ne, nc)).copy_from(&(-b.transpose()));
    for k in 0..nc {
        m[(ne + k, ne + k)] = -lambda * s[k];
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.unwrap();
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .unwrap();
    let mut p: Vec<f64> = (0..nc).map(|c| vt[(k, ne + c)]).collect();
    let norm = p.iter().zip(s).map(|(x, w)| x * x * w).sum::<f64>().sqrt();
    p.iter_mut().for_each(|x| *x /= norm);
    let big = p.iter().enumerate().fold(
        0,
        |best, (i, x)| if x.abs() > p[best].abs() { i } else { best },
    );
    if p[big] < 0.0 {
        p.iter_mut().for_each(|x| *x = -*x);
    }
    p
}

/// The CEM system written literally: `a ψ − bᵀ μ = 0`,
/// `s(π μ, π q) + b(ψ, q) = s(p_j, q)` for all cell indicators `q` of the
/// patch, with `π = P Pᵀ S` over the given auxiliary columns.
pub fn dense_cem(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    s: &[f64],
    aux: &DMatrix<f64>,
    rhs_p: &[f64],
) -> (DVector<f64>, DVector<f64>) {
    let ne = a.nrows();
    let nc = b.nrows();
    let smat = DMatrix::from_diagonal(&DVector::from_column_slice(s));
    let pi = aux * aux.transpose() * &smat;
    let spi = pi.transpose() * &smat * &pi;
    let mut m = DMatrix::zeros(ne + nc, ne + nc);
    m.view_mut((0, 0), (ne, ne)).copy_from(a);
    m.view_mut((0, ne), (ne, nc)).copy_from(&(-b.transpose()));
    m.view_mut((ne, 0), (nc, ne)).copy_from(b);
    m.view_mut((ne, ne), (nc, nc)).copy_from(&spi);
    let mut r = DVector::zeros(ne + nc);
    for c in 0..nc {
        r[ne + c] = s[c] * rhs_p[c];
    }
    let x = m.lu().solve(&r).expect("dense CEM system is nonsingular");
    (x.rows(0, ne).into_owned(), x.rows(ne, nc).into_owned())
}

/// Leapfrog with dense pseudo-inverses, returning `(Ψ vⁿ, P p^{n+1/2})`
/// after every step.
pub fn dense_leapfrog(
    psi: &DMatrix<f64>,
    p_basis: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    pressure_mass: &[f64],
    v0: &DVector<f64>,
    p0: &DVector<f64>,
    load: &DVector<f64>,
    tau: f64,
    steps: usize,
) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mp_fine = DMatrix::from_diagonal(&DVector::from_column_slice(pressure_mass));
    let mv = psi.transpose() * a * psi;
    let mp = p_basis.transpose() * mp_fine * p_basis;
    let r = psi.transpose() * b.transpose() * p_basis;
    let eps = 1e-13 * mv.amax();
    let mv_inv = mv.pseudo_inverse(eps).unwrap();
    let mp_inv = mp.clone().try_inverse().unwrap();
    let (mut v, mut p) = (v0.clone(), p0.clone());
    let mut out = Vec::new();
    for _ in 0..steps {
        v += tau * &mv_inv * &r * &p;
        p += tau * &mp_inv * (load - r.transpose() * &v);
        out.push((psi * &v, p_basis * &p));
    }
    out
}

pub fn dense_of(m: &cemwave::sparse::CsrMatrix) -> DMatrix<f64> {
    let rows = m.to_dense();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| rows[i][j])
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (a - b).amax()
}

/// Exact cell averages of `cos(πx) cos(πy)` on an `n × n` grid.
pub fn cosine_cell_averages(n: usize) -> Vec<f64> {
    let h = 1.0 / n as f64;
    let pi = std::f64::consts::PI;
    let avg = |k: usize| {
        let (x0, x1) = (k as f64 * h, (k + 1) as f64 * h);
        ((pi * x1).sin() - (pi * x0).sin()) / (pi * h)
    };
    (0..n * n).map(|c| avg(c % n) * avg(c / n)).collect()
}

/// `‖p_h − cos(πx) cos(πy) · amplitude‖_{L²}` with 3×3 Gauss points per cell.
pub fn cosine_l2_error(n: usize, p: &[f64], amplitude: f64) -> f64 {
    let h = 1.0 / n as f64;
    let pi = std::f64::consts::PI;
    let mut e2 = 0.0;
    for c in 0..n * n {
        let (x0, y0) = ((c % n) as f64 * h, (c / n) as f64 * h);
        for &(s, ws) in &GAUSS3 {
            for &(t, wt) in &GAUSS3 {
                let exact = amplitude * (pi * (x0 + s * h)).cos() * (pi * (y0 + t * h)).cos();
                e2 += ws * wt * h * h * (p[c] - exact).powi(2);
            }
        }
    }
    e2.sqrt()
}
