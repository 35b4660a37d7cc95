//! Multiscale partition of unity `χ_j` and the spectral weight
//! `κ̃ = κ Σ_j |∇χ_j|²`.
//!
//! Each `χ_j` is κ-harmonic on every coarse element of its neighborhood
//! `ω_j`, with the coarse bilinear hat of node `x_j` as boundary data on the
//! element boundary (zero on `∂ω_j`). The four pieces are independent solves.

use rayon::prelude::*;

use crate::assembly::{assemble_nodal_stiffness, MediumFields};
use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::sparse::SparseCholesky;

/// Where `|∇χ_j|²` is sampled on each fine cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientSampling {
    #[default]
    CellCenter,
    CellAverage,
}

/// `|∇u|²` of the bilinear interpolant of corner values (ordered (0,0),
/// (1,0), (0,1), (1,1)) on a square cell of width `h`.
pub fn gradient_squared(corners: [f64; 4], h: f64, sampling: GradientSampling) -> f64 {
    let [c00, c10, c01, c11] = corners;
    // ∂x is linear in y, ∂y linear in x; values on the two opposite sides
    let (dx_lo, dx_hi) = ((c10 - c00) / h, (c11 - c01) / h);
    let (dy_lo, dy_hi) = ((c01 - c00) / h, (c11 - c10) / h);
    match sampling {
        GradientSampling::CellCenter => {
            let dx = 0.5 * (dx_lo + dx_hi);
            let dy = 0.5 * (dy_lo + dy_hi);
            dx * dx + dy * dy
        }
        GradientSampling::CellAverage => {
            let mean_sq = |a: f64, b: f64| (a * a + a * b + b * b) / 3.0;
            mean_sq(dx_lo, dx_hi) + mean_sq(dy_lo, dy_hi)
        }
    }
}

/// One element's piece of `χ_node`: values on the `(r+1)²` element vertices.
#[derive(Clone, Debug)]
struct Piece {
    node: usize,
    values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    ratio: usize,
    n_fine: usize,
    n_coarse: usize,
    pieces: Vec<Vec<Piece>>,
    pub kappa_tilde: Vec<f64>,
}

/// Value of the coarse bilinear hat of interior node `(a, b)` at fine vertex `(i, j)`.
fn coarse_hat(ratio: usize, a: usize, b: usize, i: usize, j: usize) -> f64 {
    let r = ratio as f64;
    let fx = 1.0 - ((i as f64 - (a * ratio) as f64).abs() / r);
    let fy = 1.0 - ((j as f64 - (b * ratio) as f64).abs() / r);
    fx.max(0.0) * fy.max(0.0)
}

pub fn solve_pou(
    g: &GridHierarchy,
    m: &MediumFields,
    sampling: GradientSampling,
) -> Result<PartitionOfUnity> {
    let r = g.refinement_ratio();
    let nc = g.n_coarse();
    let pieces: Vec<Vec<Piece>> = (0..g.num_elements())
        .into_par_iter()
        .map(|k| element_pieces(g, m, k))
        .collect::<Result<_>>()?;

    let h = g.cell_size();
    let mut kappa_tilde = vec![0.0; g.num_cells()];
    for (k, element) in pieces.iter().enumerate() {
        let (ei, ej) = g.element_coords(k);
        for c in g.element_cells(k) {
            let (ci, cj) = g.cell_coords(c);
            let (li, lj) = (ci - ei * r, cj - ej * r);
            let sum: f64 = element
                .iter()
                .map(|p| {
                    let at = |di: usize, dj: usize| p.values[(lj + dj) * (r + 1) + li + di];
                    gradient_squared([at(0, 0), at(1, 0), at(0, 1), at(1, 1)], h, sampling)
                })
                .sum();
            kappa_tilde[c] = m.kappa[c] * sum;
        }
    }
    Ok(PartitionOfUnity {
        ratio: r,
        n_fine: g.n_fine(),
        n_coarse: nc,
        pieces,
        kappa_tilde,
    })
}

fn element_pieces(g: &GridHierarchy, m: &MediumFields, k: usize) -> Result<Vec<Piece>> {
    let r = g.refinement_ratio();
    let (ei, ej) = g.element_coords(k);
    let (i0, j0) = (ei * r, ej * r);
    let boundary: Vec<usize> = (j0..=j0 + r)
        .flat_map(|j| (i0..=i0 + r).map(move |i| (i, j)))
        .filter(|&(i, j)| i == i0 || i == i0 + r || j == j0 || j == j0 + r)
        .map(|(i, j)| g.vertex_index(i, j))
        .collect();
    let cells = g.element_cells(k);
    let sys = assemble_nodal_stiffness(g, &m.kappa, &cells, &boundary)?;
    let factor = if sys.free.is_empty() {
        None
    } else {
        Some(SparseCholesky::new(&sys.matrix).map_err(|e| {
            Error::Internal(format!("partition of unity solve on element {k}: {e}"))
        })?)
    };

    let mut out = Vec::new();
    for (a, b) in [(ei, ej), (ei + 1, ej), (ei, ej + 1), (ei + 1, ej + 1)] {
        let Some(node) = g.interior_node_at(a, b) else {
            continue;
        };
        let data: Vec<f64> = sys
            .dirichlet
            .iter()
            .map(|&v| {
                let (i, j) = g.vertex_coords(v);
                coarse_hat(r, a, b, i, j)
            })
            .collect();
        let mut values = vec![0.0; (r + 1) * (r + 1)];
        let local = |v: usize| {
            let (i, j) = g.vertex_coords(v);
            (j - j0) * (r + 1) + (i - i0)
        };
        for (&v, &x) in sys.dirichlet.iter().zip(&data) {
            values[local(v)] = x;
        }
        if let Some(f) = &factor {
            let sol = sys.solve(f, &data);
            for (&v, &x) in sys.free.iter().zip(&sol) {
                values[local(v)] = x;
            }
        }
        out.push(Piece { node, values });
    }
    Ok(out)
}

impl PartitionOfUnity {
    pub fn num_nodes(&self) -> usize {
        (self.n_coarse - 1) * (self.n_coarse - 1)
    }

    /// `χ_node` on every fine vertex (zero outside `ω_node`).
    pub fn chi_field(&self, node: usize) -> Vec<f64> {
        let (n, r, nc) = (self.n_fine, self.ratio, self.n_coarse);
        let mut out = vec![0.0; (n + 1) * (n + 1)];
        for (k, element) in self.pieces.iter().enumerate() {
            let (ei, ej) = (k % nc, k / nc);
            for p in element.iter().filter(|p| p.node == node) {
                for lj in 0..=r {
                    for li in 0..=r {
                        let v = (ej * r + lj) * (n + 1) + ei * r + li;
                        out[v] = p.values[lj * (r + 1) + li];
                    }
                }
            }
        }
        out
    }

    /// `Σ_j χ_j` on every fine vertex.
    pub fn sum_field(&self) -> Vec<f64> {
        let (n, r, nc) = (self.n_fine, self.ratio, self.n_coarse);
        let mut out = vec![0.0; (n + 1) * (n + 1)];
        let mut seen = vec![false; (n + 1) * (n + 1)];
        for (k, element) in self.pieces.iter().enumerate() {
            let (ei, ej) = (k % nc, k / nc);
            // vertices on element boundaries are shared; count each once per node
            for lj in 0..=r {
                for li in 0..=r {
                    let v = (ej * r + lj) * (n + 1) + ei * r + li;
                    if seen[v] {
                        continue;
                    }
                    out[v] = element.iter().map(|p| p.values[lj * (r + 1) + li]).sum();
                }
            }
            for lj in 0..=r {
                for li in 0..=r {
                    seen[(ej * r + lj) * (n + 1) + ei * r + li] = true;
                }
            }
        }
        out
    }

    /// Smallest and largest nodal value over all `χ_j`.
    pub fn value_range(&self) -> (f64, f64) {
        self.pieces
            .iter()
            .flatten()
            .flat_map(|p| p.values.iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            })
    }
}
