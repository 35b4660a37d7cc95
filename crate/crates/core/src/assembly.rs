//! Fine-scale operators on the RT0 × P0 pair and the bilinear nodal space.
//!
//! RT0 basis functions carry unit flux through their edge, so the divergence
//! matrix has entries `±1` and pressure basis functions are cell indicators.
//! All element integrals are evaluated in closed form.
//!
//! The divergence matrix is stored pressure-major: `div[(c, e)] = b(φ_e, 1_c)`.
//! For velocity basis `ψ` (columns of Ψ) and pressure basis `P`, the coupling
//! `b(ψ_i, p_j)` is therefore `(Ψᵀ divᵀ P)[(i, j)]`.

use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::sparse::{CsrMatrix, SparseCholesky};

/// Piecewise-constant coefficients on the fine cells.
#[derive(Clone, Debug)]
pub struct MediumFields {
    pub kappa: Vec<f64>,
    pub rho: Vec<f64>,
}

impl MediumFields {
    pub fn new(g: &GridHierarchy, kappa: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        check_positive_field(g, &kappa, "kappa")?;
        check_positive_field(g, &rho, "rho")?;
        Ok(MediumFields { kappa, rho })
    }

    pub fn homogeneous(g: &GridHierarchy, kappa: f64, rho: f64) -> Result<Self> {
        Self::new(g, vec![kappa; g.num_cells()], vec![rho; g.num_cells()])
    }

    pub fn contrast(&self) -> f64 {
        let (lo, hi) = self
            .kappa
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &k| {
                (lo.min(k), hi.max(k))
            });
        hi / lo
    }
}

fn check_positive_field(g: &GridHierarchy, field: &[f64], name: &str) -> Result<()> {
    if field.len() != g.num_cells() {
        return Err(Error::Domain(format!(
            "{name} has {} values, grid has {} cells",
            field.len(),
            g.num_cells()
        )));
    }
    if let Some((c, v)) = field
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        let (i, j) = g.cell_coords(c);
        return Err(Error::Domain(format!(
            "{name} = {v} is not positive at cell {c} (i={i}, j={j})"
        )));
    }
    Ok(())
}

/// 1D RT0 edge mass on an interval, per unit ratio: `[1/3, 1/6; 1/6, 1/3]`.
const EDGE_MASS: [[f64; 2]; 2] = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];

/// `a(φ_e, φ_f) = ∫ κ⁻¹ φ_e·φ_f` over all fine edges (boundary edges included).
pub fn assemble_velocity_mass(g: &GridHierarchy, kappa: &[f64]) -> Result<CsrMatrix> {
    check_positive_field(g, kappa, "kappa")?;
    // square cells: hx / hy = 1
    let mut entries = Vec::with_capacity(8 * g.num_cells());
    for (c, &k) in kappa.iter().enumerate() {
        let e = g.cell_edges(c);
        let inv = 1.0 / k;
        for pair in [[e.left, e.right], [e.bottom, e.top]] {
            for a in 0..2 {
                for b in 0..2 {
                    entries.push((pair[a], pair[b], inv * EDGE_MASS[a][b]));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(
        g.num_edges(),
        g.num_edges(),
        &entries,
    ))
}

/// `div[(c, e)] = ∫_c div φ_e`, the signed unit flux of edge `e` out of `c`.
pub fn assemble_div(g: &GridHierarchy) -> CsrMatrix {
    let mut entries = Vec::with_capacity(4 * g.num_cells());
    for c in 0..g.num_cells() {
        let e = g.cell_edges(c);
        entries.push((c, e.left, -1.0));
        entries.push((c, e.right, 1.0));
        entries.push((c, e.bottom, -1.0));
        entries.push((c, e.top, 1.0));
    }
    CsrMatrix::from_triplets(g.num_cells(), g.num_edges(), &entries)
}

/// Diagonal of the weighted cell mass: `weight(c) · |c|`.
pub fn assemble_pressure_mass(g: &GridHierarchy, weight: &[f64]) -> Result<Vec<f64>> {
    check_positive_field(g, weight, "pressure weight")?;
    let area = g.cell_area();
    Ok(weight.iter().map(|w| w * area).collect())
}

/// Bilinear element stiffness `∫ κ ∇φ_a·∇φ_b` on an `hx × hy` rectangle,
/// vertices ordered (0,0), (1,0), (0,1), (1,1).
pub fn bilinear_element_stiffness(kappa: f64, hx: f64, hy: f64) -> [[f64; 4]; 4] {
    const STIFF: [[f64; 2]; 2] = [[1.0, -1.0], [-1.0, 1.0]];
    const MASS: [[f64; 2]; 2] = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
    let mut k = [[0.0; 4]; 4];
    for a in 0..4 {
        let (ax, ay) = (a % 2, a / 2);
        for b in 0..4 {
            let (bx, by) = (b % 2, b / 2);
            k[a][b] = kappa
                * ((hy / hx) * STIFF[ax][bx] * MASS[ay][by]
                    + (hx / hy) * MASS[ax][bx] * STIFF[ay][by]);
        }
    }
    k
}

/// κ-weighted bilinear stiffness over a set of cells with Dirichlet rows and
/// columns eliminated.
#[derive(Clone, Debug)]
pub struct NodalSystem {
    /// Global vertex ids of the unknowns, ascending.
    pub free: Vec<usize>,
    /// Global vertex ids with prescribed values, ascending.
    pub dirichlet: Vec<usize>,
    /// Stiffness restricted to `free × free`.
    pub matrix: CsrMatrix,
    /// Stiffness restricted to `free × dirichlet`.
    pub coupling: CsrMatrix,
}

pub fn assemble_nodal_stiffness(
    g: &GridHierarchy,
    kappa: &[f64],
    region: &[usize],
    dirichlet_nodes: &[usize],
) -> Result<NodalSystem> {
    if region.is_empty() {
        return Err(Error::Config("nodal stiffness over an empty region".into()));
    }
    if dirichlet_nodes.is_empty() {
        return Err(Error::Singular(
            "nodal stiffness without Dirichlet nodes is singular".into(),
        ));
    }
    let h = g.cell_size();
    let mut nodes: Vec<usize> = region.iter().flat_map(|&c| g.cell_vertices(c)).collect();
    nodes.sort_unstable();
    nodes.dedup();
    let mut dirichlet: Vec<usize> = dirichlet_nodes.to_vec();
    dirichlet.sort_unstable();
    dirichlet.dedup();

    // position of each vertex: Ok(free index) / Err(dirichlet index)
    let mut slot = std::collections::HashMap::with_capacity(nodes.len());
    let mut free = Vec::with_capacity(nodes.len());
    for &v in &nodes {
        match dirichlet.binary_search(&v) {
            Ok(d) => {
                slot.insert(v, Err(d));
            }
            Err(_) => {
                slot.insert(v, Ok(free.len()));
                free.push(v);
            }
        }
    }
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for &c in region {
        let ke = bilinear_element_stiffness(kappa[c], h, h);
        let verts = g.cell_vertices(c);
        for a in 0..4 {
            let Ok(ra) = slot[&verts[a]] else { continue };
            for b in 0..4 {
                match slot[&verts[b]] {
                    Ok(rb) => inner.push((ra, rb, ke[a][b])),
                    Err(db) => outer.push((ra, db, ke[a][b])),
                }
            }
        }
    }
    Ok(NodalSystem {
        matrix: CsrMatrix::from_triplets(free.len(), free.len(), &inner),
        coupling: CsrMatrix::from_triplets(free.len(), dirichlet.len(), &outer),
        free,
        dirichlet,
    })
}

impl NodalSystem {
    /// Solves for the free values given Dirichlet data (ordered as `dirichlet`).
    pub fn solve(&self, factor: &SparseCholesky, dirichlet_values: &[f64]) -> Vec<f64> {
        let mut rhs = self.coupling.mul_vec(dirichlet_values);
        rhs.iter_mut().for_each(|v| *v = -*v);
        factor.solve_in_place(&mut rhs);
        rhs
    }
}

/// The fine-scale matrices shared by every stage of the method.
#[derive(Clone, Debug)]
pub struct FineOperators {
    /// Velocity mass `a(·,·)` on all fine edges.
    pub velocity_mass: CsrMatrix,
    /// Divergence, cells × edges.
    pub div: CsrMatrix,
    /// Diagonal of `(·,·)_ρ`.
    pub rho_mass: Vec<f64>,
    /// Diagonal of the plain L² cell mass.
    pub plain_mass: Vec<f64>,
    /// Diagonal of `s(·,·)` (κ̃-weighted mass); empty until supplied.
    pub s_mass: Vec<f64>,
    pub boundary_edge_mask: Vec<bool>,
}

impl FineOperators {
    pub fn assemble(g: &GridHierarchy, m: &MediumFields) -> Result<Self> {
        Ok(FineOperators {
            velocity_mass: assemble_velocity_mass(g, &m.kappa)?,
            div: assemble_div(g),
            rho_mass: assemble_pressure_mass(g, &m.rho)?,
            plain_mass: assemble_pressure_mass(g, &vec![1.0; g.num_cells()])?,
            s_mass: Vec::new(),
            boundary_edge_mask: g.boundary_edge_mask(),
        })
    }

    /// Installs the κ̃ weight, producing the diagonal of `s(·,·)`.
    pub fn set_s_weight(&mut self, g: &GridHierarchy, kappa_tilde: &[f64]) -> Result<()> {
        if kappa_tilde.len() != g.num_cells() {
            return Err(Error::Domain("κ̃ does not match the fine grid".into()));
        }
        let area = g.cell_area();
        self.s_mass = kappa_tilde.iter().map(|k| k * area).collect();
        Ok(())
    }

    pub fn interior_edges(&self) -> Vec<usize> {
        self.boundary_edge_mask
            .iter()
            .enumerate()
            .filter_map(|(e, &b)| (!b).then_some(e))
            .collect()
    }
}
