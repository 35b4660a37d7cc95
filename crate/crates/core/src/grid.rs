//! Structured fine/coarse rectangular meshes on the unit square.
//!
//! Numbering is lexicographic by `(y, x)`. Cells: `c = j·n + i`. Fine edges
//! come in two families: vertical edges (unit normal `+x`) numbered first as
//! `j·(n+1) + i`, then horizontal edges (unit normal `+y`) as
//! `n(n+1) + j·n + i`. Fine vertices: `j·(n+1) + i`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeKind {
    /// Normal along `+x`; located at `x = i·h`, spanning row `j`.
    Vertical,
    /// Normal along `+y`; located at `y = j·h`, spanning column `i`.
    Horizontal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub kind: EdgeKind,
    pub i: usize,
    pub j: usize,
}

/// The four faces of a fine cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellEdges {
    pub left: usize,
    pub right: usize,
    pub bottom: usize,
    pub top: usize,
}

#[derive(Clone, Debug)]
pub struct GridHierarchy {
    n_fine: usize,
    n_coarse: usize,
    ratio: usize,
}

impl GridHierarchy {
    /// Builds the conforming pair of uniform grids on `(0,1)²`.
    pub fn new(n_fine: usize, n_coarse: usize) -> Result<Self> {
        if n_coarse < 2 {
            return Err(Error::Config(format!(
                "n_coarse must be at least 2 (got {n_coarse})"
            )));
        }
        if n_fine == 0 || n_fine % n_coarse != 0 {
            return Err(Error::Config(format!(
                "n_coarse = {n_coarse} does not divide n_fine = {n_fine}"
            )));
        }
        Ok(GridHierarchy {
            n_fine,
            n_coarse,
            ratio: n_fine / n_coarse,
        })
    }

    pub fn n_fine(&self) -> usize {
        self.n_fine
    }

    pub fn n_coarse(&self) -> usize {
        self.n_coarse
    }

    pub fn refinement_ratio(&self) -> usize {
        self.ratio
    }

    /// Fine cell width.
    pub fn cell_size(&self) -> f64 {
        1.0 / self.n_fine as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size() * self.cell_size()
    }

    /// Fine mesh size as a cell diameter, `√2 / n_fine`.
    pub fn h(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.n_fine as f64
    }

    /// Coarse mesh size as a cell diameter, `√2 / n_coarse`.
    pub fn coarse_h(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.n_coarse as f64
    }

    pub fn num_cells(&self) -> usize {
        self.n_fine * self.n_fine
    }

    pub fn num_edges(&self) -> usize {
        2 * self.n_fine * (self.n_fine + 1)
    }

    pub fn num_vertices(&self) -> usize {
        (self.n_fine + 1) * (self.n_fine + 1)
    }

    /// Number of coarse elements `N`.
    pub fn num_elements(&self) -> usize {
        self.n_coarse * self.n_coarse
    }

    /// Number of interior coarse nodes `N_c`.
    pub fn num_interior_nodes(&self) -> usize {
        (self.n_coarse - 1) * (self.n_coarse - 1)
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n_fine && j < self.n_fine);
        j * self.n_fine + i
    }

    pub fn cell_coords(&self, c: usize) -> (usize, usize) {
        (c % self.n_fine, c / self.n_fine)
    }

    pub fn cell_center(&self, c: usize) -> (f64, f64) {
        let (i, j) = self.cell_coords(c);
        let h = self.cell_size();
        ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h)
    }

    pub fn vertical_edge(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.n_fine && j < self.n_fine);
        j * (self.n_fine + 1) + i
    }

    pub fn horizontal_edge(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n_fine && j <= self.n_fine);
        self.n_fine * (self.n_fine + 1) + j * self.n_fine + i
    }

    pub fn edge(&self, e: usize) -> Edge {
        let n = self.n_fine;
        let nv = n * (n + 1);
        if e < nv {
            Edge {
                kind: EdgeKind::Vertical,
                i: e % (n + 1),
                j: e / (n + 1),
            }
        } else {
            let k = e - nv;
            Edge {
                kind: EdgeKind::Horizontal,
                i: k % n,
                j: k / n,
            }
        }
    }

    pub fn cell_edges(&self, c: usize) -> CellEdges {
        let (i, j) = self.cell_coords(c);
        CellEdges {
            left: self.vertical_edge(i, j),
            right: self.vertical_edge(i + 1, j),
            bottom: self.horizontal_edge(i, j),
            top: self.horizontal_edge(i, j + 1),
        }
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        let Edge { kind, i, j } = self.edge(e);
        match kind {
            EdgeKind::Vertical => i == 0 || i == self.n_fine,
            EdgeKind::Horizontal => j == 0 || j == self.n_fine,
        }
    }

    pub fn boundary_edge_mask(&self) -> Vec<bool> {
        (0..self.num_edges())
            .map(|e| self.is_boundary_edge(e))
            .collect()
    }

    /// Edges with zero normal flux removed: the DOFs of `V_{h,0}(Ω)`.
    pub fn interior_edges(&self) -> Vec<usize> {
        (0..self.num_edges())
            .filter(|&e| !self.is_boundary_edge(e))
            .collect()
    }

    /// Cells sharing edge `e`: the cell on the negative side (left/below)
    /// and the cell on the positive side (right/above).
    pub fn edge_cells(&self, e: usize) -> (Option<usize>, Option<usize>) {
        let n = self.n_fine;
        let Edge { kind, i, j } = self.edge(e);
        match kind {
            EdgeKind::Vertical => (
                (i > 0).then(|| self.cell_index(i - 1, j)),
                (i < n).then(|| self.cell_index(i, j)),
            ),
            EdgeKind::Horizontal => (
                (j > 0).then(|| self.cell_index(i, j - 1)),
                (j < n).then(|| self.cell_index(i, j)),
            ),
        }
    }

    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * (self.n_fine + 1) + i
    }

    pub fn vertex_coords(&self, v: usize) -> (usize, usize) {
        (v % (self.n_fine + 1), v / (self.n_fine + 1))
    }

    /// Vertices of cell `c` in the order (0,0), (1,0), (0,1), (1,1).
    pub fn cell_vertices(&self, c: usize) -> [usize; 4] {
        let (i, j) = self.cell_coords(c);
        [
            self.vertex_index(i, j),
            self.vertex_index(i + 1, j),
            self.vertex_index(i, j + 1),
            self.vertex_index(i + 1, j + 1),
        ]
    }

    pub fn element_index(&self, ei: usize, ej: usize) -> usize {
        ej * self.n_coarse + ei
    }

    pub fn element_coords(&self, k: usize) -> (usize, usize) {
        (k % self.n_coarse, k / self.n_coarse)
    }

    /// Coarse element containing fine cell `c`.
    pub fn element_of_cell(&self, c: usize) -> usize {
        let (i, j) = self.cell_coords(c);
        self.element_index(i / self.ratio, j / self.ratio)
    }

    /// Fine cells of coarse element `k`, lexicographic by `(y, x)`.
    pub fn element_cells(&self, k: usize) -> Vec<usize> {
        let (ei, ej) = self.element_coords(k);
        let r = self.ratio;
        (ej * r..(ej + 1) * r)
            .flat_map(|j| (ei * r..(ei + 1) * r).map(move |i| (i, j)))
            .map(|(i, j)| self.cell_index(i, j))
            .collect()
    }

    /// Coarse grid coordinates `(a, b)` of interior node `x_node`,
    /// `1 ≤ a, b ≤ n_coarse − 1`.
    pub fn interior_node_coords(&self, node: usize) -> (usize, usize) {
        let m = self.n_coarse - 1;
        (node % m + 1, node / m + 1)
    }

    /// Interior node index at coarse coordinates `(a, b)`, if interior.
    pub fn interior_node_at(&self, a: usize, b: usize) -> Option<usize> {
        let nc = self.n_coarse;
        (a >= 1 && a < nc && b >= 1 && b < nc).then(|| (b - 1) * (nc - 1) + (a - 1))
    }

    /// The four coarse elements forming the neighborhood `ω_node`.
    pub fn node_neighborhood(&self, node: usize) -> [usize; 4] {
        let (a, b) = self.interior_node_coords(node);
        [
            self.element_index(a - 1, b - 1),
            self.element_index(a, b - 1),
            self.element_index(a - 1, b),
            self.element_index(a, b),
        ]
    }

    /// Builds `K_{k,layers}`: element `k` grown by `layers` rings of coarse
    /// elements (corner contact included), clipped at the domain boundary.
    pub fn oversample(&self, k: usize, layers: usize) -> Result<Patch> {
        if k >= self.num_elements() {
            return Err(Error::Config(format!(
                "element id {k} out of range (N = {})",
                self.num_elements()
            )));
        }
        let (ei, ej) = self.element_coords(k);
        let nc = self.n_coarse;
        let ex = (ei.saturating_sub(layers), (ei + layers).min(nc - 1));
        let ey = (ej.saturating_sub(layers), (ej + layers).min(nc - 1));
        Ok(Patch::new(self, ex, ey))
    }
}

/// A rectangular union of coarse elements with its fine-grid DOFs.
#[derive(Clone, Debug)]
pub struct Patch {
    /// Inclusive coarse element index ranges.
    pub elements_x: (usize, usize),
    pub elements_y: (usize, usize),
    pub elements: Vec<usize>,
    /// Global fine cells, lexicographic by `(y, x)`.
    pub cells: Vec<usize>,
    /// Global fine edges interior to the patch (normal flux unconstrained).
    pub interior_edges: Vec<usize>,
    /// Global fine edges on the patch boundary (normal flux forced to zero).
    pub boundary_edges: Vec<usize>,
    cell_range_x: (usize, usize),
    cell_range_y: (usize, usize),
    n_fine: usize,
}

impl Patch {
    fn new(g: &GridHierarchy, ex: (usize, usize), ey: (usize, usize)) -> Self {
        let r = g.refinement_ratio();
        let elements = (ey.0..=ey.1)
            .flat_map(|b| (ex.0..=ex.1).map(move |a| (a, b)))
            .map(|(a, b)| g.element_index(a, b))
            .collect();
        // half-open fine cell ranges
        let cx = (ex.0 * r, (ex.1 + 1) * r);
        let cy = (ey.0 * r, (ey.1 + 1) * r);
        let cells = (cy.0..cy.1)
            .flat_map(|j| (cx.0..cx.1).map(move |i| (i, j)))
            .map(|(i, j)| g.cell_index(i, j))
            .collect();

        let mut interior_edges = Vec::new();
        let mut boundary_edges = Vec::new();
        for j in cy.0..cy.1 {
            for i in cx.0..=cx.1 {
                let e = g.vertical_edge(i, j);
                if i == cx.0 || i == cx.1 {
                    boundary_edges.push(e);
                } else {
                    interior_edges.push(e);
                }
            }
        }
        for j in cy.0..=cy.1 {
            for i in cx.0..cx.1 {
                let e = g.horizontal_edge(i, j);
                if j == cy.0 || j == cy.1 {
                    boundary_edges.push(e);
                } else {
                    interior_edges.push(e);
                }
            }
        }
        Patch {
            elements_x: ex,
            elements_y: ey,
            elements,
            cells,
            interior_edges,
            boundary_edges,
            cell_range_x: cx,
            cell_range_y: cy,
            n_fine: g.n_fine(),
        }
    }

    /// Patch consisting of the single element `k`.
    pub fn element(g: &GridHierarchy, k: usize) -> Self {
        let (ei, ej) = g.element_coords(k);
        Patch::new(g, (ei, ei), (ej, ej))
    }

    pub fn contains_element(&self, k: usize, g: &GridHierarchy) -> bool {
        let (a, b) = g.element_coords(k);
        (self.elements_x.0..=self.elements_x.1).contains(&a)
            && (self.elements_y.0..=self.elements_y.1).contains(&b)
    }

    /// Local index of global cell `c`, if inside the patch.
    pub fn local_cell(&self, c: usize) -> Option<usize> {
        let (i, j) = (c % self.n_fine, c / self.n_fine);
        let (cx, cy) = (self.cell_range_x, self.cell_range_y);
        ((cx.0..cx.1).contains(&i) && (cy.0..cy.1).contains(&j))
            .then(|| (j - cy.0) * (cx.1 - cx.0) + (i - cx.0))
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Fine cells per axis `(nx, ny)`.
    pub fn cell_dims(&self) -> (usize, usize) {
        (
            self.cell_range_x.1 - self.cell_range_x.0,
            self.cell_range_y.1 - self.cell_range_y.0,
        )
    }
}
