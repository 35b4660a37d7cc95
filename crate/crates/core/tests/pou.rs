mod common;

use cemwave::assembly::MediumFields;
use cemwave::grid::GridHierarchy;
use cemwave::pou::{gradient_squared, solve_pou, GradientSampling};
use common::GAUSS2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Σ|∇φ|² of the four coarse hats of an element at local coordinates (s, t).
fn hat_gradient_sum(s: f64, t: f64, big_h: f64) -> f64 {
    2.0 * ((1.0 - t).powi(2) + t * t + (1.0 - s).powi(2) + s * s) / (big_h * big_h)
}

fn interior_elements(g: &GridHierarchy) -> Vec<usize> {
    let nc = g.n_coarse();
    (0..g.num_elements())
        .filter(|&k| {
            let (ei, ej) = g.element_coords(k);
            ei > 0 && ej > 0 && ei + 1 < nc && ej + 1 < nc
        })
        .collect()
}

#[test]
fn homogeneous_weight_has_closed_form() {
    let g = GridHierarchy::new(24, 4).unwrap();
    let r = g.refinement_ratio();
    let c = 3.5;
    let m = MediumFields::homogeneous(&g, c, 1.0).unwrap();
    let center = solve_pou(&g, &m, GradientSampling::CellCenter).unwrap();
    let average = solve_pou(&g, &m, GradientSampling::CellAverage).unwrap();
    for k in interior_elements(&g) {
        for cell in g.element_cells(k) {
            let (i, j) = g.cell_coords(cell);
            let (li, lj) = ((i % r) as f64, (j % r) as f64);
            let r = r as f64;
            let exact =
                c * hat_gradient_sum((li + 0.5) / r, (lj + 0.5) / r, 1.0 / g.n_coarse() as f64);
            assert!(
                (center.kappa_tilde[cell] - exact).abs() <= 1e-10 * exact,
                "{} {}",
                center.kappa_tilde[cell],
                exact
            );
            let mut mean = 0.0;
            for &(x, wx) in &GAUSS2 {
                for &(y, wy) in &GAUSS2 {
                    mean += wx
                        * wy
                        * hat_gradient_sum((li + x) / r, (lj + y) / r, 1.0 / g.n_coarse() as f64);
                }
            }
            let exact = c * mean;
            assert!((average.kappa_tilde[cell] - exact).abs() <= 1e-10 * exact);
        }
    }
}

#[test]
fn partition_is_invariant_under_kappa_scaling() {
    let g = GridHierarchy::new(24, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let kappa: Vec<f64> = (0..g.num_cells())
        .map(|_| 10f64.powf(rng.random_range(-2.0..2.0)))
        .collect();
    let base = solve_pou(
        &g,
        &MediumFields::new(&g, kappa.clone(), vec![1.0; g.num_cells()]).unwrap(),
        GradientSampling::CellCenter,
    )
    .unwrap();
    for c in [1e-4, 1e4] {
        let scaled: Vec<f64> = kappa.iter().map(|k| k * c).collect();
        let m = MediumFields::new(&g, scaled, vec![1.0; g.num_cells()]).unwrap();
        let pou = solve_pou(&g, &m, GradientSampling::CellCenter).unwrap();
        for node in 0..pou.num_nodes() {
            let (a, b) = (base.chi_field(node), pou.chi_field(node));
            let d = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(d <= 1e-12, "c = {c}, node {node}: {d:e}");
        }
        for (x, y) in base.kappa_tilde.iter().zip(&pou.kappa_tilde) {
            assert!((y / c - x).abs() <= 1e-10 * x.abs().max(1e-300));
        }
    }
}

#[test]
fn gradient_of_linear_data_is_exact() {
    let h = 0.25;
    // u = 2x − 3y on a cell of width h
    let corners = [0.0, 2.0 * h, -3.0 * h, -h];
    for s in [GradientSampling::CellCenter, GradientSampling::CellAverage] {
        assert!((gradient_squared(corners, h, s) - 13.0).abs() < 1e-12);
    }
    // u = xy / h²: ∇u = (y, x)/h², center value 1/(2h), mean of squares 2/(3h²)
    let corners = [0.0, 0.0, 0.0, 1.0];
    let center = gradient_squared(corners, h, GradientSampling::CellCenter);
    let mean = gradient_squared(corners, h, GradientSampling::CellAverage);
    assert!((center - 0.5 / (h * h)).abs() < 1e-12);
    assert!((mean - 2.0 / (3.0 * h * h)).abs() < 1e-12);
}

#[test]
fn partition_sums_to_one_away_from_the_boundary() {
    let g = GridHierarchy::new(30, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let kappa: Vec<f64> = (0..g.num_cells())
        .map(|_| 10f64.powf(rng.random_range(-3.0..3.0)))
        .collect();
    let m = MediumFields::new(&g, kappa, vec![1.0; g.num_cells()]).unwrap();
    let pou = solve_pou(&g, &m, GradientSampling::CellCenter).unwrap();
    let sum = pou.sum_field();
    let n = g.n_fine();
    let (r, nc) = (g.refinement_ratio(), g.n_coarse());
    for j in r..=(nc - 1) * r {
        for i in r..=(nc - 1) * r {
            assert!((sum[j * (n + 1) + i] - 1.0).abs() < 1e-12);
        }
    }
    let (lo, hi) = pou.value_range();
    assert!(lo >= -1e-14 && hi <= 1.0 + 1e-14);
}
