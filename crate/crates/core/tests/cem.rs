use cemwave::assembly::{FineOperators, MediumFields};
use cemwave::cem::{build_cem_basis, solve_patch, CemColumn, PatchSystem};
use cemwave::grid::GridHierarchy;
use cemwave::pou::{solve_pou, GradientSampling};
use cemwave::spectral::AuxiliarySpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(
    n: usize,
    nc: usize,
    j: usize,
    seed: u64,
) -> (GridHierarchy, FineOperators, AuxiliarySpace) {
    let g = GridHierarchy::new(n, nc).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa: Vec<f64> = (0..g.num_cells())
        .map(|_| 10f64.powf(rng.random_range(-1.0..1.0)))
        .collect();
    let m = MediumFields::new(&g, kappa, vec![1.0; g.num_cells()]).unwrap();
    let pou = solve_pou(&g, &m, GradientSampling::CellCenter).unwrap();
    let mut ops = FineOperators::assemble(&g, &m).unwrap();
    ops.set_s_weight(&g, &pou.kappa_tilde).unwrap();
    let aux = AuxiliarySpace::build(&g, &ops, j).unwrap();
    (g, ops, aux)
}

fn embed(col: &CemColumn, num_edges: usize) -> Vec<f64> {
    let mut v = vec![0.0; num_edges];
    for (&e, &x) in col.edges.iter().zip(&col.psi) {
        v[e] = x;
    }
    v
}

#[test]
fn basis_satisfies_both_patch_equations() {
    let (g, ops, aux) = setup(24, 4, 3, 1);
    for (element, layers) in [(0, 1), (5, 2), (10, 1)] {
        let sys = PatchSystem::new(&g, &ops, &aux, element, layers).unwrap();
        for j in 0..3 {
            let col = build_cem_basis(&g, &ops, &aux, element, j, layers).unwrap();
            // A ψ = Bᵀ μ
            let a_psi = sys.a.mul_vec(&col.psi);
            let bt_mu = sys.b.transpose_mul_vec(&col.mu);
            let scale = a_psi.iter().map(|x| x.abs()).fold(0.0, f64::max);
            for (x, y) in a_psi.iter().zip(&bt_mu) {
                assert!((x - y).abs() <= 1e-9 * scale);
            }
            // B ψ = S p_j − S π μ, with π read off the patch auxiliary columns
            let wt_mu = sys.w.transpose_mul_vec(&col.mu);
            let s_pi_mu = sys.w.mul_vec(&wt_mu);
            let b_psi = sys.b.mul_vec(&col.psi);
            let sp = &aux.spectra[element];
            let mut target = vec![0.0; col.cells.len()];
            for (&c, &v) in sp.cells.iter().zip(&sp.eigenvectors[j]) {
                let lc = sys.patch.local_cell(c).unwrap();
                target[lc] = sys.s[lc] * v;
            }
            let scale = target.iter().map(|x| x.abs()).fold(0.0, f64::max);
            for c in 0..target.len() {
                assert!((b_psi[c] + s_pi_mu[c] - target[c]).abs() <= 1e-9 * scale);
            }
            assert!(col.residual <= 1e-10);
        }
    }
}

#[test]
fn zero_load_gives_zero_basis() {
    let (g, ops, aux) = setup(16, 4, 2, 2);
    let sys = PatchSystem::new(&g, &ops, &aux, 5, 1).unwrap();
    let zero = vec![vec![0.0; sys.patch.num_cells()]];
    let (psi, mu, res) = solve_patch(&sys, 5, &zero).unwrap().remove(0);
    assert!(psi.iter().chain(&mu).all(|&x| x == 0.0));
    assert_eq!(res, 0.0);
}

#[test]
fn oversampling_error_decays_with_layers() {
    let (g, ops, aux) = setup(40, 4, 2, 3);
    let ne = g.num_edges();
    let a_norm = |v: &[f64]| ops.velocity_mass.quad_form(v).sqrt();
    for element in [0, 5] {
        for j in 0..2 {
            let global = embed(&build_cem_basis(&g, &ops, &aux, element, j, 4).unwrap(), ne);
            let reference = a_norm(&global);
            let errors: Vec<f64> = (1..=4)
                .map(|l| {
                    let v = embed(&build_cem_basis(&g, &ops, &aux, element, j, l).unwrap(), ne);
                    let d: Vec<f64> = v.iter().zip(&global).map(|(a, b)| a - b).collect();
                    a_norm(&d) / reference
                })
                .collect();
            for w in errors.windows(2) {
                assert!(
                    w[1] < w[0] || w[1] <= 1e-10,
                    "element {element}, j {j}: {errors:?}"
                );
            }
            assert!(errors[3] <= 1e-10);
            assert!(errors[0] > errors[1] && errors[0] > 1e-8, "{errors:?}");
        }
    }
}
