mod common;

use cemwave::assembly::{FineOperators, MediumFields};
use cemwave::cem::CemVelocityBasis;
use cemwave::dynamics::{
    assemble_reduced, check_cfl, fine_system, max_frequency_squared, project_initial, simulate,
    step_count, CflStatus, EnergyTrace, Forcing, PressureWeight, ReducedSystem, RunOptions,
    SourceSampling, WaveState,
};
use cemwave::grid::GridHierarchy;
use cemwave::pou::{solve_pou, GradientSampling};
use cemwave::sparse::CsrMatrix;
use cemwave::spectral::AuxiliarySpace;
use common::dense_of;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Problem {
    g: GridHierarchy,
    ops: FineOperators,
    sys: ReducedSystem,
}

fn multiscale(seed: u64) -> Problem {
    let g = GridHierarchy::new(16, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa: Vec<f64> = (0..g.num_cells())
        .map(|_| 10f64.powf(rng.random_range(-1.0..1.0)))
        .collect();
    let rho: Vec<f64> = (0..g.num_cells())
        .map(|_| rng.random_range(0.5..2.0))
        .collect();
    let m = MediumFields::new(&g, kappa, rho).unwrap();
    let pou = solve_pou(&g, &m, GradientSampling::CellCenter).unwrap();
    let mut ops = FineOperators::assemble(&g, &m).unwrap();
    ops.set_s_weight(&g, &pou.kappa_tilde).unwrap();
    let aux = AuxiliarySpace::build(&g, &ops, 2).unwrap();
    let cem = CemVelocityBasis::build(&g, &ops, &aux, 1).unwrap();
    let sys = assemble_reduced(&g, &ops, &aux, &cem, PressureWeight::Rho).unwrap();
    Problem { g, ops, sys }
}

fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn opts(tau: f64, steps: usize) -> RunOptions {
    RunOptions {
        tau,
        t_end: tau * steps as f64,
        snapshot_times: vec![tau * steps as f64],
        monitor_energy: true,
    }
}

#[test]
fn projection_reproduces_fields_in_the_space() {
    let p = multiscale(1);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let c = random(p.sys.velocity_dim(), &mut rng);
    let d = random(p.sys.pressure_dim(), &mut rng);
    let hv = p.sys.expand_velocity(&c);
    let hp = p.sys.expand_pressure(&d);
    let s = project_initial(&p.sys, &p.ops, &hv, &hp, 1e-3);
    assert!(max_diff(&p.sys.expand_velocity(&s.v), &hv) <= 1e-9 * max_abs(&hv));
    assert!(max_diff(&s.p, &d) <= 1e-10 * max_abs(&d));
}

#[test]
fn scalar_system_has_known_stability_limit() {
    let g = GridHierarchy::new(4, 2).unwrap();
    let m = MediumFields::homogeneous(&g, 2.0, 3.0).unwrap();
    let ops = FineOperators::assemble(&g, &m).unwrap();
    let e = g.vertical_edge(1, 1);
    let (left, _) = g.edge_cells(e);
    let psi = CsrMatrix::from_triplets(g.num_edges(), 1, &[(e, 0, 1.0)]);
    let pb = CsrMatrix::from_triplets(g.num_cells(), 1, &[(left.unwrap(), 0, 1.0)]);
    let sys = ReducedSystem::from_bases(&g, &ops, psi, pb, PressureWeight::Rho, false).unwrap();
    let (mv, mp, r) = (sys.mv.get(0, 0), sys.mp.get(0, 0), sys.r.get(0, 0));
    let omega = (r * r / (mv * mp)).sqrt();
    let tau_max = 2.0 / omega;
    let lam = max_frequency_squared(&sys).unwrap();
    assert!((lam - omega * omega).abs() <= 1e-12 * omega * omega);
    assert!(matches!(
        check_cfl(&sys, 0.99 * tau_max),
        CflStatus::Ok { .. }
    ));
    assert!(matches!(
        check_cfl(&sys, 1.01 * tau_max),
        CflStatus::Unstable { .. }
    ));
}

#[test]
fn power_iteration_matches_dense_spectrum() {
    let p = multiscale(3);
    let mv = dense_of(&p.sys.mv);
    let mp = dense_of(&p.sys.mp);
    let r = dense_of(&p.sys.r);
    let mv_inv = mv.clone().pseudo_inverse(1e-12 * mv.amax()).unwrap();
    let op: DMatrix<f64> = &mv_inv * &r * mp.clone().try_inverse().unwrap() * r.transpose();
    let top = op
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(0.0, f64::max);
    let lam = max_frequency_squared(&p.sys).unwrap();
    assert!((lam - top).abs() <= 1e-5 * top, "{lam} vs {top}");
}

#[test]
fn zero_state_stays_zero() {
    let p = multiscale(2);
    let s = WaveState::zero(&p.sys, 1e-3);
    let traj = simulate(&p.sys, s, None, &opts(1e-3, 20)).unwrap();
    let end = &traj.final_state;
    assert!(end.v.iter().chain(&end.p).all(|&x| x == 0.0));
}

#[test]
fn response_is_linear() {
    let p = multiscale(4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tau = 1e-3;
    let f1 = random(p.g.num_cells(), &mut rng);
    let f2 = random(p.g.num_cells(), &mut rng);
    let s1 = WaveState {
        v: random(p.sys.velocity_dim(), &mut rng),
        p: random(p.sys.pressure_dim(), &mut rng),
        ..WaveState::zero(&p.sys, tau)
    };
    let s2 = WaveState {
        v: random(p.sys.velocity_dim(), &mut rng),
        p: random(p.sys.pressure_dim(), &mut rng),
        ..WaveState::zero(&p.sys, tau)
    };
    let (a, b) = (2.5, -0.75);
    let temporal = |t: f64| (30.0 * t).sin();
    let run = |s: WaveState, f: Vec<f64>| {
        let forcing = Forcing {
            spatial: f,
            temporal: &temporal,
            sampling: SourceSampling::HalfStepMean,
        };
        simulate(&p.sys, s, Some(&forcing), &opts(tau, 50))
            .unwrap()
            .final_state
    };
    let combo = |x: &[f64], y: &[f64]| -> Vec<f64> {
        x.iter().zip(y).map(|(u, w)| a * u + b * w).collect()
    };
    let r1 = run(s1.clone(), f1.clone());
    let r2 = run(s2.clone(), f2.clone());
    let s12 = WaveState {
        v: combo(&s1.v, &s2.v),
        p: combo(&s1.p, &s2.p),
        ..s1.clone()
    };
    let r12 = run(s12, combo(&f1, &f2));
    let v = combo(&r1.v, &r2.v);
    let q = combo(&r1.p, &r2.p);
    assert!(max_diff(&r12.v, &v) <= 1e-11 * max_abs(&v));
    assert!(max_diff(&r12.p, &q) <= 1e-11 * max_abs(&q));
}

#[test]
fn energy_is_conserved_and_quadratic() {
    let p = multiscale(6);
    let lam = max_frequency_squared(&p.sys).unwrap();
    let tau = 0.5 * 2.0 / lam.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v = random(p.sys.velocity_dim(), &mut rng);
    let q = random(p.sys.pressure_dim(), &mut rng);
    let run = |c: f64| {
        let s = WaveState {
            v: v.iter().map(|x| c * x).collect(),
            p: q.iter().map(|x| c * x).collect(),
            ..WaveState::zero(&p.sys, tau)
        };
        simulate(&p.sys, s, None, &opts(tau, 200)).unwrap().energy
    };
    let base = run(1.0);
    assert!(EnergyTrace::relative_drift(&base.staggered) <= 1e-10);
    for c in [1e-3, 7.0] {
        let e = run(c);
        for (x, y) in base.staggered.iter().zip(&e.staggered) {
            assert!((y / (c * c) - x).abs() <= 1e-11 * x);
        }
    }
}

#[test]
fn fine_system_energy_is_conserved() {
    let g = GridHierarchy::new(12, 2).unwrap();
    let m = MediumFields::homogeneous(&g, 1.0, 1.0).unwrap();
    let ops = FineOperators::assemble(&g, &m).unwrap();
    let sys = fine_system(&g, &ops, PressureWeight::Rho).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let hp = random(g.num_cells(), &mut rng);
    let s = project_initial(&sys, &ops, &vec![0.0; g.num_edges()], &hp, 0.01);
    let traj = simulate(&sys, s, None, &opts(0.01, 300)).unwrap();
    assert!(EnergyTrace::relative_drift(&traj.energy.staggered) <= 1e-10);
}

#[test]
fn step_count_requires_integer_multiple() {
    assert_eq!(step_count(1e-4, 0.4).unwrap(), 4000);
    assert_eq!(step_count(2e-5, 0.4).unwrap(), 20000);
    assert!(step_count(3e-2, 0.1).is_err());
    assert!(step_count(0.0, 0.1).is_err());
}
