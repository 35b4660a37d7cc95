//! Invariant suite behind the `check` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::FineOperators;
use crate::cem::CemVelocityBasis;
use crate::dynamics::{
    assemble_reduced, check_cfl, simulate, CflStatus, EnergyTrace, RunOptions, WaveState,
};
use crate::error::Result;
use crate::grid::GridHierarchy;
use crate::lab::config::ExperimentConfig;
use crate::lab::medium::load_medium;
use crate::pou::solve_pou;
use crate::spectral::AuxiliarySpace;

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// Steps used by the energy probe.
pub const ENERGY_STEPS: usize = 1000;

pub fn run_checks(cfg: &ExperimentConfig) -> Result<Vec<CheckOutcome>> {
    cfg.validate()?;
    let (nc, j, l) = (cfg.n_coarse[0], cfg.n_basis[0], cfg.layers[0]);
    let g = GridHierarchy::new(cfg.n_fine, nc)?;
    let medium = load_medium(&g, &cfg.medium, cfg.seed)?;
    let pou = solve_pou(&g, &medium, cfg.gradient_sampling)?;
    let mut out = Vec::new();

    let r = g.refinement_ratio();
    let sum = pou.sum_field();
    let n = g.n_fine();
    let pu = (0..sum.len())
        .filter(|&v| {
            let (i, jj) = g.vertex_coords(v);
            i >= r && jj >= r && i <= n - r && jj <= n - r
        })
        .map(|v| (sum[v] - 1.0).abs())
        .fold(0.0, f64::max);
    out.push(CheckOutcome {
        name: "partition of unity",
        value: pu,
        tolerance: 1e-10,
    });
    let (lo, hi) = pou.value_range();
    out.push(CheckOutcome {
        name: "maximum principle",
        value: (-lo).max(hi - 1.0).max(0.0),
        tolerance: 1e-12,
    });

    let mut ops = FineOperators::assemble(&g, &medium)?;
    ops.set_s_weight(&g, &pou.kappa_tilde)?;
    let aux = AuxiliarySpace::build(&g, &ops, j)?;
    let mut first = 0.0f64;
    let mut ortho = 0.0f64;
    for sp in &aux.spectra {
        first = first.max(sp.eigenvalues[0].abs());
        let s: Vec<f64> = sp.cells.iter().map(|&c| aux.s_mass[c]).collect();
        for a in 0..sp.retained {
            for b in 0..sp.retained {
                let d: f64 = (0..s.len())
                    .map(|k| sp.eigenvectors[a][k] * sp.eigenvectors[b][k] * s[k])
                    .sum();
                ortho = ortho.max((d - f64::from(u8::from(a == b))).abs());
            }
        }
    }
    out.push(CheckOutcome {
        name: "first eigenvalue is zero",
        value: first,
        tolerance: 1e-10,
    });
    out.push(CheckOutcome {
        name: "s-orthonormal eigenvectors",
        value: ortho,
        tolerance: 1e-10,
    });

    let cem = CemVelocityBasis::build(&g, &ops, &aux, l)?;
    out.push(CheckOutcome {
        name: "CEM saddle residual",
        value: cem.columns.iter().map(|c| c.residual).fold(0.0, f64::max),
        tolerance: 1e-10,
    });
    let sys = assemble_reduced(&g, &ops, &aux, &cem, cfg.pressure_weight)?;
    out.push(CheckOutcome {
        name: "velocity Gram symmetry",
        value: sys.mv.max_asymmetry() / sys.mv.max_abs().max(f64::MIN_POSITIVE),
        tolerance: 1e-12,
    });
    let tau_max = match check_cfl(&sys, cfg.tau) {
        CflStatus::Ok { tau_max } | CflStatus::Unstable { tau_max } => tau_max,
        CflStatus::Unknown => f64::NAN,
    };
    out.push(CheckOutcome {
        name: "time step within stability limit",
        value: if tau_max.is_nan() {
            f64::INFINITY
        } else {
            cfg.tau / tau_max
        },
        tolerance: 1.0,
    });

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut init = WaveState::zero(&sys, cfg.tau);
    init.v
        .iter_mut()
        .for_each(|x| *x = rng.random_range(-1.0..1.0));
    init.p
        .iter_mut()
        .for_each(|x| *x = rng.random_range(-1.0..1.0));
    let opts = RunOptions {
        tau: cfg.tau,
        t_end: cfg.tau * ENERGY_STEPS as f64,
        snapshot_times: Vec::new(),
        monitor_energy: true,
    };
    let traj = simulate(&sys, init, None, &opts)?;
    out.push(CheckOutcome {
        name: "staggered energy conservation",
        value: EnergyTrace::relative_drift(&traj.energy.staggered),
        tolerance: 1e-10,
    });
    Ok(out)
}
