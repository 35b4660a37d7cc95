//! Reduced matrices, staggered leapfrog time stepping and energy monitoring.
//!
//! The same code advances the multiscale system and the fine reference: a
//! [`ReducedSystem`] is defined by a velocity basis `Ψ` (fine edges × Mv) and
//! a pressure basis `P` (fine cells × Mp). The fine system uses the identity
//! on interior edges and on cells.
//!
//! Velocities live on integer steps `t_n = nτ`, pressures on half steps.

use crate::assembly::FineOperators;
use crate::cem::{CemVelocityBasis, GramStatus};
use crate::dense::SpdSolver;
use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::sparse::{dot, CsrMatrix};
use crate::spectral::AuxiliarySpace;

/// Cell weight of the pressure mass `M_p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PressureWeight {
    /// `(p, q)_ρ`, matching the variational form.
    #[default]
    Rho,
    /// Plain L² product.
    Plain,
}

/// Time at which the source enters the pressure update to `p^{n+3/2}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceSampling {
    /// `f(t_{n+1})`.
    #[default]
    Step,
    /// Mean of `f(t_{n+1/2})` and `f(t_{n+3/2})`.
    HalfStepMean,
}

pub struct ReducedSystem {
    pub mv: CsrMatrix,
    pub mp: CsrMatrix,
    /// `R = Ψᵀ Bᵀ P`, Mv × Mp.
    pub r: CsrMatrix,
    pub psi: CsrMatrix,
    pub p_basis: CsrMatrix,
    /// Diagonal of the fine pressure mass used for `M_p`.
    pub pressure_mass: Vec<f64>,
    /// Cell areas, used by the source projection `((f, p_i))`.
    cell_area: f64,
    mv_solver: SpdSolver,
    mp_solver: SpdSolver,
}

impl ReducedSystem {
    /// Galerkin matrices for arbitrary bases `Ψ` and `P`.
    pub fn from_bases(
        g: &GridHierarchy,
        ops: &FineOperators,
        psi: CsrMatrix,
        p_basis: CsrMatrix,
        weight: PressureWeight,
        allow_semidefinite: bool,
    ) -> Result<Self> {
        let pressure_mass = match weight {
            PressureWeight::Rho => ops.rho_mass.clone(),
            PressureWeight::Plain => ops.plain_mass.clone(),
        };
        let mv = symmetrize(&psi.transpose().matmul(&ops.velocity_mass.matmul(&psi)));
        let pt = p_basis.transpose();
        let mp = symmetrize(&pt.matmul(&CsrMatrix::diagonal(&pressure_mass).matmul(&p_basis)));
        let r = psi
            .transpose()
            .matmul(&ops.div.transpose().matmul(&p_basis));
        let mv_solver = SpdSolver::new(&mv, allow_semidefinite).map_err(|e| {
            Error::RankDeficient(format!("velocity mass of the reduced system: {e}"))
        })?;
        let mp_solver = SpdSolver::new(&mp, false).map_err(|e| {
            Error::RankDeficient(format!("pressure mass of the reduced system: {e}"))
        })?;
        Ok(ReducedSystem {
            mv,
            mp,
            r,
            psi,
            p_basis,
            pressure_mass,
            cell_area: g.cell_area(),
            mv_solver,
            mp_solver,
        })
    }

    pub fn velocity_dim(&self) -> usize {
        self.mv.nrows()
    }

    pub fn pressure_dim(&self) -> usize {
        self.mp.nrows()
    }

    /// `((f, p_i))` for a per-cell field `f`.
    pub fn project_source(&self, f: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = f.iter().map(|v| v * self.cell_area).collect();
        self.p_basis.transpose_mul_vec(&w)
    }

    pub fn solve_velocity(&self, b: &[f64]) -> Vec<f64> {
        self.mv_solver.solve(b)
    }

    pub fn solve_pressure(&self, b: &[f64]) -> Vec<f64> {
        self.mp_solver.solve(b)
    }

    /// Fine edge field `Ψ v`.
    pub fn expand_velocity(&self, v: &[f64]) -> Vec<f64> {
        self.psi.mul_vec(v)
    }

    /// Fine cell field `P p`.
    pub fn expand_pressure(&self, p: &[f64]) -> Vec<f64> {
        self.p_basis.mul_vec(p)
    }
}

fn symmetrize(a: &CsrMatrix) -> CsrMatrix {
    let at = a.transpose();
    let entries: Vec<_> = a
        .triplets()
        .chain(at.triplets())
        .map(|(i, j, v)| (i, j, 0.5 * v))
        .collect();
    CsrMatrix::from_triplets(a.nrows(), a.ncols(), &entries)
}

/// Multiscale system from the CEM velocity basis and the auxiliary space.
pub fn assemble_reduced(
    g: &GridHierarchy,
    ops: &FineOperators,
    aux: &AuxiliarySpace,
    cem: &CemVelocityBasis,
    weight: PressureWeight,
) -> Result<ReducedSystem> {
    ReducedSystem::from_bases(
        g,
        ops,
        cem.basis.clone(),
        aux.basis.clone(),
        weight,
        cem.gram_status == GramStatus::ConstantNull,
    )
}

/// Full fine-scale system: `Ψ` selects interior edges, `P` is the identity.
pub fn fine_system(
    g: &GridHierarchy,
    ops: &FineOperators,
    weight: PressureWeight,
) -> Result<ReducedSystem> {
    let interior = ops.interior_edges();
    let entries: Vec<_> = interior
        .iter()
        .enumerate()
        .map(|(k, &e)| (e, k, 1.0))
        .collect();
    let psi = CsrMatrix::from_triplets(g.num_edges(), interior.len(), &entries);
    ReducedSystem::from_bases(
        g,
        ops,
        psi,
        CsrMatrix::identity(g.num_cells()),
        weight,
        false,
    )
}

/// Staggered state: `v` at `t_n`, `p` at `t_{n+1/2}`, `p_prev` at `t_{n−1/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveState {
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub p_prev: Option<Vec<f64>>,
    pub n: usize,
    pub tau: f64,
}

impl WaveState {
    pub fn zero(sys: &ReducedSystem, tau: f64) -> Self {
        WaveState {
            v: vec![0.0; sys.velocity_dim()],
            p: vec![0.0; sys.pressure_dim()],
            p_prev: None,
            n: 0,
            tau,
        }
    }

    pub fn time(&self) -> f64 {
        self.n as f64 * self.tau
    }

    /// Pressure synchronized to `t_n` (mean of the neighbouring half steps).
    pub fn synchronized_pressure(&self) -> Vec<f64> {
        match &self.p_prev {
            Some(q) => q.iter().zip(&self.p).map(|(a, b)| 0.5 * (a + b)).collect(),
            None => self.p.clone(),
        }
    }
}

/// Coefficients of the initial data: `a`-projection of `h_v`, pressure-mass
/// projection of `h_p`.
pub fn project_initial(
    sys: &ReducedSystem,
    ops: &FineOperators,
    h_v: &[f64],
    h_p: &[f64],
    tau: f64,
) -> WaveState {
    let v = sys.solve_velocity(&sys.psi.transpose_mul_vec(&ops.velocity_mass.mul_vec(h_v)));
    let weighted: Vec<f64> = h_p
        .iter()
        .zip(&sys.pressure_mass)
        .map(|(a, b)| a * b)
        .collect();
    let p = sys.solve_pressure(&sys.p_basis.transpose_mul_vec(&weighted));
    WaveState {
        v,
        p,
        p_prev: None,
        n: 0,
        tau,
    }
}

/// Advances `(vⁿ, p^{n+1/2})` to `(v^{n+1}, p^{n+3/2})` with load `f^{n+1}`.
pub fn leapfrog_step(state: &mut WaveState, sys: &ReducedSystem, f: Option<&[f64]>) -> Result<()> {
    let tau = state.tau;
    let dv = sys.solve_velocity(&sys.r.mul_vec(&state.p));
    state.v.iter_mut().zip(&dv).for_each(|(v, d)| *v += tau * d);
    let mut rhs = sys.r.transpose_mul_vec(&state.v);
    rhs.iter_mut().for_each(|x| *x = -*x);
    if let Some(f) = f {
        rhs.iter_mut().zip(f).for_each(|(x, y)| *x += y);
    }
    let dp = sys.solve_pressure(&rhs);
    let next: Vec<f64> = state.p.iter().zip(&dp).map(|(p, d)| p + tau * d).collect();
    state.p_prev = Some(std::mem::replace(&mut state.p, next));
    state.n += 1;
    if !state.v.iter().chain(&state.p).all(|x| x.is_finite()) {
        return Err(Error::Divergence { step: state.n });
    }
    Ok(())
}

/// Monitored energy `vᵀ M_v v + p̄ᵀ M_p p̄` with the synchronized pressure.
pub fn discrete_energy(state: &WaveState, sys: &ReducedSystem) -> f64 {
    let p = state.synchronized_pressure();
    sys.mv.quad_form(&state.v) + sys.mp.quad_form(&p)
}

/// `vⁿᵀ M_v vⁿ + p^{n−1/2}ᵀ M_p p^{n+1/2}`, exactly conserved without load.
pub fn staggered_energy(state: &WaveState, sys: &ReducedSystem) -> Option<f64> {
    let prev = state.p_prev.as_ref()?;
    Some(sys.mv.quad_form(&state.v) + sys.mp.bilinear(prev, &state.p))
}

#[derive(Clone, Debug, PartialEq)]
pub enum CflStatus {
    Ok {
        tau_max: f64,
    },
    Unstable {
        tau_max: f64,
    },
    /// Power iteration did not settle; no verdict.
    Unknown,
}

pub const CFL_TOLERANCE: f64 = 1e-6;
pub const CFL_MAX_ITERATIONS: usize = 500;

/// Largest eigenvalue of `M_v⁻¹ R M_p⁻¹ Rᵀ` by power iteration, if it
/// converged.
pub fn max_frequency_squared(sys: &ReducedSystem) -> Option<f64> {
    let n = sys.velocity_dim();
    if n == 0 {
        return Some(0.0);
    }
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + ((i as f64 * 0.618_033_988_75) % 1.0))
        .collect();
    let mut lambda = 0.0;
    for _ in 0..CFL_MAX_ITERATIONS {
        let y = sys.r.transpose_mul_vec(&x);
        let z = sys.solve_pressure(&y);
        let num = dot(&y, &z);
        let den = sys.mv.quad_form(&x);
        if !(den > 0.0) {
            return None;
        }
        let next = num / den;
        let mut w = sys.solve_velocity(&sys.r.mul_vec(&z));
        let scale = sys.mv.quad_form(&w).sqrt();
        if !(scale > 0.0) {
            return Some(next);
        }
        w.iter_mut().for_each(|v| *v /= scale);
        x = w;
        if (next - lambda).abs() <= CFL_TOLERANCE * next {
            return Some(next);
        }
        lambda = next;
    }
    None
}

pub fn check_cfl(sys: &ReducedSystem, tau: f64) -> CflStatus {
    match max_frequency_squared(sys) {
        Some(l) => {
            let tau_max = if l > 0.0 {
                2.0 / l.sqrt()
            } else {
                f64::INFINITY
            };
            if tau > tau_max {
                CflStatus::Unstable { tau_max }
            } else {
                CflStatus::Ok { tau_max }
            }
        }
        None => {
            log::warn!("power iteration did not converge; stability check skipped");
            CflStatus::Unknown
        }
    }
}

/// Number of steps `T/τ`, which must be a positive integer.
pub fn step_count(tau: f64, t_end: f64) -> Result<usize> {
    if !(tau > 0.0 && t_end > 0.0) {
        return Err(Error::Config(format!(
            "τ = {tau} and T = {t_end} must be positive"
        )));
    }
    multiple_of(tau, t_end).ok_or_else(|| {
        Error::Config(format!(
            "T = {t_end} is not an integer multiple of τ = {tau}"
        ))
    })
}

fn multiple_of(tau: f64, t: f64) -> Option<usize> {
    let k = (t / tau).round();
    ((k * tau - t).abs() <= 1e-9 * t.abs().max(tau) && k >= 0.0).then_some(k as usize)
}

/// A separable load `f(x, t) = g(x) w(t)`.
pub struct Forcing<'a> {
    pub spatial: Vec<f64>,
    pub temporal: &'a (dyn Fn(f64) -> f64 + Sync),
    pub sampling: SourceSampling,
}

/// Snapshot mapped to fine DOFs.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub time: f64,
    /// Fine edge field `Ψ vⁿ`.
    pub velocity: Vec<f64>,
    /// Fine cell field `P p̄ⁿ`.
    pub pressure: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct EnergyTrace {
    pub plain: Vec<f64>,
    pub staggered: Vec<f64>,
}

impl EnergyTrace {
    /// Largest `|Eⁿ − E¹| / E¹` of a series.
    pub fn relative_drift(series: &[f64]) -> f64 {
        let Some(&e0) = series.first() else {
            return 0.0;
        };
        if e0 == 0.0 {
            return 0.0;
        }
        series
            .iter()
            .map(|e| ((e - e0) / e0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub tau: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub monitor_energy: bool,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub energy: EnergyTrace,
    pub final_state: WaveState,
}

/// Steps from `state` to `T`, collecting snapshots and energies (from the
/// first step on, where both functionals are defined).
pub fn simulate(
    sys: &ReducedSystem,
    mut state: WaveState,
    forcing: Option<&Forcing>,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let steps = step_count(opts.tau, opts.t_end)?;
    let mut marks = Vec::with_capacity(opts.snapshot_times.len());
    for &t in &opts.snapshot_times {
        let k = multiple_of(opts.tau, t)
            .filter(|&k| k <= steps)
            .ok_or_else(|| {
                Error::Config(format!(
                    "snapshot time {t} is not a multiple of τ within [0, T]"
                ))
            })?;
        marks.push(k);
    }
    let coeffs = forcing.map(|f| sys.project_source(&f.spatial));
    let load = |t_next: f64| -> Option<Vec<f64>> {
        let (f, c) = (forcing?, coeffs.as_ref()?);
        let tau = opts.tau;
        let w = match f.sampling {
            SourceSampling::Step => (f.temporal)(t_next),
            SourceSampling::HalfStepMean => {
                0.5 * ((f.temporal)(t_next - 0.5 * tau) + (f.temporal)(t_next + 0.5 * tau))
            }
        };
        Some(c.iter().map(|x| x * w).collect())
    };

    let mut snapshots = Vec::new();
    let mut energy = EnergyTrace::default();
    let record = |state: &WaveState, snaps: &mut Vec<Snapshot>| {
        for (&k, &t) in marks.iter().zip(&opts.snapshot_times) {
            if k == state.n {
                snaps.push(Snapshot {
                    time: t,
                    velocity: sys.expand_velocity(&state.v),
                    pressure: sys.expand_pressure(&state.synchronized_pressure()),
                });
            }
        }
    };
    record(&state, &mut snapshots);
    while state.n < steps {
        let t_next = (state.n + 1) as f64 * opts.tau;
        let f = load(t_next);
        leapfrog_step(&mut state, sys, f.as_deref())?;
        if opts.monitor_energy {
            energy.plain.push(discrete_energy(&state, sys));
            energy.staggered.extend(staggered_energy(&state, sys));
        }
        record(&state, &mut snapshots);
    }
    snapshots.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(Trajectory {
        snapshots,
        energy,
        final_state: state,
    })
}

/// Fine RT0 reference run from initial data `(h_v, h_p)`.
pub fn run_fine_reference(
    g: &GridHierarchy,
    ops: &FineOperators,
    weight: PressureWeight,
    forcing: Option<&Forcing>,
    h_v: &[f64],
    h_p: &[f64],
    opts: &RunOptions,
) -> Result<Trajectory> {
    let sys = fine_system(g, ops, weight)?;
    if let CflStatus::Unstable { tau_max } = check_cfl(&sys, opts.tau) {
        return Err(Error::Config(format!(
            "τ = {} exceeds the fine stability limit {tau_max:e}",
            opts.tau
        )));
    }
    let init = project_initial(&sys, ops, h_v, h_p, opts.tau);
    simulate(&sys, init, forcing, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_step_counts() {
        assert_eq!(step_count(1e-4, 0.4).unwrap(), 4000);
        assert!(step_count(3e-4, 0.4).is_err());
        assert!(step_count(0.0, 0.4).is_err());
    }

    #[test]
    fn drift_of_constant_series_is_zero() {
        assert_eq!(EnergyTrace::relative_drift(&[2.0, 2.0, 2.0]), 0.0);
        assert!((EnergyTrace::relative_drift(&[2.0, 2.2, 1.9]) - 0.1).abs() < 1e-12);
    }
}
