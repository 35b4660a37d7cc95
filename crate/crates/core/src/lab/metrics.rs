//! Relative error metrics between fine and multiscale snapshots.

use crate::assembly::FineOperators;
use crate::dynamics::Snapshot;
use crate::error::{Error, Result};
use crate::grid::GridHierarchy;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRow {
    pub time: f64,
    pub e_pre: f64,
    pub e_vel: f64,
    /// Set when the reference norm vanished and the error is absolute.
    pub pre_absolute: bool,
    pub vel_absolute: bool,
}

/// `‖v‖_a`
pub fn a_norm(ops: &FineOperators, v: &[f64]) -> f64 {
    ops.velocity_mass.quad_form(v).max(0.0).sqrt()
}

/// `‖p‖_ρ`
pub fn rho_norm(ops: &FineOperators, p: &[f64]) -> f64 {
    p.iter()
        .zip(&ops.rho_mass)
        .map(|(x, w)| x * x * w)
        .sum::<f64>()
        .sqrt()
}

fn relative(err: f64, reference: f64) -> (f64, bool) {
    if reference > 0.0 {
        (err / reference, false)
    } else {
        (err, true)
    }
}

pub fn error_metrics(
    ops: &FineOperators,
    fine: &[Snapshot],
    ms: &[Snapshot],
) -> Result<Vec<ErrorRow>> {
    if fine.len() != ms.len() {
        return Err(Error::Internal(format!(
            "{} reference snapshots against {} multiscale snapshots",
            fine.len(),
            ms.len()
        )));
    }
    fine.iter()
        .zip(ms)
        .map(|(f, m)| {
            if (f.time - m.time).abs() > 1e-12 {
                return Err(Error::Internal(format!(
                    "snapshot times differ: {} and {}",
                    f.time, m.time
                )));
            }
            let dv: Vec<f64> = f
                .velocity
                .iter()
                .zip(&m.velocity)
                .map(|(a, b)| a - b)
                .collect();
            let dp: Vec<f64> = f
                .pressure
                .iter()
                .zip(&m.pressure)
                .map(|(a, b)| a - b)
                .collect();
            let (e_vel, vel_absolute) = relative(a_norm(ops, &dv), a_norm(ops, &f.velocity));
            let (e_pre, pre_absolute) = relative(rho_norm(ops, &dp), rho_norm(ops, &f.pressure));
            Ok(ErrorRow {
                time: f.time,
                e_pre,
                e_vel,
                pre_absolute,
                vel_absolute,
            })
        })
        .collect()
}

/// Cell-center velocity vectors reconstructed from unit-flux edge values.
pub fn cell_velocity(g: &GridHierarchy, v: &[f64]) -> Vec<[f64; 2]> {
    let h = g.cell_size();
    (0..g.num_cells())
        .map(|c| {
            let e = g.cell_edges(c);
            [
                0.5 * (v[e.left] + v[e.right]) / h,
                0.5 * (v[e.bottom] + v[e.top]) / h,
            ]
        })
        .collect()
}

pub fn velocity_magnitude(g: &GridHierarchy, v: &[f64]) -> Vec<f64> {
    cell_velocity(g, v)
        .into_iter()
        .map(|[x, y]| x.hypot(y))
        .collect()
}
