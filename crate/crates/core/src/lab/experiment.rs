//! Sweeps over coarse size, basis count and oversampling layers.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::{FineOperators, MediumFields};
use crate::cem::CemVelocityBasis;
use crate::dynamics::{
    assemble_reduced, check_cfl, run_fine_reference, simulate, CflStatus, Forcing, RunOptions,
    Snapshot, WaveState,
};
use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::lab::config::ExperimentConfig;
use crate::lab::field_file::{Encoding, FieldFile};
use crate::lab::medium::load_medium;
use crate::lab::metrics::{error_metrics, velocity_magnitude};
use crate::lab::source::{source_fields, SourceFields};
use crate::lab::vtk;
use crate::pou::solve_pou;
use crate::spectral::AuxiliarySpace;

pub const CSV_HEADER: &str = "n_coarse,J,ell,t,e_pre,e_vel,Lambda,offline_seconds,online_seconds";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n_coarse: usize,
    pub n_basis: usize,
    pub layers: usize,
    pub time: f64,
    pub e_pre: f64,
    pub e_vel: f64,
    pub lambda: Option<f64>,
    pub offline_seconds: f64,
    pub online_seconds: f64,
}

/// Multiscale fields at `T` of one sweep point.
#[derive(Clone, Debug)]
pub struct PointFields {
    pub n_coarse: usize,
    pub n_basis: usize,
    pub layers: usize,
    pub last: Snapshot,
}

/// Per-element eigenvalues of one `(n_coarse, J)` pair.
#[derive(Clone, Debug)]
pub struct EigenTable {
    pub n_coarse: usize,
    pub n_basis: usize,
    pub rows: Vec<Vec<f64>>,
}

pub struct ExperimentOutput {
    pub rows: Vec<SweepRow>,
    pub reference: Vec<Snapshot>,
    pub fields: Vec<PointFields>,
    pub eigenvalues: Vec<EigenTable>,
    pub medium: MediumFields,
}

/// Shared fine-scale data of a sweep.
pub struct FineSetup {
    pub medium: MediumFields,
    pub ops: FineOperators,
    pub source: Option<SourceFields>,
    pub reference: Vec<Snapshot>,
}

fn run_options(cfg: &ExperimentConfig) -> RunOptions {
    RunOptions {
        tau: cfg.tau,
        t_end: cfg.t_end,
        snapshot_times: cfg.snapshot_times.clone(),
        monitor_energy: false,
    }
}

fn forcing<'a>(cfg: &ExperimentConfig, src: &'a Option<SourceFields>) -> Option<Forcing<'a>> {
    src.as_ref().map(|s| Forcing {
        spatial: s.spatial.clone(),
        temporal: &*s.temporal,
        sampling: cfg.source_sampling,
    })
}

pub fn fine_setup(cfg: &ExperimentConfig) -> Result<FineSetup> {
    cfg.validate()?;
    let g = GridHierarchy::new(cfg.n_fine, cfg.n_coarse[0])?;
    let medium = load_medium(&g, &cfg.medium, cfg.seed)?;
    let ops = FineOperators::assemble(&g, &medium)?;
    let source = source_fields(&g, &cfg.source)?;
    let zero_v = vec![0.0; g.num_edges()];
    let zero_p = vec![0.0; g.num_cells()];
    let f = forcing(cfg, &source);
    let t0 = Instant::now();
    let traj = run_fine_reference(
        &g,
        &ops,
        cfg.pressure_weight,
        f.as_ref(),
        &zero_v,
        &zero_p,
        &run_options(cfg),
    )?;
    log::info!("fine reference {:.2}s", t0.elapsed().as_secs_f64());
    Ok(FineSetup {
        medium,
        ops,
        source,
        reference: traj.snapshots,
    })
}

struct PointResult {
    rows: Vec<SweepRow>,
    fields: Vec<PointFields>,
    eigen: Vec<EigenTable>,
}

fn run_coarse(cfg: &ExperimentConfig, fine: &FineSetup, nc: usize) -> Result<PointResult> {
    let t0 = Instant::now();
    let g = GridHierarchy::new(cfg.n_fine, nc)?;
    let pou = solve_pou(&g, &fine.medium, cfg.gradient_sampling)?;
    let mut ops = fine.ops.clone();
    ops.set_s_weight(&g, &pou.kappa_tilde)?;
    let pou_seconds = t0.elapsed().as_secs_f64();
    log::info!("n_coarse={nc}: partition of unity {pou_seconds:.2}s");
    let mut out = PointResult {
        rows: Vec::new(),
        fields: Vec::new(),
        eigen: Vec::new(),
    };
    for &j in &cfg.n_basis {
        let t1 = Instant::now();
        let aux = AuxiliarySpace::build(&g, &ops, j)?;
        let aux_seconds = t1.elapsed().as_secs_f64();
        log::info!("n_coarse={nc}, J={j}: spectral problems {aux_seconds:.2}s");
        out.eigen.push(EigenTable {
            n_coarse: nc,
            n_basis: j,
            rows: aux.spectra.iter().map(|s| s.eigenvalues.clone()).collect(),
        });
        for &l in &cfg.layers {
            let wrap = |e: Error| Error::SweepPoint {
                n_coarse: nc,
                n_basis: j,
                layers: l,
                source: Box::new(e),
            };
            let t2 = Instant::now();
            let cem = CemVelocityBasis::build(&g, &ops, &aux, l).map_err(wrap)?;
            log::info!(
                "n_coarse={nc}, J={j}, ℓ={l}: velocity basis {:.2}s",
                t2.elapsed().as_secs_f64()
            );
            let sys = assemble_reduced(&g, &ops, &aux, &cem, cfg.pressure_weight).map_err(wrap)?;
            if let CflStatus::Unstable { tau_max } = check_cfl(&sys, cfg.tau) {
                return Err(wrap(Error::Config(format!(
                    "τ = {} exceeds the reduced stability limit {tau_max:e}",
                    cfg.tau
                ))));
            }
            let offline = pou_seconds + aux_seconds + t2.elapsed().as_secs_f64();
            let t3 = Instant::now();
            let f = forcing(cfg, &fine.source);
            let traj = simulate(
                &sys,
                WaveState::zero(&sys, cfg.tau),
                f.as_ref(),
                &run_options(cfg),
            )
            .map_err(wrap)?;
            let online = t3.elapsed().as_secs_f64();
            log::info!("n_coarse={nc}, J={j}, ℓ={l}: offline {offline:.2}s, online {online:.2}s");
            let metrics = error_metrics(&ops, &fine.reference, &traj.snapshots).map_err(wrap)?;
            for m in &metrics {
                if m.pre_absolute || m.vel_absolute {
                    log::warn!(
                        "reference norm vanishes at t = {}; reporting absolute error (n_coarse={nc}, J={j}, ℓ={l})",
                        m.time
                    );
                }
                out.rows.push(SweepRow {
                    n_coarse: nc,
                    n_basis: j,
                    layers: l,
                    time: m.time,
                    e_pre: m.e_pre,
                    e_vel: m.e_vel,
                    lambda: aux.lambda,
                    offline_seconds: offline,
                    online_seconds: online,
                });
            }
            if cfg.dump_fields {
                if let Some(last) = traj.snapshots.last() {
                    out.fields.push(PointFields {
                        n_coarse: nc,
                        n_basis: j,
                        layers: l,
                        last: last.clone(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Runs the whole sweep; the fine reference is computed once.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let fine = fine_setup(cfg)?;
    run_sweep(cfg, &fine)
}

pub fn run_sweep(cfg: &ExperimentConfig, fine: &FineSetup) -> Result<ExperimentOutput> {
    let parts = cfg
        .n_coarse
        .par_iter()
        .map(|&nc| run_coarse(cfg, fine, nc))
        .collect::<Result<Vec<_>>>()?;
    let mut out = ExperimentOutput {
        rows: Vec::new(),
        reference: fine.reference.clone(),
        fields: Vec::new(),
        eigenvalues: Vec::new(),
        medium: fine.medium.clone(),
    };
    for p in parts {
        out.rows.extend(p.rows);
        out.fields.extend(p.fields);
        out.eigenvalues.extend(p.eigen);
    }
    Ok(out)
}

fn num(x: f64) -> String {
    format!("{x:.10e}")
}

pub fn rows_to_csv(rows: &[SweepRow], timings: bool) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let lambda = r.lambda.map(num).unwrap_or_default();
        let (off, on) = if timings {
            (
                format!("{:.3}", r.offline_seconds),
                format!("{:.3}", r.online_seconds),
            )
        } else {
            (String::new(), String::new())
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.n_coarse,
            r.n_basis,
            r.layers,
            r.time,
            num(r.e_pre),
            num(r.e_vel),
            lambda,
            off,
            on
        );
    }
    s
}

pub fn eigen_csv(t: &EigenTable) -> String {
    let width = t.rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut s = String::from("element");
    for k in 1..=width {
        let _ = write!(s, ",lambda_{k}");
    }
    s.push('\n');
    for (i, row) in t.rows.iter().enumerate() {
        let _ = write!(s, "{i}");
        for v in row {
            let _ = write!(s, ",{}", num(*v));
        }
        s.push('\n');
    }
    s
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `results.csv`, eigenvalue tables, the resolved configuration and
/// any requested field dumps into `cfg.output_dir`.
pub fn write_outputs(cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("config.resolved.toml"), cfg.to_toml())?;
    write(
        &dir.join("results.csv"),
        rows_to_csv(&out.rows, cfg.timings),
    )?;
    for t in &out.eigenvalues {
        write(
            &dir.join(format!("eigenvalues_nc{}_J{}.csv", t.n_coarse, t.n_basis)),
            eigen_csv(t),
        )?;
    }
    if cfg.dump_fields {
        let g = GridHierarchy::new(cfg.n_fine, cfg.n_coarse[0])?;
        let n = cfg.n_fine;
        let dump = |stem: &str, pressure: &[f64], speed: &[f64]| -> Result<()> {
            FieldFile::new(n, n, "pressure", pressure.to_vec())?
                .write(&dir.join(format!("{stem}_pressure.field")), Encoding::Ascii)?;
            FieldFile::new(n, n, "velocity-magnitude", speed.to_vec())?
                .write(&dir.join(format!("{stem}_velocity.field")), Encoding::Ascii)?;
            if cfg.vtk {
                vtk::write_cell_fields(
                    &dir.join(format!("{stem}.vtk")),
                    n,
                    stem,
                    &[("pressure", pressure), ("velocity_magnitude", speed)],
                )?;
            }
            Ok(())
        };
        if let Some(r) = out.reference.last() {
            dump(
                "reference",
                &r.pressure,
                &velocity_magnitude(&g, &r.velocity),
            )?;
        }
        for p in &out.fields {
            let stem = format!("ms_nc{}_J{}_l{}", p.n_coarse, p.n_basis, p.layers);
            dump(
                &stem,
                &p.last.pressure,
                &velocity_magnitude(&g, &p.last.velocity),
            )?;
        }
        FieldFile::new(n, n, "kappa", out.medium.kappa.clone())?
            .write(&dir.join("kappa.field"), Encoding::Ascii)?;
    }
    Ok(())
}
