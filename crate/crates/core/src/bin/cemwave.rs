use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cemwave::lab::check::run_checks;
use cemwave::lab::experiment::{run_experiment, write_outputs};
use cemwave::lab::fields::write_structure_fields;
use cemwave::lab::ExperimentConfig;
use cemwave::Result;

/// Multiscale wave simulations on high-contrast media.
#[derive(Parser)]
#[command(name = "cemwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the first point of the configured sweep.
    Run(Common),
    /// Run every (n_coarse, J, layers) combination.
    Sweep(Common),
    /// Dump κ, κ̃, partition of unity and basis functions.
    Fields(Common),
    /// Run the invariant suite on the configured problem.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults apply when omitted.
    config: Option<PathBuf>,
    #[arg(long)]
    n_fine: Option<usize>,
    /// Comma separated list.
    #[arg(long, value_delimiter = ',')]
    n_coarse: Option<Vec<usize>>,
    #[arg(long = "n-basis", short = 'J', value_delimiter = ',')]
    n_basis: Option<Vec<usize>>,
    #[arg(long, short = 'l', value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    snapshot_times: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    contrast: Option<f64>,
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    dump_fields: bool,
    #[arg(long)]
    vtk: bool,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.n_fine {
            c.n_fine = v;
        }
        if let Some(v) = &self.n_coarse {
            c.n_coarse = v.clone();
        }
        if let Some(v) = &self.n_basis {
            c.n_basis = v.clone();
        }
        if let Some(v) = &self.layers {
            c.layers = v.clone();
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.t_end {
            c.t_end = v;
        }
        if let Some(v) = &self.snapshot_times {
            c.snapshot_times = v.clone();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.contrast {
            c.medium.contrast = v;
        }
        if let Some(v) = &self.output_dir {
            c.output_dir = v.clone();
        }
        c.timings |= self.timings;
        c.dump_fields |= self.dump_fields;
        c.vtk |= self.vtk;
        c.validate()?;
        Ok(c)
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(a) => {
            let mut c = a.resolve()?;
            c.n_coarse.truncate(1);
            c.n_basis.truncate(1);
            c.layers.truncate(1);
            let out = run_experiment(&c)?;
            write_outputs(&c, &out)?;
            for r in &out.rows {
                println!(
                    "t = {:.4}  e_pre = {:.4}%  e_vel = {:.4}%",
                    r.time,
                    100.0 * r.e_pre,
                    100.0 * r.e_vel
                );
            }
            Ok(true)
        }
        Command::Sweep(a) => {
            let c = a.resolve()?;
            let out = run_experiment(&c)?;
            write_outputs(&c, &out)?;
            println!(
                "{} rows written to {}",
                out.rows.len(),
                c.output_dir.join("results.csv").display()
            );
            Ok(true)
        }
        Command::Fields(a) => {
            let c = a.resolve()?;
            for f in write_structure_fields(&c, &c.output_dir)? {
                println!("{}", c.output_dir.join(f).display());
            }
            Ok(true)
        }
        Command::Check(a) => {
            let c = a.resolve()?;
            let mut ok = true;
            for o in run_checks(&c)? {
                let verdict = if o.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{verdict}  {:<34} {:.3e} (tolerance {:.1e})",
                    o.name, o.value, o.tolerance
                );
                ok &= o.passed();
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
