//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::dynamics::{PressureWeight, SourceSampling};
use crate::error::{Error, Result};
use crate::lab::medium::MediumConfig;
use crate::lab::source::SourceConfig;
use crate::pou::GradientSampling;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_fine: usize,
    #[serde(deserialize_with = "one_or_many")]
    pub n_coarse: Vec<usize>,
    /// Basis functions per coarse element, J.
    #[serde(deserialize_with = "one_or_many")]
    pub n_basis: Vec<usize>,
    /// Oversampling layers ℓ.
    #[serde(deserialize_with = "one_or_many")]
    pub layers: Vec<usize>,
    pub tau: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
    pub pressure_weight: PressureWeight,
    pub source_sampling: SourceSampling,
    pub gradient_sampling: GradientSampling,
    /// Fill the timing columns of the CSV (makes output run-dependent).
    pub timings: bool,
    pub output_dir: PathBuf,
    /// Write fields at `T` for every sweep point.
    pub dump_fields: bool,
    pub vtk: bool,
    pub medium: MediumConfig,
    pub source: SourceConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_fine: 160,
            n_coarse: vec![10, 20, 40],
            n_basis: vec![4],
            layers: vec![3],
            tau: 2e-5,
            t_end: 0.4,
            snapshot_times: vec![0.1, 0.2, 0.3, 0.4],
            seed: 7,
            pressure_weight: PressureWeight::Rho,
            source_sampling: SourceSampling::Step,
            gradient_sampling: GradientSampling::CellCenter,
            timings: false,
            output_dir: PathBuf::from("output"),
            dump_fields: false,
            vtk: false,
            medium: MediumConfig::default(),
            source: SourceConfig::default(),
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

fn is_multiple(t: f64, tau: f64) -> bool {
    let k = (t / tau).round();
    k >= 0.0 && (k * tau - t).abs() <= 1e-9 * t.abs().max(tau)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        for (name, list) in [
            ("n_coarse", &self.n_coarse),
            ("n_basis", &self.n_basis),
            ("layers", &self.layers),
        ] {
            if list.is_empty() {
                return cfg(format!("sweep list `{name}` is empty"));
            }
        }
        if self.n_fine == 0 {
            return cfg("n_fine must be positive".into());
        }
        for &nc in &self.n_coarse {
            if nc < 2 || self.n_fine % nc != 0 {
                return cfg(format!(
                    "n_coarse = {nc} must be at least 2 and divide n_fine = {}",
                    self.n_fine
                ));
            }
            let r = self.n_fine / nc;
            for &j in &self.n_basis {
                if j == 0 || j >= r * r {
                    return cfg(format!(
                        "J = {j} must lie in 1..{} for n_coarse = {nc} (one extra eigenpair is needed)",
                        r * r
                    ));
                }
            }
        }
        if self.layers.contains(&0) {
            return cfg("layers must be at least 1".into());
        }
        if !(self.tau > 0.0 && self.t_end > 0.0) {
            return cfg(format!(
                "τ = {} and T = {} must be positive",
                self.tau, self.t_end
            ));
        }
        if !is_multiple(self.t_end, self.tau) {
            return cfg(format!(
                "T = {} is not an integer multiple of τ = {}",
                self.t_end, self.tau
            ));
        }
        if self.snapshot_times.is_empty() {
            return cfg("no snapshot times".into());
        }
        for &t in &self.snapshot_times {
            if !(t >= 0.0 && t <= self.t_end * (1.0 + 1e-12)) || !is_multiple(t, self.tau) {
                return cfg(format!(
                    "snapshot time {t} is not a multiple of τ in [0, T]"
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_and_lists_both_parse() {
        let c =
            ExperimentConfig::from_toml("n_fine = 40\nn_coarse = 4\nn_basis = [1, 2]\n").unwrap();
        assert_eq!(c.n_coarse, vec![4]);
        assert_eq!(c.n_basis, vec![1, 2]);
        c.validate().unwrap();
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn invalid_sweeps_are_configuration_errors() {
        for text in [
            "n_coarse = []",
            "n_fine = 30\nn_coarse = 4",
            "tau = 3e-4",
            "snapshot_times = [0.15005]",
            "layers = 0",
        ] {
            let c = ExperimentConfig::from_toml(text).unwrap();
            assert_eq!(c.validate().unwrap_err().exit_code(), 1, "{text}");
        }
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }
}
