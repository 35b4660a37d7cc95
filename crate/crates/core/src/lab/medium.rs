//! Permeability and density fields: file ingestion and a seeded generator.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::MediumFields;
use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::lab::field_file::FieldFile;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MediumKind {
    #[default]
    Builtin,
    File,
    Homogeneous,
}

/// Value taken by channels and inclusions relative to the unit background.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureLevel {
    /// κ = 1/γ inside features.
    Low,
    /// κ = γ inside features.
    #[default]
    High,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumConfig {
    pub kind: MediumKind,
    /// Contrast γ between features and background.
    pub contrast: f64,
    /// κ of the background; features sit at this value times γ or 1/γ.
    pub background: f64,
    pub channels: usize,
    pub inclusions: usize,
    pub features: FeatureLevel,
    /// Raster for `kind = "file"`.
    pub path: Option<PathBuf>,
    pub rho: f64,
    pub rho_path: Option<PathBuf>,
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            kind: MediumKind::Builtin,
            contrast: 1e4,
            background: 1.0,
            channels: 4,
            inclusions: 40,
            features: FeatureLevel::High,
            path: None,
            rho: 1.0,
            rho_path: None,
        }
    }
}

/// Geometry of the builtin medium in unit-square coordinates.
#[derive(Clone, Debug)]
pub struct Layout {
    channels: Vec<Channel>,
    inclusions: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug)]
struct Channel {
    center: f64,
    half_width: f64,
    amplitude: f64,
    wavenumber: f64,
    phase: f64,
}

impl Layout {
    pub fn random(seed: u64, channels: usize, inclusions: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channels = (0..channels)
            .map(|k| {
                // one channel per horizontal band keeps them apart
                let band = (k as f64 + rng.random_range(0.25..0.75)) / channels as f64;
                Channel {
                    center: band,
                    half_width: rng.random_range(0.008..0.016),
                    amplitude: rng.random_range(0.0..0.04),
                    wavenumber: rng.random_range(1.0..3.0),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                }
            })
            .collect();
        let inclusions = (0..inclusions)
            .map(|_| {
                (
                    rng.random_range(0.05..0.95),
                    rng.random_range(0.05..0.95),
                    rng.random_range(0.01..0.03),
                )
            })
            .collect();
        Layout {
            channels,
            inclusions,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let in_channel = self.channels.iter().any(|c| {
            let yc =
                c.center + c.amplitude * (std::f64::consts::TAU * c.wavenumber * x + c.phase).sin();
            (y - yc).abs() < c.half_width
        });
        in_channel
            || self
                .inclusions
                .iter()
                .any(|&(cx, cy, r)| (x - cx).powi(2) + (y - cy).powi(2) < r * r)
    }
}

/// Builtin high-contrast field sampled at the cell centers of an `n × n` grid.
pub fn generate_kappa(n: usize, seed: u64, cfg: &MediumConfig) -> Result<Vec<f64>> {
    if !(cfg.contrast >= 1.0 && cfg.contrast.is_finite()) {
        return Err(Error::Config(format!(
            "contrast must be a finite value ≥ 1, got {}",
            cfg.contrast
        )));
    }
    if !(cfg.background > 0.0 && cfg.background.is_finite()) {
        return Err(Error::Config(format!(
            "background must be a finite positive value, got {}",
            cfg.background
        )));
    }
    let layout = Layout::random(seed, cfg.channels, cfg.inclusions);
    let bg = cfg.background;
    let feature = match cfg.features {
        FeatureLevel::Low => bg / cfg.contrast,
        FeatureLevel::High => bg * cfg.contrast,
    };
    let h = 1.0 / n as f64;
    Ok((0..n * n)
        .map(|c| {
            let (x, y) = (((c % n) as f64 + 0.5) * h, ((c / n) as f64 + 0.5) * h);
            if layout.contains(x, y) {
                feature
            } else {
                bg
            }
        })
        .collect())
}

fn load_raster(path: &Path, n: usize, what: &str) -> Result<Vec<f64>> {
    let f = FieldFile::read(path)?;
    if let Some(k) = f.values.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!(
                "{what} value {} at cell {k} (i={}, j={}) is not positive",
                f.values[k],
                k % f.nx,
                k / f.nx
            ),
        });
    }
    Ok(f.resample(n))
}

pub fn load_medium(g: &GridHierarchy, cfg: &MediumConfig, seed: u64) -> Result<MediumFields> {
    let n = g.n_fine();
    let kappa = match cfg.kind {
        MediumKind::Builtin => generate_kappa(n, seed, cfg)?,
        MediumKind::Homogeneous => vec![1.0; n * n],
        MediumKind::File => {
            let path = cfg
                .path
                .as_ref()
                .ok_or_else(|| Error::Config("medium.kind = \"file\" needs medium.path".into()))?;
            load_raster(path, n, "permeability")?
        }
    };
    let rho = match &cfg.rho_path {
        Some(p) => load_raster(p, n, "density")?,
        None => vec![cfg.rho; n * n],
    };
    MediumFields::new(g, kappa, rho)
}
