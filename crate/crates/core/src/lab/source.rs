//! Source terms of the two benchmark problems.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridHierarchy;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    /// ±1 on the two opposite corner squares of side 1/8.
    #[default]
    Example1,
    /// First derivative of a Gaussian wavelet times a Gaussian bump.
    GaussianWavelet,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub kind: SourceKind,
    /// Central frequency f0.
    pub f0: f64,
    /// Bump width δ.
    pub delta: f64,
    pub center: [f64; 2],
    /// Use `exp(+|x−c|²/δ²)` exactly as printed; only useful to show that it
    /// blows up.
    pub literal_exponent: bool,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            kind: SourceKind::Example1,
            f0: 20.0,
            delta: 0.02,
            center: [0.5, 0.5],
            literal_exponent: false,
        }
    }
}

pub fn source_example1(x: f64, y: f64) -> f64 {
    let lo = 1.0 / 8.0;
    let hi = 7.0 / 8.0;
    if x <= lo && y <= lo {
        1.0
    } else if x >= hi && y >= hi {
        -1.0
    } else {
        0.0
    }
}

/// Spatial factor `g(x) = 10 δ⁻² exp(−|x−c|²/δ²)`.
pub fn wavelet_space(x: f64, y: f64, delta: f64, center: [f64; 2], literal: bool) -> f64 {
    let r2 = ((x - center[0]).powi(2) + (y - center[1]).powi(2)) / (delta * delta);
    let e = if literal { r2 } else { -r2 };
    10.0 / (delta * delta) * e.exp()
}

/// Temporal factor `(t − 2/f0) exp(−π² f0² (t − 2/f0)²)`.
pub fn wavelet_time(t: f64, f0: f64) -> f64 {
    let s = t - 2.0 / f0;
    s * (-(PI * f0 * s).powi(2)).exp()
}

pub fn source_wavelet(x: f64, y: f64, t: f64, f0: f64, delta: f64, center: [f64; 2]) -> f64 {
    wavelet_space(x, y, delta, center, false) * wavelet_time(t, f0)
}

/// Cell-center samples of the spatial factor and the temporal factor.
pub struct SourceFields {
    pub spatial: Vec<f64>,
    pub temporal: Box<dyn Fn(f64) -> f64 + Sync + Send>,
}

pub fn source_fields(g: &GridHierarchy, cfg: &SourceConfig) -> Result<Option<SourceFields>> {
    let centers = (0..g.num_cells()).map(|c| g.cell_center(c));
    match cfg.kind {
        SourceKind::None => Ok(None),
        SourceKind::Example1 => Ok(Some(SourceFields {
            spatial: centers.map(|(x, y)| source_example1(x, y)).collect(),
            temporal: Box::new(|_| 1.0),
        })),
        SourceKind::GaussianWavelet => {
            if !(cfg.f0 > 0.0 && cfg.delta > 0.0) {
                return Err(Error::Config(format!(
                    "wavelet needs f0 > 0 and δ > 0 (got {}, {})",
                    cfg.f0, cfg.delta
                )));
            }
            let spatial: Vec<f64> = centers
                .map(|(x, y)| wavelet_space(x, y, cfg.delta, cfg.center, cfg.literal_exponent))
                .collect();
            if spatial.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(
                    "source overflows: the literal positive exponent diverges away from the center"
                        .into(),
                ));
            }
            let f0 = cfg.f0;
            Ok(Some(SourceFields {
                spatial,
                temporal: Box::new(move |t| wavelet_time(t, f0)),
            }))
        }
    }
}
