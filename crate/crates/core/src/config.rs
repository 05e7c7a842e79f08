//! Experiment configuration (TOML).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MfError, Result};
use crate::geometry::GeometricBounds;
use crate::manifold::{AnalyticManifold, ManifoldSpec};
use crate::net::NetConfig;
use crate::output::OutputConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Slab densities by quadrature over the ground-truth manifold.
    Exact,
    /// Slab counts over fresh batches of the observations.
    Sampled,
}

/// Replaces individual entries of the computed geometric bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsOverride {
    pub tau: Option<f64>,
    #[serde(rename = "V")]
    pub volume: Option<f64>,
    #[serde(rename = "R")]
    pub r_exposed: Option<f64>,
    #[serde(rename = "Lambda")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcaConfig {
    /// Tangent-angle parameter; sets D through beta(alpha).
    pub alpha: f64,
    /// Fixed working dimension instead of the formula.
    pub dim: Option<usize>,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig { alpha: 0.5, dim: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub sigma: f64,
    pub eps: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Observations written by `generate`.
    pub samples: usize,
    /// Sampled mode: points per Find-Distance call.
    #[serde(default = "default_per_call")]
    pub per_call: usize,
    pub manifold: ManifoldSpec,
    #[serde(default)]
    pub bounds: BoundsOverride,
    #[serde(default)]
    pub pca: PcaConfig,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_eta() -> f64 {
    0.1
}

fn default_mode() -> Mode {
    Mode::Exact
}

fn default_per_call() -> usize {
    10_000
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| MfError::invalid(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| MfError::invalid(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma", self.sigma),
            ("eps", self.eps),
            ("net.c_cone", self.net.c_cone),
            ("net.c_acc", self.net.c_acc),
            ("net.c_eps", self.net.c_eps),
            ("output.c_subnet", self.output.c_subnet),
            ("output.radius_factor", self.output.radius_factor),
            ("output.c_w", self.output.c_w),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(MfError::invalid(format!("config: {name} must be positive, got {v}")));
            }
        }
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(MfError::invalid("config: eta must lie in (0, 1/2)"));
        }
        if self.samples == 0 || self.per_call == 0 {
            return Err(MfError::invalid("config: samples and per_call must be positive"));
        }
        if self.net.n0_cap == 0 || self.net.sphere_net_cap == Some(0) {
            return Err(MfError::invalid("config: net caps must be positive"));
        }
        if !(self.output.c_lo > 0.0 && self.output.c_lo < 1.0) {
            return Err(MfError::invalid("config: output.c_lo must lie in (0, 1)"));
        }
        if self.output.tube_samples == 0 || self.output.ipf_cap == 0 {
            return Err(MfError::invalid("config: output.tube_samples and output.ipf_cap must be positive"));
        }
        if !(self.pca.alpha > 0.0 && self.pca.alpha < 1.0) {
            return Err(MfError::invalid("config: pca.alpha must lie in (0, 1)"));
        }
        if self.pca.dim == Some(0) {
            return Err(MfError::invalid("config: pca.dim must be positive"));
        }
        for v in [self.bounds.tau, self.bounds.volume, self.bounds.r_exposed, self.bounds.lambda].into_iter().flatten() {
            if !(v > 0.0) {
                return Err(MfError::invalid("config: bound overrides must be positive"));
            }
        }
        Ok(())
    }

    pub fn build_manifold(&self) -> Result<AnalyticManifold> {
        self.manifold.build()
    }

    /// Bounds of the configured manifold with overrides applied.
    pub fn resolved_bounds(&self, m: &AnalyticManifold) -> Result<GeometricBounds> {
        let mut b = m.bounds().clone();
        if let Some(t) = self.bounds.tau {
            b.tau = t;
        }
        if let Some(v) = self.bounds.volume {
            b.volume = v;
        }
        if let Some(r) = self.bounds.r_exposed {
            b.r_exposed = r;
        }
        if let Some(l) = self.bounds.lambda {
            b.lambda = l;
        }
        b.validate()?;
        Ok(b)
    }
}
