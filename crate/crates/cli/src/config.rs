//! Run configuration: per-command defaults, then the `--config` file, then
//! flags. The fully resolved config is what summary.json echoes, so feeding
//! it back through `--config` repeats the run exactly.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qmartin_core::analysis::{default_xi_grid, StoppingRule};
use qmartin_core::model::{ModelSpec, PresetSpec, QuantumModel};
use qmartin_core::trajectory::{default_sample_every, fit_step};
use qmartin_core::{Integrator, QubitParams, SimOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    /// Observation times for fig2c.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<Integrator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_parents: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_branches: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_slots: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub long: Option<bool>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    /// Fields set in `top` win.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        overlay!(
            self, top, model, dt, t_final, horizons, n_traj, seed, sample_every, integrator, upper, lower, tau,
            n_parents, n_branches, n_slots, xi_grid, out_dir, threads, long
        )
    }

    /// Reads a config document; a summary.json is accepted through its
    /// `config` block.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let block = match value.get("config") {
            Some(inner) if value.get("version").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(block).with_context(|| format!("malformed config {}", path.display()))
    }

    pub fn model_spec(&self) -> Result<&ModelSpec> {
        self.model.as_ref().context("no model given")
    }

    pub fn build_model(&self) -> Result<QuantumModel> {
        Ok(self.model_spec()?.build()?)
    }

    pub fn out_dir(&self) -> &Path {
        self.out_dir.as_deref().unwrap_or(Path::new("."))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn positive(&self, name: &str, v: Option<f64>) -> Result<f64> {
        match v {
            Some(x) if x > 0.0 && x.is_finite() => Ok(x),
            Some(x) => bail!("{name} must be > 0, got {x}"),
            None => bail!("{name} is required"),
        }
    }

    pub fn count(&self, name: &str, v: Option<usize>) -> Result<usize> {
        match v {
            Some(n) if n > 0 => Ok(n),
            Some(_) => bail!("{name} must be >= 1"),
            None => bail!("{name} is required"),
        }
    }

    /// Fills dt, sample_every and the integrator for a horizon `span`.
    pub fn resolve_sim(&mut self, model: &QuantumModel, span: f64) {
        let dt = *self.dt.get_or_insert_with(|| fit_step(model.default_dt(), span));
        self.sample_every.get_or_insert_with(|| default_sample_every(span, dt));
        self.integrator.get_or_insert(Integrator::Exact);
    }

    pub fn sim_options(&self) -> Result<SimOptions> {
        let dt = self.positive("dt", self.dt)?;
        let sample_every = self.count("sample_every", self.sample_every)?;
        Ok(SimOptions { dt, sample_every, integrator: self.integrator.unwrap_or_default() })
    }

    /// fixed time without thresholds, one-sided with `upper`, two-sided with both.
    pub fn stopping_rule(&self, cap: f64) -> Result<StoppingRule> {
        let rule = match (self.upper, self.lower) {
            (None, None) => StoppingRule::fixed_time(cap),
            (Some(u), None) => StoppingRule::first_passage(u, cap),
            (Some(u), Some(l)) => StoppingRule::two_sided(u, l, cap),
            (None, Some(_)) => bail!("a lower threshold needs an upper one"),
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn xi(&self) -> Vec<f64> {
        self.xi_grid.clone().unwrap_or_else(default_xi_grid)
    }
}

pub fn fig2b_params() -> QubitParams {
    QubitParams { omega: 1.0, beta: 0.2, eta: 0.5, gamma_gap: 0.01 }
}

pub fn fig2c_params() -> QubitParams {
    QubitParams { omega: 1.0, beta: 0.04, eta: 0.04, gamma_gap: 0.01 }
}

pub fn qubit(p: QubitParams) -> Option<ModelSpec> {
    Some(ModelSpec::Preset(PresetSpec::Qubit(p)))
}

/// Evenly spaced ξ grid 0, step, …, ≤ max.
pub fn xi_grid(max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && max >= 0.0 && max.is_finite()) {
        bail!("xi grid needs step > 0 and max >= 0");
    }
    let n = (max / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * step).collect())
}
