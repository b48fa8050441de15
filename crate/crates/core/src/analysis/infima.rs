//! Finite-time infima of ΔS_mar and of the virtual ΔS_tot trace.

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_mean, Estimate, DEFAULT_RESAMPLES};
use super::{check_inputs, par_collect, track};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::model::{QuantumModel, SteadyState};
use crate::rng::{Lane, StreamId};
use crate::trajectory::{prepare, SimOptions};

/// 0, 0.2, …, 3.
pub fn default_xi_grid() -> Vec<f64> {
    (0..=15).map(|i| i as f64 * 0.2).collect()
}

/// Empirical P(inf ≤ −ξ) with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfimaCdf {
    pub xi_grid: Vec<f64>,
    pub cdf_mar: Vec<f64>,
    pub cdf_tot: Vec<f64>,
    pub se_mar: Vec<f64>,
    pub se_tot: Vec<f64>,
}

fn tail(samples: &[f64], xi_grid: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    xi_grid
        .iter()
        .map(|&xi| {
            let p = samples.iter().filter(|&&s| s <= -xi).count() as f64 / n;
            (p, (p * (1.0 - p) / n).sqrt())
        })
        .unzip()
}

impl InfimaCdf {
    pub fn from_samples(inf_mar: &[f64], inf_tot: &[f64], xi_grid: &[f64]) -> Result<Self> {
        if xi_grid.windows(2).any(|w| w[0] >= w[1]) || xi_grid.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidArgument("xi grid must be ascending and nonnegative".into()));
        }
        if inf_mar.is_empty() || inf_tot.is_empty() {
            return Err(Error::InvalidArgument("no infimum samples".into()));
        }
        let (cdf_mar, se_mar) = tail(inf_mar, xi_grid);
        let (cdf_tot, se_tot) = tail(inf_tot, xi_grid);
        Ok(Self {
            xi_grid: xi_grid.to_vec(),
            cdf_mar,
            cdf_tot,
            se_mar,
            se_tot,
        })
    }

    /// cdf_mar(ξ) ≤ e^{−ξ} + k·SE per grid point.
    pub fn bound_flags(&self, k: f64) -> Vec<bool> {
        self.xi_grid
            .iter()
            .zip(self.cdf_mar.iter().zip(&self.se_mar))
            .map(|(&xi, (&p, &se))| p <= (-xi).exp() + k * se)
            .collect()
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        (0..self.xi_grid.len())
            .map(|i| {
                vec![
                    fmt_f64(self.xi_grid[i]),
                    fmt_f64(self.cdf_mar[i]),
                    fmt_f64(self.cdf_tot[i]),
                    fmt_f64(self.se_mar[i]),
                    fmt_f64(self.se_tot[i]),
                    fmt_f64((-self.xi_grid[i]).exp()),
                ]
            })
            .collect()
    }

    pub const CSV_HEADER: [&'static str; 6] = ["xi", "cdf_mar", "cdf_tot", "se_mar", "se_tot", "bound"];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfimaReport {
    pub t: f64,
    pub n_traj: usize,
    pub cdf: InfimaCdf,
    pub cdf_within_bound: Vec<bool>,
    pub mean_inf_mar: Estimate,
    pub mean_inf_tot: Estimate,
    /// −1 − ln(π_max/π_min)
    pub tot_bound: f64,
    pub mar_bound_ok: bool,
    pub tot_bound_ok: bool,
}

impl InfimaReport {
    pub fn all_ok(&self) -> bool {
        self.mar_bound_ok && self.tot_bound_ok && self.cdf_within_bound.iter().all(|&b| b)
    }
}

/// Tolerance, in standard errors, of every bound check in the report.
pub const BOUND_SE: f64 = 3.0;

/// Infima over the sampled grid of [0, t] for `n_traj` steady-state
/// trajectories.
pub fn infima_stats(
    model: &QuantumModel,
    steady: &SteadyState,
    t: f64,
    opts: &SimOptions,
    n_traj: usize,
    xi_grid: &[f64],
    seed: u64,
) -> Result<InfimaReport> {
    check_inputs(model, steady, n_traj)?;
    let dynamics = prepare(model, opts);
    let infs = par_collect(n_traj, |i| {
        let (_, tr, _) = track(model, &dynamics, steady, t, opts, StreamId::new(seed, i), true)?;
        Ok((tr.inf_mar, tr.inf_tot))
    })?;
    let (inf_mar, inf_tot): (Vec<f64>, Vec<f64>) = infs.into_iter().unzip();
    let cdf = InfimaCdf::from_samples(&inf_mar, &inf_tot, xi_grid)?;
    let mut boot = StreamId::new(seed, u64::MAX).rng(Lane::Bootstrap);
    let mean_inf_mar = bootstrap_mean(&inf_mar, DEFAULT_RESAMPLES, &mut boot);
    let mean_inf_tot = bootstrap_mean(&inf_tot, DEFAULT_RESAMPLES, &mut boot);
    let tot_bound = -1.0 - steady.log_condition();
    Ok(InfimaReport {
        t,
        n_traj,
        cdf_within_bound: cdf.bound_flags(BOUND_SE),
        cdf,
        mar_bound_ok: mean_inf_mar.at_least(-1.0, BOUND_SE),
        tot_bound_ok: mean_inf_tot.at_least(tot_bound, BOUND_SE),
        mean_inf_mar,
        mean_inf_tot,
        tot_bound,
    })
}
