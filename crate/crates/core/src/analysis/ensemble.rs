//! Fixed-time ensembles with the two-point measurement.

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_mean, running_means, running_rows, Estimate, RunningRow, DEFAULT_RESAMPLES};
use super::infima::{default_xi_grid, InfimaCdf};
use super::{check_inputs, par_collect, track};
use crate::entropy::EndpointEntropy;
use crate::error::Result;
use crate::model::{QuantumModel, SteadyState};
use crate::rng::{Lane, StreamId};
use crate::trajectory::{born_outcome, prepare, SimOptions};

/// Per-trajectory endpoint values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub n0: usize,
    pub n_final: usize,
    pub entropy: EndpointEntropy,
    pub inf_mar: f64,
    pub inf_tot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_traj: usize,
    pub t_final: f64,
    pub exp_neg_mar: Estimate,
    pub exp_neg_tot: Estimate,
    pub exp_neg_unc: Estimate,
    pub mean_tot: Estimate,
    pub mean_mar: Estimate,
    pub mean_unc: Estimate,
    /// max over trajectories of |ΔS_tot − ΔS_unc − ΔS_mar|
    pub max_decomposition_error: f64,
    /// endpoint ΔS_unc values outside [−ln(π_max/π_min), ln(π_max/π_min)]
    pub unc_bound_violations: usize,
    pub initial_counts: Vec<usize>,
    pub final_counts: Vec<usize>,
    pub infima: InfimaCdf,
    pub running_mean_rows: Vec<RunningRow>,
    /// ⟨e^{−ΔS_mar(t)}⟩ after each trajectory.
    #[serde(skip)]
    pub running_mean_exp_neg_mar: Vec<f64>,
    #[serde(skip)]
    pub outcomes: Vec<Outcome>,
}

/// Slack on the ΔS_unc bound for rounding in the logarithms.
pub const UNC_BOUND_SLACK: f64 = 1e-12;

pub fn run_ensemble(
    model: &QuantumModel,
    steady: &SteadyState,
    t_final: f64,
    opts: &SimOptions,
    n_traj: usize,
    seed: u64,
) -> Result<EnsembleSummary> {
    check_inputs(model, steady, n_traj)?;
    let dynamics = prepare(model, opts);
    let outcomes = par_collect(n_traj, |i| {
        let (n0, tr, mut meas) = track(model, &dynamics, steady, t_final, opts, StreamId::new(seed, i), true)?;
        let n_final = born_outcome(steady, &tr.last_state, &mut meas);
        Ok(Outcome {
            n0,
            n_final,
            entropy: EndpointEntropy::new(n0, n_final, &tr.last_state, tr.last_env, steady),
            inf_mar: tr.inf_mar,
            inf_tot: tr.inf_tot,
        })
    })?;
    summarize(outcomes, t_final, steady, seed)
}

fn summarize(outcomes: Vec<Outcome>, t_final: f64, steady: &SteadyState, seed: u64) -> Result<EnsembleSummary> {
    let col = |f: &dyn Fn(&Outcome) -> f64| outcomes.iter().map(f).collect::<Vec<f64>>();
    let e_mar = col(&|o| (-o.entropy.mar).exp());
    let e_tot = col(&|o| (-o.entropy.tot).exp());
    let e_unc = col(&|o| (-o.entropy.unc).exp());
    let mut boot = StreamId::new(seed, u64::MAX).rng(Lane::Bootstrap);
    let mut est = |v: &[f64]| bootstrap_mean(v, DEFAULT_RESAMPLES, &mut boot);
    let exp_neg_mar = est(&e_mar);
    let exp_neg_tot = est(&e_tot);
    let exp_neg_unc = est(&e_unc);
    let mean_tot = est(&col(&|o| o.entropy.tot));
    let mean_mar = est(&col(&|o| o.entropy.mar));
    let mean_unc = est(&col(&|o| o.entropy.unc));
    let bound = steady.log_condition() + UNC_BOUND_SLACK;
    let d = steady.dim();
    let mut initial_counts = vec![0; d];
    let mut final_counts = vec![0; d];
    for o in &outcomes {
        initial_counts[o.n0] += 1;
        final_counts[o.n_final] += 1;
    }
    let running_mean_rows = running_rows(&e_mar, DEFAULT_RESAMPLES, &mut StreamId::new(seed, u64::MAX - 1).rng(Lane::Bootstrap));
    Ok(EnsembleSummary {
        n_traj: outcomes.len(),
        t_final,
        exp_neg_mar,
        exp_neg_tot,
        exp_neg_unc,
        mean_tot,
        mean_mar,
        mean_unc,
        max_decomposition_error: outcomes.iter().map(|o| o.entropy.decomposition_error()).fold(0.0, f64::max),
        unc_bound_violations: outcomes.iter().filter(|o| o.entropy.unc.abs() > bound).count(),
        initial_counts,
        final_counts,
        infima: InfimaCdf::from_samples(&col(&|o| o.inf_mar), &col(&|o| o.inf_tot), &default_xi_grid())?,
        running_mean_rows,
        running_mean_exp_neg_mar: running_means(&e_mar),
        outcomes,
    })
}
