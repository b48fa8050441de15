//! Conditional averages over continuations of a common history.
//!
//! Each parent trajectory is run to τ and continued `n_branches` times from
//! the unmeasured ψ(τ). For the martingale functional the branch mean of
//! e^{−ΔS_mar(t)} must equal e^{−ΔS_mar(τ)}. The same continuations also give
//! e^{−ΔS_tot(t)}, whose conditional mean is e^{−ΔS_tot(τ)+ΔS_unc(τ)} rather
//! than e^{−ΔS_tot(τ)}, and e^{−ΔS_unc(t)}, whose conditional mean is 1.

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_mean, Estimate, DEFAULT_RESAMPLES};
use super::{check_inputs, par_collect, track};
use crate::entropy::{EndpointEntropy, Tracker};
use crate::error::{Error, Result};
use crate::model::{QuantumModel, SteadyState};
use crate::rng::{Lane, StreamId};
use crate::trajectory::{born_outcome, evolve, prepare, step_count, Origin, SimOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchStat {
    pub estimate: Estimate,
    pub target: f64,
    pub z: f64,
}

impl BranchStat {
    fn new(estimate: Estimate, target: f64) -> Self {
        Self { z: estimate.z_score(target), estimate, target }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentReport {
    pub parent: usize,
    pub n0: usize,
    /// Born draw of n(τ) on the parent's virtual lane.
    pub n_tau: usize,
    pub s_mar_tau: f64,
    pub s_tot_tau: f64,
    pub s_unc_tau: f64,
    pub mar: BranchStat,
    /// Target e^{−ΔS_tot(τ)+ΔS_unc(τ)}.
    pub tot: BranchStat,
    /// Same estimate against e^{−ΔS_tot(τ)}.
    pub tot_naive: BranchStat,
    pub unc: BranchStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub tau: f64,
    pub t: f64,
    pub n_branches: usize,
    pub z_max: f64,
    pub fraction_within_mar: f64,
    pub fraction_within_tot: f64,
    pub fraction_within_tot_naive: f64,
    pub fraction_within_unc: f64,
    pub parents: Vec<ParentReport>,
}

impl BranchReport {
    pub const CSV_HEADER: [&'static str; 15] = [
        "parent", "n0", "n_tau", "s_mar_tau", "s_unc_tau", "mean_mar", "se_mar", "target_mar", "z_mar", "mean_tot",
        "se_tot", "target_tot", "z_tot", "z_tot_naive", "z_unc",
    ];

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        use crate::io::fmt_f64 as f;
        self.parents
            .iter()
            .map(|p| {
                vec![
                    p.parent.to_string(),
                    p.n0.to_string(),
                    p.n_tau.to_string(),
                    f(p.s_mar_tau),
                    f(p.s_unc_tau),
                    f(p.mar.estimate.mean),
                    f(p.mar.estimate.se),
                    f(p.mar.target),
                    f(p.mar.z),
                    f(p.tot.estimate.mean),
                    f(p.tot.estimate.se),
                    f(p.tot.target),
                    f(p.tot.z),
                    f(p.tot_naive.z),
                    f(p.unc.z),
                ]
            })
            .collect()
    }
}

/// Branch test with `n_parents` parents; parent `p` uses stream
/// `(seed, p, 0)` and its branch `b` uses `(seed, p, b + 1)`.
#[allow(clippy::too_many_arguments)]
pub fn martingale_branch_test(
    model: &QuantumModel,
    steady: &SteadyState,
    tau: f64,
    t: f64,
    opts: &SimOptions,
    n_parents: usize,
    n_branches: usize,
    z_max: f64,
    seed: u64,
) -> Result<BranchReport> {
    check_inputs(model, steady, n_parents)?;
    if !(tau >= 0.0 && tau < t) {
        return Err(Error::InvalidArgument(format!("need 0 <= tau < t, got tau = {tau}, t = {t}")));
    }
    if n_branches < 2 {
        return Err(Error::InvalidArgument("need at least two branches per parent".into()));
    }
    let spacing = opts.sample_spacing();
    let k = (tau / spacing).round();
    if (k * spacing - tau).abs() > 1e-9 * tau.max(1.0) {
        return Err(Error::InterpolationRefused { tau });
    }
    let n_cont = step_count(t - tau, opts.dt)?;
    let dynamics = prepare(model, opts);
    let parents = par_collect(n_parents, |p| {
        let id = StreamId::new(seed, p);
        let (n0, parent, _) = track(model, &dynamics, steady, tau, opts, id, false)?;
        let psi_tau = parent.last_state.clone();
        let env_tau = parent.last_env;
        let n_tau = born_outcome(steady, &psi_tau, &mut id.rng(Lane::Virtual));
        let at_tau = EndpointEntropy::new(n0, n_tau, &psi_tau, env_tau, steady);
        let mut e_mar = Vec::with_capacity(n_branches);
        let mut e_tot = Vec::with_capacity(n_branches);
        let mut e_unc = Vec::with_capacity(n_branches);
        for b in 0..n_branches as u64 {
            let bid = id.with_branch(b + 1);
            let mut end = Tracker::<crate::rng::StreamRng>::new(steady, n0, None);
            let (psi, env) = evolve(
                model,
                &dynamics,
                Origin { time: tau, state: &psi_tau, env_cum: env_tau },
                n_cont,
                opts,
                &mut bid.rng(Lane::Dynamics),
                &mut end,
            )?;
            let nt = born_outcome(steady, &psi, &mut bid.rng(Lane::Measurement));
            let e = EndpointEntropy::new(n0, nt, &psi, env, steady);
            e_mar.push((-e.mar).exp());
            e_tot.push((-e.tot).exp());
            e_unc.push((-e.unc).exp());
        }
        let mut boot = id.with_branch(0).rng(Lane::Bootstrap);
        let mar = bootstrap_mean(&e_mar, DEFAULT_RESAMPLES, &mut boot);
        let tot = bootstrap_mean(&e_tot, DEFAULT_RESAMPLES, &mut boot);
        let unc = bootstrap_mean(&e_unc, DEFAULT_RESAMPLES, &mut boot);
        Ok(ParentReport {
            parent: p as usize,
            n0,
            n_tau,
            s_mar_tau: at_tau.mar,
            s_tot_tau: at_tau.tot,
            s_unc_tau: at_tau.unc,
            mar: BranchStat::new(mar, (-at_tau.mar).exp()),
            tot: BranchStat::new(tot, (-at_tau.tot + at_tau.unc).exp()),
            tot_naive: BranchStat::new(tot, (-at_tau.tot).exp()),
            unc: BranchStat::new(unc, 1.0),
        })
    })?;
    let frac = |f: &dyn Fn(&ParentReport) -> f64| parents.iter().filter(|p| f(p) <= z_max).count() as f64 / parents.len() as f64;
    Ok(BranchReport {
        tau,
        t,
        n_branches,
        z_max,
        fraction_within_mar: frac(&|p| p.mar.z),
        fraction_within_tot: frac(&|p| p.tot.z),
        fraction_within_tot_naive: frac(&|p| p.tot_naive.z),
        fraction_within_unc: frac(&|p| p.unc.z),
        parents,
    })
}
