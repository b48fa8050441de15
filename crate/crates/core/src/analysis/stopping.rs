//! Stopping times of ΔS_mar and the stopping-time fluctuation theorem.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_mean, running_rows, Estimate, RunningRow, DEFAULT_RESAMPLES};
use super::{check_inputs, par_collect, stream_trajectory};
use crate::entropy::{fidelity_weight, EndpointEntropy, EntropySeries};
use crate::error::{Error, Result};
use crate::model::{QuantumModel, SteadyState};
use crate::rng::{Lane, StreamId};
use crate::trajectory::{born_outcome, prepare, step_count, Observer, SimOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingKind {
    FixedTime,
    FirstPassageUpper,
    FirstPassageTwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingRule {
    pub kind: StoppingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    pub cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoppedBy {
    Upper,
    Lower,
    Cap,
}

impl StoppingRule {
    pub fn fixed_time(cap: f64) -> Self {
        Self { kind: StoppingKind::FixedTime, upper: None, lower: None, cap }
    }

    pub fn first_passage(upper: f64, cap: f64) -> Self {
        Self { kind: StoppingKind::FirstPassageUpper, upper: Some(upper), lower: None, cap }
    }

    pub fn two_sided(upper: f64, lower: f64, cap: f64) -> Self {
        Self { kind: StoppingKind::FirstPassageTwoSided, upper: Some(upper), lower: Some(lower), cap }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("stopping rule: {m}")));
        if !(self.cap > 0.0 && self.cap.is_finite()) {
            return bad("cap must be > 0");
        }
        match self.kind {
            StoppingKind::FixedTime => Ok(()),
            StoppingKind::FirstPassageUpper => match self.upper {
                Some(u) if u > 0.0 && u.is_finite() => Ok(()),
                _ => bad("upper threshold must be > 0"),
            },
            StoppingKind::FirstPassageTwoSided => match (self.upper, self.lower) {
                (Some(u), Some(l)) if u > 0.0 && l < 0.0 && u.is_finite() && l.is_finite() => Ok(()),
                _ => bad("two-sided rule needs lower < 0 < upper"),
            },
        }
    }

    /// Whether the value `s` of ΔS_mar triggers a threshold.
    pub fn crossing(&self, s: f64) -> Option<StoppedBy> {
        match self.kind {
            StoppingKind::FixedTime => None,
            StoppingKind::FirstPassageUpper => (s >= self.upper.unwrap_or(f64::INFINITY)).then_some(StoppedBy::Upper),
            StoppingKind::FirstPassageTwoSided => {
                if s >= self.upper.unwrap_or(f64::INFINITY) {
                    Some(StoppedBy::Upper)
                } else if s <= self.lower.unwrap_or(f64::NEG_INFINITY) {
                    Some(StoppedBy::Lower)
                } else {
                    None
                }
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            StoppingKind::FixedTime => "fixed_time",
            StoppingKind::FirstPassageUpper => "first_passage_upper",
            StoppingKind::FirstPassageTwoSided => "first_passage_two_sided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopOutcome {
    pub time: f64,
    pub s_mar: f64,
    pub stopped_by: StoppedBy,
}

fn cap_tol(cap: f64) -> f64 {
    1e-9 * cap.max(1.0)
}

/// First grid time at which ΔS_mar meets a threshold, else the cap.
pub fn stopping_times(series: &EntropySeries, rule: &StoppingRule) -> Result<StopOutcome> {
    rule.validate()?;
    let tol = cap_tol(rule.cap);
    let available = series.grid.last().copied().unwrap_or(f64::NEG_INFINITY);
    if available < rule.cap - tol {
        return Err(Error::InsufficientHorizon { needed: rule.cap, available });
    }
    for (i, &t) in series.grid.iter().enumerate() {
        let s = series.s_mar[i];
        if t >= rule.cap - tol {
            return Ok(StopOutcome {
                time: t,
                s_mar: s,
                stopped_by: rule.crossing(s).unwrap_or(StoppedBy::Cap),
            });
        }
        if let Some(by) = rule.crossing(s) {
            return Ok(StopOutcome { time: t, s_mar: s, stopped_by: by });
        }
    }
    unreachable!("grid reaches the cap")
}

/// Observer that halts the evolution at the stopping time.
struct Stopper<'a> {
    steady: &'a SteadyState,
    rule: StoppingRule,
    ln_pi0: f64,
    stop: Option<StopOutcome>,
    state: Vec<Complex64>,
    env: f64,
}

impl Observer for Stopper<'_> {
    fn sample(&mut self, time: f64, state: &[Complex64], env_cum: f64) {
        let s = self.ln_pi0 - fidelity_weight(state, self.steady).ln() + env_cum;
        let by = if time >= self.rule.cap - cap_tol(self.rule.cap) {
            Some(self.rule.crossing(s).unwrap_or(StoppedBy::Cap))
        } else {
            self.rule.crossing(s)
        };
        if let Some(stopped_by) = by {
            self.stop = Some(StopOutcome { time, s_mar: s, stopped_by });
            self.state = state.to_vec();
            self.env = env_cum;
        }
    }

    fn done(&self) -> bool {
        self.stop.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingReport {
    pub rule: StoppingRule,
    pub n_traj: usize,
    pub exp_neg_mar: Estimate,
    pub exp_neg_tot: Estimate,
    pub mean_mar: Estimate,
    pub mean_tot: Estimate,
    pub mean_unc: Estimate,
    pub mean_stopping_time: f64,
    pub stopped_upper: usize,
    pub stopped_lower: usize,
    pub stopped_cap: usize,
    pub running: Vec<RunningRow>,
    #[serde(skip)]
    pub stops: Vec<(StopOutcome, EndpointEntropy)>,
}

impl StoppingReport {
    /// Running-mean row at exactly `n` trajectories, if tabulated.
    pub fn row_at(&self, n: usize) -> Option<&RunningRow> {
        self.running.iter().find(|r| r.n == n)
    }
}

/// ⟨e^{−ΔS_mar(T)}⟩ over `n_traj` trajectories, with ΔS_tot(T) and ΔS_unc(T)
/// from a Born draw of n(T) at the stopping time.
pub fn stopping_ft(
    model: &QuantumModel,
    steady: &SteadyState,
    rule: &StoppingRule,
    opts: &SimOptions,
    n_traj: usize,
    seed: u64,
) -> Result<StoppingReport> {
    rule.validate()?;
    check_inputs(model, steady, n_traj)?;
    let n_steps = step_count(rule.cap, opts.dt)?;
    let dynamics = prepare(model, opts);
    let stops = par_collect(n_traj, |i| {
        let (n0, stopper, mut meas) = stream_trajectory(model, &dynamics, steady, n_steps, opts, StreamId::new(seed, i), |n0| {
            Box::new(Stopper {
                steady,
                rule: *rule,
                ln_pi0: steady.eigenvalues()[n0].ln(),
                stop: None,
                state: Vec::new(),
                env: 0.0,
            })
        })?;
        let stop = stopper
            .stop
            .ok_or_else(|| Error::InsufficientHorizon { needed: rule.cap, available: n_steps as f64 * opts.dt })?;
        let nt = born_outcome(steady, &stopper.state, &mut meas);
        Ok((stop, EndpointEntropy::new(n0, nt, &stopper.state, stopper.env, steady)))
    })?;
    let e_mar: Vec<f64> = stops.iter().map(|(s, _)| (-s.s_mar).exp()).collect();
    let mut boot = StreamId::new(seed, u64::MAX).rng(Lane::Bootstrap);
    let mut est = |v: Vec<f64>| bootstrap_mean(&v, DEFAULT_RESAMPLES, &mut boot);
    let exp_neg_mar = est(e_mar.clone());
    let exp_neg_tot = est(stops.iter().map(|(_, e)| (-e.tot).exp()).collect());
    let mean_mar = est(stops.iter().map(|(s, _)| s.s_mar).collect());
    let mean_tot = est(stops.iter().map(|(_, e)| e.tot).collect());
    let mean_unc = est(stops.iter().map(|(_, e)| e.unc).collect());
    let count = |by| stops.iter().filter(|(s, _)| s.stopped_by == by).count();
    Ok(StoppingReport {
        rule: *rule,
        n_traj,
        exp_neg_mar,
        exp_neg_tot,
        mean_mar,
        mean_tot,
        mean_unc,
        mean_stopping_time: crate::linalg::compensated_sum(stops.iter().map(|(s, _)| s.time)) / n_traj as f64,
        stopped_upper: count(StoppedBy::Upper),
        stopped_lower: count(StoppedBy::Lower),
        stopped_cap: count(StoppedBy::Cap),
        running: running_rows(&e_mar, DEFAULT_RESAMPLES, &mut StreamId::new(seed, u64::MAX - 1).rng(Lane::Bootstrap)),
        stops,
    })
}
