//! Monte Carlo estimators built on streamed trajectories.
//!
//! Trajectory `i` of a run with seed `s` always uses [`StreamId::new(s, i)`],
//! and per-trajectory results are collected in index order before any
//! reduction, so every estimate is independent of the thread count.

pub mod bootstrap;
pub mod branch;
pub mod ensemble;
pub mod infima;
pub mod stopping;

pub use bootstrap::{bootstrap_mean, Estimate, RunningRow, DEFAULT_RESAMPLES};
pub use branch::{martingale_branch_test, BranchReport, BranchStat, ParentReport};
pub use ensemble::{run_ensemble, EnsembleSummary};
pub use infima::{default_xi_grid, infima_stats, InfimaCdf, InfimaReport};
pub use stopping::{stopping_ft, stopping_times, StopOutcome, StoppedBy, StoppingKind, StoppingReport, StoppingRule};

use rayon::prelude::*;

use crate::entropy::Tracker;
use crate::error::{Error, Result};
use crate::model::{QuantumModel, SteadyState};
use crate::rng::{Lane, StreamId, StreamRng};
use crate::trajectory::{evolve, sample_initial, step_count, Dynamics, Observer, Origin, SimOptions};

pub(crate) fn check_inputs(model: &QuantumModel, steady: &SteadyState, n_traj: usize) -> Result<()> {
    if model.dim() != steady.dim() {
        return Err(Error::InvalidArgument("steady state and model dimensions differ".into()));
    }
    if n_traj == 0 {
        return Err(Error::InvalidArgument("need at least one trajectory".into()));
    }
    steady.require_full_rank()
}

/// Runs `f` for trajectory indices 0..n in parallel, results in index order.
pub(crate) fn par_collect<T: Send, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}

/// One trajectory from a steady-state draw on the measurement lane, streamed
/// through `observer`. Returns n(0) and the measurement rng positioned for
/// the final draw.
pub(crate) fn stream_trajectory<O: Observer + ?Sized>(
    model: &QuantumModel,
    dynamics: &Dynamics,
    steady: &SteadyState,
    n_steps: usize,
    opts: &SimOptions,
    id: StreamId,
    make_observer: impl FnOnce(usize) -> Box<O>,
) -> Result<(usize, Box<O>, StreamRng)> {
    let mut meas = id.rng(Lane::Measurement);
    let (n0, psi0) = sample_initial(steady, &mut meas);
    let mut obs = make_observer(n0);
    evolve(
        model,
        dynamics,
        Origin { time: 0.0, state: psi0.amplitudes(), env_cum: 0.0 },
        n_steps,
        opts,
        &mut id.rng(Lane::Dynamics),
        obs.as_mut(),
    )?;
    Ok((n0, obs, meas))
}

/// [`stream_trajectory`] through an entropy [`Tracker`].
pub(crate) fn track<'a>(
    model: &QuantumModel,
    dynamics: &Dynamics,
    steady: &'a SteadyState,
    t_final: f64,
    opts: &SimOptions,
    id: StreamId,
    virtual_trace: bool,
) -> Result<(usize, Box<Tracker<'a, StreamRng>>, StreamRng)> {
    let n_steps = step_count(t_final, opts.dt)?;
    stream_trajectory(model, dynamics, steady, n_steps, opts, id, |n0| {
        Box::new(Tracker::new(steady, n0, virtual_trace.then(|| id.rng(Lane::Virtual))))
    })
}
