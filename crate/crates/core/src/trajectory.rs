//! Quantum-jump unraveling of the master equation with a two-point
//! measurement in the steady-state eigenbasis.
//!
//! Two integrators are available. [`Integrator::Euler`] is the first-order
//! scheme: each step jumps with probability `dt·⟨L_k†L_k⟩` or applies the
//! normalized non-Hermitian drift. [`Integrator::Exact`] propagates the
//! no-jump evolution with exact `exp(−i H_eff Δ)` factors and samples waiting
//! times by norm decay, resolving the jump instant to the fine step `dt`.
//! Both emit the same grid of samples, so the two are interchangeable for
//! every downstream functional.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, inner, norm_sqr, real, scale, CMatrix, DenseOp};
use crate::model::{QuantumModel, SteadyState};
use crate::rng::{Lane, StreamId};

/// Normalized state vector |ψ⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Normalizes the given amplitudes.
    pub fn new(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = norm_sqr(&amplitudes).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidArgument("state vector has zero or non-finite norm".into()));
        }
        scale(&mut amplitudes, 1.0 / n);
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amplitudes).sqrt()
    }

    /// |ψ⟩⟨ψ|.
    pub fn projector(&self) -> CMatrix {
        let v = nalgebra::DVector::from_column_slice(&self.amplitudes);
        &v * v.adjoint()
    }

    fn from_normalized(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub channel: usize,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub dt: f64,
    pub sample_every: usize,
    pub integrator: Integrator,
}

impl SimOptions {
    /// Default step from the model scales, shortened so it divides
    /// `t_final`; every step is stored up to 10³ steps, every tenth beyond.
    pub fn for_model(model: &QuantumModel, t_final: f64) -> Self {
        let dt = fit_step(model.default_dt(), t_final);
        Self {
            dt,
            sample_every: default_sample_every(t_final, dt),
            integrator: Integrator::Euler,
        }
    }

    pub fn with_integrator(self, integrator: Integrator) -> Self {
        Self { integrator, ..self }
    }

    pub fn sample_spacing(&self) -> f64 {
        self.dt * self.sample_every as f64
    }
}

/// Largest step ≤ `dt` that divides `span` into whole steps.
pub fn fit_step(dt: f64, span: f64) -> f64 {
    if !(span > 0.0 && span.is_finite() && dt > 0.0) {
        return dt;
    }
    let n = (span / dt * (1.0 - 1e-12)).ceil().max(1.0);
    if (n * dt - span).abs() <= 1e-9 * span.max(1.0) {
        dt
    } else {
        span / n
    }
}

pub fn default_sample_every(t_final: f64, dt: f64) -> usize {
    if (t_final / dt).round() <= 1000.0 {
        1
    } else {
        10
    }
}

/// Number of fine steps covering `span`, refusing spans that are not a
/// multiple of `dt`.
pub fn step_count(span: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if !(span >= 0.0 && span.is_finite()) {
        return Err(Error::InvalidArgument(format!("time span must be >= 0, got {span}")));
    }
    let n = (span / dt).round();
    if (n * dt - span).abs() > 1e-9 * span.max(1.0) {
        return Err(Error::InvalidArgument(format!("dt = {dt} does not divide the time span {span}")));
    }
    Ok(n as usize)
}

/// Precompiled operators for the per-step kernels.
#[derive(Debug, Clone)]
pub struct Dynamics {
    dim: usize,
    jumps: Vec<DenseOp>,
    decays: Vec<DenseOp>,
    /// −iH − ½ Σ_k L_k†L_k
    drift: DenseOp,
    /// exp(−i H_eff dt·2^j), j = 0..levels
    ladder: Vec<DenseOp>,
    ladder_dt: f64,
}

impl Dynamics {
    pub fn new(model: &QuantumModel) -> Self {
        let jumps = model.channels().iter().map(|ch| DenseOp::from_matrix(&ch.operator)).collect();
        let decays = model
            .channels()
            .iter()
            .map(|ch| DenseOp::from_matrix(&(ch.operator.adjoint() * &ch.operator)))
            .collect();
        let drift = DenseOp::from_matrix(&(model.effective_hamiltonian() * Complex64::new(0.0, -1.0)));
        Self {
            dim: model.dim(),
            jumps,
            decays,
            drift,
            ladder: Vec::new(),
            ladder_dt: 0.0,
        }
    }

    /// Dyadic no-jump propagators for the exact integrator, covering blocks of
    /// up to `max_block` fine steps.
    pub fn prepare_exact(&mut self, model: &QuantumModel, dt: f64, max_block: usize) {
        if self.ladder_dt == dt && (1usize << self.ladder.len()) > max_block {
            return;
        }
        let heff = model.effective_hamiltonian() * Complex64::new(0.0, -1.0);
        let mut levels = 1;
        while (1usize << levels) <= max_block {
            levels += 1;
        }
        self.ladder = (0..levels)
            .map(|j| DenseOp::from_matrix(&expm(&(&heff * real(dt * (1u64 << j) as f64)))))
            .collect();
        self.ladder_dt = dt;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn jump_weights(&self, psi: &[Complex64], weights: &mut Vec<f64>) -> f64 {
        weights.clear();
        let mut total = 0.0;
        for op in &self.decays {
            let w = op.expectation(psi).max(0.0);
            weights.push(w);
            total += w;
        }
        total
    }

    fn apply_jump(&self, k: usize, psi: &mut [Complex64], scratch: &mut [Complex64]) -> Result<()> {
        self.jumps[k].apply_into(psi, scratch);
        let n = norm_sqr(scratch).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Numerical(format!("jump {k} annihilated the state")));
        }
        for (p, s) in psi.iter_mut().zip(scratch.iter()) {
            *p = s / n;
        }
        Ok(())
    }

    /// One Euler step in place. Returns the channel that fired, if any.
    pub fn euler_step<R: Rng + ?Sized>(
        &self,
        psi: &mut [Complex64],
        dt: f64,
        rng: &mut R,
        scratch: &mut Scratch,
    ) -> Result<Option<usize>> {
        let total = self.jump_weights(psi, &mut scratch.weights) * dt;
        if total > 0.5 {
            return Err(Error::StepSize { probability: total });
        }
        let u: f64 = rng.random();
        if u < total {
            let k = pick(&scratch.weights, u / dt);
            self.apply_jump(k, psi, &mut scratch.buf)?;
            return Ok(Some(k));
        }
        let mean_decay = total / dt;
        self.drift.apply_into(psi, &mut scratch.buf);
        for (p, d) in psi.iter_mut().zip(scratch.buf.iter()) {
            *p += (d + *p * (0.5 * mean_decay)) * dt;
        }
        let n = norm_sqr(psi).sqrt();
        scale(psi, 1.0 / n);
        Ok(None)
    }
}

/// Index `k` with `Σ_{j<k} w_j ≤ target < Σ_{j≤k} w_j`.
fn pick(weights: &[f64], target: f64) -> usize {
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return k;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct Scratch {
    buf: Vec<Complex64>,
    cand: Vec<Complex64>,
    weights: Vec<f64>,
}

impl Scratch {
    pub fn new(dim: usize) -> Self {
        Self {
            buf: vec![Complex64::default(); dim],
            cand: vec![Complex64::default(); dim],
            weights: Vec::new(),
        }
    }
}

/// Receives the sampled grid and jump events as a trajectory is generated.
pub trait Observer {
    fn sample(&mut self, time: f64, state: &[Complex64], env_cum: f64);

    fn jump(&mut self, _event: &JumpEvent, _env_cum: f64) {}

    /// Checked after every sample; `true` ends the evolution early.
    fn done(&self) -> bool {
        false
    }
}

/// Where an evolution starts.
#[derive(Debug, Clone, Copy)]
pub struct Origin<'a> {
    pub time: f64,
    pub state: &'a [Complex64],
    pub env_cum: f64,
}

/// Runs `n_steps` fine steps from `origin`, sampling every `sample_every`
/// steps (and at the end). Returns the last state and cumulative ΔS_env,
/// which precede `n_steps` if the observer stopped the run.
pub fn evolve<R: Rng + ?Sized, O: Observer + ?Sized>(
    model: &QuantumModel,
    dynamics: &Dynamics,
    origin: Origin<'_>,
    n_steps: usize,
    opts: &SimOptions,
    rng: &mut R,
    observer: &mut O,
) -> Result<(Vec<Complex64>, f64)> {
    if opts.sample_every == 0 {
        return Err(Error::InvalidArgument("sample_every must be >= 1".into()));
    }
    if origin.state.len() != dynamics.dim() {
        return Err(Error::InvalidArgument("state dimension does not match the model".into()));
    }
    let dt = opts.dt;
    let mut psi = origin.state.to_vec();
    let mut env = origin.env_cum;
    let mut scratch = Scratch::new(dynamics.dim());
    observer.sample(origin.time, &psi, env);
    let mut done = 0usize;
    while done < n_steps && !observer.done() {
        let block = opts.sample_every.min(n_steps - done);
        match opts.integrator {
            Integrator::Euler => {
                for s in 0..block {
                    if let Some(k) = dynamics.euler_step(&mut psi, dt, rng, &mut scratch)? {
                        env += model.channels()[k].env_entropy;
                        let ev = JumpEvent {
                            channel: k,
                            time: origin.time + (done + s + 1) as f64 * dt,
                        };
                        observer.jump(&ev, env);
                    }
                }
            }
            Integrator::Exact => {
                if dynamics.ladder.is_empty() || dynamics.ladder_dt != dt || (1usize << (dynamics.ladder.len() - 1)) * 2 <= block {
                    return Err(Error::InvalidArgument(
                        "exact integrator used without matching prepare_exact".into(),
                    ));
                }
                exact_block(model, dynamics, &mut psi, &mut env, origin.time, done, block, dt, rng, &mut scratch, observer)?;
            }
        }
        done += block;
        observer.sample(origin.time + done as f64 * dt, &psi, env);
    }
    Ok((psi, env))
}

/// Advances `block` fine steps with the exact no-jump propagator. A fresh
/// survival threshold is drawn at the start of the block and after every jump;
/// by the Markov property of the conditioned state this is equivalent to a
/// single waiting-time draw per inter-jump interval.
#[allow(clippy::too_many_arguments)]
fn exact_block<R: Rng + ?Sized, O: Observer + ?Sized>(
    model: &QuantumModel,
    dynamics: &Dynamics,
    psi: &mut [Complex64],
    env: &mut f64,
    t0: f64,
    offset: usize,
    block: usize,
    dt: f64,
    rng: &mut R,
    scratch: &mut Scratch,
    observer: &mut O,
) -> Result<()> {
    let top = dynamics.ladder.len() - 1;
    let mut threshold: f64 = rng.random();
    let mut remaining = block;
    let mut idx = offset;
    let mut limit = top;
    while remaining > 0 {
        let fit = usize::BITS as usize - 1 - remaining.leading_zeros() as usize;
        let j = limit.min(fit);
        dynamics.ladder[j].apply_into(psi, &mut scratch.cand);
        if norm_sqr(&scratch.cand) >= threshold {
            psi.copy_from_slice(&scratch.cand);
            remaining -= 1 << j;
            idx += 1 << j;
            if limit < top {
                limit = j.saturating_sub(1);
            }
        } else if j == 0 {
            psi.copy_from_slice(&scratch.cand);
            remaining -= 1;
            idx += 1;
            let total = dynamics.jump_weights(psi, &mut scratch.weights);
            let u: f64 = rng.random();
            let k = pick(&scratch.weights, u * total);
            dynamics.apply_jump(k, psi, &mut scratch.buf)?;
            *env += model.channels()[k].env_entropy;
            observer.jump(
                &JumpEvent {
                    channel: k,
                    time: t0 + idx as f64 * dt,
                },
                *env,
            );
            threshold = rng.random();
            limit = top;
        } else {
            limit = j - 1;
        }
    }
    let n = norm_sqr(psi).sqrt();
    scale(psi, 1.0 / n);
    Ok(())
}

/// Draws n with probability π_n and returns (n, |π_n⟩).
pub fn sample_initial<R: Rng + ?Sized>(steady: &SteadyState, rng: &mut R) -> (usize, PureState) {
    let u: f64 = rng.random();
    let n = pick(steady.eigenvalues(), u * steady.eigenvalues().iter().sum::<f64>());
    (n, PureState::from_normalized(steady.eigenvector(n).to_vec()))
}

/// Born-rule outcome of a projective measurement in the π eigenbasis.
pub fn born_outcome<R: Rng + ?Sized>(steady: &SteadyState, state: &[Complex64], rng: &mut R) -> usize {
    let mut probs = [0.0f64; crate::model::MAX_DENSE_DIM];
    let d = steady.dim();
    let mut total = 0.0;
    for (n, p) in probs.iter_mut().enumerate().take(d) {
        *p = inner(steady.eigenvector(n), state).norm_sqr();
        total += *p;
    }
    let u: f64 = rng.random();
    pick(&probs[..d], u * total)
}

/// Single Euler step of the stochastic Schrödinger equation from time `t`.
pub fn step<R: Rng + ?Sized>(
    model: &QuantumModel,
    state: &PureState,
    t: f64,
    dt: f64,
    rng: &mut R,
) -> Result<(PureState, Option<JumpEvent>)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be > 0".into()));
    }
    let dynamics = Dynamics::new(model);
    let mut psi = state.amplitudes.clone();
    let mut scratch = Scratch::new(model.dim());
    let fired = dynamics.euler_step(&mut psi, dt, rng, &mut scratch)?;
    Ok((
        PureState::from_normalized(psi),
        fired.map(|channel| JumpEvent { channel, time: t + dt }),
    ))
}

/// One simulated trajectory with its two-point measurement outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub n0: usize,
    pub events: Vec<JumpEvent>,
    pub grid: Vec<f64>,
    pub states: Vec<PureState>,
    pub env_entropy_cum: Vec<f64>,
    pub n_final: Option<usize>,
    /// ψ(t) before the final projection replaced it.
    pub premeasurement_final: Option<PureState>,
    pub rng_stream_id: u64,
    pub dt: f64,
    pub sample_every: usize,
}

impl TrajectoryRecord {
    pub fn t_final(&self) -> f64 {
        *self.grid.last().expect("record has at least one sample")
    }

    pub fn final_state(&self) -> &PureState {
        self.states.last().expect("record has at least one sample")
    }

    /// Final ψ(t) whether or not the final measurement has been applied.
    pub fn unmeasured_final_state(&self) -> &PureState {
        self.premeasurement_final.as_ref().unwrap_or_else(|| self.final_state())
    }

    pub fn total_env_entropy(&self) -> f64 {
        *self.env_entropy_cum.last().expect("record has at least one sample")
    }

    /// N_k(t) per channel.
    pub fn jump_counts(&self, n_channels: usize) -> Vec<usize> {
        let mut counts = vec![0; n_channels];
        for ev in &self.events {
            counts[ev.channel] += 1;
        }
        counts
    }

    /// JSONL line `{n0, events:[[k,t],...], grid_dt, states?, env_cum, n_final}`.
    pub fn to_json(&self, include_states: bool) -> serde_json::Value {
        let events: Vec<(usize, f64)> = self.events.iter().map(|e| (e.channel, e.time)).collect();
        let mut v = serde_json::json!({
            "n0": self.n0,
            "events": events,
            "grid_dt": self.dt * self.sample_every as f64,
            "env_cum": self.env_entropy_cum,
            "n_final": self.n_final,
        });
        if include_states {
            let states: Vec<Vec<[f64; 2]>> = self
                .states
                .iter()
                .map(|s| s.amplitudes().iter().map(|z| [z.re, z.im]).collect())
                .collect();
            v["states"] = serde_json::json!(states);
        }
        v
    }
}

/// Writes one JSON object per record per line.
pub fn write_jsonl<W: std::io::Write>(out: &mut W, records: &[TrajectoryRecord], include_states: bool) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, &r.to_json(include_states))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

struct Recorder<'a> {
    rec: &'a mut TrajectoryRecord,
}

impl Observer for Recorder<'_> {
    fn sample(&mut self, time: f64, state: &[Complex64], env_cum: f64) {
        self.rec.grid.push(time);
        self.rec.states.push(PureState::from_normalized(state.to_vec()));
        self.rec.env_entropy_cum.push(env_cum);
    }

    fn jump(&mut self, event: &JumpEvent, _env_cum: f64) {
        self.rec.events.push(*event);
    }
}

fn check_dims(model: &QuantumModel, steady: &SteadyState) -> Result<()> {
    if model.dim() != steady.dim() {
        return Err(Error::InvalidArgument("steady state and model dimensions differ".into()));
    }
    Ok(())
}

/// Prepares dynamics (including exact propagators when requested).
pub fn prepare(model: &QuantumModel, opts: &SimOptions) -> Dynamics {
    let mut dynamics = Dynamics::new(model);
    if opts.integrator == Integrator::Exact {
        dynamics.prepare_exact(model, opts.dt, opts.sample_every);
    }
    dynamics
}

/// Full record over [0, t_final] without the final measurement; the same rng
/// drives the initial draw and the jumps.
pub fn simulate<R: Rng + ?Sized>(
    model: &QuantumModel,
    steady: &SteadyState,
    t_final: f64,
    opts: &SimOptions,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    check_dims(model, steady)?;
    if !(t_final > 0.0) {
        return Err(Error::InvalidArgument("t_final must be > 0".into()));
    }
    let n_steps = step_count(t_final, opts.dt)?;
    let (n0, psi0) = sample_initial(steady, rng);
    let dynamics = prepare(model, opts);
    run_record(model, &dynamics, n0, psi0.amplitudes(), 0.0, 0.0, n_steps, opts, rng, 0)
}

/// [`simulate`] with the initial draw on the measurement lane and jumps on
/// the dynamics lane of `stream`.
pub fn simulate_stream(
    model: &QuantumModel,
    steady: &SteadyState,
    t_final: f64,
    opts: &SimOptions,
    stream: StreamId,
) -> Result<TrajectoryRecord> {
    check_dims(model, steady)?;
    if !(t_final > 0.0) {
        return Err(Error::InvalidArgument("t_final must be > 0".into()));
    }
    let n_steps = step_count(t_final, opts.dt)?;
    let (n0, psi0) = sample_initial(steady, &mut stream.rng(Lane::Measurement));
    let dynamics = prepare(model, opts);
    run_record(
        model,
        &dynamics,
        n0,
        psi0.amplitudes(),
        0.0,
        0.0,
        n_steps,
        opts,
        &mut stream.rng(Lane::Dynamics),
        stream.tag(),
    )
}

#[allow(clippy::too_many_arguments)]
fn run_record<R: Rng + ?Sized>(
    model: &QuantumModel,
    dynamics: &Dynamics,
    n0: usize,
    psi0: &[Complex64],
    t0: f64,
    env0: f64,
    n_steps: usize,
    opts: &SimOptions,
    rng: &mut R,
    tag: u64,
) -> Result<TrajectoryRecord> {
    let mut rec = TrajectoryRecord {
        n0,
        events: Vec::new(),
        grid: Vec::new(),
        states: Vec::new(),
        env_entropy_cum: Vec::new(),
        n_final: None,
        premeasurement_final: None,
        rng_stream_id: tag,
        dt: opts.dt,
        sample_every: opts.sample_every,
    };
    evolve(
        model,
        dynamics,
        Origin {
            time: t0,
            state: psi0,
            env_cum: env0,
        },
        n_steps,
        opts,
        rng,
        &mut Recorder { rec: &mut rec },
    )?;
    Ok(rec)
}

/// Projective measurement at the final time: n(t) with probability
/// |⟨π_n|ψ(t)⟩|², final state replaced by |π_{n(t)}⟩.
pub fn measure_final<R: Rng + ?Sized>(
    mut record: TrajectoryRecord,
    steady: &SteadyState,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    if record.n_final.is_some() {
        return Err(Error::AlreadyMeasured);
    }
    let last = record.states.len() - 1;
    let n = born_outcome(steady, record.states[last].amplitudes(), rng);
    let projected = PureState::from_normalized(steady.eigenvector(n).to_vec());
    record.premeasurement_final = Some(std::mem::replace(&mut record.states[last], projected));
    record.n_final = Some(n);
    Ok(record)
}

/// Branching point: the unmeasured state and bookkeeping at grid time τ.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub time: f64,
    pub state: PureState,
    pub env_entropy_cum: f64,
    pub n0: usize,
}

pub fn grid_index(grid: &[f64], tau: f64) -> Option<usize> {
    let tol = 1e-9 * tau.abs().max(1.0);
    grid.iter().position(|&t| (t - tau).abs() <= tol)
}

pub fn checkpoint_at(record: &TrajectoryRecord, tau: f64) -> Result<Checkpoint> {
    let i = grid_index(&record.grid, tau).ok_or(Error::InterpolationRefused { tau })?;
    let state = if i + 1 == record.states.len() {
        record.unmeasured_final_state().clone()
    } else {
        record.states[i].clone()
    };
    Ok(Checkpoint {
        time: record.grid[i],
        state,
        env_entropy_cum: record.env_entropy_cum[i],
        n0: record.n0,
    })
}

/// Continues from a checkpoint to `t_final` without projecting at τ.
pub fn resume<R: Rng + ?Sized>(
    model: &QuantumModel,
    checkpoint: &Checkpoint,
    t_final: f64,
    opts: &SimOptions,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    let dynamics = prepare(model, opts);
    resume_with(model, &dynamics, checkpoint, t_final, opts, rng, 0)
}

fn resume_with<R: Rng + ?Sized>(
    model: &QuantumModel,
    dynamics: &Dynamics,
    checkpoint: &Checkpoint,
    t_final: f64,
    opts: &SimOptions,
    rng: &mut R,
    tag: u64,
) -> Result<TrajectoryRecord> {
    if t_final < checkpoint.time {
        return Err(Error::InvalidArgument("t_final precedes the checkpoint".into()));
    }
    let n_steps = step_count(t_final - checkpoint.time, opts.dt)?;
    run_record(
        model,
        dynamics,
        checkpoint.n0,
        checkpoint.state.amplitudes(),
        checkpoint.time,
        checkpoint.env_entropy_cum,
        n_steps,
        opts,
        rng,
        tag,
    )
}

/// `n_branches` independent continuations; branch `b` draws its jumps from
/// the dynamics lane of `base.with_branch(base.branch + b)`.
pub fn branch(
    model: &QuantumModel,
    checkpoint: &Checkpoint,
    t_final: f64,
    opts: &SimOptions,
    n_branches: usize,
    base: StreamId,
) -> Result<Vec<TrajectoryRecord>> {
    let dynamics = prepare(model, opts);
    (0..n_branches as u64)
        .map(|b| {
            let id = base.with_branch(base.branch + b);
            resume_with(model, &dynamics, checkpoint, t_final, opts, &mut id.rng(Lane::Dynamics), id.tag())
        })
        .collect()
}
