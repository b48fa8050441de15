//! Total, uncertainty and martingale entropy production along trajectories.
//!
//! With two-point measurement outcomes n(0), n(t) and the steady state
//! π = Σ π_n |π_n⟩⟨π_n|:
//!
//! ```text
//! ΔS_tot = ln(π_{n(0)} / π_{n(t)}) + Σ_j ΔS_env^{k_j}
//! ΔS_unc = −ln(π_{n(t)} / ⟨π⟩_ψ(t)),   ⟨π⟩_ψ = Σ_n π_n |⟨π_n|ψ⟩|²
//! ΔS_mar = ln(π_{n(0)} / ⟨π⟩_ψ(t)) + Σ_j ΔS_env^{k_j}
//! ```
//!
//! so ΔS_tot = ΔS_unc + ΔS_mar identically. ΔS_mar needs no final
//! measurement and is defined at every instant.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::inner;
use crate::model::SteadyState;
use crate::trajectory::{born_outcome, Observer, PureState, TrajectoryRecord};

/// ⟨π⟩_ψ = Σ_n π_n |⟨π_n|ψ⟩|², normalized by Σ_n |⟨π_n|ψ⟩|² so rounding
/// in ‖ψ‖ does not leak into the logarithms.
pub fn fidelity_weight(state: &[Complex64], steady: &SteadyState) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for n in 0..steady.dim() {
        let p = inner(steady.eigenvector(n), state).norm_sqr();
        num += steady.eigenvalues()[n] * p;
        den += p;
    }
    num / den
}

fn check_index(n: usize, steady: &SteadyState) -> Result<()> {
    if n >= steady.dim() {
        return Err(Error::IndexOutOfRange { index: n, dim: steady.dim() });
    }
    Ok(())
}

/// −ln(π_n / ⟨π⟩_ψ).
pub fn delta_s_unc(n: usize, state: &PureState, steady: &SteadyState) -> Result<f64> {
    check_index(n, steady)?;
    steady.require_full_rank()?;
    Ok(unc(n, fidelity_weight(state.amplitudes(), steady), steady))
}

#[inline]
fn unc(n: usize, weight: f64, steady: &SteadyState) -> f64 {
    -(steady.eigenvalues()[n].ln() - weight.ln())
}

/// ln(π_{n0}) − ln⟨π⟩_ψ + ΔS_env.
pub fn delta_s_mar(n0: usize, state: &PureState, env: f64, steady: &SteadyState) -> Result<f64> {
    check_index(n0, steady)?;
    steady.require_full_rank()?;
    Ok(mar(steady.eigenvalues()[n0].ln(), fidelity_weight(state.amplitudes(), steady), env))
}

#[inline]
fn mar(ln_pi0: f64, weight: f64, env: f64) -> f64 {
    ln_pi0 - weight.ln() + env
}

/// ln(π_{n(0)} / π_{n(t)}) + Σ_j ΔS_env^{k_j} of a measured record.
pub fn delta_s_tot(record: &TrajectoryRecord, steady: &SteadyState) -> Result<f64> {
    let nf = record.n_final.ok_or(Error::MissingFinalMeasurement)?;
    check_index(record.n0, steady)?;
    check_index(nf, steady)?;
    steady.require_full_rank()?;
    let pi = steady.eigenvalues();
    Ok(tot(pi[record.n0].ln(), pi[nf].ln(), record.total_env_entropy()))
}

#[inline]
fn tot(ln_pi0: f64, ln_pif: f64, env: f64) -> f64 {
    ln_pi0 - ln_pif + env
}

/// All three functionals at the end of one measured trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointEntropy {
    pub tot: f64,
    pub unc: f64,
    pub mar: f64,
}

impl EndpointEntropy {
    /// From the unmeasured final state, the outcome n(t) and ΔS_env.
    pub fn new(n0: usize, n_final: usize, final_state: &[Complex64], env: f64, steady: &SteadyState) -> Self {
        let pi = steady.eigenvalues();
        let w = fidelity_weight(final_state, steady);
        Self {
            tot: tot(pi[n0].ln(), pi[n_final].ln(), env),
            unc: unc(n_final, w, steady),
            mar: mar(pi[n0].ln(), w, env),
        }
    }

    pub fn decomposition_error(&self) -> f64 {
        (self.tot - (self.unc + self.mar)).abs()
    }
}

/// Entropy production sampled on a record's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropySeries {
    pub grid: Vec<f64>,
    pub s_env: Vec<f64>,
    pub s_mar: Vec<f64>,
    /// −ln(π_n / ⟨π⟩_ψ(t_i)) for every n.
    pub s_unc_candidates: Vec<Vec<f64>>,
    pub s_unc_virtual: Option<Vec<f64>>,
    pub s_tot_virtual: Option<Vec<f64>>,
    pub running_inf_mar: Vec<f64>,
    pub running_inf_tot: Option<Vec<f64>>,
}

impl EntropySeries {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Columns time, s_env, s_mar, s_unc_virtual, s_tot_virtual, inf_mar,
    /// inf_tot; virtual columns are empty when not traced.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "s_env", "s_mar", "s_unc_virtual", "s_tot_virtual", "inf_mar", "inf_tot"])?;
        let opt = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map(|v| crate::io::fmt_f64(v[i])).unwrap_or_default();
        for i in 0..self.len() {
            w.write_record([
                crate::io::fmt_f64(self.grid[i]),
                crate::io::fmt_f64(self.s_env[i]),
                crate::io::fmt_f64(self.s_mar[i]),
                opt(&self.s_unc_virtual, i),
                opt(&self.s_tot_virtual, i),
                crate::io::fmt_f64(self.running_inf_mar[i]),
                opt(&self.running_inf_tot, i),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn running_min(xs: &[f64]) -> Vec<f64> {
    let mut m = f64::INFINITY;
    xs.iter()
        .map(|&x| {
            m = m.min(x);
            m
        })
        .collect()
}

/// Builds the series from the record's stored states; ΔS_mar uses the
/// unmeasured final state. With `virtual_rng`, n(t_i) is drawn by the Born
/// rule at every grid point without touching ψ; a measured record uses its
/// actual n(t) at the last point.
pub fn entropy_series<R: Rng + ?Sized>(
    record: &TrajectoryRecord,
    steady: &SteadyState,
    virtual_rng: Option<&mut R>,
) -> Result<EntropySeries> {
    if record.states.is_empty() {
        return Err(Error::InvalidArgument("record has no sampled states".into()));
    }
    check_index(record.n0, steady)?;
    steady.require_full_rank()?;
    let ln_pi0 = steady.eigenvalues()[record.n0].ln();
    let last = record.states.len() - 1;
    let state_at = |i: usize| {
        if i == last {
            record.unmeasured_final_state()
        } else {
            &record.states[i]
        }
    };
    let mut s_mar = Vec::with_capacity(record.states.len());
    let mut cands = Vec::with_capacity(record.states.len());
    for i in 0..=last {
        let w = fidelity_weight(state_at(i).amplitudes(), steady);
        s_mar.push(mar(ln_pi0, w, record.env_entropy_cum[i]));
        cands.push((0..steady.dim()).map(|n| unc(n, w, steady)).collect::<Vec<_>>());
    }
    let (s_unc_virtual, s_tot_virtual) = match virtual_rng {
        Some(rng) => {
            let mut uv = Vec::with_capacity(last + 1);
            for i in 0..=last {
                let n = match (i == last, record.n_final) {
                    (true, Some(nf)) => nf,
                    _ => born_outcome(steady, state_at(i).amplitudes(), rng),
                };
                uv.push(cands[i][n]);
            }
            let tv: Vec<f64> = uv.iter().zip(&s_mar).map(|(u, m)| u + m).collect();
            (Some(uv), Some(tv))
        }
        None => (None, None),
    };
    Ok(EntropySeries {
        grid: record.grid.clone(),
        s_env: record.env_entropy_cum.clone(),
        running_inf_mar: running_min(&s_mar),
        running_inf_tot: s_tot_virtual.as_deref().map(running_min),
        s_mar,
        s_unc_candidates: cands,
        s_unc_virtual,
        s_tot_virtual,
    })
}

/// Streaming observer: ΔS_mar and its running infimum, optionally the
/// virtual ΔS_tot trace and its infimum, without storing the trajectory.
pub struct Tracker<'a, R: Rng> {
    steady: &'a SteadyState,
    ln_pi0: f64,
    virtual_rng: Option<R>,
    pub last_time: f64,
    pub last_mar: f64,
    pub last_env: f64,
    pub last_state: Vec<Complex64>,
    pub inf_mar: f64,
    pub inf_tot: f64,
    pub samples: usize,
}

impl<'a, R: Rng> Tracker<'a, R> {
    pub fn new(steady: &'a SteadyState, n0: usize, virtual_rng: Option<R>) -> Self {
        Self {
            steady,
            ln_pi0: steady.eigenvalues()[n0].ln(),
            virtual_rng,
            last_time: 0.0,
            last_mar: 0.0,
            last_env: 0.0,
            last_state: Vec::new(),
            inf_mar: f64::INFINITY,
            inf_tot: f64::INFINITY,
            samples: 0,
        }
    }
}

impl<R: Rng> Observer for Tracker<'_, R> {
    fn sample(&mut self, time: f64, state: &[Complex64], env_cum: f64) {
        let w = fidelity_weight(state, self.steady);
        let m = mar(self.ln_pi0, w, env_cum);
        self.inf_mar = self.inf_mar.min(m);
        if let Some(rng) = self.virtual_rng.as_mut() {
            let n = born_outcome(self.steady, state, rng);
            self.inf_tot = self.inf_tot.min(m + unc(n, w, self.steady));
        }
        self.last_time = time;
        self.last_mar = m;
        self.last_env = env_cum;
        self.last_state.clear();
        self.last_state.extend_from_slice(state);
        self.samples += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, real, CMatrix};
    use crate::model::{qubit_preset, steady_state, QubitParams};
    use crate::rng::{Lane, StreamId};
    use crate::trajectory::{measure_final, simulate_stream, SimOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn preset() -> (crate::model::QuantumModel, SteadyState) {
        let m = qubit_preset(&QubitParams {
            omega: 1.0,
            beta: 0.2,
            eta: 0.5,
            gamma_gap: 0.01,
        })
        .unwrap();
        let s = steady_state(&m).unwrap();
        (m, s)
    }

    fn mixed() -> SteadyState {
        SteadyState::from_density(CMatrix::from_row_slice(2, 2, &[real(0.5), real(0.0), real(0.0), real(0.5)])).unwrap()
    }

    #[test]
    fn weight_of_eigenstate_is_its_eigenvalue() {
        let (_, st) = preset();
        for n in 0..2 {
            let w = fidelity_weight(st.eigenvector(n), &st);
            assert!((w - st.eigenvalues()[n]).abs() < 1e-15);
        }
    }

    #[test]
    fn maximally_mixed_weight_and_unc() {
        let st = mixed();
        let psi = PureState::new(vec![c(0.3, -0.2), c(0.1, 0.9)]).unwrap();
        assert!((fidelity_weight(psi.amplitudes(), &st) - 0.5).abs() < 1e-15);
        for n in 0..2 {
            assert!(delta_s_unc(n, &psi, &st).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn weight_matches_density_expectation() {
        let (_, st) = preset();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let psi = PureState::new(vec![c(rng.random(), rng.random()), c(rng.random::<f64>() - 0.5, rng.random())]).unwrap();
            let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
            let direct = (v.adjoint() * st.density() * &v)[(0, 0)].re;
            assert!((fidelity_weight(psi.amplitudes(), &st) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn unc_of_mismatched_outcome() {
        let (_, st) = preset();
        let psi = PureState::new(st.eigenvector(0).to_vec()).unwrap();
        let pi = st.eigenvalues();
        assert!(delta_s_unc(0, &psi, &st).unwrap().abs() < 1e-15);
        assert!((delta_s_unc(1, &psi, &st).unwrap() - (pi[0] / pi[1]).ln()).abs() < 1e-12);
        assert!(matches!(delta_s_unc(2, &psi, &st), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn total_needs_final_measurement() {
        let (m, st) = preset();
        let rec = simulate_stream(&m, &st, 1.0, &SimOptions::for_model(&m, 1.0), StreamId::new(0, 0)).unwrap();
        assert!(matches!(delta_s_tot(&rec, &st), Err(Error::MissingFinalMeasurement)));
    }

    #[test]
    fn series_identities() {
        let (m, st) = preset();
        let opts = SimOptions::for_model(&m, 200.0);
        let id = StreamId::new(21, 3);
        let rec = simulate_stream(&m, &st, 200.0, &opts, id).unwrap();
        let before = entropy_series::<ChaCha8Rng>(&rec, &st, None).unwrap();
        let rec = measure_final(rec, &st, &mut id.rng(Lane::Virtual)).unwrap();
        let mut vr = id.rng(Lane::Virtual);
        let after = entropy_series(&rec, &st, Some(&mut vr)).unwrap();
        // measurement-free
        assert_eq!(before.s_mar, after.s_mar);
        let pi0 = st.eigenvalues()[rec.n0].ln();
        for (i, s) in rec.states.iter().enumerate().take(rec.states.len() - 1) {
            let expected = pi0 - fidelity_weight(s.amplitudes(), &st).ln() + rec.env_entropy_cum[i];
            assert!((after.s_mar[i] - expected).abs() < 1e-12);
        }
        let last = after.len() - 1;
        let tot = delta_s_tot(&rec, &st).unwrap();
        let u = after.s_unc_virtual.as_ref().unwrap()[last];
        assert!((tot - (u + after.s_mar[last])).abs() < 1e-12);
        let bound = (st.pi_max() / st.pi_min()).ln();
        for row in &after.s_unc_candidates {
            for &x in row {
                assert!(x.abs() <= bound + 1e-12);
            }
        }
        for w in after.running_inf_mar.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn mar_jumps_by_channel_quanta() {
        let (m, st) = preset();
        let opts = SimOptions { dt: 0.01, sample_every: 1, integrator: crate::Integrator::Euler };
        let rec = simulate_stream(&m, &st, 100.0, &opts, StreamId::new(4, 4)).unwrap();
        let series = entropy_series::<ChaCha8Rng>(&rec, &st, None).unwrap();
        assert!(!rec.events.is_empty());
        for ev in &rec.events {
            let i = crate::trajectory::grid_index(&rec.grid, ev.time).unwrap();
            let jump_env = series.s_env[i] - series.s_env[i - 1];
            assert!((jump_env - m.channels()[ev.channel].env_entropy).abs() < 1e-12);
        }
    }

    #[test]
    fn tracker_agrees_with_series() {
        let (m, st) = preset();
        let opts = SimOptions::for_model(&m, 50.0);
        let id = StreamId::new(1, 1);
        let rec = simulate_stream(&m, &st, 50.0, &opts, id).unwrap();
        let series = entropy_series::<ChaCha8Rng>(&rec, &st, None).unwrap();
        let mut tr = Tracker::<ChaCha8Rng>::new(&st, rec.n0, None);
        for (i, s) in rec.states.iter().enumerate() {
            tr.sample(rec.grid[i], s.amplitudes(), rec.env_entropy_cum[i]);
        }
        assert_eq!(tr.inf_mar, *series.running_inf_mar.last().unwrap());
        assert_eq!(tr.last_mar, *series.s_mar.last().unwrap());
    }

    #[test]
    fn csv_export_header() {
        let (m, st) = preset();
        let id = StreamId::new(1, 1);
        let rec = simulate_stream(&m, &st, 1.0, &SimOptions::for_model(&m, 1.0), id).unwrap();
        let series = entropy_series(&rec, &st, Some(&mut id.rng(Lane::Virtual))).unwrap();
        let mut buf = Vec::new();
        series.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,s_env,s_mar,s_unc_virtual,s_tot_virtual,inf_mar,inf_tot\n"));
        assert_eq!(text.lines().count(), rec.grid.len() + 1);
    }
}
