//! Exhaustive enumeration of discretized jump records.
//!
//! A record of `N` slots of length `dt` has, per slot, either no jump or one
//! jump of channel `k`. Its forward amplitude between eigenstates is
//!
//! ```text
//! A = ⟨π_f| M_N ⋯ M_1 |π_i⟩,   M_∅ = K(dt),   M_k = K(dt/2) √dt L_k K(dt/2)
//! ```
//!
//! with `K(s) = exp(−i H_eff s)`. The backward amplitude runs the reversed
//! slots through the time-reversed model: in the π eigenbasis every operator
//! is complex-conjugated, jumps are replaced by their detailed-balance
//! partners, and the record starts from `π_f`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, real, CMatrix, KahanSum};
use crate::model::{QuantumModel, SteadyState};

/// Hard cap on enumerated records (5⁸).
pub const PATH_LIMIT: u128 = 390_625;

/// Slot content: `None` for no jump, `Some(k)` for a jump of channel `k`.
pub type Slot = Option<usize>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscretePath {
    pub n0: usize,
    pub slots: Vec<Slot>,
    pub n_final: usize,
}

/// Slot operators of the forward and backward processes in the π eigenbasis.
struct SlotOps {
    forward: Vec<CMatrix>,
    /// `None` for jumps without a declared partner.
    backward: Vec<Option<CMatrix>>,
    env: Vec<f64>,
}

fn to_pi_basis(m: &CMatrix, u: &CMatrix) -> CMatrix {
    u.adjoint() * m * u
}

fn eigenbasis(steady: &SteadyState) -> CMatrix {
    let d = steady.dim();
    let mut u = DMatrix::zeros(d, d);
    for n in 0..d {
        for (r, z) in steady.eigenvector(n).iter().enumerate() {
            u[(r, n)] = *z;
        }
    }
    u
}

fn effective_generator(h: &CMatrix, jumps: &[CMatrix]) -> CMatrix {
    let mut heff = h.clone();
    for l in jumps {
        heff -= (l.adjoint() * l) * Complex64::new(0.0, 0.5);
    }
    heff * Complex64::new(0.0, -1.0)
}

/// `[K(dt), K(dt/2) √dt L K(dt/2) for each L]`, `None` where `L` is absent.
fn slot_ops(gen: &CMatrix, jumps: &[Option<CMatrix>], dt: f64) -> Vec<Option<CMatrix>> {
    let full = expm(&(gen * real(dt)));
    let half = expm(&(gen * real(0.5 * dt)));
    let mut ops = Vec::with_capacity(jumps.len() + 1);
    ops.push(Some(full));
    for l in jumps {
        ops.push(l.as_ref().map(|l| &half * (l * real(dt.sqrt())) * &half));
    }
    ops
}

fn build(model: &QuantumModel, steady: &SteadyState, dt: f64) -> Result<SlotOps> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument("dt must be > 0".into()));
    }
    if model.dim() != steady.dim() {
        return Err(Error::InvalidArgument("steady state and model dimensions differ".into()));
    }
    let u = eigenbasis(steady);
    let h = to_pi_basis(model.hamiltonian(), &u);
    let jumps: Vec<CMatrix> = model.channels().iter().map(|c| to_pi_basis(&c.operator, &u)).collect();
    let forward = slot_ops(&effective_generator(&h, &jumps), &jumps.iter().cloned().map(Some).collect::<Vec<_>>(), dt)
        .into_iter()
        .map(|m| m.expect("forward slots are complete"))
        .collect();
    // reversed model: Θ X Θ⁻¹ is entrywise conjugation in this basis, and
    // slot k of the reversed record fires the partner of k
    let conj = |m: &CMatrix| m.map(|z| z.conj());
    let reversed: Vec<CMatrix> = jumps.iter().map(conj).collect();
    let partners: Vec<Option<CMatrix>> = (0..jumps.len()).map(|k| model.partner(k).map(|p| reversed[p].clone())).collect();
    let backward = slot_ops(&effective_generator(&conj(&h), &reversed), &partners, dt);
    Ok(SlotOps {
        forward,
        backward,
        env: model.channels().iter().map(|c| c.env_entropy).collect(),
    })
}

fn slot_index(s: Slot, n_channels: usize) -> Result<usize> {
    match s {
        None => Ok(0),
        Some(k) if k < n_channels => Ok(k + 1),
        Some(k) => Err(Error::InvalidArgument(format!("channel {k} out of range"))),
    }
}

fn check_path(path: &DiscretePath, steady: &SteadyState) -> Result<()> {
    for n in [path.n0, path.n_final] {
        if n >= steady.dim() {
            return Err(Error::IndexOutOfRange { index: n, dim: steady.dim() });
        }
    }
    Ok(())
}

/// π_{n0} · |⟨π_{nf}| M_N ⋯ M_1 |π_{n0}⟩|².
pub fn path_probability(model: &QuantumModel, steady: &SteadyState, path: &DiscretePath, dt: f64) -> Result<f64> {
    check_path(path, steady)?;
    let ops = build(model, steady, dt)?;
    let mut prod = CMatrix::identity(steady.dim(), steady.dim());
    for &s in &path.slots {
        prod = &ops.forward[slot_index(s, model.channels().len())?] * prod;
    }
    Ok(steady.eigenvalues()[path.n0] * prod[(path.n_final, path.n0)].norm_sqr())
}

/// π_{nf} · |⟨π_{n0}| M̃_1 ⋯ M̃_N |π_{nf}⟩|² for the reversed record.
pub fn backward_path_probability(model: &QuantumModel, steady: &SteadyState, path: &DiscretePath, dt: f64) -> Result<f64> {
    check_path(path, steady)?;
    let ops = build(model, steady, dt)?;
    let mut prod = CMatrix::identity(steady.dim(), steady.dim());
    for &s in path.slots.iter().rev() {
        let i = slot_index(s, model.channels().len())?;
        let m = ops.backward[i].as_ref().ok_or_else(|| Error::NoBackwardModel { channel: i - 1 })?;
        prod = m * prod;
    }
    Ok(steady.eigenvalues()[path.n_final] * prod[(path.n0, path.n_final)].norm_sqr())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n_slots: usize,
    pub dt: f64,
    /// Jump records times boundary outcome pairs.
    pub n_paths: u64,
    pub sum_p: f64,
    pub ift_tot: f64,
    pub ift_unc: f64,
    pub ift_mar: f64,
    pub mean_tot: f64,
    pub mean_mar: f64,
    pub mean_unc: f64,
    /// max |ln(P_fwd(n_f, R | n_0) / P_bwd(n_0, R̃ | n_f)) − ΣΔS_env|
    pub max_detailed_balance_violation: f64,
    /// records skipped in the detailed-balance check for zero probability
    pub zero_probability_paths: u64,
}

impl OracleReport {
    /// |x − 1| for the three normalization-type sums, worst case.
    pub fn max_deviation(&self) -> f64 {
        [self.sum_p, self.ift_tot, self.ift_unc]
            .iter()
            .map(|x| (x - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Default, Clone, Copy)]
struct Partial {
    sum_p: KahanSum,
    tot: KahanSum,
    unc: KahanSum,
    mar: KahanSum,
    mean_tot: KahanSum,
    mean_mar: KahanSum,
    mean_unc: KahanSum,
    db: f64,
    zero: u64,
}

const ZERO_PROB: f64 = 1e-280;

/// Σ over every record of `n_slots` slots and every boundary pair.
pub fn exhaustive_ift(model: &QuantumModel, steady: &SteadyState, n_slots: usize, dt: f64) -> Result<OracleReport> {
    let ops = build(model, steady, dt)?;
    steady.require_full_rank()?;
    let base = model.channels().len() as u128 + 1;
    let n_records = base.checked_pow(n_slots as u32).unwrap_or(u128::MAX);
    if n_records > PATH_LIMIT {
        return Err(Error::EnumerationLimit { paths: n_records, limit: PATH_LIMIT });
    }
    let d = steady.dim();
    let pi = steady.eigenvalues();
    let ln_pi: Vec<f64> = pi.iter().map(|p| p.ln()).collect();
    let base = base as usize;
    let n_records = n_records as usize;
    let first = if n_slots == 0 { 1 } else { base };
    let per_first = n_records / first;
    let partials: Vec<Partial> = (0..first)
        .into_par_iter()
        .map(|f0| {
            let mut acc = Partial::default();
            let mut digits = vec![0usize; n_slots];
            for r in 0..per_first {
                let code = f0 * per_first + r;
                let mut c = code;
                for dgt in digits.iter_mut() {
                    *dgt = c % base;
                    c /= base;
                }
                let mut fwd = CMatrix::identity(d, d);
                let mut env = 0.0;
                for &s in &digits {
                    fwd = &ops.forward[s] * fwd;
                    if s > 0 {
                        env += ops.env[s - 1];
                    }
                }
                let bwd = (|| {
                    let mut m = CMatrix::identity(d, d);
                    for &s in digits.iter().rev() {
                        m = ops.backward[s].as_ref()? * m;
                    }
                    Some(m)
                })();
                for i in 0..d {
                    let col: Vec<Complex64> = (0..d).map(|f| fwd[(f, i)]).collect();
                    let norm2: f64 = col.iter().map(|z| z.norm_sqr()).sum();
                    if norm2 <= ZERO_PROB {
                        acc.zero += d as u64;
                        continue;
                    }
                    // ⟨π⟩ of the normalized final state; the column is already
                    // in the π basis
                    let weight = col.iter().zip(pi).map(|(z, p)| z.norm_sqr() * p).sum::<f64>() / norm2;
                    for f in 0..d {
                        let cond = col[f].norm_sqr();
                        let p = pi[i] * cond;
                        let tot = ln_pi[i] - ln_pi[f] + env;
                        let unc = -(ln_pi[f] - weight.ln());
                        let mar = ln_pi[i] - weight.ln() + env;
                        acc.sum_p.add(p);
                        acc.tot.add(p * (-tot).exp());
                        acc.unc.add(p * (-unc).exp());
                        acc.mar.add(p * (-mar).exp());
                        acc.mean_tot.add(p * tot);
                        acc.mean_mar.add(p * mar);
                        acc.mean_unc.add(p * unc);
                        if let Some(b) = &bwd {
                            let back = b[(i, f)].norm_sqr();
                            if cond <= ZERO_PROB || back <= ZERO_PROB {
                                acc.zero += 1;
                            } else {
                                acc.db = acc.db.max(((cond / back).ln() - env).abs());
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = Partial::default();
    for p in &partials {
        for (a, b) in [
            (&mut total.sum_p, p.sum_p),
            (&mut total.tot, p.tot),
            (&mut total.unc, p.unc),
            (&mut total.mar, p.mar),
            (&mut total.mean_tot, p.mean_tot),
            (&mut total.mean_mar, p.mean_mar),
            (&mut total.mean_unc, p.mean_unc),
        ] {
            a.add(b.value());
        }
        total.db = total.db.max(p.db);
        total.zero += p.zero;
    }
    let sum_p = total.sum_p.value();
    Ok(OracleReport {
        n_slots,
        dt,
        n_paths: (n_records * d * d) as u64,
        sum_p,
        ift_tot: total.tot.value(),
        ift_unc: total.unc.value(),
        ift_mar: total.mar.value(),
        mean_tot: total.mean_tot.value() / sum_p,
        mean_mar: total.mean_mar.value() / sum_p,
        mean_unc: total.mean_unc.value() / sum_p,
        max_detailed_balance_violation: if ops.backward.iter().all(Option::is_some) { total.db } else { f64::NAN },
        zero_probability_paths: total.zero,
    })
}

/// Enumerated P(N_k = m), m = 0..=n_slots, for every channel k.
pub fn jump_count_marginals(model: &QuantumModel, steady: &SteadyState, n_slots: usize, dt: f64) -> Result<Vec<Vec<f64>>> {
    let ops = build(model, steady, dt)?;
    let k_count = model.channels().len();
    let base = k_count as u128 + 1;
    let n_records = base.checked_pow(n_slots as u32).unwrap_or(u128::MAX);
    if n_records > PATH_LIMIT {
        return Err(Error::EnumerationLimit { paths: n_records, limit: PATH_LIMIT });
    }
    let d = steady.dim();
    let mut out = vec![vec![KahanSum::default(); n_slots + 1]; k_count];
    let mut digits = vec![0usize; n_slots];
    for code in 0..n_records as usize {
        let mut c = code;
        for dgt in digits.iter_mut() {
            *dgt = c % (k_count + 1);
            c /= k_count + 1;
        }
        let mut fwd = CMatrix::identity(d, d);
        for &s in &digits {
            fwd = &ops.forward[s] * fwd;
        }
        let p: f64 = (0..d)
            .map(|i| steady.eigenvalues()[i] * (0..d).map(|f| fwd[(f, i)].norm_sqr()).sum::<f64>())
            .sum();
        for (k, row) in out.iter_mut().enumerate() {
            let m = digits.iter().filter(|&&s| s == k + 1).count();
            row[m].add(p);
        }
    }
    Ok(out.into_iter().map(|r| r.into_iter().map(|s| s.value()).collect()).collect())
}
