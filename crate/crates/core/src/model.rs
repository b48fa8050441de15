//! Open-system models: Hamiltonian, jump channels with their environmental
//! entropy quanta, the Lindblad generator, and the nonequilibrium steady state.

use std::cmp::Ordering;

use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, is_hermitian, max_abs, max_abs_diff, real, unvectorize, CMatrix, I};

const HERMITIAN_TOL: f64 = 1e-12;
const PAIRING_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-10;
const UNIQUENESS_TOL: f64 = 1e-8;
const RANK_TOL: f64 = 1e-12;
const TIE_TOL: f64 = 1e-12;
/// Dense d²×d² solves are only sensible for small systems.
pub const MAX_DENSE_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    pub operator: CMatrix,
    /// Environmental entropy change ΔS_env^k carried by one jump (k_B = 1).
    pub env_entropy: f64,
}

impl JumpChannel {
    pub fn new(operator: CMatrix, env_entropy: f64) -> Self {
        Self { operator, env_entropy }
    }
}

/// Hamiltonian plus monitored jump channels.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumModel {
    hamiltonian: CMatrix,
    channels: Vec<JumpChannel>,
    pairs: Vec<(usize, usize)>,
    partner: Vec<Option<usize>>,
}

impl QuantumModel {
    /// Validates Hermiticity, shapes, finiteness and every declared
    /// detailed-balance pair `L_k = L_{k'}† e^{ΔS_k/2}`, `ΔS_k = −ΔS_{k'}`.
    pub fn new(hamiltonian: CMatrix, channels: Vec<JumpChannel>, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if dim == 0 || !hamiltonian.is_square() {
            return Err(Error::ModelValidation("hamiltonian must be a non-empty square matrix".into()));
        }
        if hamiltonian.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::ModelValidation("hamiltonian has non-finite entries".into()));
        }
        if !is_hermitian(&hamiltonian, HERMITIAN_TOL) {
            return Err(Error::ModelValidation("hamiltonian is not Hermitian".into()));
        }
        for (k, ch) in channels.iter().enumerate() {
            if ch.operator.nrows() != dim || ch.operator.ncols() != dim {
                return Err(Error::ModelValidation(format!(
                    "channel {k} operator is {}x{}, expected {dim}x{dim}",
                    ch.operator.nrows(),
                    ch.operator.ncols()
                )));
            }
            if ch.operator.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::ModelValidation(format!("channel {k} operator has non-finite entries")));
            }
            if !ch.env_entropy.is_finite() {
                return Err(Error::ModelValidation(format!("channel {k} env_entropy is not finite")));
            }
        }
        let mut partner = vec![None; channels.len()];
        for &(k, kp) in &pairs {
            if k >= channels.len() || kp >= channels.len() {
                return Err(Error::ModelValidation(format!("pair ({k}, {kp}) references a missing channel")));
            }
            let (a, b) = (&channels[k], &channels[kp]);
            if (a.env_entropy + b.env_entropy).abs() > HERMITIAN_TOL {
                return Err(Error::ModelValidation(format!(
                    "pair ({k}, {kp}): env entropies {} and {} are not opposite",
                    a.env_entropy, b.env_entropy
                )));
            }
            let expected = b.operator.adjoint() * real((a.env_entropy / 2.0).exp());
            if max_abs_diff(&a.operator, &expected) > PAIRING_TOL {
                return Err(Error::ModelValidation(format!(
                    "pair ({k}, {kp}) violates L_k = L_k'^dagger exp(dS_k/2)"
                )));
            }
            for (x, y) in [(k, kp), (kp, k)] {
                if partner[x].is_some_and(|p| p != y) {
                    return Err(Error::ModelValidation(format!("channel {x} is paired twice")));
                }
                partner[x] = Some(y);
            }
        }
        Ok(Self {
            hamiltonian,
            channels,
            pairs,
            partner,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Detailed-balance partner `k'` of channel `k`, when declared.
    pub fn partner(&self, k: usize) -> Option<usize> {
        self.partner.get(k).copied().flatten()
    }

    /// Σ_k L_k† L_k.
    pub fn total_decay(&self) -> CMatrix {
        let d = self.dim();
        self.channels
            .iter()
            .fold(CMatrix::zeros(d, d), |acc, ch| acc + ch.operator.adjoint() * &ch.operator)
    }

    /// Non-Hermitian effective Hamiltonian H − (i/2) Σ_k L_k† L_k.
    pub fn effective_hamiltonian(&self) -> CMatrix {
        &self.hamiltonian - self.total_decay() * c(0.0, 0.5)
    }

    /// `0.01 · min(1/ω, 1/Σ_k ‖L_k†L_k‖)` where ω is the spectral width of H.
    pub fn default_dt(&self) -> f64 {
        let h = SymmetricEigen::new(self.hamiltonian.clone()).eigenvalues;
        let spread = h.max() - h.min();
        let rate: f64 = self
            .channels
            .iter()
            .map(|ch| {
                let ll = ch.operator.adjoint() * &ch.operator;
                SymmetricEigen::new(ll).eigenvalues.max().max(0.0)
            })
            .sum();
        let mut scale = f64::INFINITY;
        if spread > 1e-300 {
            scale = scale.min(1.0 / spread);
        }
        if rate > 1e-300 {
            scale = scale.min(1.0 / rate);
        }
        if scale.is_finite() {
            0.01 * scale
        } else {
            0.01
        }
    }

    /// ρ ↦ −i[H, ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ}).
    pub fn apply_generator(&self, rho: &CMatrix) -> CMatrix {
        let h = &self.hamiltonian;
        let mut out = (h * rho - rho * h) * (-I);
        for ch in &self.channels {
            let l = &ch.operator;
            let ld = l.adjoint();
            let ll = &ld * l;
            out += l * rho * &ld - (&ll * rho + rho * &ll) * real(0.5);
        }
        out
    }

    pub fn to_spec(&self) -> ExplicitModel {
        let flat = |m: &CMatrix| {
            let d = m.nrows();
            let mut v = Vec::with_capacity(d * d);
            for r in 0..d {
                for col in 0..d {
                    v.push([m[(r, col)].re, m[(r, col)].im]);
                }
            }
            v
        };
        ExplicitModel {
            dim: self.dim(),
            hamiltonian: flat(&self.hamiltonian),
            channels: self
                .channels
                .iter()
                .map(|ch| ChannelSpec {
                    operator: flat(&ch.operator),
                    env_entropy: ch.env_entropy,
                })
                .collect(),
            pairs: self.pairs.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

/// d²×d² matrix of the Lindblad generator acting on column-stacked ρ.
pub fn build_liouvillian(model: &QuantumModel) -> CMatrix {
    let d = model.dim();
    let id = CMatrix::identity(d, d);
    let h = model.hamiltonian();
    let mut lv = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
    for ch in model.channels() {
        let l = &ch.operator;
        let ll = l.adjoint() * l;
        lv += l.conjugate().kronecker(l) - (id.kronecker(&ll) + ll.transpose().kronecker(&id)) * real(0.5);
    }
    lv
}

/// Eigenvalues of the Liouvillian sorted by increasing modulus.
pub fn liouvillian_spectrum(model: &QuantumModel) -> Result<Vec<Complex64>> {
    let lv = build_liouvillian(model);
    let schur = nalgebra::linalg::Schur::try_new(lv, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition of the Liouvillian did not converge".into()))?;
    let eig = schur
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("Liouvillian eigenvalues unavailable".into()))?;
    let mut v: Vec<Complex64> = eig.iter().copied().collect();
    v.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    Ok(v)
}

/// Steady state π with its descending spectral decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    density: CMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<Complex64>>,
    pi_min: f64,
    pi_max: f64,
}

impl SteadyState {
    /// Decomposes a given density matrix. Only validates that it is a state;
    /// rank deficiency is reported later by the entropy functionals.
    pub fn from_density(density: CMatrix) -> Result<Self> {
        if !density.is_square() || density.nrows() == 0 {
            return Err(Error::InvalidArgument("density matrix must be square".into()));
        }
        let tr = density.trace();
        if (tr - real(1.0)).norm() > HERMITIAN_TOL {
            return Err(Error::InvalidArgument(format!("density trace {tr} is not 1")));
        }
        if !is_hermitian(&density, HERMITIAN_TOL) {
            return Err(Error::InvalidArgument("density matrix is not Hermitian".into()));
        }
        let sym = (&density + density.adjoint()) * real(0.5);
        let eig = SymmetricEigen::new(sym.clone());
        let d = sym.nrows();
        let mut pairs: Vec<(f64, Vec<Complex64>)> = (0..d)
            .map(|j| {
                let val = eig.eigenvalues[j];
                let mut vec: Vec<Complex64> = eig.eigenvectors.column(j).iter().copied().collect();
                fix_phase(&mut vec);
                (val, vec)
            })
            .collect();
        if let Some(&(bad, _)) = pairs.iter().find(|(v, _)| *v < -HERMITIAN_TOL) {
            return Err(Error::InvalidArgument(format!("density has negative eigenvalue {bad:.3e}")));
        }
        pairs.sort_by(|a, b| order_eigenpairs(a, b));
        let eigenvalues: Vec<f64> = pairs.iter().map(|(v, _)| v.max(0.0)).collect();
        let eigenvectors: Vec<Vec<Complex64>> = pairs.into_iter().map(|(_, v)| v).collect();
        let pi_max = eigenvalues[0];
        let pi_min = eigenvalues[d - 1];
        Ok(Self {
            density: sym,
            eigenvalues,
            eigenvectors,
            pi_min,
            pi_max,
        })
    }

    /// Decomposes `density` after checking it is annihilated by the model's generator.
    pub fn for_model(model: &QuantumModel, density: CMatrix) -> Result<Self> {
        if density.nrows() != model.dim() {
            return Err(Error::InvalidArgument("density dimension does not match the model".into()));
        }
        let st = Self::from_density(density)?;
        let residual = st.liouvillian_residual(model);
        if residual > RESIDUAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "density is not stationary: generator residual {residual:.3e}"
            )));
        }
        Ok(st)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn density(&self) -> &CMatrix {
        &self.density
    }

    /// π_1 ≥ … ≥ π_d.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, n: usize) -> &[Complex64] {
        &self.eigenvectors[n]
    }

    pub fn eigenvectors(&self) -> &[Vec<Complex64>] {
        &self.eigenvectors
    }

    pub fn pi_min(&self) -> f64 {
        self.pi_min
    }

    pub fn pi_max(&self) -> f64 {
        self.pi_max
    }

    /// ln(π_max/π_min), the bound on |ΔS_unc|.
    pub fn log_condition(&self) -> f64 {
        (self.pi_max / self.pi_min).ln()
    }

    pub fn require_full_rank(&self) -> Result<()> {
        if self.pi_min < RANK_TOL {
            Err(Error::RankDeficientSteadyState { pi_min: self.pi_min })
        } else {
            Ok(())
        }
    }

    /// Max-entry magnitude of the generator applied to π.
    pub fn liouvillian_residual(&self, model: &QuantumModel) -> f64 {
        max_abs(&model.apply_generator(&self.density))
    }

    /// Σ_n π_n |π_n⟩⟨π_n|.
    pub fn reconstruct(&self) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for (p, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            let col = nalgebra::DVector::from_column_slice(v);
            out += &col * col.adjoint() * real(*p);
        }
        out
    }
}

/// Largest-magnitude component made real and positive.
fn fix_phase(v: &mut [Complex64]) {
    let mut best = 0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > v[best].norm() + TIE_TOL {
            best = i;
        }
    }
    let z = v[best];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}

/// Descending eigenvalue; ties broken by descending lexicographic order of
/// the phase-fixed eigenvector components (re, then im).
fn order_eigenpairs(a: &(f64, Vec<Complex64>), b: &(f64, Vec<Complex64>)) -> Ordering {
    if (a.0 - b.0).abs() > TIE_TOL {
        return b.0.total_cmp(&a.0);
    }
    for (x, y) in a.1.iter().zip(&b.1) {
        let ord = y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im));
        if ord != Ordering::Equal && ((x.re - y.re).abs() > TIE_TOL || (x.im - y.im).abs() > TIE_TOL) {
            return ord;
        }
    }
    Ordering::Equal
}

/// Null vector of the Liouvillian, normalized to unit trace and decomposed.
pub fn steady_state(model: &QuantumModel) -> Result<SteadyState> {
    let d = model.dim();
    if d > MAX_DENSE_DIM {
        return Err(Error::InvalidArgument(format!(
            "dense steady-state solver supports d <= {MAX_DENSE_DIM}, got {d}"
        )));
    }
    let spectrum = liouvillian_spectrum(model)?;
    if d > 1 && spectrum[1].norm() <= UNIQUENESS_TOL {
        return Err(Error::NonUniqueSteadyState {
            second_smallest: spectrum[1].norm(),
        });
    }
    let lv = build_liouvillian(model);
    let svd = lv.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return right singular vectors".into()))?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let null = v_t.row(idx).adjoint();
    let mut rho = unvectorize(&null, d);
    let tr = rho.trace();
    if tr.norm() < 1e-14 {
        return Err(Error::Numerical("Liouvillian null vector has vanishing trace".into()));
    }
    rho /= tr;
    rho = (&rho + rho.adjoint()) * real(0.5);
    let st = SteadyState::from_density(rho)?;
    let residual = st.liouvillian_residual(model);
    if residual > RESIDUAL_TOL {
        return Err(Error::Numerical(format!("steady-state residual {residual:.3e} exceeds tolerance")));
    }
    st.require_full_rank()?;
    Ok(st)
}

fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)])
}

fn sigma_minus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[real(0.0), real(0.0), real(1.0), real(0.0)])
}

fn sigma_plus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(0.0), real(0.0)])
}

fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[real(0.0), c(0.0, -1.0), c(0.0, 1.0), real(0.0)])
}

/// Qubit driven by thermal (z) and biased (x) noise, parameterized by the
/// shared rate gap Γ = γ_↓ − γ_↑ = γ_− − γ_+.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub omega: f64,
    pub beta: f64,
    pub eta: f64,
    pub gamma_gap: f64,
}

/// Absolute qubit rates, for cases the gap equation cannot resolve (β = 0 or η = 0)
/// or when one noise source is switched off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitRates {
    pub omega: f64,
    pub beta: f64,
    pub eta: f64,
    pub gamma_down: f64,
    pub gamma_up: f64,
    #[serde(default)]
    pub gamma_minus: f64,
    #[serde(default)]
    pub gamma_plus: f64,
}

impl QubitParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.omega, self.beta, self.eta, self.gamma_gap];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::ModelValidation("qubit parameters must be finite".into()));
        }
        if self.omega <= 0.0 {
            return Err(Error::ModelValidation("omega must be > 0".into()));
        }
        if self.beta < 0.0 || self.eta < 0.0 {
            return Err(Error::ModelValidation("beta and eta must be >= 0".into()));
        }
        if self.gamma_gap <= 0.0 {
            return Err(Error::ModelValidation("gamma_gap must be > 0".into()));
        }
        Ok(())
    }

    /// Solves γ_↓ − γ_↑ = Γ with γ_↑ = γ_↓ e^{−βω}, and likewise for the x pair.
    pub fn resolve_rates(&self) -> Result<QubitRates> {
        self.validate()?;
        let thermal = self.beta * self.omega;
        if thermal == 0.0 || self.eta == 0.0 {
            return Err(Error::RateResolution(format!(
                "beta*omega = {thermal} and eta = {} must both be > 0 for the gap equation; \
                 use the qubit-rates preset to give absolute rates",
                self.eta
            )));
        }
        let gamma_down = self.gamma_gap / -(-thermal).exp_m1();
        let gamma_minus = self.gamma_gap / -(-self.eta).exp_m1();
        Ok(QubitRates {
            omega: self.omega,
            beta: self.beta,
            eta: self.eta,
            gamma_down,
            gamma_up: gamma_down - self.gamma_gap,
            gamma_minus,
            gamma_plus: gamma_minus - self.gamma_gap,
        })
    }
}

/// Qubit model from the gap parameterization; both detailed-balance pairs declared.
pub fn qubit_preset(params: &QubitParams) -> Result<QuantumModel> {
    qubit_from_rates(&params.resolve_rates()?)
}

/// Channel order: ↓, ↑, −, + (a pair is omitted when both of its rates are zero).
pub fn qubit_from_rates(rates: &QubitRates) -> Result<QuantumModel> {
    let r = rates;
    for x in [r.omega, r.beta, r.eta, r.gamma_down, r.gamma_up, r.gamma_minus, r.gamma_plus] {
        if !x.is_finite() {
            return Err(Error::ModelValidation("qubit rates must be finite".into()));
        }
    }
    if [r.gamma_down, r.gamma_up, r.gamma_minus, r.gamma_plus].iter().any(|&g| g < 0.0) {
        return Err(Error::ModelValidation("rates must be >= 0".into()));
    }
    let h = pauli_z() * real(r.omega / 2.0);
    let mut channels = Vec::new();
    let mut pairs = Vec::new();
    if r.gamma_down > 0.0 || r.gamma_up > 0.0 {
        let thermal = r.beta * r.omega;
        channels.push(JumpChannel::new(sigma_minus() * real(r.gamma_down.sqrt()), thermal));
        channels.push(JumpChannel::new(sigma_plus() * real(r.gamma_up.sqrt()), -thermal));
        pairs.push((channels.len() - 2, channels.len() - 1));
    }
    if r.gamma_minus > 0.0 || r.gamma_plus > 0.0 {
        let sz = pauli_z();
        let isy = pauli_y() * I;
        channels.push(JumpChannel::new((&sz - &isy) * real(r.gamma_minus.sqrt() / 2.0), r.eta));
        channels.push(JumpChannel::new((&sz + &isy) * real(r.gamma_plus.sqrt() / 2.0), -r.eta));
        pairs.push((channels.len() - 2, channels.len() - 1));
    }
    QuantumModel::new(h, channels, pairs)
}

/// Qubit with only the thermal pair, rates from the gap Γ = γ_↓ − γ_↑.
pub fn thermal_qubit(omega: f64, beta: f64, gamma_gap: f64) -> Result<QuantumModel> {
    let thermal = beta * omega;
    if !(thermal > 0.0 && gamma_gap > 0.0) {
        return Err(Error::RateResolution("thermal qubit needs beta*omega > 0 and gamma_gap > 0".into()));
    }
    let gamma_down = gamma_gap / -(-thermal).exp_m1();
    qubit_from_rates(&QubitRates {
        omega,
        beta,
        eta: 0.0,
        gamma_down,
        gamma_up: gamma_down - gamma_gap,
        gamma_minus: 0.0,
        gamma_plus: 0.0,
    })
}

/// One channel in the JSON model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub operator: Vec<[f64; 2]>,
    pub env_entropy: f64,
}

/// JSON form of an explicit model: matrices as row-major `[re, im]` lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitModel {
    pub dim: usize,
    pub hamiltonian: Vec<[f64; 2]>,
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub pairs: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset")]
pub enum PresetSpec {
    #[serde(rename = "qubit")]
    Qubit(QubitParams),
    #[serde(rename = "qubit-rates")]
    QubitRates(QubitRates),
}

/// Model document: either a named preset or explicit matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Preset(PresetSpec),
    Explicit(ExplicitModel),
}

fn matrix_from_flat(dim: usize, flat: &[[f64; 2]], what: &str) -> Result<CMatrix> {
    if flat.len() != dim * dim {
        return Err(Error::ModelValidation(format!(
            "{what} has {} entries, expected {}",
            flat.len(),
            dim * dim
        )));
    }
    let entries: Vec<Complex64> = flat.iter().map(|&[re, im]| c(re, im)).collect();
    Ok(CMatrix::from_row_slice(dim, dim, &entries))
}

impl ModelSpec {
    pub fn build(&self) -> Result<QuantumModel> {
        match self {
            ModelSpec::Preset(PresetSpec::Qubit(p)) => qubit_preset(p),
            ModelSpec::Preset(PresetSpec::QubitRates(r)) => qubit_from_rates(r),
            ModelSpec::Explicit(m) => {
                let h = matrix_from_flat(m.dim, &m.hamiltonian, "hamiltonian")?;
                let channels = m
                    .channels
                    .iter()
                    .enumerate()
                    .map(|(k, ch)| {
                        Ok(JumpChannel::new(
                            matrix_from_flat(m.dim, &ch.operator, &format!("channel {k} operator"))?,
                            ch.env_entropy,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let pairs = m.pairs.iter().map(|&[a, b]| (a, b)).collect();
                QuantumModel::new(h, channels, pairs)
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vectorize;

    fn preset() -> QubitParams {
        QubitParams {
            omega: 1.0,
            beta: 0.2,
            eta: 0.5,
            gamma_gap: 0.01,
        }
    }

    #[test]
    fn gap_is_reproduced() {
        let r = preset().resolve_rates().unwrap();
        assert!((r.gamma_down - r.gamma_up - 0.01).abs() < 1e-16);
        assert!((r.gamma_minus - r.gamma_plus - 0.01).abs() < 1e-16);
        assert!((r.gamma_down / r.gamma_up - 0.2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn zero_beta_or_eta_refuses_gap_resolution() {
        for (beta, eta) in [(0.0, 0.5), (0.2, 0.0), (0.0, 0.0)] {
            let p = QubitParams { beta, eta, ..preset() };
            assert!(matches!(qubit_preset(&p), Err(Error::RateResolution(_))));
        }
    }

    #[test]
    fn pairing_holds_entrywise_for_preset() {
        let m = qubit_preset(&preset()).unwrap();
        let ch = m.channels();
        let lhs = &ch[0].operator;
        let rhs = ch[1].operator.adjoint() * real((0.2f64 / 2.0).exp());
        assert!(max_abs_diff(lhs, &rhs) < 1e-14);
        assert_eq!(m.partner(0), Some(1));
        assert_eq!(m.partner(3), Some(2));
    }

    #[test]
    fn broken_pairing_is_rejected() {
        let r = QubitRates {
            omega: 1.0,
            beta: 0.2,
            eta: 0.0,
            gamma_down: 0.05,
            gamma_up: 0.05,
            gamma_minus: 0.0,
            gamma_plus: 0.0,
        };
        assert!(matches!(qubit_from_rates(&r), Err(Error::ModelValidation(_))));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let h = CMatrix::identity(2, 2);
        let l = CMatrix::identity(3, 3);
        let err = QuantumModel::new(h, vec![JumpChannel::new(l, 0.0)], vec![]).unwrap_err();
        assert!(matches!(err, Error::ModelValidation(_)));
    }

    #[test]
    fn non_hermitian_hamiltonian_is_rejected() {
        let h = CMatrix::from_row_slice(2, 2, &[real(0.0), real(1.0), real(0.0), real(0.0)]);
        assert!(QuantumModel::new(h, vec![], vec![]).is_err());
    }

    #[test]
    fn commutator_only_liouvillian_kills_diagonal_states() {
        let m = QuantumModel::new(pauli_z() * real(0.5), vec![], vec![]).unwrap();
        let lv = build_liouvillian(&m);
        let rho = CMatrix::from_row_slice(2, 2, &[real(0.3), real(0.0), real(0.0), real(0.7)]);
        let out = &lv * vectorize(&rho);
        assert!(out.iter().all(|z| z.norm() < 1e-15));
        // and the commutator part is nonzero on coherences
        let coh = CMatrix::from_row_slice(2, 2, &[real(0.5), real(0.5), real(0.5), real(0.5)]);
        assert!((&lv * vectorize(&coh)).iter().any(|z| z.norm() > 0.1));
    }

    #[test]
    fn liouvillian_matrix_matches_generator() {
        let m = qubit_preset(&preset()).unwrap();
        let lv = build_liouvillian(&m);
        let rho = CMatrix::from_row_slice(2, 2, &[real(0.6), c(0.1, -0.2), c(0.1, 0.2), real(0.4)]);
        let via_matrix = unvectorize(&(&lv * vectorize(&rho)), 2);
        assert!(max_abs_diff(&via_matrix, &m.apply_generator(&rho)) < 1e-12);
    }

    #[test]
    fn maximally_mixed_limit() {
        let r = QubitRates {
            omega: 1.0,
            beta: 0.0,
            eta: 0.0,
            gamma_down: 0.01,
            gamma_up: 0.01,
            gamma_minus: 0.02,
            gamma_plus: 0.02,
        };
        let st = steady_state(&qubit_from_rates(&r).unwrap()).unwrap();
        let half = CMatrix::identity(2, 2) * real(0.5);
        assert!(max_abs_diff(st.density(), &half) < 1e-12);
        assert!((st.pi_min() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_rate_model_has_non_unique_steady_state() {
        let m = QuantumModel::new(pauli_z() * real(0.5), vec![], vec![]).unwrap();
        assert!(matches!(steady_state(&m), Err(Error::NonUniqueSteadyState { .. })));
    }

    #[test]
    fn rank_deficient_steady_state_is_reported() {
        // pure decay to the ground state
        let r = QubitRates {
            omega: 1.0,
            beta: 0.0,
            eta: 0.0,
            gamma_down: 0.1,
            gamma_up: 0.0,
            gamma_minus: 0.0,
            gamma_plus: 0.0,
        };
        let h = pauli_z() * real(r.omega / 2.0);
        let m = QuantumModel::new(h, vec![JumpChannel::new(sigma_minus() * real(0.1f64.sqrt()), 0.0)], vec![])
            .unwrap();
        assert!(matches!(steady_state(&m), Err(Error::RankDeficientSteadyState { .. })));
    }

    #[test]
    fn eigenvalues_descend_and_reconstruct() {
        let st = steady_state(&qubit_preset(&preset()).unwrap()).unwrap();
        assert!(st.eigenvalues()[0] >= st.eigenvalues()[1]);
        assert!(max_abs_diff(&st.reconstruct(), st.density()) < 1e-10);
        for v in st.eigenvectors() {
            let big = v.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
            assert!(big.im.abs() < 1e-14 && big.re > 0.0);
        }
    }

    #[test]
    fn json_round_trip_of_explicit_model() {
        let m = qubit_preset(&preset()).unwrap();
        let text = serde_json::to_string(&ModelSpec::Explicit(m.to_spec())).unwrap();
        let back = ModelSpec::from_json(&text).unwrap().build().unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_preset_parses() {
        let spec = ModelSpec::from_json(r#"{"preset":"qubit","omega":1,"beta":0.2,"eta":0.5,"gamma_gap":0.01}"#)
            .unwrap();
        assert_eq!(spec, ModelSpec::Preset(PresetSpec::Qubit(preset())));
        let bad = ModelSpec::from_json(r#"{"preset":"qubit","omega":1,"beta":0,"eta":0,"gamma_gap":0.01}"#).unwrap();
        assert!(matches!(bad.build(), Err(Error::RateResolution(_))));
    }

    #[test]
    fn default_dt_for_preset() {
        let m = qubit_preset(&preset()).unwrap();
        assert!((m.default_dt() - 0.01).abs() < 1e-15);
    }
}
