use num_complex::Complex64;
use proptest::prelude::*;
use qmartin_core::entropy::{delta_s_mar, delta_s_tot, delta_s_unc, entropy_series, fidelity_weight, EndpointEntropy};
use qmartin_core::model::{qubit_preset, steady_state, QuantumModel, SteadyState};
use qmartin_core::rng::{Lane, StreamRng};
use qmartin_core::trajectory::{measure_final, simulate_stream, PureState};
use qmartin_core::{QubitParams, SimOptions, StreamId};

fn preset() -> (QuantumModel, SteadyState) {
    let m = qubit_preset(&QubitParams { omega: 1.0, beta: 0.2, eta: 0.5, gamma_gap: 0.01 }).unwrap();
    let s = steady_state(&m).unwrap();
    (m, s)
}

fn state(v: &[f64]) -> Option<PureState> {
    let amps = vec![Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3])];
    if amps.iter().map(|a| a.norm_sqr()).sum::<f64>() < 1e-6 {
        return None;
    }
    PureState::new(amps).ok()
}

#[test]
fn mismatched_outcome_gives_log_ratio() {
    let (_, st) = preset();
    let psi = PureState::new(st.eigenvector(0).to_vec()).unwrap();
    let u = delta_s_unc(1, &psi, &st).unwrap();
    // ln(π_0/π_1) from the null-space values
    let expected = (5.41706974273018838e-1f64 / 4.58293025726981162e-1).ln();
    assert!((u - expected).abs() < 1e-12);
    assert_eq!(delta_s_unc(0, &psi, &st).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn weight_matches_density_expectation(v in proptest::collection::vec(-1.0f64..1.0, 4)) {
        let (_, st) = preset();
        let Some(psi) = state(&v) else { return Ok(()) };
        let a = psi.amplitudes();
        let rho = st.density();
        let mut direct = Complex64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                direct += a[i].conj() * rho[(i, j)] * a[j];
            }
        }
        let w = fidelity_weight(a, &st);
        prop_assert!((w - direct.re).abs() < 1e-12);
        prop_assert!(w >= st.pi_min() - 1e-15 && w <= st.pi_max() + 1e-15);
    }

    #[test]
    fn uncertainty_term_is_bounded(v in proptest::collection::vec(-1.0f64..1.0, 4), n in 0usize..2) {
        let (_, st) = preset();
        let Some(psi) = state(&v) else { return Ok(()) };
        let u = delta_s_unc(n, &psi, &st).unwrap();
        let bound = st.log_condition() + 1e-12;
        prop_assert!(u.abs() <= bound);
        let e = (-u).exp();
        prop_assert!(e >= st.pi_min() / st.pi_max() - 1e-12 && e <= st.pi_max() / st.pi_min() + 1e-12);
    }

    #[test]
    fn endpoint_decomposition_is_exact(v in proptest::collection::vec(-1.0f64..1.0, 4), n0 in 0usize..2, nf in 0usize..2, env in -5.0f64..5.0) {
        let (_, st) = preset();
        let Some(psi) = state(&v) else { return Ok(()) };
        let e = EndpointEntropy::new(n0, nf, psi.amplitudes(), env, &st);
        prop_assert!(e.decomposition_error() <= 1e-12);
        prop_assert!((e.mar - delta_s_mar(n0, &psi, env, &st).unwrap()).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn measured_records_decompose(seed in 0u64..1_000_000) {
        let (m, st) = preset();
        let opts = SimOptions { dt: 0.01, sample_every: 50, integrator: Default::default() };
        let id = StreamId::new(seed, 0);
        let rec = simulate_stream(&m, &st, 40.0, &opts, id).unwrap();
        let before = entropy_series::<StreamRng>(&rec, &st, None).unwrap();
        let measured = measure_final(rec, &st, &mut id.rng(Lane::Measurement)).unwrap();
        let after = entropy_series(&measured, &st, Some(&mut id.rng(Lane::Virtual))).unwrap();
        // ΔS_mar never sees the final projection
        prop_assert_eq!(&before.s_mar, &after.s_mar);
        let tot = delta_s_tot(&measured, &st).unwrap();
        let last = after.len() - 1;
        let unc = after.s_unc_candidates[last][measured.n_final.unwrap()];
        prop_assert!((tot - after.s_mar[last] - unc).abs() <= 1e-12);
        prop_assert!((after.s_tot_virtual.as_ref().unwrap()[last] - tot).abs() <= 1e-12);
        for (g, &t) in measured.grid.iter().enumerate() {
            let upto: f64 = measured.events.iter().filter(|e| e.time <= t + 1e-9).map(|e| m.channels()[e.channel].env_entropy).sum();
            prop_assert!((measured.env_entropy_cum[g] - upto).abs() < 1e-12);
        }
        for ev in &measured.events {
            let q = m.channels()[ev.channel].env_entropy.abs();
            prop_assert!(q == 0.2 || q == 0.5);
        }
    }
}
