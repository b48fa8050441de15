use proptest::prelude::*;
use qmartin_core::analysis::{martingale_branch_test, run_ensemble, stopping_ft, stopping_times, StoppingRule};
use qmartin_core::entropy::{entropy_series, EntropySeries};
use qmartin_core::linalg::{real, CMatrix};
use qmartin_core::model::{qubit_preset, steady_state, QuantumModel, SteadyState};
use qmartin_core::rng::StreamRng;
use qmartin_core::trajectory::simulate_stream;
use qmartin_core::{Integrator, QubitParams, SimOptions, StreamId};

fn preset() -> (QuantumModel, SteadyState) {
    let m = qubit_preset(&QubitParams { omega: 1.0, beta: 0.2, eta: 0.5, gamma_gap: 0.01 }).unwrap();
    let s = steady_state(&m).unwrap();
    (m, s)
}

fn zero_rate() -> (QuantumModel, SteadyState) {
    let h = CMatrix::from_row_slice(2, 2, &[real(0.5), real(0.0), real(0.0), real(-0.5)]);
    let m = QuantumModel::new(h, vec![], vec![]).unwrap();
    let st = SteadyState::for_model(&m, CMatrix::from_row_slice(2, 2, &[real(0.65), real(0.0), real(0.0), real(0.35)])).unwrap();
    (m, st)
}

fn opts(m: &QuantumModel, t: f64) -> SimOptions {
    SimOptions::for_model(m, t).with_integrator(Integrator::Exact)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn fixed_time_rule_equals_ensemble_estimator() {
    let (m, st) = preset();
    let t = 100.0;
    let o = opts(&m, t);
    let ens = run_ensemble(&m, &st, t, &o, 2000, 17).unwrap();
    let stop = stopping_ft(&m, &st, &StoppingRule::fixed_time(t), &o, 2000, 17).unwrap();
    assert_eq!(stop.exp_neg_mar, ens.exp_neg_mar);
    assert_eq!(stop.mean_mar.mean, ens.mean_mar.mean);
    assert_eq!(stop.stopped_cap, 2000);
}

#[test]
fn distant_lower_threshold_reduces_to_one_sided() {
    let (m, st) = preset();
    let cap = 200.0;
    let o = opts(&m, cap);
    let one = stopping_ft(&m, &st, &StoppingRule::first_passage(0.3, cap), &o, 2000, 4).unwrap();
    let two = stopping_ft(&m, &st, &StoppingRule::two_sided(0.3, -50.0, cap), &o, 2000, 4).unwrap();
    assert_eq!(two.stopped_lower, 0);
    assert_eq!(one.exp_neg_mar, two.exp_neg_mar);
    assert_eq!(one.mean_stopping_time, two.mean_stopping_time);
}

#[test]
fn stopping_results_ignore_thread_count() {
    let (m, st) = preset();
    let cap = 200.0;
    let o = opts(&m, cap);
    let rule = StoppingRule::two_sided(0.3, -0.4, cap);
    let a = in_pool(1, || stopping_ft(&m, &st, &rule, &o, 500, 9).unwrap());
    let b = in_pool(4, || stopping_ft(&m, &st, &rule, &o, 500, 9).unwrap());
    assert_eq!(a.running, b.running);
    assert_eq!(a.exp_neg_mar, b.exp_neg_mar);
    assert_eq!(a.stops, b.stops);
}

#[test]
fn zero_rate_model_gives_exactly_one_for_every_rule() {
    let (m, st) = zero_rate();
    let o = SimOptions { dt: 0.01, sample_every: 10, integrator: Integrator::Euler };
    for rule in [StoppingRule::fixed_time(2.0), StoppingRule::first_passage(0.3, 2.0), StoppingRule::two_sided(0.3, -0.4, 2.0)] {
        let r = stopping_ft(&m, &st, &rule, &o, 50, 1).unwrap();
        assert_eq!(r.exp_neg_mar.mean, 1.0);
        assert_eq!(r.exp_neg_mar.se, 0.0);
    }
}

#[test]
fn branching_at_origin_targets_one() {
    let (m, st) = preset();
    let o = SimOptions { dt: 0.01, sample_every: 100, integrator: Integrator::Exact };
    let r = martingale_branch_test(&m, &st, 0.0, 10.0, &o, 5, 50, 3.0, 2).unwrap();
    for p in &r.parents {
        assert_eq!(p.n_tau, p.n0);
        assert_eq!(p.s_unc_tau, 0.0);
        assert!((p.mar.target - 1.0).abs() < 1e-15);
        assert!((p.tot.target - 1.0).abs() < 1e-15);
    }
}

fn truncate(series: &EntropySeries, end: usize) -> EntropySeries {
    EntropySeries {
        grid: series.grid[..=end].to_vec(),
        s_env: series.s_env[..=end].to_vec(),
        s_mar: series.s_mar[..=end].to_vec(),
        s_unc_candidates: series.s_unc_candidates[..=end].to_vec(),
        s_unc_virtual: None,
        s_tot_virtual: None,
        running_inf_mar: series.running_inf_mar[..=end].to_vec(),
        running_inf_tot: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stopping_decision_uses_no_future(seed in 0u64..1_000_000, upper in 0.05f64..1.0, lower in -1.0f64..-0.05) {
        let (m, st) = preset();
        let o = SimOptions { dt: 0.01, sample_every: 20, integrator: Integrator::Exact };
        let rec = simulate_stream(&m, &st, 100.0, &o, StreamId::new(seed, 0)).unwrap();
        let series = entropy_series::<StreamRng>(&rec, &st, None).unwrap();
        let rule = StoppingRule::two_sided(upper, lower, 100.0);
        let full = stopping_times(&series, &rule).unwrap();
        let end = series.grid.iter().position(|&t| t == full.time).unwrap();
        // a rule capped at T sees only [0, T] and must stop at the same point
        let capped = StoppingRule { cap: full.time.max(1e-9), ..rule };
        if full.time > 0.0 {
            let again = stopping_times(&truncate(&series, end), &capped).unwrap();
            prop_assert_eq!(again.time, full.time);
            prop_assert_eq!(again.s_mar, full.s_mar);
        }
        prop_assert!(series.s_mar[..end].iter().all(|&s| s < upper && s > lower));
    }
}
