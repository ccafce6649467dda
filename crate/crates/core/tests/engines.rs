//! Cross-module checks: exact engines against closed forms and against the
//! Monte Carlo engines run on the same chain.

use proptest::prelude::*;
use quenched_core::finite_chain::{block_diagnostics_exact, eta_exact, FiniteChain};
use quenched_core::intermittent::{IntermittentChain, ObservableSpec, UlamModel};
use quenched_core::quenched_mc::{block_diagnostics_mc, quenched_clt_report, run_replicas, KernelModel, PathRequest};
use std::sync::Arc;

// P(0,1) = 0.1, P(1,0) = 0.3, f = 1{0}: π = (3/4, 1/4), Var_π f = 3/16,
// second eigenvalue λ = 0.6, so η = Var (1 + λ)/(1 − λ) = 3/4.
fn biased_two_state() -> FiniteChain {
    FiniteChain::two_state(0.1, 0.3, [1.0, 0.0]).unwrap()
}

#[test]
fn eta_matches_two_state_closed_form() {
    let (eta, series) = eta_exact(&biased_two_state(), 10_000, 1e-15).unwrap();
    assert!((eta - 0.75).abs() < 1e-12, "eta {eta}");
    assert!(series.terms.len() > 10);
}

#[test]
fn identical_rows_center_exactly() {
    let mass = 0.6123456789012345;
    let c = FiniteChain::new(vec![vec![mass, 1.0 - mass]; 2], vec![1.0, 0.0], None).unwrap();
    assert!((c.stationary()[0] - mass).abs() <= 2.0 * f64::EPSILON);
    let pf = c.apply(c.observable());
    assert!(pf.iter().all(|v| v.abs() <= 4.0 * f64::EPSILON), "{pf:?}");
}

#[test]
fn quenched_variance_matches_exact_eta() {
    let c = biased_two_state();
    let ens = run_replicas(&c, 0, 2048, 4000, 31, &PathRequest::default()).unwrap();
    let rep = quenched_clt_report(&ens, 0.75, None).unwrap();
    assert!(
        (rep.variance - 0.75).abs() <= 4.0 * rep.variance_stderr + 0.01,
        "variance {} ± {}",
        rep.variance,
        rep.variance_stderr
    );
    assert!(rep.mean.abs() <= 4.0 * rep.mean_stderr + 0.05, "mean {}", rep.mean);
}

#[test]
fn replicas_are_reproducible_and_seed_dependent() {
    let c = biased_two_state();
    let req = PathRequest::default();
    let a = run_replicas(&c, 1, 64, 100, 7, &req).unwrap();
    let b = run_replicas(&c, 1, 64, 100, 7, &req).unwrap();
    let d = run_replicas(&c, 1, 64, 100, 8, &req).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.replicas, d.replicas);
}

#[test]
fn block_c1_monte_carlo_agrees_with_exact() {
    let c = FiniteChain::new(
        vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3], vec![0.4, 0.1, 0.5]],
        vec![1.0, -0.5, 2.0],
        None,
    )
    .unwrap();
    let exact = block_diagnostics_exact(&c, 0, 4, 3, &[1.0], 200, 11).unwrap();
    let km: &dyn KernelModel<usize> = &c;
    let mc = block_diagnostics_mc(&c, Some(km), 0, 4, 3, &[1.0], None, 4000, 12).unwrap();
    let se = mc.c1.stderr.unwrap();
    assert!(exact.c1.stderr.is_none());
    assert!(
        (mc.c1.value - exact.c1.value).abs() <= 4.0 * se,
        "mc {} ± {se}, exact {}",
        mc.c1.value,
        exact.c1.value
    );
    assert!((mc.eta_used - exact.eta_used).abs() < 1e-10);
}

#[test]
fn intermittent_observable_is_centered_under_density() {
    let model = Arc::new(UlamModel::build(0.25, 1024, 2.0).unwrap());
    let chain = IntermittentChain::new(model.clone(), ObservableSpec::indicator(0.5)).unwrap();
    let mean = model.integrate(chain.centered_cell_values());
    assert!(mean.abs() < 1e-12, "{mean}");
    let mass = model.integrate(&model.interval_averages(0.0, 0.5));
    assert!((chain.observable_mean() - mass).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_state_eta_closed_form(a in 0.05f64..0.95, b in 0.05f64..0.95, f0 in -3.0f64..3.0, f1 in -3.0f64..3.0) {
        let c = FiniteChain::two_state(a, b, [f0, f1]).unwrap();
        let lambda = 1.0 - a - b;
        let var = a * b / ((a + b) * (a + b)) * (f0 - f1) * (f0 - f1);
        let expected = var * (1.0 + lambda) / (1.0 - lambda);
        let (eta, _) = eta_exact(&c, 100_000, 1e-15).unwrap();
        prop_assert!((eta - expected).abs() <= 1e-9 * (1.0 + expected), "eta {} expected {}", eta, expected);
    }
}
