//! Randomised invariants of the master-equation machinery and the state
//! algebra.

mod support;

use proptest::prelude::*;
use support::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, ..ProptestConfig::default() })]

    #[test]
    fn trajectories_stay_physical(m in params_strategy()) {
        let d = trajectory_defects(&m, SMALL_CUTOFF, 0.5);
        prop_assert!(d.trace_error < 1e-8, "{d:?}");
        prop_assert!(d.hermitian_deviation < 1e-10, "{d:?}");
        prop_assert!(d.min_eigenvalue > -1e-8, "{d:?}");
    }

    #[test]
    fn generator_preserves_trace(m in params_strategy()) {
        prop_assert!(liouvillian_trace_defect(&m, SMALL_CUTOFF) < 1e-10);
    }

    #[test]
    fn steady_state_is_annihilated(m in params_strategy()) {
        let r = steady_residual(&m, SMALL_CUTOFF);
        prop_assert!(r < 1e-8, "residual {r}");
    }

    #[test]
    fn closed_evolution_matches_propagator(m in params_strategy(), t in 0.05..0.3f64) {
        let e = unitary_oracle_error(&m, 4, t);
        prop_assert!(e < 1e-9, "error {e}");
    }

    #[test]
    fn coherent_and_cat_identities(alpha in 0.3..2.5f64) {
        let (exact, truncated) = cat_identity_defects(alpha);
        prop_assert!(exact < 1e-10, "exact identities {exact}");
        prop_assert!(truncated < 1e-6, "truncation-limited identities {truncated}");
    }

    #[test]
    fn amplitudes_scale_exactly(lp in 0.01..2.0f64, k in 1.1..5.0f64, dq in -20.0..20.0f64, t in 0.1..3.0f64) {
        let d = amplitude_scaling_defect(lp, k, dq, t);
        prop_assert!(d < 1e-13, "defect {d}");
    }
}

#[test]
fn rabi_oscillation_follows_cosine() {
    let e = rabi_error();
    assert!(e < 1e-6, "{e}");
}

#[test]
fn closed_form_amplitudes_match_quadrature_off_grid() {
    let d = amplitude_quadrature_defect(&[-12.3, 3.3, 9.9], 0.7);
    assert!(d < 1e-10, "{d}");
}
