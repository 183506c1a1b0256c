//! Scaling behavior of the normal-form remainder on the golden-ratio ladder,
//! and consistency of the drift protocol under conjugation.
//!
//! The ladder's Fibonacci modes realize divisors `phi^{-m}`, so the
//! truncation order `Q(eps) = floor(Delta(kappa / sqrt(eps)))` walks through
//! ever-worse small divisors as `eps` shrinks and the displacement of the
//! transformation tracks the `sqrt(eps) mu(sqrt(eps))` envelope
//! (`mu ~ eps^{1/4}` here, so the displacement exponent sits near 3/4
//! instead of the periodic case's 1).

use microdrift_core::divisors::SmallDivisorProfile;
use microdrift_core::drift::{conjugacy_consistency, AdaptedLab};
use microdrift_core::normal_form::verify_lemma_estimates;
use microdrift_core::resonance::adapt_system;
use microdrift_core::systems;

#[test]
fn golden_ladder_displacement_tracks_mu() {
    let sys = systems::golden_ladder_system(1e-4, 9).unwrap();
    let res = systems::golden_resonance().unwrap();
    let adapted = adapt_system(&sys, &res).unwrap();
    let profile = SmallDivisorProfile::build(&adapted.omega_tilde, 128, 1.0).unwrap();
    let omega = [0.0, 1.0, systems::GOLDEN_RATIO];
    let eps_list = [1e-3, 1e-4, 1e-5, 1e-6];
    let table =
        verify_lemma_estimates(&adapted.system, &omega, 1, &profile, &eps_list, 220, 0).unwrap();

    // truncation order grows as Delta(kappa / sqrt(eps))
    let qs: Vec<u32> = table.rows.iter().map(|r| r.q).collect();
    assert_eq!(qs, vec![5, 9, 17, 34]);

    let slope = table.fit_displacement.unwrap().slope;
    assert!(
        (slope - 0.75).abs() <= 0.1,
        "golden displacement slope {slope} outside 0.75 +- 0.1"
    );
    assert!(
        table.stability_displacement <= 2.0,
        "displacement constant varies {}x over the small-eps half",
        table.stability_displacement
    );
}

#[test]
fn conjugated_run_agrees_with_direct_run() {
    let sys = systems::pendulum_system(1e-4).unwrap();
    let res = systems::pendulum_resonance().unwrap();
    let lab = AdaptedLab::with_auto_qmax(&sys, &res, 1.0, 1e-4).unwrap();
    let (discrepancy, allowance) = conjugacy_consistency(&lab, 1e-4, 200).unwrap();
    assert!(
        discrepancy <= allowance,
        "conjugated drift differs by {discrepancy:.3e}, allowed {allowance:.3e}"
    );
}

#[test]
fn two_mode_conjugacy_consistency() {
    let sys = systems::two_mode_system(1e-4).unwrap();
    let res = systems::pendulum_resonance().unwrap();
    let lab = AdaptedLab::with_auto_qmax(&sys, &res, 1.0, 1e-4).unwrap();
    let (discrepancy, allowance) = conjugacy_consistency(&lab, 1e-4, 200).unwrap();
    assert!(
        discrepancy <= allowance,
        "conjugated drift differs by {discrepancy:.3e}, allowed {allowance:.3e}"
    );
}
