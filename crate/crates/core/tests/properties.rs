//! Property tests: reality, exact derivatives against finite differences,
//! torus periodicity, exact transform round trips, and small-divisor
//! monotonicity on randomized inputs.

use num_complex::Complex64;
use proptest::prelude::*;

use microdrift_core::divisors::SmallDivisorProfile;
use microdrift_core::hamiltonian::{Angles, FourierPerturbation, NearIntegrableSystem};
use microdrift_core::intmat::IntMatrix;
use microdrift_core::poly::{CPolynomial, Polynomial};
use microdrift_core::resonance::transform_system;

fn small_poly(dim: usize, seed: &[f64]) -> Polynomial {
    let mut p = Polynomial::zero(dim);
    let mut alpha = vec![0u32; dim];
    for (i, &c) in seed.iter().enumerate() {
        alpha.iter_mut().for_each(|a| *a = 0);
        alpha[i % dim] = (i % 3) as u32;
        if dim > 1 {
            alpha[(i + 1) % dim] = (i % 2) as u32;
        }
        p.add_term(alpha.clone(), c);
    }
    p
}

fn perturbation(dim: usize, modes: &[(Vec<i64>, f64)]) -> FourierPerturbation {
    let mut f = FourierPerturbation::new(dim);
    for (k, a) in modes {
        if k.iter().any(|&x| x != 0) || *a != 0.0 {
            f.add_cosine(k, *a).unwrap();
        }
    }
    f
}

fn mode_strategy(dim: usize) -> impl Strategy<Value = Vec<(Vec<i64>, f64)>> {
    prop::collection::vec(
        (prop::collection::vec(-3i64..=3, dim), -1.0f64..1.0),
        1..4,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reality_holds_for_cosine_tables(
        modes in mode_strategy(2),
        theta in prop::collection::vec(0.0f64..1.0, 2),
        actions in prop::collection::vec(-0.5f64..0.5, 2),
    ) {
        let f = perturbation(2, &modes);
        f.validate_reality().unwrap();
        let z = f.eval_complex(&theta, &actions).unwrap();
        prop_assert!(z.im.abs() < 1e-12);
    }

    #[test]
    fn fourier_gradients_match_finite_differences(
        modes in mode_strategy(2),
        theta in prop::collection::vec(0.0f64..1.0, 2),
        actions in prop::collection::vec(-0.5f64..0.5, 2),
    ) {
        let mut f = perturbation(2, &modes);
        // give the coefficients genuine action dependence
        let poly = Polynomial::monomial(2, &[1, 1], 0.3).unwrap();
        f.add_cosine_poly(&[1, -1], 0.4, &poly).unwrap();
        let h = 1e-5;
        let (gt, ga) = f.gradients(&theta, &actions).unwrap();
        for j in 0..2 {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += h;
            tm[j] -= h;
            let fd = (f.eval(&tp, &actions).unwrap() - f.eval(&tm, &actions).unwrap()) / (2.0 * h);
            let scale = gt[j].abs().max(1.0);
            prop_assert!((gt[j] - fd).abs() <= 1e-6 * scale, "dtheta_{j}: {} vs {}", gt[j], fd);

            let mut ap = actions.clone();
            let mut am = actions.clone();
            ap[j] += h;
            am[j] -= h;
            let fd = (f.eval(&theta, &ap).unwrap() - f.eval(&theta, &am).unwrap()) / (2.0 * h);
            let scale = ga[j].abs().max(1.0);
            prop_assert!((ga[j] - fd).abs() <= 1e-6 * scale, "dI_{j}: {} vs {}", ga[j], fd);
        }
    }

    #[test]
    fn h_derivatives_match_finite_differences(
        coeffs in prop::collection::vec(-1.0f64..1.0, 4),
        actions in prop::collection::vec(-0.5f64..0.5, 2),
    ) {
        let h = small_poly(2, &coeffs);
        let step = 1e-5;
        let grad = h.gradient(&actions);
        let hess = h.hessian(&actions);
        for j in 0..2 {
            let mut ap = actions.clone();
            let mut am = actions.clone();
            ap[j] += step;
            am[j] -= step;
            let fd = (h.eval(&ap) - h.eval(&am)) / (2.0 * step);
            prop_assert!((grad[j] - fd).abs() <= 1e-6 * grad[j].abs().max(1.0));
            let gp = h.gradient(&ap);
            let gm = h.gradient(&am);
            for (i, row) in hess.iter().enumerate() {
                let fd = (gp[i] - gm[i]) / (2.0 * step);
                prop_assert!((row[j] - fd).abs() <= 1e-6 * row[j].abs().max(1.0));
                prop_assert_eq!(row[j], hess[j][i]);
            }
        }
    }

    #[test]
    fn torus_periodicity_exact_on_dyadics(
        modes in mode_strategy(2),
        num in prop::collection::vec(0u32..1024, 2),
        actions in prop::collection::vec(-0.5f64..0.5, 2),
        shift_dim in 0usize..2,
    ) {
        let f = perturbation(2, &modes);
        let theta: Vec<f64> = num.iter().map(|&v| v as f64 / 1024.0).collect();
        let base = f.eval(&theta, &actions).unwrap();
        let mut moved = theta.clone();
        moved[shift_dim] += 1.0;
        let reduced = Angles::new(moved);
        prop_assert_eq!(f.eval(&reduced, &actions).unwrap(), base);
    }

    #[test]
    fn transform_round_trip_is_exact(
        modes in mode_strategy(2),
        coeffs in prop::collection::vec(-1.0f64..1.0, 3),
        shear in -3i64..=3,
    ) {
        let f = perturbation(2, &modes);
        let h = small_poly(2, &coeffs);
        let sys = NearIntegrableSystem::new(2, h, f, 1e-3, 2.0).unwrap();
        let a = IntMatrix::from_rows(vec![vec![1, shear], vec![0, 1]]).unwrap();
        let a_inv = a.inverse_unimodular().unwrap();
        let there = transform_system(&sys, &a).unwrap();
        let back = transform_system(&there, &a_inv).unwrap();
        let orig: Vec<(Vec<i64>, CPolynomial)> =
            sys.f().modes().map(|(k, c)| (k.to_vec(), c.clone())).collect();
        let round: Vec<(Vec<i64>, CPolynomial)> =
            back.f().modes().map(|(k, c)| (k.to_vec(), c.clone())).collect();
        prop_assert_eq!(orig, round);
    }

    #[test]
    fn psi_and_delta_are_monotone(
        w1 in 0.3f64..2.0,
        w2 in 0.3f64..2.0,
    ) {
        // irrational tilt dodges exact resonances in the searched ball
        let omega = [w1, w2 * std::f64::consts::SQRT_2 + 0.01];
        if let Ok(p) = SmallDivisorProfile::build(&omega, 30, 1.0) {
            for q in 2..=30u32 {
                prop_assert!(p.psi(q).unwrap() >= p.psi(q - 1).unwrap());
                prop_assert!(
                    q as f64 * p.psi(q).unwrap()
                        >= (q - 1) as f64 * p.psi(q - 1).unwrap()
                );
            }
            let x0 = p.psi(1).unwrap();
            let mut prev = 0.0;
            for i in 0..20 {
                let x = x0 * (1.0 + i as f64);
                match p.delta(x) {
                    Ok(d) => {
                        prop_assert!(d >= prev);
                        prev = d;
                    }
                    Err(_) => break,
                }
            }
        }
    }

    #[test]
    fn mode_scaling_is_linear(
        modes in mode_strategy(2),
        s in -2.0f64..2.0,
        theta in prop::collection::vec(0.0f64..1.0, 2),
    ) {
        // resonant averaging is linear on mode tables
        let f = perturbation(2, &modes);
        let g = f.scaled(s);
        let sum = f.plus(&g).unwrap();
        let d = 1;
        let avg_sum = sum.filter_to_lattice(d);
        let expect = f
            .filter_to_lattice(d)
            .plus(&f.filter_to_lattice(d).scaled(s))
            .unwrap();
        let actions = [0.1, -0.2];
        let a = avg_sum.eval(&theta, &actions).unwrap();
        let b = expect.eval(&theta, &actions).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn projection_is_idempotent_exactly() {
    let mut f = FourierPerturbation::new(3);
    f.add_cosine(&[1, 0, 0], 0.5).unwrap();
    f.add_cosine(&[1, 1, 0], 0.25).unwrap();
    f.add_cosine(&[0, 2, 1], 0.125).unwrap();
    let once = f.filter_to_lattice(1);
    let twice = once.filter_to_lattice(1);
    let a: Vec<(Vec<i64>, CPolynomial)> =
        once.modes().map(|(k, c)| (k.to_vec(), c.clone())).collect();
    let b: Vec<(Vec<i64>, CPolynomial)> =
        twice.modes().map(|(k, c)| (k.to_vec(), c.clone())).collect();
    assert_eq!(a, b);
}

#[test]
fn reality_violation_reported_with_magnitude() {
    let mut f = FourierPerturbation::new(2);
    f.insert_mode(vec![1, 0], CPolynomial::constant(2, Complex64::new(0.0, 0.5))).unwrap();
    f.insert_mode(vec![-1, 0], CPolynomial::constant(2, Complex64::new(0.0, 0.5))).unwrap();
    assert!(f.validate_reality().is_err());
}
