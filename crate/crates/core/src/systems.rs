//! The laboratory's stock example systems.
//!
//! All use `h = |I|^2 / 2`, so the frequency at a point is the point itself
//! and resonances are read off directly.

use crate::error::Result;
use crate::hamiltonian::{FourierPerturbation, NearIntegrableSystem, TWO_PI};
use crate::poly::Polynomial;
use crate::resonance::{Rational, ResonanceData};

pub const GOLDEN_RATIO: f64 = 1.618033988749895;

fn kinetic(n: usize) -> Polynomial {
    Polynomial::half_square_norm(n)
}

fn amplitude() -> f64 {
    1.0 / TWO_PI.powi(3)
}

/// Pendulum family: `n = 2`, `f = (2 pi)^-3 cos(2 pi theta_1)`, resonant at
/// `I* = (0, 1)` with `omega = (0, 1)`.
pub fn pendulum_system(eps: f64) -> Result<NearIntegrableSystem> {
    let mut f = FourierPerturbation::new(2);
    f.add_cosine(&[1, 0], amplitude())?;
    NearIntegrableSystem::new(2, kinetic(2), f, eps, 2.0)
}

pub fn pendulum_resonance() -> Result<ResonanceData> {
    ResonanceData::from_rational(
        vec![0.0, 1.0],
        &[Rational::new(0, 1)?, Rational::new(1, 1)?],
    )
}

/// Pendulum plus one non-resonant mode `(2 pi)^-3 cos(2 pi (theta_1 +
/// theta_2))`; the extra mode feeds the transverse drift channel.
pub fn two_mode_system(eps: f64) -> Result<NearIntegrableSystem> {
    let mut f = FourierPerturbation::new(2);
    f.add_cosine(&[1, 0], amplitude())?;
    f.add_cosine(&[1, 1], amplitude())?;
    NearIntegrableSystem::new(2, kinetic(2), f, eps, 2.0)
}

/// Single amplitude-1 non-resonant mode `cos(2 pi (theta_1 + theta_2))` at
/// the `omega = (0, 1)` resonance; the normal-form benchmark.
pub fn single_mode_nf_system(eps: f64) -> Result<NearIntegrableSystem> {
    let mut f = FourierPerturbation::new(2);
    f.add_cosine(&[1, 1], 1.0)?;
    NearIntegrableSystem::new(2, kinetic(2), f, eps, 2.0)
}

pub fn nf_resonance() -> Result<ResonanceData> {
    pendulum_resonance()
}

/// Control violating (A.1): `omega = (1, phi)` is non-resonant, perturbation
/// `(2 pi)^-3 cos(2 pi (theta_1 + theta_2))`.
pub fn a1_control_system(eps: f64) -> Result<NearIntegrableSystem> {
    let mut f = FourierPerturbation::new(2);
    f.add_cosine(&[1, 1], amplitude())?;
    NearIntegrableSystem::new(2, kinetic(2), f, eps, 4.0)
}

pub fn a1_control_i_star() -> Vec<f64> {
    vec![1.0, GOLDEN_RATIO]
}

/// Control violating (A.2): resonant `omega = (0, 1)` but the only mode is
/// non-resonant, so the averaged perturbation is constant.
pub fn a2_control_system(eps: f64) -> Result<NearIntegrableSystem> {
    let mut f = FourierPerturbation::new(2);
    f.add_cosine(&[1, 1], amplitude())?;
    NearIntegrableSystem::new(2, kinetic(2), f, eps, 2.0)
}

pub fn a2_control_resonance() -> Result<ResonanceData> {
    pendulum_resonance()
}

/// Fibonacci pairs `(F_{m+1}, -F_m)` have divisors `|F_{m+1} - F_m phi| =
/// phi^{-m}` against `omega_tilde = (1, phi)`; a ladder of such modes makes
/// the normal-form truncation order `Q(eps)` sweep through ever-worse
/// divisors as `eps` shrinks.
pub fn golden_ladder_system(eps: f64, rungs: usize) -> Result<NearIntegrableSystem> {
    let mut f = FourierPerturbation::new(3);
    f.add_cosine(&[1, 0, 0], amplitude())?;
    let mut fib = (1i64, 1i64); // (F_m, F_{m+1})
    for _ in 0..rungs {
        let (fm, fm1) = fib;
        f.add_cosine(&[0, fm1, -fm], 1.0 / (TWO_PI * TWO_PI * fm1 as f64))?;
        fib = (fm1, fm + fm1);
    }
    NearIntegrableSystem::new(3, kinetic(3), f, eps, 4.0)
}

/// Resonance of the golden ladder: `I* = (0, 1, phi)`, adapted with `d = 1`
/// and `omega_tilde = (1, phi)`.
pub fn golden_resonance() -> Result<ResonanceData> {
    ResonanceData::from_adapted(vec![0.0, 1.0, GOLDEN_RATIO], 1, vec![1.0, GOLDEN_RATIO])
}
