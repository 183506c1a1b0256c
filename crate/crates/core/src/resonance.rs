//! Resonant module of a frequency vector and the unimodular change of
//! coordinates that sends it to the span of the first `d` basis vectors.
//!
//! In adapted coordinates the frequency reads `omega = (0, omega_tilde)` with
//! a non-resonant block `omega_tilde`, and `Lambda^perp cap Z^n` is
//! `{0} x Z^{n-d}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{reduce_turn, NearIntegrableSystem};
use crate::intmat::{kernel_basis, unimodular_completion, IntMatrix};

/// Exact rational frequency component.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Rational {
    pub num: i64,
    pub den: i64,
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::Validation("rational with zero denominator".into()));
        }
        Ok(Rational { num, den })
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Basis of the saturated lattice `{k in Z^n : k . omega = 0}` of an exactly
/// rational frequency, as rows of a `(n-1) x n` matrix.
pub fn resonant_module(omega: &[Rational]) -> Result<IntMatrix> {
    if omega.len() < 2 {
        return Err(Error::Validation("need at least two frequency components".into()));
    }
    if omega.iter().any(|r| r.den == 0) {
        return Err(Error::Validation("rational with zero denominator".into()));
    }
    // clear denominators, then divide by the content
    let mut lcm: i64 = 1;
    for r in omega {
        let d = r.den.abs();
        lcm = lcm / gcd(lcm, d) * d;
    }
    let mut w: Vec<i64> = omega
        .iter()
        .map(|r| {
            let scale = lcm / r.den;
            r.num.checked_mul(scale).ok_or(Error::IntegerOverflow)
        })
        .collect::<Result<_>>()?;
    let content = w.iter().fold(0, |g, &x| gcd(g, x));
    if content == 0 {
        return Err(Error::ZeroFrequency);
    }
    w.iter_mut().for_each(|x| *x /= content);
    let rows = kernel_basis(&w)?;
    IntMatrix::from_rows(rows)
}

/// A resonant point together with its lattice data and adapted coordinates.
#[derive(Clone, Debug)]
pub struct ResonanceData {
    /// Resonant action point in the system's own coordinates.
    pub i_star: Vec<f64>,
    /// Frequency at `i_star`.
    pub omega: Vec<f64>,
    /// Dimension of the resonant module.
    pub d: usize,
    /// Rows form a basis of `Lambda cap Z^n`.
    pub lambda_basis: IntMatrix,
    /// Unimodular adaptation; first `d` rows equal `lambda_basis`.
    pub adaptation: IntMatrix,
    pub adaptation_inv: IntMatrix,
    /// Non-resonant block of `A omega`.
    pub omega_tilde: Vec<f64>,
}

impl ResonanceData {
    /// Resonance structure computed exactly from a rational frequency
    /// (`d = n - 1` in this case).
    pub fn from_rational(i_star: Vec<f64>, omega: &[Rational]) -> Result<Self> {
        let n = omega.len();
        if i_star.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: i_star.len() });
        }
        let lambda_basis = resonant_module(omega)?;
        let d = lambda_basis.rows();
        let (adaptation, adaptation_inv) = unimodular_completion(&lambda_basis)?;
        let omega_f: Vec<f64> = omega.iter().map(|r| r.to_f64()).collect();
        let a_omega = adaptation.apply_f64(&omega_f)?;
        for (i, &v) in a_omega.iter().take(d).enumerate() {
            if v.abs() > 1e-12 {
                return Err(Error::Validation(format!(
                    "adaptation row {i} does not annihilate omega (residual {v:.3e})"
                )));
            }
        }
        let omega_tilde = a_omega[d..].to_vec();
        if omega_tilde.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroFrequency);
        }
        Ok(ResonanceData {
            i_star,
            omega: omega_f,
            d,
            lambda_basis,
            adaptation,
            adaptation_inv,
            omega_tilde,
        })
    }

    /// Resonance structure declared directly in adapted form
    /// `omega = (0, omega_tilde)`; used for irrational non-resonant blocks,
    /// whose kernels are not computable in floating point.
    pub fn from_adapted(i_star: Vec<f64>, d: usize, omega_tilde: Vec<f64>) -> Result<Self> {
        let n = i_star.len();
        if d == 0 || d + omega_tilde.len() != n {
            return Err(Error::Validation(format!(
                "need 1 <= d <= n-1 with matching block sizes (n = {n}, d = {d}, block = {})",
                omega_tilde.len()
            )));
        }
        if omega_tilde.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroFrequency);
        }
        let mut rows = Vec::with_capacity(d);
        for i in 0..d {
            let mut row = vec![0i64; n];
            row[i] = 1;
            rows.push(row);
        }
        let mut omega = vec![0.0; d];
        omega.extend_from_slice(&omega_tilde);
        Ok(ResonanceData {
            i_star,
            omega,
            d,
            lambda_basis: IntMatrix::from_rows(rows)?,
            adaptation: IntMatrix::identity(n),
            adaptation_inv: IntMatrix::identity(n),
            omega_tilde,
        })
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn is_adapted(&self) -> bool {
        self.adaptation == IntMatrix::identity(self.dim())
    }

    /// `omega` must match the frequency map of the system at `i_star`.
    pub fn validate_against(&self, system: &NearIntegrableSystem) -> Result<()> {
        let grad = system.grad_h(&self.i_star)?;
        let err = grad
            .iter()
            .zip(&self.omega)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if err > 1e-9 {
            return Err(Error::Validation(format!(
                "grad h(I*) differs from the declared omega by {err:.3e}"
            )));
        }
        Ok(())
    }
}

/// Transform a system by a unimodular matrix `A`: angles `theta' = A theta`,
/// actions `I' = A^{-T} I`, modes `k' = A^{-T} k`, `h'(I') = h(A^T I')`.
/// Energy is preserved pointwise.
pub fn transform_system(
    system: &NearIntegrableSystem,
    a: &IntMatrix,
) -> Result<NearIntegrableSystem> {
    let n = system.dim();
    if a.rows() != n || a.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.rows() });
    }
    let a_inv = a.inverse_unimodular()?;
    let a_inv_t = a_inv.transpose();
    let a_t = a.transpose();

    let h = system.h().compose_linear(&a_t.to_rows())?;
    let f = system.f().transform(&a_inv_t.to_rows(), &a_t.to_rows())?;

    // the sup-norm ball is not preserved; shrink so A^T B_{r'} stays in B_r
    let norm_at: i64 = (0..n)
        .map(|i| a_t.row(i).iter().map(|x| x.abs()).sum::<i64>())
        .max()
        .unwrap_or(1);
    let radius = system.domain_radius() / norm_at.max(1) as f64;

    NearIntegrableSystem::new(n, h, f, system.epsilon(), radius)
}

/// Transform a phase-space point the same way as [`transform_system`].
pub fn transform_state(
    a: &IntMatrix,
    a_inv: &IntMatrix,
    theta: &[f64],
    actions: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let new_theta: Vec<f64> = a.apply_f64(theta)?.into_iter().map(reduce_turn).collect();
    let new_actions = a_inv.transpose().apply_f64(actions)?;
    Ok((new_theta, new_actions))
}

/// System re-expressed in adapted coordinates with the resonant point at the
/// origin.
#[derive(Clone, Debug)]
pub struct AdaptedSystem {
    /// Transformed and shifted system (resonant point at `I = 0`).
    pub system: NearIntegrableSystem,
    /// `A^{-T} I*`, the resonant point in adapted coordinates (pre-shift).
    pub i_star_adapted: Vec<f64>,
    pub d: usize,
    pub omega_tilde: Vec<f64>,
}

/// Adapt a system to a resonance: unimodular angle change followed by the
/// translation `I -> I + I*`, so the resonant point sits at the origin.
pub fn adapt_system(system: &NearIntegrableSystem, res: &ResonanceData) -> Result<AdaptedSystem> {
    if system.dim() != res.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), got: res.dim() });
    }
    let transformed = transform_system(system, &res.adaptation)?;
    let i_star_adapted = res.adaptation_inv.transpose().apply_f64(&res.i_star)?;
    let h = transformed.h().shifted(&i_star_adapted)?;
    let f = transformed.f().shifted_actions(&i_star_adapted)?;
    let radius = transformed.domain_radius();
    let system =
        NearIntegrableSystem::new(transformed.dim(), h, f, transformed.epsilon(), radius)?;
    Ok(AdaptedSystem { system, i_star_adapted, d: res.d, omega_tilde: res.omega_tilde.clone() })
}
