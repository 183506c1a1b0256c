//! Small-divisor functions of a non-resonant frequency block.
//!
//! `Psi(Q)` is the largest inverse divisor `|k.omega_tilde|^{-1}` over
//! nonzero integer vectors with sup norm at most `Q`; `Delta(x)` is the
//! largest real `Q >= 1` with `Q Psi(Q) <= x` (piecewise-constant extension
//! of `Psi`, ties resolved by the right limit); `mu(sqrt_eps)` is
//! `Delta(kappa / sqrt_eps)^{-1}`. In adapted coordinates `Psi` is
//! well-defined from `Q = 1` on.

use serde::Serialize;

use crate::error::{Error, Result};

/// Divisors smaller than this signal a hidden resonance and are rejected.
pub const HIDDEN_RESONANCE_TOL: f64 = 1e-14;

/// Tabulated `Psi` for one frequency block, plus the `kappa` used by `mu`.
#[derive(Clone, Debug, Serialize)]
pub struct SmallDivisorProfile {
    omega_tilde: Vec<f64>,
    kappa: f64,
    q_max: u32,
    /// `min_divisor[q-1]` = smallest `|k.omega_tilde|` over `0 < |k| <= q`.
    min_divisor: Vec<f64>,
    /// `psi[q-1] = 1 / min_divisor[q-1]`.
    psi: Vec<f64>,
}

impl SmallDivisorProfile {
    /// Exhaustive tabulation of `Psi(1..=q_max)`.
    pub fn build(omega_tilde: &[f64], q_max: u32, kappa: f64) -> Result<Self> {
        if omega_tilde.is_empty() {
            return Err(Error::ZeroFrequency);
        }
        if omega_tilde.iter().all(|&w| w == 0.0) {
            return Err(Error::ZeroFrequency);
        }
        if !(kappa > 0.0) {
            return Err(Error::Validation(format!("kappa must be positive, got {kappa}")));
        }
        if q_max == 0 {
            return Err(Error::Validation("Q_max must be at least 1".into()));
        }
        let mut min_divisor = Vec::with_capacity(q_max as usize);
        let mut psi = Vec::with_capacity(q_max as usize);
        let mut running = f64::INFINITY;
        for q in 1..=q_max as i64 {
            let mut offender: Option<Vec<i64>> = None;
            for_each_shell_point(omega_tilde.len(), q, &mut |k| {
                let div: f64 = k.iter().zip(omega_tilde).map(|(&ki, &wi)| ki as f64 * wi).sum();
                let div = div.abs();
                if div < running {
                    running = div;
                    if div < HIDDEN_RESONANCE_TOL {
                        offender = Some(k.to_vec());
                    }
                }
            });
            if let Some(k) = offender {
                return Err(Error::HiddenResonance {
                    k,
                    divisor: running,
                    tol: HIDDEN_RESONANCE_TOL,
                });
            }
            min_divisor.push(running);
            psi.push(1.0 / running);
        }
        Ok(SmallDivisorProfile { omega_tilde: omega_tilde.to_vec(), kappa, q_max, min_divisor, psi })
    }

    pub fn omega_tilde(&self) -> &[f64] {
        &self.omega_tilde
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn q_max(&self) -> u32 {
        self.q_max
    }

    pub fn psi(&self, q: u32) -> Result<f64> {
        if q == 0 || q > self.q_max {
            return Err(Error::Validation(format!("Q = {q} outside 1..={}", self.q_max)));
        }
        Ok(self.psi[q as usize - 1])
    }

    pub fn min_divisor(&self, q: u32) -> Result<f64> {
        if q == 0 || q > self.q_max {
            return Err(Error::Validation(format!("Q = {q} outside 1..={}", self.q_max)));
        }
        Ok(self.min_divisor[q as usize - 1])
    }

    /// Rows `(Q, min_divisor, Psi(Q))`.
    pub fn table(&self) -> Vec<(u32, f64, f64)> {
        (1..=self.q_max)
            .map(|q| (q, self.min_divisor[q as usize - 1], self.psi[q as usize - 1]))
            .collect()
    }

    /// `Delta(x) = sup { Q >= 1 : Q Psi(Q) <= x }` over real `Q` with the
    /// piecewise-constant extension of `Psi`.
    pub fn delta(&self, x: f64) -> Result<f64> {
        let psi1 = self.psi[0];
        if !(x >= psi1) {
            return Err(Error::BelowPsiDomain { x, psi1 });
        }
        // Q Psi(Q) is nondecreasing over the integers, so scan to the last
        // admissible integer.
        let mut q0 = None;
        for q in 1..=self.q_max {
            if q as f64 * self.psi[q as usize - 1] <= x {
                q0 = Some(q);
            } else {
                break;
            }
        }
        let q0 = q0.ok_or(Error::BelowPsiDomain { x, psi1 })?;
        if q0 == self.q_max {
            // the admissible set may extend beyond the table
            return Err(Error::IncreaseQMax { x, q_max: self.q_max });
        }
        let within = x / self.psi[q0 as usize - 1];
        Ok(within.min((q0 + 1) as f64))
    }

    /// `mu(sqrt_eps) = Delta(kappa / sqrt_eps)^{-1}`.
    pub fn mu(&self, sqrt_eps: f64) -> Result<f64> {
        if !(sqrt_eps > 0.0) {
            return Err(Error::Validation(format!("sqrt(eps) must be positive, got {sqrt_eps}")));
        }
        Ok(1.0 / self.delta(self.kappa / sqrt_eps)?)
    }

    pub fn mu_of_eps(&self, eps: f64) -> Result<f64> {
        self.mu(eps.sqrt())
    }
}

/// `Psi(Q)` by direct exhaustive search (no table).
pub fn psi(omega_tilde: &[f64], q: u32) -> Result<f64> {
    let profile = SmallDivisorProfile::build(omega_tilde, q, 1.0)?;
    profile.psi(q)
}

/// Visit every integer point with sup norm exactly `q` (each point once).
/// Points are split by the first coordinate achieving `|k_i| = q`.
fn for_each_shell_point(dim: usize, q: i64, f: &mut impl FnMut(&[i64])) {
    debug_assert!(q >= 1);
    let mut k = vec![0i64; dim];
    for face in 0..dim {
        for sign in [-q, q] {
            k[face] = sign;
            // coords before `face` range over |v| < q, after over |v| <= q
            fill_rest(&mut k, 0, face, q, f);
        }
    }

    fn fill_rest(k: &mut Vec<i64>, pos: usize, face: usize, q: i64, f: &mut impl FnMut(&[i64])) {
        if pos == k.len() {
            f(k);
            return;
        }
        if pos == face {
            fill_rest(k, pos + 1, face, q, f);
            return;
        }
        let bound = if pos < face { q - 1 } else { q };
        for v in -bound..=bound {
            k[pos] = v;
            fill_rest(k, pos + 1, face, q, f);
        }
        k[pos] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const PHI: f64 = 1.618033988749895;

    /// Independent oracle: full-ball enumeration in reversed coordinate
    /// order, recomputed from scratch for every Q.
    fn psi_oracle(omega: &[f64], q: u32) -> f64 {
        let dim = omega.len();
        let mut best = f64::INFINITY;
        let mut k = vec![0i64; dim];
        fn rec(k: &mut Vec<i64>, pos: isize, q: i64, omega: &[f64], best: &mut f64) {
            if pos < 0 {
                if k.iter().any(|&x| x != 0) {
                    let div: f64 =
                        k.iter().zip(omega).map(|(&ki, &wi)| ki as f64 * wi).sum::<f64>().abs();
                    if div < *best {
                        *best = div;
                    }
                }
                return;
            }
            for v in -q..=q {
                k[pos as usize] = v;
                rec(k, pos - 1, q, omega, best);
            }
            k[pos as usize] = 0;
        }
        rec(&mut k, dim as isize - 1, q as i64, omega, &mut best);
        1.0 / best
    }

    #[test]
    fn periodic_psi_is_one() {
        let p = SmallDivisorProfile::build(&[1.0], 50, 1.0).unwrap();
        for q in 1..=50 {
            assert_eq!(p.psi(q).unwrap(), 1.0);
        }
    }

    #[test]
    fn golden_psi_at_one() {
        // divisors for |k| <= 1 in Z^2: 1, phi, phi+1, phi-1 -> min = phi-1
        let p = SmallDivisorProfile::build(&[1.0, PHI], 8, 1.0).unwrap();
        assert_relative_eq!(p.psi(1).unwrap(), 1.0 / (PHI - 1.0), epsilon = 1e-12);
        assert_relative_eq!(p.psi(1).unwrap(), PHI, epsilon = 1e-12);
    }

    #[test]
    fn matches_independent_oracle_small_q() {
        let freqs: Vec<Vec<f64>> = vec![
            vec![1.0],
            vec![1.0, PHI],
            vec![1.0, std::f64::consts::SQRT_2, std::f64::consts::E],
            vec![0.7, -1.3], // first rational relation at |k| = 13, beyond the search
        ];
        for omega in freqs {
            let p = SmallDivisorProfile::build(&omega, 8, 1.0).unwrap();
            for q in 1..=8 {
                assert_eq!(p.psi(q).unwrap(), psi_oracle(&omega, q), "omega={omega:?} q={q}");
            }
        }
    }

    #[test]
    fn psi_monotone() {
        let p = SmallDivisorProfile::build(&[1.0, PHI], 50, 1.0).unwrap();
        for q in 2..=50 {
            assert!(p.psi(q).unwrap() >= p.psi(q - 1).unwrap());
            let grow =
                q as f64 * p.psi(q).unwrap() >= (q - 1) as f64 * p.psi(q - 1).unwrap();
            assert!(grow, "Q Psi(Q) must be nondecreasing");
        }
    }

    #[test]
    fn periodic_delta_is_identity() {
        let p = SmallDivisorProfile::build(&[1.0], 2000, 1.0).unwrap();
        for x in [1.0, 2.5, 17.0, 999.25, 1500.0] {
            assert_relative_eq!(p.delta(x).unwrap(), x, epsilon = 1e-12);
        }
        // mu = sqrt(eps) / kappa
        for kappa in [1.0, 2.5] {
            let p = SmallDivisorProfile::build(&[1.0], 4000, kappa).unwrap();
            for eps in [1e-2, 1e-4, 1e-6] {
                assert_relative_eq!(
                    p.mu_of_eps(eps).unwrap(),
                    eps.sqrt() / kappa,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn delta_boundary_case() {
        // golden: Q Psi(Q) > Psi(1) for all Q > 1, so Delta(Psi(1)) = 1
        let p = SmallDivisorProfile::build(&[1.0, PHI], 10, 1.0).unwrap();
        assert_relative_eq!(p.delta(p.psi(1).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn delta_domain_and_range_errors() {
        let p = SmallDivisorProfile::build(&[1.0, PHI], 10, 1.0).unwrap();
        assert!(matches!(p.delta(0.5), Err(Error::BelowPsiDomain { .. })));
        assert!(matches!(p.delta(1e9), Err(Error::IncreaseQMax { .. })));
    }

    #[test]
    fn hidden_resonance_rejected() {
        // (1, -1/2) has 1*1 + 2*(-1/2)... use an exactly resonant block
        let err = SmallDivisorProfile::build(&[1.0, -0.5], 4, 1.0);
        assert!(matches!(err, Err(Error::HiddenResonance { .. })));
    }

    #[test]
    fn delta_monotone_and_mu_monotone() {
        let p = SmallDivisorProfile::build(&[1.0, PHI], 200, 1.0).unwrap();
        let mut prev = 0.0;
        for i in 1..60 {
            let x = 1.7 + 0.9 * i as f64;
            let d = p.delta(x).unwrap();
            assert!(d >= prev, "Delta must be nondecreasing");
            prev = d;
        }
        let mut prev_mu = 0.0;
        for eps in [1e-4, 1e-3, 1e-2] {
            let m = p.mu_of_eps(eps).unwrap();
            assert!(m >= prev_mu, "mu must be nondecreasing in eps");
            prev_mu = m;
        }
    }
}
