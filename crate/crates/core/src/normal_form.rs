//! First-order resonant normal form for finite Fourier perturbations.
//!
//! The generating function solves the homological equation with the constant
//! divisor `k . omega` taken at the resonant point; the transformation is the
//! time-1 flow of `eps chi`, integrated with the implicit midpoint scheme so
//! symplecticity is inherited from the integrator. The remainder
//! `f_tilde = H o Phi - h - eps f_omega` is evaluated pointwise and its
//! derivative sups are measured on a low-discrepancy sample of
//! `T^n x B_{2 sqrt(eps)}`, then compared against the
//! `C sqrt(eps) mu(sqrt(eps))` / `C eps mu(sqrt(eps))` bounds as fitted
//! scaling exponents.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::averaging::resonant_average;
use crate::divisors::{SmallDivisorProfile, HIDDEN_RESONANCE_TOL};
use crate::error::{Error, Result};
use crate::fitting::{log_log_fit, LineFit};
use crate::hamiltonian::{sup_norm, FourierPerturbation, NearIntegrableSystem, TWO_PI};
use crate::integrator::integrate_to;
use crate::poly::Polynomial;
use crate::sampling::Halton;

/// Internal step of the generating flow.
pub const TRANSFORM_STEP: f64 = 1e-3;

/// Generating function of the averaging transformation: modes outside the
/// resonant module with `0 < |k| <= Q`, each divided by `i 2 pi k.omega`.
#[derive(Clone, Debug)]
pub struct GeneratorField {
    pub chi: FourierPerturbation,
    pub q: u32,
    /// Smallest `|k.omega|` among the modes actually used (infinite when
    /// `chi` is empty).
    pub divisor_floor: f64,
}

/// Solve the first-order homological equation: `chi_k = f_k / (i 2 pi
/// k.omega)` for non-resonant modes up to order `Q`. Modes beyond `Q` stay in
/// the remainder; with `Q >= K_f` the truncation tail vanishes identically.
pub fn build_generator(
    system: &NearIntegrableSystem,
    omega: &[f64],
    d: usize,
    q: u32,
) -> Result<GeneratorField> {
    if omega.len() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), got: omega.len() });
    }
    let mut chi = FourierPerturbation::new(system.dim());
    let mut floor = f64::INFINITY;
    for (k, c) in system.f().modes() {
        if k[d..].iter().all(|&x| x == 0) {
            continue; // resonant, stays in f_omega
        }
        let k_sup = k.iter().map(|x| x.abs()).max().unwrap_or(0);
        if k_sup == 0 || k_sup > q as i64 {
            continue;
        }
        let divisor: f64 = k.iter().zip(omega).map(|(&ki, &wi)| ki as f64 * wi).sum();
        if divisor.abs() < HIDDEN_RESONANCE_TOL {
            return Err(Error::HiddenResonance {
                k: k.to_vec(),
                divisor: divisor.abs(),
                tol: HIDDEN_RESONANCE_TOL,
            });
        }
        floor = floor.min(divisor.abs());
        // 1 / (i 2 pi divisor) = -i / (2 pi divisor)
        let factor = Complex64::new(0.0, -1.0 / (TWO_PI * divisor));
        chi.insert_mode(k.to_vec(), c.map_coeffs(|v| v * factor))?;
    }
    chi.validate_reality()?;
    Ok(GeneratorField { chi, q, divisor_floor: floor })
}

impl GeneratorField {
    /// System whose Hamiltonian is `eps chi`, used to realize the flow.
    fn flow_system(&self, eps: f64) -> Result<NearIntegrableSystem> {
        NearIntegrableSystem::new(
            self.chi.dim(),
            Polynomial::zero(self.chi.dim()),
            self.chi.clone(),
            eps,
            f64::MAX,
        )
    }

    /// `Phi` (forward) or `Phi^{-1}` (backward): the time `+-1` flow of
    /// `eps chi`. With `domain_sqrt_eps` set, the input must lie in
    /// `B_{2 sqrt(eps)}` and the image must stay in `B_{3 sqrt(eps)}`.
    pub fn apply(
        &self,
        eps: f64,
        theta: &[f64],
        actions: &[f64],
        forward: bool,
        domain_sqrt_eps: Option<f64>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if let Some(se) = domain_sqrt_eps {
            let bound = 2.0 * se * (1.0 + 1e-6);
            let norm = sup_norm(actions);
            if norm > bound {
                return Err(Error::EscapedDomain { norm, bound });
            }
        }
        if self.chi.is_zero() || eps == 0.0 {
            return Ok((theta.to_vec(), actions.to_vec()));
        }
        let sys = self.flow_system(eps)?;
        let t = if forward { 1.0 } else { -1.0 };
        let (new_theta, new_actions) = integrate_to(&sys, theta, actions, t, TRANSFORM_STEP)?;
        if let Some(se) = domain_sqrt_eps {
            let bound = 3.0 * se;
            let norm = sup_norm(&new_actions);
            if norm > bound {
                return Err(Error::EscapedDomain { norm, bound });
            }
        }
        Ok((new_theta, new_actions))
    }
}

/// Sampled sups of the remainder and of the action displacement of `Phi`,
/// with the normal-form bounds they are measured against.
#[derive(Clone, Debug, Serialize)]
pub struct RemainderReport {
    pub eps: f64,
    pub mu: f64,
    pub q: u32,
    pub samples: usize,
    pub sup_displacement: f64,
    pub sup_dtheta: f64,
    pub sup_dactions: f64,
    /// `sqrt(eps) mu`
    pub bound_displacement: f64,
    /// `eps mu`
    pub bound_dtheta: f64,
    /// `sqrt(eps) mu`
    pub bound_dactions: f64,
    pub ratio_displacement: f64,
    pub ratio_dtheta: f64,
    pub ratio_dactions: f64,
}

/// Evaluate `f_tilde = H o Phi - h - eps f_omega` and its central-difference
/// derivatives (step `sqrt(eps) 1e-3`) on `samples` low-discrepancy points of
/// `T^n x B_{2 sqrt(eps)}`; sups are exact max-reductions over the sample.
pub fn remainder_report(
    system: &NearIntegrableSystem,
    generator: &GeneratorField,
    f_omega: &FourierPerturbation,
    mu: f64,
    samples: usize,
    seed: u64,
) -> Result<RemainderReport> {
    let n = system.dim();
    let eps = system.epsilon();
    let sqrt_eps = eps.sqrt();
    let fd_step = sqrt_eps * 1e-3;
    let ball = 2.0 * sqrt_eps * 0.999;
    let halton = Halton::new(2 * n, seed);

    let f_tilde = |theta: &[f64], actions: &[f64]| -> Result<f64> {
        let (ft, fa) = generator.apply(eps, theta, actions, true, None)?;
        Ok(system.energy(&ft, &fa)?
            - system.eval_h(actions)?
            - eps * f_omega.eval(theta, actions)?)
    };

    let one = |idx: u64| -> Result<(f64, f64, f64)> {
        if eps == 0.0 {
            return Ok((0.0, 0.0, 0.0));
        }
        let p = halton.point(idx);
        let theta: Vec<f64> = p[..n].to_vec();
        let actions: Vec<f64> = p[n..].iter().map(|&u| (2.0 * u - 1.0) * ball).collect();

        let (_, im) = generator.apply(eps, &theta, &actions, true, Some(sqrt_eps))?;
        let disp = im.iter().zip(&actions).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

        let mut dtheta: f64 = 0.0;
        let mut dactions: f64 = 0.0;
        let mut tp = theta.clone();
        let mut tm = theta.clone();
        for j in 0..n {
            tp[j] = theta[j] + fd_step;
            tm[j] = theta[j] - fd_step;
            let v = (f_tilde(&tp, &actions)? - f_tilde(&tm, &actions)?) / (2.0 * fd_step);
            dtheta = dtheta.max(v.abs());
            tp[j] = theta[j];
            tm[j] = theta[j];
        }
        let mut ap = actions.clone();
        let mut am = actions.clone();
        for j in 0..n {
            ap[j] = actions[j] + fd_step;
            am[j] = actions[j] - fd_step;
            let v = (f_tilde(&theta, &ap)? - f_tilde(&theta, &am)?) / (2.0 * fd_step);
            dactions = dactions.max(v.abs());
            ap[j] = actions[j];
            am[j] = actions[j];
        }
        Ok((disp, dtheta, dactions))
    };

    let (sup_displacement, sup_dtheta, sup_dactions) = (0..samples as u64)
        .into_par_iter()
        .map(one)
        .try_reduce(
            || (0.0, 0.0, 0.0),
            |a, b| Ok((a.0.max(b.0), a.1.max(b.1), a.2.max(b.2))),
        )?;

    let bound_displacement = sqrt_eps * mu;
    let bound_dtheta = eps * mu;
    let bound_dactions = sqrt_eps * mu;
    Ok(RemainderReport {
        eps,
        mu,
        q: generator.q,
        samples,
        sup_displacement,
        sup_dtheta,
        sup_dactions,
        bound_displacement,
        bound_dtheta,
        bound_dactions,
        ratio_displacement: sup_displacement / bound_displacement,
        ratio_dtheta: sup_dtheta / bound_dtheta,
        ratio_dactions: sup_dactions / bound_dactions,
    })
}

/// Fitted scaling exponents and constants across an `eps` sweep.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaEstimates {
    pub rows: Vec<RemainderReport>,
    pub fit_displacement: Option<LineFit>,
    pub fit_dtheta: Option<LineFit>,
    pub fit_dactions: Option<LineFit>,
    /// Smallest constants making the three bounds hold across the sweep.
    pub c_displacement: f64,
    pub c_dtheta: f64,
    pub c_dactions: f64,
    /// Max/min ratio variation over the small-eps half of the sweep.
    pub stability_displacement: f64,
    pub stability_dtheta: f64,
    pub stability_dactions: f64,
}

/// Run [`remainder_report`] per `eps`, truncating the generator at the
/// normal-form order `Q(eps) = floor(Delta(kappa / sqrt(eps)))`, and fit the
/// log-log scaling of the three sups.
pub fn verify_lemma_estimates(
    system: &NearIntegrableSystem,
    omega: &[f64],
    d: usize,
    profile: &SmallDivisorProfile,
    eps_list: &[f64],
    samples: usize,
    seed: u64,
) -> Result<LemmaEstimates> {
    if eps_list.is_empty() {
        return Err(Error::Validation("empty epsilon list".into()));
    }
    // descending order so "the lower half of the sweep" means small eps
    let mut eps_list = eps_list.to_vec();
    eps_list.sort_by(|a, b| b.partial_cmp(a).expect("finite eps"));
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in &eps_list {
        let sys = system.with_epsilon(eps)?;
        let mu = profile.mu_of_eps(eps)?;
        let q = profile.delta(profile.kappa() / eps.sqrt())?.floor().max(1.0) as u32;
        let generator = build_generator(&sys, omega, d, q)?;
        let f_omega = resonant_average(sys.f(), d);
        rows.push(remainder_report(&sys, &generator, &f_omega, mu, samples, seed)?);
    }

    let pts = |f: &dyn Fn(&RemainderReport) -> f64| -> Vec<(f64, f64)> {
        rows.iter().map(|r| (r.eps, f(r))).collect()
    };
    let ratio_stats = |f: &dyn Fn(&RemainderReport) -> f64| -> (f64, f64) {
        let ratios: Vec<f64> = rows.iter().map(f).collect();
        let c = ratios.iter().copied().fold(0.0, f64::max);
        // stability over the small-eps half (list assumed ordered large to
        // small; take the trailing half)
        let tail = &ratios[ratios.len() / 2..];
        let hi = tail.iter().copied().fold(0.0, f64::max);
        let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
        (c, if lo > 0.0 { hi / lo } else { f64::INFINITY })
    };

    let (c_displacement, stability_displacement) = ratio_stats(&|r| r.ratio_displacement);
    let (c_dtheta, stability_dtheta) = ratio_stats(&|r| r.ratio_dtheta);
    let (c_dactions, stability_dactions) = ratio_stats(&|r| r.ratio_dactions);

    Ok(LemmaEstimates {
        fit_displacement: log_log_fit(&pts(&|r| r.sup_displacement)),
        fit_dtheta: log_log_fit(&pts(&|r| r.sup_dtheta)),
        fit_dactions: log_log_fit(&pts(&|r| r.sup_dactions)),
        rows,
        c_displacement,
        c_dtheta,
        c_dactions,
        stability_displacement,
        stability_dtheta,
        stability_dactions,
    })
}
