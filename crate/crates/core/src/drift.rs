//! Micro-drift experiments: integrate the full system from the critical
//! initial condition for the time `tau = delta / sqrt(eps)`, decompose the
//! drift along and across the resonant module, sweep over `eps` for scaling
//! exponents, and run the negative controls.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{AveragedPerturbation, DriftConstants};
use crate::divisors::SmallDivisorProfile;
use crate::error::{Error, Result};
use crate::fitting::{log_log_fit, LineFit};
use crate::hamiltonian::{sup_norm, NearIntegrableSystem};
use crate::integrator::{default_step, integrate, PhaseState};
use crate::resonance::{adapt_system, AdaptedSystem, ResonanceData};

/// Per-run configuration.
#[derive(Clone, Debug, Serialize)]
pub struct DriftConfig {
    pub eps: f64,
    pub kappa: f64,
    /// Normal-form threshold: runs with `mu > mu0` are flagged, not refused.
    pub mu0: f64,
    /// Initial transverse angles (length `n - d`); zeros by default.
    pub transverse_phase: Vec<f64>,
    /// When above 1, metrics are averaged over this many uniformly spaced
    /// transverse phase offsets.
    pub phase_sweep: u32,
    pub step_override: Option<f64>,
    pub output_stride: Option<f64>,
    pub record_series: bool,
}

impl DriftConfig {
    pub fn new(eps: f64) -> Self {
        DriftConfig {
            eps,
            kappa: 1.0,
            mu0: 0.1,
            transverse_phase: Vec::new(),
            phase_sweep: 1,
            step_override: None,
            output_stride: None,
            record_series: false,
        }
    }
}

/// Time series of the drift decomposition, for plotting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriftSeries {
    pub t: Vec<f64>,
    pub along: Vec<f64>,
    pub transverse: Vec<f64>,
}

/// Outcome of one drift experiment (possibly phase-averaged).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DriftReport {
    pub eps: f64,
    pub mu: f64,
    pub mu_exceeded: bool,
    pub tau: f64,
    pub step: f64,
    /// `c sqrt(eps)`.
    pub threshold: f64,
    /// Drift vector `I(tau) - I(0)` mapped back to the user's coordinates.
    pub drift_vector: Vec<f64>,
    /// Sup norm of the drift in adapted coordinates.
    pub total: f64,
    /// Max over the first `d` (resonant) components.
    pub along_lambda: f64,
    /// Max over the last `n - d` components at `t = tau`.
    pub transverse: f64,
    /// Max excursion of any action over the whole window `[0, tau]`.
    pub max_total: f64,
    /// Max transverse excursion over the whole window `[0, tau]`.
    pub max_transverse: f64,
    /// `max_transverse / (sqrt(eps) mu)`.
    pub fitted_c_transverse: f64,
    pub pass: bool,
    pub energy_rel_drift: f64,
    pub runs_averaged: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<DriftSeries>,
}

/// A system bound to its resonance with everything precomputed: adapted
/// coordinates, averaged perturbation, and the small-divisor profile.
#[derive(Clone, Debug)]
pub struct AdaptedLab {
    pub original: NearIntegrableSystem,
    pub resonance: ResonanceData,
    pub adapted: AdaptedSystem,
    pub averaged: AveragedPerturbation,
    pub profile: SmallDivisorProfile,
}

impl AdaptedLab {
    pub fn new(
        system: &NearIntegrableSystem,
        resonance: &ResonanceData,
        kappa: f64,
        q_max: u32,
    ) -> Result<Self> {
        resonance.validate_against(system)?;
        let adapted = adapt_system(system, resonance)?;
        let averaged = AveragedPerturbation::from_adapted(&adapted.system, adapted.d)?;
        let profile = SmallDivisorProfile::build(&adapted.omega_tilde, q_max, kappa)?;
        Ok(AdaptedLab {
            original: system.clone(),
            resonance: resonance.clone(),
            adapted,
            averaged,
            profile,
        })
    }

    /// Size the divisor table from the smallest `eps` to be swept:
    /// `Delta(x) <= x / Psi(1)` bounds the largest order ever queried.
    pub fn with_auto_qmax(
        system: &NearIntegrableSystem,
        resonance: &ResonanceData,
        kappa: f64,
        eps_min: f64,
    ) -> Result<Self> {
        let q_max = auto_qmax(&resonance.omega_tilde, kappa, eps_min)?;
        Self::new(system, resonance, kappa, q_max)
    }

    pub fn constants(&self) -> &DriftConstants {
        &self.averaged.constants
    }
}

/// Smallest table order guaranteed to cover `Delta(kappa / sqrt(eps_min))`.
pub fn auto_qmax(omega_tilde: &[f64], kappa: f64, eps_min: f64) -> Result<u32> {
    if !(eps_min > 0.0) {
        return Err(Error::Validation(format!("eps must be positive, got {eps_min}")));
    }
    let probe = SmallDivisorProfile::build(omega_tilde, 1, kappa)?;
    let psi1 = probe.psi(1)?;
    let x = kappa / eps_min.sqrt();
    Ok(((x / psi1).ceil() as u32 + 2).max(8))
}

struct RawRun {
    drift_adapted: Vec<f64>,
    total: f64,
    along: f64,
    transverse: f64,
    max_total: f64,
    max_transverse: f64,
    energy_rel_drift: f64,
    series: Option<DriftSeries>,
}

/// Integrate from `(theta0, I0)` for time `tau` and decompose the drift with
/// respect to the first `d` components.
#[allow(clippy::too_many_arguments)]
fn run_protocol(
    system: &NearIntegrableSystem,
    theta0: Vec<f64>,
    actions0: Vec<f64>,
    tau: f64,
    step: f64,
    stride: f64,
    d: usize,
    record_series: bool,
) -> Result<RawRun> {
    let state = PhaseState::start(theta0, actions0.clone());
    let traj = integrate(system, &state, tau, step, stride)?;
    let end = traj.final_state();
    let drift: Vec<f64> = end.actions.iter().zip(&actions0).map(|(a, b)| a - b).collect();
    let along = sup_norm(&drift[..d]);
    let transverse = sup_norm(&drift[d..]);
    let mut max_transverse: f64 = 0.0;
    let mut max_total: f64 = 0.0;
    for s in &traj.samples {
        let all = s
            .actions
            .iter()
            .zip(&actions0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let m = s.actions[d..]
            .iter()
            .zip(&actions0[d..])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        max_total = max_total.max(all);
        max_transverse = max_transverse.max(m);
    }
    let series = record_series.then(|| DriftSeries {
        t: traj.samples.iter().map(|s| s.t).collect(),
        along: traj
            .samples
            .iter()
            .map(|s| {
                s.actions[..d]
                    .iter()
                    .zip(&actions0[..d])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect(),
        transverse: traj
            .samples
            .iter()
            .map(|s| {
                s.actions[d..]
                    .iter()
                    .zip(&actions0[d..])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect(),
    });
    Ok(RawRun {
        total: sup_norm(&drift),
        drift_adapted: drift,
        along,
        transverse,
        max_total,
        max_transverse,
        energy_rel_drift: traj.energy_rel_drift,
        series,
    })
}

fn phase_offsets(count: u32) -> Vec<f64> {
    if count <= 1 {
        vec![0.0]
    } else {
        (0..count).map(|j| j as f64 / count as f64).collect()
    }
}

/// The theorem's experiment: start at `I(0) = I*` (origin in adapted
/// coordinates), resonant angles at `theta*`, transverse angles from the
/// config; integrate the full system to `tau` and compare the drift to
/// `c sqrt(eps)`.
pub fn micro_drift_run(lab: &AdaptedLab, config: &DriftConfig) -> Result<DriftReport> {
    let eps = config.eps;
    if !(eps > 0.0) {
        return Err(Error::Validation(format!("eps must be positive, got {eps}")));
    }
    let n = lab.adapted.system.dim();
    let d = lab.adapted.d;
    if !config.transverse_phase.is_empty() && config.transverse_phase.len() != n - d {
        return Err(Error::DimensionMismatch {
            expected: n - d,
            got: config.transverse_phase.len(),
        });
    }
    let system = lab.adapted.system.with_epsilon(eps)?;
    let constants = lab.constants();
    let tau = constants.tau(eps);
    let threshold = constants.threshold(eps);
    let mu = lab.profile.mu_of_eps(eps)?;
    let step = config.step_override.unwrap_or_else(|| default_step(eps, constants.lambda));
    let stride = config.output_stride.unwrap_or_else(|| (tau / 2000.0).min(0.05));

    let base_phase = if config.transverse_phase.is_empty() {
        vec![0.0; n - d]
    } else {
        config.transverse_phase.clone()
    };

    let runs: Vec<RawRun> = phase_offsets(config.phase_sweep)
        .into_par_iter()
        .enumerate()
        .map(|(idx, offset)| {
            let mut theta0 = lab.averaged.theta_star.clone();
            theta0.extend(base_phase.iter().map(|p| p + offset));
            run_protocol(
                &system,
                theta0,
                vec![0.0; n],
                tau,
                step,
                stride,
                d,
                config.record_series && idx == 0,
            )
        })
        .collect::<Result<_>>()?;

    let adaptation_t = lab.resonance.adaptation.transpose();
    Ok(aggregate(runs, eps, mu, config.mu0, tau, step, threshold, |v| {
        adaptation_t.apply_f64(v).expect("adaptation has the system dimension")
    }))
}

#[allow(clippy::too_many_arguments)]
fn aggregate(
    runs: Vec<RawRun>,
    eps: f64,
    mu: f64,
    mu0: f64,
    tau: f64,
    step: f64,
    threshold: f64,
    to_user_coords: impl Fn(&[f64]) -> Vec<f64>,
) -> DriftReport {
    let m = runs.len() as f64;
    let n = runs[0].drift_adapted.len();
    let mean = |f: &dyn Fn(&RawRun) -> f64| runs.iter().map(f).sum::<f64>() / m;
    let total = mean(&|r| r.total);
    let along_lambda = mean(&|r| r.along);
    let transverse = mean(&|r| r.transverse);
    let max_total = mean(&|r| r.max_total);
    let max_transverse = mean(&|r| r.max_transverse);
    let energy_rel_drift = runs.iter().map(|r| r.energy_rel_drift).fold(0.0, f64::max);
    let pass = runs.iter().all(|r| r.total >= threshold);
    let mut drift_adapted = vec![0.0; n];
    for r in &runs {
        for (acc, v) in drift_adapted.iter_mut().zip(&r.drift_adapted) {
            *acc += v / m;
        }
    }
    let series = runs.into_iter().next().and_then(|r| r.series);
    DriftReport {
        eps,
        mu,
        mu_exceeded: mu > mu0,
        tau,
        step,
        threshold,
        drift_vector: to_user_coords(&drift_adapted),
        total,
        along_lambda,
        transverse,
        max_total,
        max_transverse,
        fitted_c_transverse: max_transverse / (eps.sqrt() * mu),
        pass,
        energy_rel_drift,
        runs_averaged: m as u32,
        series,
    }
}

/// Sweep over `eps` with fitted scaling exponents of the total and
/// transverse drifts. Requires at least 5 points or a 4-decade span.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub reports: Vec<DriftReport>,
    pub fit_total: Option<LineFit>,
    pub fit_transverse: Option<LineFit>,
}

fn check_sweep_span(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::Validation("empty epsilon list".into()));
    }
    if eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Validation("epsilon values must be positive".into()));
    }
    let max = eps_list.iter().copied().fold(f64::MIN, f64::max);
    let min = eps_list.iter().copied().fold(f64::MAX, f64::min);
    let decades = (max / min).log10();
    if eps_list.len() < 5 && decades < 4.0 {
        return Err(Error::Validation(format!(
            "sweep needs >= 5 points or >= 4 decades (got {} points over {decades:.2} decades)",
            eps_list.len()
        )));
    }
    Ok(())
}

fn sweep_fits(reports: &[DriftReport]) -> (Option<LineFit>, Option<LineFit>) {
    let total_pts: Vec<(f64, f64)> = reports.iter().map(|r| (r.eps, r.total)).collect();
    let trans_pts: Vec<(f64, f64)> = reports.iter().map(|r| (r.eps, r.max_transverse)).collect();
    (log_log_fit(&total_pts), log_log_fit(&trans_pts))
}

pub fn epsilon_sweep(
    lab: &AdaptedLab,
    base: &DriftConfig,
    eps_list: &[f64],
) -> Result<SweepResult> {
    check_sweep_span(eps_list)?;
    let reports: Vec<DriftReport> = eps_list
        .par_iter()
        .map(|&eps| micro_drift_run(lab, &DriftConfig { eps, ..base.clone() }))
        .collect::<Result<_>>()?;
    let (fit_total, fit_transverse) = sweep_fits(&reports);
    Ok(SweepResult { reports, fit_total, fit_transverse })
}

/// Run a control protocol without a usable resonance: drift is measured at
/// the paired positive experiment's `tau` and against its threshold. `d`
/// gives the decomposition (0 marks everything transverse).
fn control_run(
    system: &NearIntegrableSystem,
    i_start: &[f64],
    start_angles: &[f64],
    reference: &DriftConstants,
    profile: &SmallDivisorProfile,
    config: &DriftConfig,
    d: usize,
) -> Result<DriftReport> {
    let eps = config.eps;
    let system = system.with_epsilon(eps)?;
    let tau = reference.tau(eps);
    let threshold = reference.threshold(eps);
    let mu = profile.mu_of_eps(eps)?;
    let step = config.step_override.unwrap_or_else(|| default_step(eps, reference.lambda));
    let stride = config.output_stride.unwrap_or_else(|| (tau / 2000.0).min(0.05));

    let runs: Vec<RawRun> = phase_offsets(config.phase_sweep)
        .into_par_iter()
        .enumerate()
        .map(|(idx, offset)| {
            let mut theta0 = start_angles.to_vec();
            // rotate the last (fast) angle across the sweep
            if let Some(last) = theta0.last_mut() {
                *last += offset;
            }
            run_protocol(
                &system,
                theta0,
                i_start.to_vec(),
                tau,
                step,
                stride,
                d,
                config.record_series && idx == 0,
            )
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(runs, eps, mu, config.mu0, tau, step, threshold, |v| v.to_vec()))
}

/// Control violating (A.1): the frequency at `i_star` is non-resonant, so
/// there is no resonant module (`d = 0`) and the drift should stall at
/// `O(eps)`, far below `c sqrt(eps)`.
pub fn negative_control_a1(
    system: &NearIntegrableSystem,
    i_star: &[f64],
    reference: &DriftConstants,
    config: &DriftConfig,
) -> Result<DriftReport> {
    let omega = system.grad_h(i_star)?;
    let q_max = auto_qmax(&omega, config.kappa, config.eps)?;
    let profile = SmallDivisorProfile::build(&omega, q_max, config.kappa)?;
    let mut start = vec![0.25; 1];
    start.extend(vec![0.0; system.dim() - 1]);
    control_run(system, i_star, &start, reference, &profile, config, 0)
}

/// Control violating (A.2): the resonance exists but the averaged
/// perturbation is constant; run the identical protocol with the paired
/// constants.
pub fn negative_control_a2(
    system: &NearIntegrableSystem,
    resonance: &ResonanceData,
    reference: &DriftConstants,
    config: &DriftConfig,
) -> Result<DriftReport> {
    resonance.validate_against(system)?;
    let adapted = adapt_system(system, resonance)?;
    // confirm the control premise: lambda = 0
    match AveragedPerturbation::from_adapted(&adapted.system, adapted.d) {
        Err(Error::ConstantAverage) => {}
        Ok(_) => {
            return Err(Error::Validation(
                "system has a non-constant averaged perturbation; not an (A.2) control".into(),
            ))
        }
        Err(e) => return Err(e),
    }
    let q_max = auto_qmax(&adapted.omega_tilde, config.kappa, config.eps)?;
    let profile = SmallDivisorProfile::build(&adapted.omega_tilde, q_max, config.kappa)?;
    let n = system.dim();
    let mut start = vec![0.25; adapted.d.min(1)];
    start.extend(vec![0.0; n - start.len()]);
    control_run(
        &adapted.system,
        &vec![0.0; n],
        &start,
        reference,
        &profile,
        config,
        adapted.d,
    )
}

/// Sweep a control across `eps`.
pub fn control_sweep(
    runner: impl Fn(f64) -> Result<DriftReport> + Sync,
    eps_list: &[f64],
) -> Result<SweepResult> {
    check_sweep_span(eps_list)?;
    let reports: Vec<DriftReport> =
        eps_list.par_iter().map(|&eps| runner(eps)).collect::<Result<_>>()?;
    // the at-tau value of a bounded oscillation passes arbitrarily close to
    // zero, so the control scaling is fitted on the windowed max instead
    let total_pts: Vec<(f64, f64)> = reports.iter().map(|r| (r.eps, r.max_total)).collect();
    let trans_pts: Vec<(f64, f64)> =
        reports.iter().map(|r| (r.eps, r.max_transverse)).collect();
    Ok(SweepResult {
        reports,
        fit_total: log_log_fit(&total_pts),
        fit_transverse: log_log_fit(&trans_pts),
    })
}

/// Log-spaced `eps` grid, endpoints included, descending from `hi` to `lo`.
pub fn log_spaced(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![hi];
    }
    let (lh, ll) = (hi.log10(), lo.log10());
    (0..count)
        .map(|i| 10f64.powf(lh + (ll - lh) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Compare the direct drift run against the same orbit computed for the
/// conjugated Hamiltonian and pulled back through the transformation.
/// Returns `(discrepancy, allowance)` where the allowance is
/// `3 C sqrt(eps) mu` with `C` the measured displacement constant.
pub fn conjugacy_consistency(lab: &AdaptedLab, eps: f64, samples: usize) -> Result<(f64, f64)> {
    let system = lab.adapted.system.with_epsilon(eps)?;
    let d = lab.adapted.d;
    let n = system.dim();
    let q = lab
        .profile
        .delta(lab.profile.kappa() / eps.sqrt())?
        .floor()
        .max(lab.adapted.system.f().k_sup() as f64) as u32;
    let generator = crate::normal_form::build_generator(
        &system,
        &{
            let mut omega = vec![0.0; d];
            omega.extend_from_slice(&lab.adapted.omega_tilde);
            omega
        },
        d,
        q,
    )?;
    let mu = lab.profile.mu_of_eps(eps)?;
    let f_omega = crate::averaging::resonant_average(system.f(), d);
    let report =
        crate::normal_form::remainder_report(&system, &generator, &f_omega, mu, samples, 0)?;
    let allowance = 3.0 * report.sup_displacement.max(f64::MIN_POSITIVE);

    let tau = lab.constants().tau(eps);
    let step = default_step(eps, lab.constants().lambda);
    let mut theta0 = lab.averaged.theta_star.clone();
    theta0.extend(vec![0.0; n - d]);
    let origin = vec![0.0; n];

    // direct orbit of H
    let direct = run_protocol(&system, theta0.clone(), origin.clone(), tau, step, tau, d, false)?;

    // orbit of H o Phi from the same initial condition, realized as
    // Phi^{-1} o (flow of H) o Phi
    let (wt, wa) = generator.apply(eps, &theta0, &origin, true, None)?;
    let conj_traj =
        integrate(&system, &PhaseState::start(wt, wa.clone()), tau, step, tau)?;
    let w_end = conj_traj.final_state();
    let (_, back_actions) =
        generator.apply(eps, &w_end.theta, &w_end.actions, false, None)?;
    let conj_drift: Vec<f64> =
        back_actions.iter().zip(&origin).map(|(a, b)| a - b).collect();

    let discrepancy = direct
        .drift_adapted
        .iter()
        .zip(&conj_drift)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((discrepancy, allowance))
}
