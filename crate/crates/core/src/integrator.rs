//! Trajectory integration: an implicit-midpoint stepper (symplectic for any
//! smooth Hamiltonian, order 2, exactly time-reversible up to solver
//! tolerance) and an adaptive Dormand-Prince 5(4) reference used only as a
//! cross-check oracle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{reduce_turn, Actions, Angles, NearIntegrableSystem};

/// Convergence tolerance of the implicit midpoint fixed-point solve.
pub const FIXED_POINT_TOL: f64 = 1e-13;
pub const MAX_FIXED_POINT_ITERS: usize = 50;
pub const MAX_STEP_HALVINGS: u32 = 8;

/// Point of an orbit: angles reduced to `[0, 1)`, finite actions, time.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseState {
    pub theta: Vec<f64>,
    pub actions: Vec<f64>,
    pub t: f64,
}

impl PhaseState {
    pub fn new(theta: Angles, actions: Actions, t: f64) -> Self {
        PhaseState { theta: theta.as_slice().to_vec(), actions: actions.as_slice().to_vec(), t }
    }

    pub fn start(theta: Vec<f64>, actions: Vec<f64>) -> Self {
        PhaseState { theta: theta.into_iter().map(reduce_turn).collect(), actions, t: 0.0 }
    }
}

/// Time-ordered samples of one orbit, with the energy series alongside.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub samples: Vec<PhaseState>,
    pub energies: Vec<f64>,
    pub step: f64,
    pub method: &'static str,
    /// Net winding number of each angle over the run.
    pub windings: Vec<i64>,
    /// max_t |H(t) - H(0)| / |H(0)| over the recorded samples.
    pub energy_rel_drift: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &PhaseState {
        self.samples.last().expect("trajectory has at least the initial state")
    }

    fn finish(mut self) -> Self {
        let h0 = self.energies.first().copied().unwrap_or(0.0);
        let scale = h0.abs().max(f64::MIN_POSITIVE);
        self.energy_rel_drift =
            self.energies.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max) / scale;
        self
    }
}

/// Hamiltonian vector field: `theta_dot = grad_I H`, `I_dot = -grad_theta H`.
fn field(
    system: &NearIntegrableSystem,
    theta: &[f64],
    actions: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut dtheta = system.grad_h(actions)?;
    let eps = system.epsilon();
    if eps != 0.0 && !system.f().is_zero() {
        let (ft, fi) = system.f().gradients(theta, actions)?;
        for (d, v) in dtheta.iter_mut().zip(&fi) {
            *d += eps * v;
        }
        let di = ft.into_iter().map(|v| -eps * v).collect();
        Ok((dtheta, di))
    } else {
        Ok((dtheta, vec![0.0; theta.len()]))
    }
}

/// One implicit midpoint step on unreduced coordinates. Solved by fixed-point
/// iteration to [`FIXED_POINT_TOL`]; a non-convergent step is split in two,
/// up to [`MAX_STEP_HALVINGS`] times.
fn midpoint_step_raw(
    system: &NearIntegrableSystem,
    theta: &mut Vec<f64>,
    actions: &mut Vec<f64>,
    h: f64,
    depth: u32,
) -> Result<()> {
    let n = theta.len();
    let (ft0, fi0) = field(system, theta, actions)?;
    let mut next_theta: Vec<f64> = theta.iter().zip(&ft0).map(|(x, d)| x + h * d).collect();
    let mut next_actions: Vec<f64> = actions.iter().zip(&fi0).map(|(x, d)| x + h * d).collect();
    let mut mid_theta = vec![0.0; n];
    let mut mid_actions = vec![0.0; n];
    let mut converged = false;
    for _ in 0..MAX_FIXED_POINT_ITERS {
        for i in 0..n {
            mid_theta[i] = 0.5 * (theta[i] + next_theta[i]);
            mid_actions[i] = 0.5 * (actions[i] + next_actions[i]);
        }
        let (ft, fi) = field(system, &mid_theta, &mid_actions)?;
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let nt = theta[i] + h * ft[i];
            let na = actions[i] + h * fi[i];
            delta = delta.max((nt - next_theta[i]).abs()).max((na - next_actions[i]).abs());
            next_theta[i] = nt;
            next_actions[i] = na;
        }
        if delta <= FIXED_POINT_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        if depth >= MAX_STEP_HALVINGS {
            return Err(Error::NonConvergence { halvings: depth });
        }
        midpoint_step_raw(system, theta, actions, h / 2.0, depth + 1)?;
        return midpoint_step_raw(system, theta, actions, h / 2.0, depth + 1);
    }
    *theta = next_theta;
    *actions = next_actions;
    Ok(())
}

/// One implicit midpoint step; the returned angles are reduced mod 1.
pub fn midpoint_step(
    system: &NearIntegrableSystem,
    state: &PhaseState,
    h: f64,
) -> Result<PhaseState> {
    if !(h != 0.0 && h.is_finite()) {
        return Err(Error::Validation(format!("step must be finite and nonzero, got {h}")));
    }
    let mut theta = state.theta.clone();
    let mut actions = state.actions.clone();
    midpoint_step_raw(system, &mut theta, &mut actions, h, 0)?;
    Ok(PhaseState {
        theta: theta.into_iter().map(reduce_turn).collect(),
        actions,
        t: state.t + h,
    })
}

/// Propagate to time `t_final` (sign gives the direction) without recording;
/// used for generating-function flows.
pub fn integrate_to(
    system: &NearIntegrableSystem,
    theta0: &[f64],
    actions0: &[f64],
    t_final: f64,
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if t_final == 0.0 {
        return Ok((theta0.to_vec(), actions0.to_vec()));
    }
    let steps = (t_final.abs() / h.abs()).ceil().max(1.0) as u64;
    let dt = t_final / steps as f64;
    let mut theta = theta0.to_vec();
    let mut actions = actions0.to_vec();
    for _ in 0..steps {
        midpoint_step_raw(system, &mut theta, &mut actions, dt, 0)?;
    }
    Ok((theta, actions))
}

/// Fixed-step implicit midpoint integration with output stride `dt_out`.
/// The step is trimmed so an integer number of steps lands exactly on
/// `t_final`; the final state is always recorded.
pub fn integrate(
    system: &NearIntegrableSystem,
    state0: &PhaseState,
    t_final: f64,
    h: f64,
    dt_out: f64,
) -> Result<Trajectory> {
    if !(t_final > 0.0) {
        return Err(Error::Validation(format!("T must be positive, got {t_final}")));
    }
    if !(h > 0.0) {
        return Err(Error::Validation(format!("step must be positive, got {h}")));
    }
    let steps = (t_final / h).ceil().max(1.0) as u64;
    let dt = t_final / steps as f64;
    let stride = (dt_out / dt).round().max(1.0) as u64;

    let mut theta = state0.theta.clone();
    let mut actions = state0.actions.clone();
    let mut windings = vec![0i64; theta.len()];
    let mut samples = Vec::with_capacity((steps / stride + 2) as usize);
    let mut energies = Vec::with_capacity(samples.capacity());
    samples.push(PhaseState { theta: theta.clone(), actions: actions.clone(), t: state0.t });
    energies.push(system.energy(&theta, &actions)?);

    for step_idx in 1..=steps {
        midpoint_step_raw(system, &mut theta, &mut actions, dt, 0)?;
        for (w, x) in windings.iter_mut().zip(theta.iter_mut()) {
            let floor = x.floor();
            *w += floor as i64;
            *x = reduce_turn(*x);
        }
        if step_idx % stride == 0 || step_idx == steps {
            let t = state0.t + step_idx as f64 * dt;
            samples.push(PhaseState { theta: theta.clone(), actions: actions.clone(), t });
            energies.push(system.energy(&theta, &actions)?);
        }
    }

    Ok(Trajectory {
        samples,
        energies,
        step: dt,
        method: "implicit-midpoint",
        windings,
        energy_rel_drift: 0.0,
    }
    .finish())
}

/// Step-size policy for drift runs: resolves the perturbation's `2 pi`
/// factor, caps the energy wobble well below the 1e-8 budget across the
/// sweep, and keeps at least 1e3 steps per slow pendulum period
/// `1 / sqrt(eps lambda)`.
pub fn default_step(eps: f64, lambda: f64) -> f64 {
    let base = 1e-2_f64.min(1e-4 / eps.sqrt().max(1e-300));
    let mut h = base / crate::hamiltonian::TWO_PI;
    if lambda > 0.0 && eps > 0.0 {
        h = h.min(1.0 / (1e3 * (eps * lambda).sqrt()));
    }
    h
}

// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince 5(4) reference integration (not symplectic);
/// only ever used to cross-check the midpoint scheme.
pub fn reference_integrate(
    system: &NearIntegrableSystem,
    state0: &PhaseState,
    t_final: f64,
    tol: f64,
) -> Result<Trajectory> {
    if t_final == 0.0 {
        return Err(Error::Validation("T must be nonzero".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    let n = state0.theta.len();
    let dir = t_final.signum();
    let mut theta = state0.theta.clone();
    let mut actions = state0.actions.clone();
    let mut t = 0.0_f64;
    let mut h = dir * (t_final.abs() / 100.0).clamp(1e-8, 1e-2);

    let mut samples = vec![PhaseState { theta: theta.clone(), actions: actions.clone(), t: state0.t }];
    let mut energies = vec![system.energy(&theta, &actions)?];

    let mut k_theta = vec![vec![0.0; n]; 7];
    let mut k_actions = vec![vec![0.0; n]; 7];
    let mut guard: u64 = 0;
    while (t_final - t) * dir > 0.0 {
        guard += 1;
        if guard > 50_000_000 {
            return Err(Error::NonConvergence { halvings: 0 });
        }
        if (t + h - t_final) * dir > 0.0 {
            h = t_final - t;
        }
        let (ft, fi) = field(system, &theta, &actions)?;
        k_theta[0] = ft;
        k_actions[0] = fi;
        for s in 0..6 {
            let mut st = theta.clone();
            let mut sa = actions.clone();
            for j in 0..=s {
                let a = DP_A[s][j];
                if a == 0.0 {
                    continue;
                }
                for i in 0..n {
                    st[i] += h * a * k_theta[j][i];
                    sa[i] += h * a * k_actions[j][i];
                }
            }
            let _ = DP_C; // stage times are implicit (autonomous field)
            let (ft, fi) = field(system, &st, &sa)?;
            k_theta[s + 1] = ft;
            k_actions[s + 1] = fi;
        }
        // 5th-order solution uses the last A row; the embedded 4th-order
        // solution uses B4.
        let mut new_theta = theta.clone();
        let mut new_actions = actions.clone();
        let mut err: f64 = 0.0;
        for i in 0..n {
            let mut y5t = 0.0;
            let mut y5a = 0.0;
            let mut y4t = 0.0;
            let mut y4a = 0.0;
            for j in 0..7 {
                let b5 = if j < 6 { DP_A[5][j] } else { 0.0 };
                y5t += b5 * k_theta[j][i];
                y5a += b5 * k_actions[j][i];
                y4t += DP_B4[j] * k_theta[j][i];
                y4a += DP_B4[j] * k_actions[j][i];
            }
            new_theta[i] = theta[i] + h * y5t;
            new_actions[i] = actions[i] + h * y5a;
            let sc_t = tol + tol * theta[i].abs().max(new_theta[i].abs());
            let sc_a = tol + tol * actions[i].abs().max(new_actions[i].abs());
            err = err.max((h * (y5t - y4t)).abs() / sc_t);
            err = err.max((h * (y5a - y4a)).abs() / sc_a);
        }
        if err <= 1.0 {
            t += h;
            theta = new_theta;
            actions = new_actions;
            samples.push(PhaseState {
                theta: theta.iter().copied().map(reduce_turn).collect(),
                actions: actions.clone(),
                t: state0.t + t,
            });
            energies.push(system.energy(&theta, &actions)?);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }

    Ok(Trajectory {
        samples,
        energies,
        step: f64::NAN,
        method: "dopri5",
        windings: vec![0; n],
        energy_rel_drift: 0.0,
    }
    .finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{FourierPerturbation, TWO_PI};
    use crate::poly::Polynomial;
    use approx::assert_relative_eq;

    fn free_rotor() -> NearIntegrableSystem {
        NearIntegrableSystem::new(
            2,
            Polynomial::half_square_norm(2),
            FourierPerturbation::new(2),
            0.0,
            4.0,
        )
        .unwrap()
    }

    fn pendulum(eps: f64) -> NearIntegrableSystem {
        let mut f = FourierPerturbation::new(2);
        f.add_cosine(&[1, 0], 1.0 / TWO_PI.powi(3)).unwrap();
        NearIntegrableSystem::new(2, Polynomial::half_square_norm(2), f, eps, 4.0).unwrap()
    }

    #[test]
    fn integrable_case_is_exact() {
        let sys = free_rotor();
        let state = PhaseState::start(vec![0.125, 0.75], vec![0.3, -0.2]);
        let next = midpoint_step(&sys, &state, 0.5).unwrap();
        assert_eq!(next.actions, state.actions);
        assert_relative_eq!(next.theta[0], reduce_turn(0.125 + 0.5 * 0.3), epsilon = 1e-15);
        assert_relative_eq!(next.theta[1], reduce_turn(0.75 - 0.5 * 0.2), epsilon = 1e-15);
    }

    #[test]
    fn zero_eps_conserves_actions_exactly_over_long_runs() {
        let sys = free_rotor();
        let state = PhaseState::start(vec![0.0, 0.0], vec![0.37, 0.82]);
        let traj = integrate(&sys, &state, 100.0, 1e-2, 10.0).unwrap();
        let end = traj.final_state();
        assert_eq!(end.actions, state.actions); // bitwise conservation
        for j in 0..2 {
            let expect = reduce_turn(100.0 * state.actions[j]);
            let got = end.theta[j];
            let dist = (got - expect).abs().min(1.0 - (got - expect).abs());
            assert!(dist < 1e-10, "angle {j}: {got} vs {expect}");
        }
    }

    #[test]
    fn reversibility() {
        let sys = pendulum(1e-3);
        let state = PhaseState::start(vec![0.3, 0.1], vec![0.05, 0.93]);
        let forward = midpoint_step(&sys, &state, 0.01).unwrap();
        let back = midpoint_step(&sys, &forward, -0.01).unwrap();
        for j in 0..2 {
            assert!((back.theta[j] - state.theta[j]).abs() < 1e-11);
            assert!((back.actions[j] - state.actions[j]).abs() < 1e-11);
        }
    }

    #[test]
    fn order_two_convergence_against_reference() {
        let sys = pendulum(1e-2);
        let state = PhaseState::start(vec![0.25, 0.0], vec![0.0, 1.0]);
        let t = 20.0;
        let reference = reference_integrate(&sys, &state, t, 1e-12).unwrap();
        let ref_end = reference.final_state();
        let err_of = |h: f64| {
            let traj = integrate(&sys, &state, t, h, t).unwrap();
            let end = traj.final_state();
            end.actions
                .iter()
                .zip(&ref_end.actions)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err_of(0.02);
        let e2 = err_of(0.01);
        let ratio = e1 / e2;
        assert!(
            (3.2..=4.8).contains(&ratio),
            "expected 4x error reduction per halving, got {ratio} ({e1} -> {e2})"
        );
    }

    #[test]
    fn midpoint_agrees_with_reference_on_drift_window() {
        let eps = 1e-4;
        let sys = pendulum(eps);
        let state = PhaseState::start(vec![0.25, 0.0], vec![0.0, 1.0]);
        let t = 10.0 / eps.sqrt();
        let traj = integrate(&sys, &state, t, 4e-4, t).unwrap();
        let reference = reference_integrate(&sys, &state, t, 1e-12).unwrap();
        let a = traj.final_state();
        let b = reference.final_state();
        let diff = a
            .actions
            .iter()
            .zip(&b.actions)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "midpoint vs reference action mismatch {diff}");
    }

    #[test]
    fn reference_round_trip() {
        let sys = pendulum(1e-3);
        let state = PhaseState::start(vec![0.2, 0.6], vec![0.1, 0.8]);
        let tol = 1e-12;
        let fwd = reference_integrate(&sys, &state, 5.0, tol).unwrap();
        let fs = fwd.final_state();
        let back_state = PhaseState { theta: fs.theta.clone(), actions: fs.actions.clone(), t: 0.0 };
        let back = reference_integrate(&sys, &back_state, -5.0, tol).unwrap();
        let bs = back.final_state();
        for j in 0..2 {
            let dist = (bs.actions[j] - state.actions[j]).abs();
            assert!(dist < 10.0 * tol.max(1e-11), "round trip action error {dist}");
        }
    }

    #[test]
    fn pendulum_quarter_period_matches_small_oscillation_formula() {
        // libration near the stable angle theta_1 = 1/2: period 2 pi sqrt(2 pi / eps)
        let eps = 1e-2;
        let sys = pendulum(eps);
        let amplitude = 0.01;
        let state = PhaseState::start(vec![0.5 + amplitude, 0.0], vec![0.0, 1.0]);
        let period = TWO_PI * (TWO_PI / eps).sqrt();
        let traj = reference_integrate(&sys, &state, 0.35 * period, 1e-10).unwrap();
        // first crossing of theta_1 = 1/2 from above is a quarter period
        let mut crossing = None;
        for pair in traj.samples.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if (a.theta[0] - 0.5) > 0.0 && (b.theta[0] - 0.5) <= 0.0 {
                let frac = (a.theta[0] - 0.5) / (a.theta[0] - b.theta[0]);
                crossing = Some(a.t + frac * (b.t - a.t));
                break;
            }
        }
        let quarter = crossing.expect("no crossing found");
        assert_relative_eq!(quarter, period / 4.0, max_relative = 0.01);
    }

    #[test]
    fn energy_drift_stays_tiny_over_one_slow_period() {
        let eps = 1e-4;
        let sys = pendulum(eps);
        let state = PhaseState::start(vec![0.48, 0.0], vec![0.0, 1.0]);
        let period = TWO_PI * (TWO_PI / eps).sqrt();
        let traj = integrate(&sys, &state, period, 5e-4, period / 64.0).unwrap();
        let h0 = traj.energies[0];
        let drift = traj.energies.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-10, "energy drift {drift} over one pendulum period");
    }

    #[test]
    fn default_step_policy_bounds() {
        assert!(default_step(1e-2, 0.025) <= 1.6e-4);
        assert!(default_step(1e-6, 0.025) <= 1.6e-3);
        assert!(default_step(1e-6, 0.025) > 1e-4);
    }
}
