//! Resonant averaging: the averaged perturbation, its restriction to the
//! resonant point, the critical angle, and the constants the drift
//! experiments are built on.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{reduce_turn, sup_norm, FourierPerturbation, NearIntegrableSystem};

/// Average over the fast angles: in adapted coordinates this keeps exactly
/// the modes supported on the resonant block (`k_{d+1..n} = 0`); coefficient
/// polynomials are untouched.
pub fn resonant_average(f: &FourierPerturbation, d: usize) -> FourierPerturbation {
    f.filter_to_lattice(d)
}

/// Numerical time average of `f` along the linear flow `theta + s omega`,
/// `(1/T) int_0^T f(theta + s omega, I) ds`. Test oracle for
/// [`resonant_average`]; composite Gauss-Legendre in `s`, resolved against
/// the fastest mode frequency.
pub fn time_average_oracle(
    f: &FourierPerturbation,
    omega: &[f64],
    theta: &[f64],
    actions: &[f64],
    t_final: f64,
) -> Result<f64> {
    if omega.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: omega.len() });
    }
    if !(t_final > 0.0) {
        return Err(Error::Validation(format!("T must be positive, got {t_final}")));
    }
    // 8-point Gauss-Legendre on [-1, 1]
    const GL_X: [f64; 8] = [
        -0.9602898564975363,
        -0.7966664774136267,
        -0.525532409916329,
        -0.1834346424956498,
        0.1834346424956498,
        0.525532409916329,
        0.7966664774136267,
        0.9602898564975363,
    ];
    const GL_W: [f64; 8] = [
        0.1012285362903763,
        0.2223810344533745,
        0.3137066458778873,
        0.362683783378362,
        0.362683783378362,
        0.3137066458778873,
        0.2223810344533745,
        0.1012285362903763,
    ];

    let max_freq = f
        .modes()
        .map(|(k, _)| k.iter().zip(omega).map(|(&ki, &wi)| ki as f64 * wi).sum::<f64>().abs())
        .fold(0.0, f64::max);
    let len = if max_freq > 0.0 { (0.75 / max_freq).min(1.0) } else { 1.0 };
    let segments = (t_final / len).ceil() as u64;
    let seg = t_final / segments as f64;

    let mut acc = 0.0;
    let mut point = vec![0.0; f.dim()];
    for s in 0..segments {
        let a = s as f64 * seg;
        for (x, w) in GL_X.iter().zip(GL_W.iter()) {
            let t = a + 0.5 * seg * (x + 1.0);
            for ((p, &th), &om) in point.iter_mut().zip(theta).zip(omega) {
                *p = th + t * om;
            }
            acc += w * 0.5 * seg * f.eval(&point, actions)?;
        }
    }
    Ok(acc / t_final)
}

/// Critical angle and gradient size of a trigonometric polynomial on `T^d`:
/// 64-per-dimension grid scan of the sup-norm gradient, then 50 damped
/// ascent steps on the squared Euclidean gradient norm. The returned value
/// is never below the grid maximum; grid ties resolve to the
/// lexicographically smallest point.
pub fn locate_theta_star(f_star: &FourierPerturbation) -> Result<(Vec<f64>, f64)> {
    let d = f_star.dim();
    let grads: Vec<FourierPerturbation> = (0..d).map(|j| f_star.dtheta(j)).collect();
    let hess: Vec<Vec<FourierPerturbation>> =
        (0..d).map(|i| (0..d).map(|j| grads[i].dtheta(j)).collect()).collect();
    let empty_actions = vec![0.0; d];

    let grad_sup = |theta: &[f64]| -> Result<f64> {
        let mut m: f64 = 0.0;
        for g in &grads {
            m = m.max(g.eval(theta, &empty_actions)?.abs());
        }
        Ok(m)
    };

    const GRID: usize = 64;
    let mut best_theta = vec![0.0; d];
    let mut best: f64 = grad_sup(&best_theta)?;
    for theta in TorusGrid::new(d, GRID) {
        let s = grad_sup(&theta)?;
        if s > best {
            best = s;
            best_theta = theta;
        }
    }

    if best == 0.0 && f_star.modes().all(|(k, _)| k.iter().all(|&x| x == 0)) {
        return Err(Error::ConstantAverage);
    }

    // polish by ascent on E = |grad f*|_2^2
    let energy = |theta: &[f64]| -> Result<f64> {
        let mut e = 0.0;
        for g in &grads {
            let v = g.eval(theta, &empty_actions)?;
            e += v * v;
        }
        Ok(e)
    };
    let energy_grad = |theta: &[f64]| -> Result<Vec<f64>> {
        let mut out = vec![0.0; d];
        for j in 0..d {
            let gj = grads[j].eval(theta, &empty_actions)?;
            for (i, o) in out.iter_mut().enumerate() {
                *o += 2.0 * gj * hess[j][i].eval(theta, &empty_actions)?;
            }
        }
        Ok(out)
    };

    let mut theta = best_theta.clone();
    let mut e = energy(&theta)?;
    let mut step = 1.0 / (GRID as f64 * 4.0);
    for _ in 0..50 {
        let g = energy_grad(&theta)?;
        let norm = sup_norm(&g);
        if norm == 0.0 {
            break;
        }
        let trial: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t + step * gi / norm).collect();
        let et = energy(&trial)?;
        if et > e {
            theta = trial;
            e = et;
            step *= 1.2;
        } else {
            step *= 0.5;
        }
    }
    let polished = grad_sup(&theta)?;
    let (theta_star, lambda) = if polished > best {
        (theta.iter().copied().map(reduce_turn).collect(), polished)
    } else {
        (best_theta, best)
    };
    if lambda <= 0.0 {
        return Err(Error::ConstantAverage);
    }
    Ok((theta_star, lambda))
}

/// Sup over a 128-per-dimension grid of the Hessian norm of a trigonometric
/// polynomial on `T^d` (operator norm for the sup norm: max absolute row
/// sum), exact up to grid resolution.
pub fn hessian_sup(f_star: &FourierPerturbation) -> Result<f64> {
    let d = f_star.dim();
    let hess: Vec<Vec<FourierPerturbation>> =
        (0..d).map(|i| (0..d).map(|j| f_star.dtheta(i).dtheta(j)).collect()).collect();
    let empty_actions = vec![0.0; d];
    const GRID: usize = 128;
    let mut best: f64 = 0.0;
    for theta in TorusGrid::new(d, GRID) {
        for row in &hess {
            let mut sum = 0.0;
            for entry in row {
                sum += entry.eval(&theta, &empty_actions)?.abs();
            }
            best = best.max(sum);
        }
    }
    Ok(best)
}

/// Uniform grid on `T^d` in lexicographic order (last coordinate fastest).
struct TorusGrid {
    idx: Vec<usize>,
    grid: usize,
    done: bool,
}

impl TorusGrid {
    fn new(d: usize, grid: usize) -> Self {
        TorusGrid { idx: vec![0; d], grid, done: d == 0 }
    }
}

impl Iterator for TorusGrid {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.done {
            return None;
        }
        let theta: Vec<f64> =
            self.idx.iter().map(|&i| i as f64 / self.grid as f64).collect();
        let mut pos = self.idx.len();
        loop {
            if pos == 0 {
                self.done = true;
                break;
            }
            pos -= 1;
            self.idx[pos] += 1;
            if self.idx[pos] < self.grid {
                break;
            }
            self.idx[pos] = 0;
        }
        Some(theta)
    }
}

/// Constants driving a drift run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DriftConstants {
    /// Gradient size at the critical angle.
    pub lambda: f64,
    /// Sup of the Hessian norm of the restricted average.
    pub lipschitz: f64,
    /// Angular budget `sqrt(lambda / (6 L))`.
    pub delta: f64,
    /// Drift threshold coefficient `lambda delta / 8`.
    pub c: f64,
}

impl DriftConstants {
    pub fn tau(&self, eps: f64) -> f64 {
        self.delta / eps.sqrt()
    }

    pub fn threshold(&self, eps: f64) -> f64 {
        self.c * eps.sqrt()
    }
}

/// `delta = sqrt(lambda / (6 L))`, `tau = delta / sqrt(eps)`,
/// `c = lambda delta / 8`. With the unit normalization (`L = 1`) `delta`
/// reduces to `sqrt(lambda / 6)`.
pub fn derive_constants(lambda: f64, lipschitz: f64, eps: f64) -> Result<(f64, f64, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::ConstantAverage);
    }
    if !(lipschitz > 0.0) {
        return Err(Error::Validation(format!(
            "Hessian bound must be positive, got {lipschitz}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::Validation(format!("epsilon must be positive, got {eps}")));
    }
    let delta = (lambda / (6.0 * lipschitz)).sqrt();
    Ok((delta, delta / eps.sqrt(), lambda * delta / 8.0))
}

/// The averaged perturbation of an adapted system together with every
/// derived constant.
#[derive(Clone, Debug)]
pub struct AveragedPerturbation {
    pub f_omega: FourierPerturbation,
    /// Restriction to the resonant point, as a series on `T^d`.
    pub f_omega_star: FourierPerturbation,
    pub theta_star: Vec<f64>,
    pub constants: DriftConstants,
    pub d: usize,
}

impl AveragedPerturbation {
    /// Compute everything from a system already in adapted coordinates with
    /// the resonant point at the origin.
    pub fn from_adapted(system: &NearIntegrableSystem, d: usize) -> Result<Self> {
        if d == 0 || d >= system.dim() {
            return Err(Error::Validation(format!(
                "d must satisfy 1 <= d <= n-1, got {d} with n = {}",
                system.dim()
            )));
        }
        let f_omega = resonant_average(system.f(), d);
        let origin = vec![0.0; system.dim()];
        let f_omega_star = f_omega.restricted_to_actions(&origin)?.project_first(d)?;
        if f_omega_star.modes().all(|(k, _)| k.iter().all(|&x| x == 0)) {
            return Err(Error::ConstantAverage);
        }
        let (theta_star, lambda) = locate_theta_star(&f_omega_star)?;
        let lipschitz = hessian_sup(&f_omega_star)?;
        let (delta, _, c) = derive_constants(lambda, lipschitz, 1.0)?;
        Ok(AveragedPerturbation {
            f_omega,
            f_omega_star,
            theta_star,
            constants: DriftConstants { lambda, lipschitz, delta, c },
            d,
        })
    }

    pub fn tau(&self, eps: f64) -> f64 {
        self.constants.tau(eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::TWO_PI;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn two_mode() -> FourierPerturbation {
        let mut f = FourierPerturbation::new(2);
        f.add_cosine(&[1, 0], 1.0).unwrap();
        f.add_cosine(&[1, 1], 1.0).unwrap();
        f
    }

    #[test]
    fn average_filters_nonresonant_modes() {
        let avg = resonant_average(&two_mode(), 1);
        assert_eq!(avg.mode_count(), 2); // +-(1,0)
        assert!(avg.coefficient(&[1, 1]).is_none());
        let theta = [0.37, 0.82];
        let actions = [0.0, 0.0];
        assert_relative_eq!(
            avg.eval(&theta, &actions).unwrap(),
            (TWO_PI * theta[0]).cos(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn average_of_nonresonant_is_zero() {
        let mut f = FourierPerturbation::new(2);
        f.add_cosine(&[1, 1], 1.0).unwrap();
        f.add_cosine(&[0, 2], 0.5).unwrap();
        assert!(resonant_average(&f, 1).is_zero());
    }

    #[test]
    fn average_matches_trapezoid_quadrature() {
        // f_omega(theta_1, I) vs 64-node trapezoid over theta_2
        let f = two_mode();
        let avg = resonant_average(&f, 1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let t1 = rng.random::<f64>();
            let actions = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
            let mut quad = 0.0;
            for j in 0..64 {
                quad += f.eval(&[t1, j as f64 / 64.0], &actions).unwrap();
            }
            quad /= 64.0;
            assert_relative_eq!(
                avg.eval(&[t1, 0.0], &actions).unwrap(),
                quad,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn time_average_constant_and_resonant() {
        let mut f = FourierPerturbation::new(2);
        f.add_cosine(&[0, 0], 2.5).unwrap();
        let v = time_average_oracle(&f, &[0.0, 1.0], &[0.1, 0.9], &[0.0, 0.0], 7.0).unwrap();
        assert_relative_eq!(v, 2.5, epsilon = 1e-12);

        let mut g = FourierPerturbation::new(2);
        g.add_cosine(&[1, 0], 1.0).unwrap();
        for theta1 in [0.0, 0.2, 0.8] {
            let v =
                time_average_oracle(&g, &[0.0, 1.0], &[theta1, 0.4], &[0.0, 0.0], 25.0).unwrap();
            assert_relative_eq!(v, (TWO_PI * theta1).cos(), epsilon = 1e-10);
        }
    }

    #[test]
    fn time_average_kills_nonresonant_mode() {
        let mut f = FourierPerturbation::new(2);
        f.add_cosine(&[1, 1], 1.0).unwrap();
        let t = 1000.0;
        let v = time_average_oracle(&f, &[0.0, 1.0], &[0.3, 0.6], &[0.0, 0.0], t).unwrap();
        assert!(v.abs() <= 2.0 / (TWO_PI * t) * 1.0001, "residual {v}");
    }

    #[test]
    fn theta_star_of_cosine() {
        let mut f = FourierPerturbation::new(1);
        f.add_cosine(&[1], 1.0).unwrap();
        let (theta, lambda) = locate_theta_star(&f).unwrap();
        assert_relative_eq!(lambda, TWO_PI, epsilon = 1e-10);
        assert_relative_eq!(theta[0], 0.25); // lexicographic winner of {1/4, 3/4}

        let mut g = FourierPerturbation::new(1);
        g.add_cosine(&[1], 1.0 / TWO_PI.powi(3)).unwrap();
        let (_, lam) = locate_theta_star(&g).unwrap();
        assert_relative_eq!(lam, 1.0 / (TWO_PI * TWO_PI), epsilon = 1e-12);
    }

    #[test]
    fn theta_star_beats_dense_grid_in_2d() {
        let mut f = FourierPerturbation::new(2);
        f.add_cosine(&[1, 0], 1.0).unwrap();
        f.add_cosine(&[0, 1], 0.5).unwrap();
        let (_, lambda) = locate_theta_star(&f).unwrap();
        // brute-force 256^2 grid on the sup-norm gradient
        let grads = [f.dtheta(0), f.dtheta(1)];
        let mut grid_best: f64 = 0.0;
        for i in 0..256 {
            for j in 0..256 {
                let theta = [i as f64 / 256.0, j as f64 / 256.0];
                let s = grads
                    .iter()
                    .map(|g| g.eval(&theta, &[0.0, 0.0]).unwrap().abs())
                    .fold(0.0, f64::max);
                grid_best = grid_best.max(s);
            }
        }
        assert!(lambda >= grid_best - 1e-12);
        assert!(lambda - grid_best < 1e-8);
    }

    #[test]
    fn constant_average_flagged() {
        let f = FourierPerturbation::new(1);
        assert!(matches!(locate_theta_star(&f), Err(Error::ConstantAverage)));
    }

    #[test]
    fn derived_constants_examples() {
        let (delta, _, c) = derive_constants(6.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(delta, 1.0);
        assert_relative_eq!(c, 0.75);

        // pendulum family: lambda = (2 pi)^-2, L = (2 pi)^-1
        let lambda = 1.0 / (TWO_PI * TWO_PI);
        let lip = 1.0 / TWO_PI;
        let (delta, tau, _) = derive_constants(lambda, lip, 1e-4).unwrap();
        assert_relative_eq!(delta, (1.0 / (12.0 * std::f64::consts::PI)).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(delta, 0.16287, epsilon = 1e-5);
        assert_relative_eq!(tau, delta / 0.01, epsilon = 1e-10);
    }

    #[test]
    fn gradient_persists_near_theta_star() {
        // |grad f*| >= lambda/2 on the ball |theta - theta*| <= 3 delta^2
        let mut f = FourierPerturbation::new(1);
        f.add_cosine(&[1], 1.0 / TWO_PI.powi(3)).unwrap();
        let (theta_star, lambda) = locate_theta_star(&f).unwrap();
        let lip = hessian_sup(&f).unwrap();
        assert_relative_eq!(lip, 1.0 / TWO_PI, epsilon = 1e-9);
        let (delta, _, _) = derive_constants(lambda, lip, 1.0).unwrap();
        let ball = 3.0 * delta * delta;
        let g = f.dtheta(0);
        for i in 0..=400 {
            let offset = ball * (i as f64 / 200.0 - 1.0);
            let v = g.eval(&[theta_star[0] + offset], &[0.0]).unwrap().abs();
            assert!(
                v >= lambda / 2.0 - 1e-12,
                "gradient lost at offset {offset}: {v} < {}",
                lambda / 2.0
            );
        }
    }
}
