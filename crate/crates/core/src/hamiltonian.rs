//! Near-integrable Hamiltonians `H = h(I) + eps f(theta, I)` in action-angle
//! coordinates.
//!
//! Angles are measured in full turns (period 1) so Fourier modes are
//! `e^{i 2 pi k.theta}`; `h` is a polynomial in the actions and `f` a finite
//! Fourier series whose coefficients are polynomials in the actions. All
//! derivatives are exact term-by-term.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::{CPolynomial, Polynomial};

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Largest imaginary residue tolerated when a real-valued series is evaluated.
pub const REALITY_TOL: f64 = 1e-12;

/// Reduce a coordinate to the canonical torus representative in `[0, 1)`.
pub fn reduce_turn(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Point on the torus `T^n`, components in `[0, 1)` turns.
#[derive(Clone, Debug, PartialEq)]
pub struct Angles(Vec<f64>);

impl Angles {
    pub fn new(components: Vec<f64>) -> Self {
        Angles(components.into_iter().map(reduce_turn).collect())
    }

    pub fn raw(components: Vec<f64>) -> Self {
        Angles(components)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for Angles {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Action variables, sup-norm geometry throughout.
#[derive(Clone, Debug, PartialEq)]
pub struct Actions(Vec<f64>);

impl Actions {
    pub fn new(components: Vec<f64>) -> Self {
        Actions(components)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for Actions {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Finite Fourier series `sum_k c_k(I) e^{i 2 pi k.theta}` with
/// polynomial-in-action coefficients. Both members of each `+-k` pair are
/// stored; reality means `c_{-k} = conj(c_k)` coefficient-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierPerturbation {
    dim: usize,
    modes: BTreeMap<Vec<i64>, CPolynomial>,
}

impl FourierPerturbation {
    pub fn new(dim: usize) -> Self {
        FourierPerturbation { dim, modes: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> impl Iterator<Item = (&[i64], &CPolynomial)> {
        self.modes.iter().map(|(k, c)| (k.as_slice(), c))
    }

    pub fn coefficient(&self, k: &[i64]) -> Option<&CPolynomial> {
        self.modes.get(k)
    }

    /// Sup norm of the mode indices (`K_f`); 0 for a constant series.
    pub fn k_sup(&self) -> i64 {
        self.modes
            .keys()
            .map(|k| k.iter().map(|x| x.abs()).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    pub fn insert_mode(&mut self, k: Vec<i64>, coeff: CPolynomial) -> Result<()> {
        if k.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: k.len() });
        }
        if coeff.vars() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: coeff.vars() });
        }
        if coeff.is_zero() {
            return Ok(());
        }
        match self.modes.entry(k) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let merged = o.get().plus(&coeff)?;
                if merged.is_zero() {
                    o.remove();
                } else {
                    o.insert(merged);
                }
            }
        }
        Ok(())
    }

    /// Add `amplitude * cos(2 pi k.theta)` (constant in the actions).
    pub fn add_cosine(&mut self, k: &[i64], amplitude: f64) -> Result<()> {
        self.add_cosine_poly(k, amplitude, &Polynomial::constant(self.dim, 1.0))
    }

    /// Add `amplitude * p(I) * cos(2 pi k.theta)`.
    pub fn add_cosine_poly(&mut self, k: &[i64], amplitude: f64, p: &Polynomial) -> Result<()> {
        let mut c = CPolynomial::zero(self.dim);
        for (alpha, v) in p.terms() {
            c.add_term(alpha.to_vec(), Complex64::new(v * amplitude / 2.0, 0.0));
        }
        let neg: Vec<i64> = k.iter().map(|x| -x).collect();
        self.insert_mode(k.to_vec(), c.clone())?;
        self.insert_mode(neg, c)
    }

    /// Check `c_{-k} = conj(c_k)` for every stored mode.
    pub fn validate_reality(&self) -> Result<()> {
        for (k, c) in &self.modes {
            let neg: Vec<i64> = k.iter().map(|x| -x).collect();
            let other = self.modes.get(&neg).cloned().unwrap_or_else(|| CPolynomial::zero(self.dim));
            let diff = other.plus(&c.conjugated().scaled(-1.0))?;
            let scale = c.max_coeff_abs().max(1.0);
            if diff.max_coeff_abs() > REALITY_TOL * scale {
                return Err(Error::RealityViolation { imag: diff.max_coeff_abs() });
            }
        }
        Ok(())
    }

    pub fn eval_complex(&self, theta: &[f64], actions: &[f64]) -> Result<Complex64> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: theta.len() });
        }
        if actions.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: actions.len() });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in &self.modes {
            let phase: f64 = k.iter().zip(theta).map(|(&ki, &ti)| ki as f64 * ti).sum();
            acc += c.eval(actions) * Complex64::from_polar(1.0, TWO_PI * phase);
        }
        Ok(acc)
    }

    /// Real evaluation; the imaginary residue must stay below [`REALITY_TOL`].
    pub fn eval(&self, theta: &[f64], actions: &[f64]) -> Result<f64> {
        let z = self.eval_complex(theta, actions)?;
        let scale = self.max_mode_amplitude(actions).max(1.0);
        if z.im.abs() > REALITY_TOL * scale {
            return Err(Error::RealityViolation { imag: z.im.abs() });
        }
        Ok(z.re)
    }

    fn max_mode_amplitude(&self, actions: &[f64]) -> f64 {
        self.modes.values().map(|c| c.eval(actions).norm()).fold(0.0, f64::max)
    }

    /// Exact derivative in the angle `j`: multiplies mode `k` by `i 2 pi k_j`.
    pub fn dtheta(&self, j: usize) -> Self {
        assert!(j < self.dim);
        let mut out = FourierPerturbation::new(self.dim);
        for (k, c) in &self.modes {
            if k[j] == 0 {
                continue;
            }
            let factor = Complex64::new(0.0, TWO_PI * k[j] as f64);
            out.modes.insert(k.clone(), c.map_coeffs(|v| v * factor));
        }
        out
    }

    /// Exact derivative in the action `j`.
    pub fn dactions(&self, j: usize) -> Self {
        assert!(j < self.dim);
        let mut out = FourierPerturbation::new(self.dim);
        for (k, c) in &self.modes {
            let dc = c.partial(j);
            if !dc.is_zero() {
                out.modes.insert(k.clone(), dc);
            }
        }
        out
    }

    /// Mixed partial of arbitrary order (angles first, then actions).
    pub fn partial(&self, alpha_theta: &[u32], alpha_actions: &[u32]) -> Result<Self> {
        if alpha_theta.len() != self.dim || alpha_actions.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: alpha_theta.len() });
        }
        let mut out = self.clone();
        for (j, &m) in alpha_theta.iter().enumerate() {
            for _ in 0..m {
                out = out.dtheta(j);
            }
        }
        for (j, &m) in alpha_actions.iter().enumerate() {
            for _ in 0..m {
                out = out.dactions(j);
            }
        }
        Ok(out)
    }

    /// Both first derivatives in a single sweep over the mode table.
    pub fn gradients(&self, theta: &[f64], actions: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if theta.len() != self.dim || actions.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: theta.len() });
        }
        let mut dtheta = vec![Complex64::new(0.0, 0.0); self.dim];
        let mut dactions = vec![Complex64::new(0.0, 0.0); self.dim];
        let mut scale: f64 = 1.0;
        for (k, c) in &self.modes {
            let phase: f64 = k.iter().zip(theta).map(|(&ki, &ti)| ki as f64 * ti).sum();
            let e = Complex64::from_polar(1.0, TWO_PI * phase);
            let v = c.eval(actions);
            scale = scale.max(v.norm());
            let ve = v * e;
            for (j, &kj) in k.iter().enumerate() {
                if kj != 0 {
                    dtheta[j] += ve * Complex64::new(0.0, TWO_PI * kj as f64);
                }
            }
            for (j, slot) in dactions.iter_mut().enumerate() {
                let dc = c.eval_partial(j, actions);
                if dc.norm_sqr() != 0.0 {
                    *slot += dc * e;
                }
            }
        }
        let mut gt = Vec::with_capacity(self.dim);
        let mut ga = Vec::with_capacity(self.dim);
        for (a, b) in dtheta.into_iter().zip(dactions) {
            let tol = REALITY_TOL * scale.max(1.0) * TWO_PI * self.k_sup().max(1) as f64;
            if a.im.abs() > tol || b.im.abs() > REALITY_TOL * scale.max(1.0) {
                return Err(Error::RealityViolation { imag: a.im.abs().max(b.im.abs()) });
            }
            gt.push(a.re);
            ga.push(b.re);
        }
        Ok((gt, ga))
    }

    pub fn grad_theta(&self, theta: &[f64], actions: &[f64]) -> Result<Vec<f64>> {
        Ok(self.gradients(theta, actions)?.0)
    }

    pub fn grad_actions(&self, theta: &[f64], actions: &[f64]) -> Result<Vec<f64>> {
        Ok(self.gradients(theta, actions)?.1)
    }

    /// Keep only modes whose last `dim - d` indices vanish (the resonant
    /// block in adapted coordinates).
    pub fn filter_to_lattice(&self, d: usize) -> Self {
        let mut out = FourierPerturbation::new(self.dim);
        for (k, c) in &self.modes {
            if k[d..].iter().all(|&x| x == 0) {
                out.modes.insert(k.clone(), c.clone());
            }
        }
        out
    }

    /// Freeze the action argument: coefficients become constants.
    pub fn restricted_to_actions(&self, actions: &[f64]) -> Result<Self> {
        if actions.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: actions.len() });
        }
        let mut out = FourierPerturbation::new(self.dim);
        for (k, c) in &self.modes {
            let v = c.eval(actions);
            if v.norm() > 0.0 {
                out.modes.insert(k.clone(), CPolynomial::constant(self.dim, v));
            }
        }
        Ok(out)
    }

    /// Project a series supported on the first `d` mode indices down to a
    /// `d`-dimensional torus (coefficients must already be constants).
    pub fn project_first(&self, d: usize) -> Result<Self> {
        let mut out = FourierPerturbation::new(d);
        for (k, c) in &self.modes {
            if !k[d..].iter().all(|&x| x == 0) {
                return Err(Error::Validation(
                    "cannot project: support extends beyond the first d indices".into(),
                ));
            }
            let mut cc = CPolynomial::zero(d);
            for (alpha, v) in c.terms() {
                if alpha.iter().any(|&a| a != 0) {
                    return Err(Error::Validation(
                        "cannot project: coefficients still depend on the actions".into(),
                    ));
                }
                cc.add_term(vec![0; d], *v);
            }
            out.insert_mode(k[..d].to_vec(), cc)?;
        }
        Ok(out)
    }

    /// Relabel modes by `k' = m k` and compose coefficients with the linear
    /// action substitution `I = s I'`.
    pub fn transform(&self, m: &[Vec<i64>], s: &[Vec<i64>]) -> Result<Self> {
        let mut out = FourierPerturbation::new(self.dim);
        for (k, c) in &self.modes {
            let kk: Vec<i64> = (0..self.dim)
                .map(|i| {
                    let acc: i128 = k
                        .iter()
                        .enumerate()
                        .map(|(j, &kj)| m[i][j] as i128 * kj as i128)
                        .sum();
                    i64::try_from(acc).map_err(|_| Error::IntegerOverflow)
                })
                .collect::<Result<_>>()?;
            out.insert_mode(kk, c.compose_linear(s)?)?;
        }
        Ok(out)
    }

    /// Translate the action argument: coefficients become `c_k(I + a)`.
    pub fn shifted_actions(&self, a: &[f64]) -> Result<Self> {
        let mut out = FourierPerturbation::new(self.dim);
        for (k, c) in &self.modes {
            out.insert_mode(k.clone(), c.shifted(a)?)?;
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = FourierPerturbation::new(self.dim);
        for (k, c) in &self.modes {
            out.modes.insert(k.clone(), c.scaled(s));
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut out = self.clone();
        for (k, c) in &other.modes {
            out.insert_mode(k.clone(), c.clone())?;
        }
        Ok(out)
    }
}

/// `H(theta, I) = h(I) + eps f(theta, I)` on `T^n x B_r`.
#[derive(Clone, Debug)]
pub struct NearIntegrableSystem {
    dim: usize,
    h: Polynomial,
    f: FourierPerturbation,
    epsilon: f64,
    domain_radius: f64,
}

impl NearIntegrableSystem {
    pub fn new(
        dim: usize,
        h: Polynomial,
        f: FourierPerturbation,
        epsilon: f64,
        domain_radius: f64,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Validation(format!("n must be at least 2, got {dim}")));
        }
        if h.vars() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: h.vars() });
        }
        if f.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: f.dim() });
        }
        if !(epsilon >= 0.0) {
            return Err(Error::Validation(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if !(domain_radius > 0.0) {
            return Err(Error::Validation(format!(
                "domain radius must be positive, got {domain_radius}"
            )));
        }
        f.validate_reality()?;
        Ok(NearIntegrableSystem { dim, h, f, epsilon, domain_radius })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> &Polynomial {
        &self.h
    }

    pub fn f(&self) -> &FourierPerturbation {
        &self.f
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        NearIntegrableSystem::new(
            self.dim,
            self.h.clone(),
            self.f.clone(),
            epsilon,
            self.domain_radius,
        )
    }

    fn check_actions(&self, actions: &[f64]) -> Result<()> {
        if actions.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: actions.len() });
        }
        Ok(())
    }

    pub fn eval_h(&self, actions: &[f64]) -> Result<f64> {
        self.check_actions(actions)?;
        Ok(self.h.eval(actions))
    }

    /// Frequency map `grad h`; equals `omega` at a resonant point.
    pub fn grad_h(&self, actions: &[f64]) -> Result<Vec<f64>> {
        self.check_actions(actions)?;
        Ok(self.h.gradient(actions))
    }

    pub fn hess_h(&self, actions: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_actions(actions)?;
        Ok(self.h.hessian(actions))
    }

    pub fn eval_f(&self, theta: &[f64], actions: &[f64]) -> Result<f64> {
        self.f.eval(theta, actions)
    }

    pub fn grad_theta_f(&self, theta: &[f64], actions: &[f64]) -> Result<Vec<f64>> {
        self.f.grad_theta(theta, actions)
    }

    pub fn grad_actions_f(&self, theta: &[f64], actions: &[f64]) -> Result<Vec<f64>> {
        self.f.grad_actions(theta, actions)
    }

    pub fn energy(&self, theta: &[f64], actions: &[f64]) -> Result<f64> {
        Ok(self.eval_h(actions)? + self.epsilon * self.eval_f(theta, actions)?)
    }

    /// Sampled sup norms of `|h|_{C^2}` on `B_r` and `|f|_{C^3}` on
    /// `T^n x B_r`. Reported, never enforced.
    pub fn sup_norm_estimates(&self, grid_per_dim: usize) -> Result<SupNormReport> {
        if grid_per_dim < 8 {
            return Err(Error::Validation("grid resolution must be at least 8".into()));
        }
        let r = self.domain_radius;
        let action_grid: Vec<f64> = (0..grid_per_dim)
            .map(|i| -r + 2.0 * r * i as f64 / (grid_per_dim - 1) as f64)
            .collect();
        let angle_grid: Vec<f64> = (0..grid_per_dim).map(|i| i as f64 / grid_per_dim as f64).collect();

        let mut h_c2: f64 = 0.0;
        for alpha in crate::poly::multi_indices(self.dim, 2) {
            let mut d = self.h.clone();
            for (j, &m) in alpha.iter().enumerate() {
                for _ in 0..m {
                    d = d.partial(j);
                }
            }
            if d.is_zero() {
                continue;
            }
            for_each_grid_point(&action_grid, self.dim, &mut |point| {
                h_c2 = h_c2.max(d.eval(point).abs());
            });
        }

        let mut f_c3: f64 = 0.0;
        for alpha in crate::poly::multi_indices(2 * self.dim, 3) {
            let (at, ai) = alpha.split_at(self.dim);
            let d = self.f.partial(at, ai)?;
            if d.is_zero() {
                continue;
            }
            let mut err = None;
            for_each_grid_point(&angle_grid, self.dim, &mut |theta| {
                for_each_grid_point(&action_grid, self.dim, &mut |actions| {
                    match d.eval(theta, actions) {
                        Ok(v) => f_c3 = f_c3.max(v.abs()),
                        Err(e) => err = Some(e),
                    }
                });
            });
            if let Some(e) = err {
                return Err(e);
            }
        }

        Ok(SupNormReport { h_c2, f_c3, grid_per_dim })
    }
}

/// Sampled norms from [`NearIntegrableSystem::sup_norm_estimates`].
#[derive(Clone, Debug, serde::Serialize)]
pub struct SupNormReport {
    pub h_c2: f64,
    pub f_c3: f64,
    pub grid_per_dim: usize,
}

fn for_each_grid_point(grid: &[f64], dim: usize, f: &mut impl FnMut(&[f64])) {
    let mut idx = vec![0usize; dim];
    let mut point = vec![grid[0]; dim];
    loop {
        for (p, &i) in point.iter_mut().zip(idx.iter()) {
            *p = grid[i];
        }
        f(&point);
        let mut pos = 0;
        loop {
            if pos == dim {
                return;
            }
            idx[pos] += 1;
            if idx[pos] < grid.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
