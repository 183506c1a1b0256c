//! Sparse multivariate polynomials with exact term-by-term calculus.
//!
//! Coefficients are generic over real (`f64`) and complex (`Complex64`)
//! scalars; the monomial support is finite, so evaluation and derivatives of
//! every order are exact up to floating-point rounding.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar types usable as polynomial coefficients.
pub trait Scalar:
    Copy
    + PartialEq
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn scale(self, s: f64) -> Self;
    fn conj(self) -> Self;
    fn abs(self) -> f64;
    fn is_zero(&self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn conj(self) -> Self {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
}

/// Sparse polynomial: multi-index exponent -> coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<T: Scalar> {
    vars: usize,
    terms: BTreeMap<Vec<u32>, T>,
}

pub type Polynomial = Poly<f64>;
pub type CPolynomial = Poly<Complex64>;

impl<T: Scalar> Poly<T> {
    pub fn zero(vars: usize) -> Self {
        Poly { vars, terms: BTreeMap::new() }
    }

    pub fn constant(vars: usize, c: T) -> Self {
        let mut p = Poly::zero(vars);
        if !c.is_zero() {
            p.terms.insert(vec![0; vars], c);
        }
        p
    }

    pub fn monomial(vars: usize, alpha: &[u32], c: T) -> Result<Self> {
        if alpha.len() != vars {
            return Err(Error::DimensionMismatch { expected: vars, got: alpha.len() });
        }
        let mut p = Poly::zero(vars);
        p.add_term(alpha.to_vec(), c);
        Ok(p)
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &T)> {
        self.terms.iter().map(|(a, c)| (a.as_slice(), c))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|a| a.iter().sum()).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, alpha: Vec<u32>, c: T) {
        debug_assert_eq!(alpha.len(), self.vars);
        let entry = self.terms.entry(alpha);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                if !c.is_zero() {
                    v.insert(c);
                }
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    o.insert(s);
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> T {
        debug_assert_eq!(x.len(), self.vars);
        let mut acc = T::zero();
        for (alpha, c) in &self.terms {
            let mut mono = 1.0;
            for (xi, &ai) in x.iter().zip(alpha.iter()) {
                if ai > 0 {
                    mono *= xi.powi(ai as i32);
                }
            }
            acc = acc + c.scale(mono);
        }
        acc
    }

    /// Value of `d p / d x_j` at `x` without materializing the derivative.
    pub fn eval_partial(&self, j: usize, x: &[f64]) -> T {
        debug_assert!(j < self.vars && x.len() == self.vars);
        let mut acc = T::zero();
        for (alpha, c) in &self.terms {
            let aj = alpha[j];
            if aj == 0 {
                continue;
            }
            let mut mono = aj as f64;
            for (i, (&xi, &ai)) in x.iter().zip(alpha.iter()).enumerate() {
                let power = if i == j { ai - 1 } else { ai };
                if power > 0 {
                    mono *= xi.powi(power as i32);
                }
            }
            acc = acc + c.scale(mono);
        }
        acc
    }

    /// Value of `d^2 p / (d x_i d x_j)` at `x`, evaluated directly.
    pub fn eval_partial2(&self, i: usize, j: usize, x: &[f64]) -> T {
        debug_assert!(i < self.vars && j < self.vars && x.len() == self.vars);
        let mut acc = T::zero();
        for (alpha, c) in &self.terms {
            let factor = if i == j {
                (alpha[i] * alpha[i].saturating_sub(1)) as f64
            } else {
                (alpha[i] * alpha[j]) as f64
            };
            if factor == 0.0 {
                continue;
            }
            let mut mono = factor;
            for (k, (&xk, &ak)) in x.iter().zip(alpha.iter()).enumerate() {
                let mut power = ak;
                if k == i {
                    power -= 1;
                }
                if k == j {
                    power -= 1;
                }
                if power > 0 {
                    mono *= xk.powi(power as i32);
                }
            }
            acc = acc + c.scale(mono);
        }
        acc
    }

    /// Exact partial derivative with respect to variable `j`.
    pub fn partial(&self, j: usize) -> Self {
        assert!(j < self.vars);
        let mut out = Poly::zero(self.vars);
        for (alpha, c) in &self.terms {
            if alpha[j] == 0 {
                continue;
            }
            let mut a = alpha.clone();
            let k = a[j];
            a[j] -= 1;
            out.add_term(a, c.scale(k as f64));
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if other.vars != self.vars {
            return Err(Error::DimensionMismatch { expected: self.vars, got: other.vars });
        }
        let mut out = self.clone();
        for (alpha, c) in &other.terms {
            out.add_term(alpha.clone(), *c);
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = Poly::zero(self.vars);
        for (alpha, c) in &self.terms {
            out.add_term(alpha.clone(), c.scale(s));
        }
        out
    }

    pub fn times(&self, other: &Self) -> Result<Self> {
        if other.vars != self.vars {
            return Err(Error::DimensionMismatch { expected: self.vars, got: other.vars });
        }
        let mut out = Poly::zero(self.vars);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let alpha: Vec<u32> = a.iter().zip(b.iter()).map(|(x, y)| x + y).collect();
                out.add_term(alpha, *ca * *cb);
            }
        }
        Ok(out)
    }

    pub fn map_coeffs(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = Poly::zero(self.vars);
        for (alpha, c) in &self.terms {
            out.add_term(alpha.clone(), f(*c));
        }
        out
    }

    pub fn conjugated(&self) -> Self {
        self.map_coeffs(|c| c.conj())
    }

    pub fn max_coeff_abs(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).fold(0.0, f64::max)
    }

    /// Substitute `x_j = sum_i m[j][i] * y_i` (integer linear change of
    /// variables); the result is a polynomial in `y`.
    pub fn compose_linear(&self, m: &[Vec<i64>]) -> Result<Self> {
        if m.len() != self.vars || m.iter().any(|row| row.len() != self.vars) {
            return Err(Error::DimensionMismatch { expected: self.vars, got: m.len() });
        }
        let forms: Vec<Self> = (0..self.vars)
            .map(|j| {
                let mut l = Poly::zero(self.vars);
                for (i, &mij) in m[j].iter().enumerate() {
                    if mij != 0 {
                        let mut alpha = vec![0u32; self.vars];
                        alpha[i] = 1;
                        l.add_term(alpha, T::from_f64(mij as f64));
                    }
                }
                l
            })
            .collect();
        let mut out = Poly::zero(self.vars);
        for (alpha, c) in &self.terms {
            let mut term = Poly::constant(self.vars, *c);
            for (j, &aj) in alpha.iter().enumerate() {
                for _ in 0..aj {
                    term = term.times(&forms[j])?;
                }
            }
            out = out.plus(&term)?;
        }
        Ok(out)
    }

    /// Translate the argument: returns `p(x + a)` as a polynomial in `x`.
    pub fn shifted(&self, a: &[f64]) -> Result<Self> {
        if a.len() != self.vars {
            return Err(Error::DimensionMismatch { expected: self.vars, got: a.len() });
        }
        let mut out = Poly::zero(self.vars);
        for (alpha, c) in &self.terms {
            let mut term = Poly::constant(self.vars, *c);
            for (j, &aj) in alpha.iter().enumerate() {
                // (x_j + a_j)^aj expanded binomially
                let mut factor = Poly::zero(self.vars);
                for m in 0..=aj {
                    let mut idx = vec![0u32; self.vars];
                    idx[j] = m;
                    let coeff = binomial(aj, m) * a[j].powi((aj - m) as i32);
                    factor.add_term(idx, T::from_f64(coeff));
                }
                term = term.times(&factor)?;
            }
            out = out.plus(&term)?;
        }
        Ok(out)
    }
}

impl Polynomial {
    /// The quadratic kinetic term `|x|^2 / 2` (Euclidean norm).
    pub fn half_square_norm(vars: usize) -> Self {
        let mut p = Polynomial::zero(vars);
        for j in 0..vars {
            let mut alpha = vec![0u32; vars];
            alpha[j] = 2;
            p.add_term(alpha, 0.5);
        }
        p
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.vars).map(|j| self.eval_partial(j, x)).collect()
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.vars)
            .map(|i| (0..self.vars).map(|j| self.eval_partial2(i, j, x)).collect())
            .collect()
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// All multi-indices of `n` variables with total degree at most `max_total`.
pub fn multi_indices(n: usize, max_total: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; n];
    fn rec(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, pos: usize, budget: u32) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        for v in 0..=budget {
            current[pos] = v;
            rec(out, current, pos + 1, budget - v);
        }
        current[pos] = 0;
    }
    rec(&mut out, &mut current, 0, max_total);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eval_and_gradient_quadratic() {
        let h = Polynomial::half_square_norm(2);
        assert_relative_eq!(h.eval(&[0.0, 1.0]), 0.5);
        assert_eq!(h.eval(&[0.0, 0.0]), 0.0);
        assert_eq!(h.gradient(&[0.0, 1.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn mixed_monomial() {
        // h = x1^2/2 + x1 x2 at (1,2) -> 2.5
        let mut h = Polynomial::zero(2);
        h.add_term(vec![2, 0], 0.5);
        h.add_term(vec![1, 1], 1.0);
        assert_relative_eq!(h.eval(&[1.0, 2.0]), 2.5);
    }

    #[test]
    fn shift_matches_direct_eval() {
        let mut p = Polynomial::zero(2);
        p.add_term(vec![3, 0], 2.0);
        p.add_term(vec![1, 2], -1.5);
        p.add_term(vec![0, 0], 0.25);
        let a = [0.3, -1.2];
        let q = p.shifted(&a).unwrap();
        for x in [[0.0, 0.0], [1.0, 2.0], [-0.7, 0.4]] {
            let shifted = [x[0] + a[0], x[1] + a[1]];
            assert_relative_eq!(q.eval(&x), p.eval(&shifted), epsilon = 1e-12);
        }
    }

    #[test]
    fn compose_linear_matches_direct_eval() {
        let mut p = Polynomial::zero(2);
        p.add_term(vec![2, 0], 1.0);
        p.add_term(vec![1, 1], 3.0);
        let m = vec![vec![1, -1], vec![0, 1]]; // x1 = y1 - y2, x2 = y2
        let q = p.compose_linear(&m).unwrap();
        for y in [[0.5, 0.25], [-1.0, 2.0]] {
            let x = [y[0] - y[1], y[1]];
            assert_relative_eq!(q.eval(&y), p.eval(&x), epsilon = 1e-12);
        }
    }

    #[test]
    fn multi_index_count() {
        // C(n + D, D) indices of degree <= D
        assert_eq!(multi_indices(2, 2).len(), 6);
        assert_eq!(multi_indices(3, 3).len(), 20);
    }
}
