//! Desk-scale laboratory for micro-instability of near-integrable
//! Hamiltonian systems.
//!
//! The crate models Hamiltonians `H = h(I) + eps f(theta, I)` with polynomial
//! `h` and finite Fourier `f`, computes resonant modules and adapted
//! coordinates exactly over the integers, tabulates the small-divisor
//! functions `Psi`, `Delta`, `mu`, builds a first-order resonant normal form,
//! and measures action drift against the `c sqrt(eps)` threshold with
//! scaling-law fits.

// `if !(x > 0.0)` validation is deliberate: NaN parameters must fail too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod divisors;
pub mod drift;
pub mod error;
pub mod fitting;
pub mod hamiltonian;
pub mod integrator;
pub mod intmat;
pub mod io;
pub mod normal_form;
pub mod poly;
pub mod resonance;
pub mod sampling;
pub mod systems;

pub use error::{Error, ErrorClass, Result};
