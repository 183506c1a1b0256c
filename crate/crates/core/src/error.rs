//! Error taxonomy shared by the whole laboratory.

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad inputs: dimension mismatches, schema violations, invalid parameters.
    Validation,
    /// Numeric failure: hidden resonances, non-convergence, assumption failures.
    Numeric,
    /// Filesystem / serialization trouble.
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("mode table violates reality: |Im| = {imag:.3e} at a real evaluation point")]
    RealityViolation { imag: f64 },

    #[error("frequency vector is zero")]
    ZeroFrequency,

    #[error("assumption (A.1) fails: frequency has no nontrivial resonance")]
    NoResonance,

    #[error("assumption (A.2) fails: averaged perturbation is constant (lambda = 0)")]
    ConstantAverage,

    #[error("hidden resonance: |k.omega| = {divisor:.3e} < {tol:.1e} for k = {k:?}")]
    HiddenResonance { k: Vec<i64>, divisor: f64, tol: f64 },

    #[error("x = {x:.6e} below Psi(1) = {psi1:.6e}; Delta(x) undefined")]
    BelowPsiDomain { x: f64, psi1: f64 },

    #[error("Delta({x:.6e}) exceeds the tabulated range; increase Q_max (currently {q_max})")]
    IncreaseQMax { x: f64, q_max: u32 },

    #[error("integer lattice basis is not saturated; unimodular completion failed")]
    NotSaturated,

    #[error("integer overflow in exact lattice arithmetic")]
    IntegerOverflow,

    #[error("implicit solver failed to converge after {halvings} step halvings")]
    NonConvergence { halvings: u32 },

    #[error(
        "transformed state escaped the target ball: |I| = {norm:.3e} > {bound:.3e} (epsilon too large)"
    )]
    EscapedDomain { norm: f64, bound: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DimensionMismatch { .. } | Error::Validation(_) => ErrorClass::Validation,
            Error::Io(_) => ErrorClass::Io,
            Error::Json(_) => ErrorClass::Validation,
            _ => ErrorClass::Numeric,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
