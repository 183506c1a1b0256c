//! JSON schemas for system and resonance definition files.
//!
//! A system file looks like:
//!
//! ```json
//! {
//!   "n": 2,
//!   "domain_radius": 2.0,
//!   "epsilon": 1e-4,
//!   "h": [ { "alpha": [2, 0], "coeff": 0.5 }, { "alpha": [0, 2], "coeff": 0.5 } ],
//!   "f": [
//!     { "k": [1, 0],  "re": 0.002015720902074968, "im": 0.0 },
//!     { "k": [-1, 0], "re": 0.002015720902074968, "im": 0.0 }
//!   ]
//! }
//! ```
//!
//! Each mode's coefficient is `(re + i im) * coeff_poly(I)`; `coeff_poly`
//! defaults to the constant 1. Both members of every `+-k` pair must be
//! listed (reality is validated, not repaired).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{FourierPerturbation, NearIntegrableSystem};
use crate::poly::{CPolynomial, Polynomial};
use crate::resonance::{Rational, ResonanceData};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialDef {
    pub alpha: Vec<u32>,
    pub coeff: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeDef {
    pub k: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coeff_poly: Vec<MonomialDef>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDef {
    pub n: usize,
    pub domain_radius: f64,
    pub epsilon: f64,
    pub h: Vec<MonomialDef>,
    pub f: Vec<ModeDef>,
}

impl SystemDef {
    pub fn to_system(&self) -> Result<NearIntegrableSystem> {
        let mut h = Polynomial::zero(self.n);
        for m in &self.h {
            if m.alpha.len() != self.n {
                return Err(Error::Validation(format!(
                    "h monomial alpha {:?} does not have n = {} entries",
                    m.alpha, self.n
                )));
            }
            h.add_term(m.alpha.clone(), m.coeff);
        }
        let mut f = FourierPerturbation::new(self.n);
        for mode in &self.f {
            if mode.k.len() != self.n {
                return Err(Error::Validation(format!(
                    "mode index {:?} does not have n = {} entries",
                    mode.k, self.n
                )));
            }
            let scalar = Complex64::new(mode.re, mode.im);
            let mut coeff = CPolynomial::zero(self.n);
            if mode.coeff_poly.is_empty() {
                coeff.add_term(vec![0; self.n], scalar);
            } else {
                for m in &mode.coeff_poly {
                    if m.alpha.len() != self.n {
                        return Err(Error::Validation(format!(
                            "coeff_poly alpha {:?} does not have n = {} entries",
                            m.alpha, self.n
                        )));
                    }
                    coeff.add_term(m.alpha.clone(), scalar.scale(m.coeff));
                }
            }
            f.insert_mode(mode.k.clone(), coeff)?;
        }
        NearIntegrableSystem::new(self.n, h, f, self.epsilon, self.domain_radius)
    }

    pub fn from_system(system: &NearIntegrableSystem) -> Self {
        let h = system
            .h()
            .terms()
            .map(|(alpha, &coeff)| MonomialDef { alpha: alpha.to_vec(), coeff })
            .collect();
        let mut f = Vec::new();
        for (k, c) in system.f().modes() {
            for (alpha, v) in c.terms() {
                f.push(ModeDef {
                    k: k.to_vec(),
                    re: v.re,
                    im: v.im,
                    coeff_poly: if alpha.iter().all(|&a| a == 0) {
                        Vec::new()
                    } else {
                        vec![MonomialDef { alpha: alpha.to_vec(), coeff: 1.0 }]
                    },
                });
            }
        }
        SystemDef {
            n: system.dim(),
            domain_radius: system.domain_radius(),
            epsilon: system.epsilon(),
            h,
            f,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptedOmegaDef {
    pub d: usize,
    pub omega_tilde: Vec<f64>,
}

/// Either an exactly rational frequency (resonances computed exactly) or a
/// frequency already in adapted form `omega = (0, omega_tilde)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum OmegaDef {
    Rational(Vec<Rational>),
    Adapted(AdaptedOmegaDef),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceDef {
    pub i_star: Vec<f64>,
    pub omega: OmegaDef,
}

impl ResonanceDef {
    pub fn to_resonance(&self) -> Result<ResonanceData> {
        match &self.omega {
            OmegaDef::Rational(r) => ResonanceData::from_rational(self.i_star.clone(), r),
            OmegaDef::Adapted(a) => {
                ResonanceData::from_adapted(self.i_star.clone(), a.d, a.omega_tilde.clone())
            }
        }
    }
}

pub fn load_system(path: &std::path::Path) -> Result<NearIntegrableSystem> {
    let text = std::fs::read_to_string(path)?;
    let def: SystemDef = serde_json::from_str(&text)?;
    def.to_system()
}

pub fn load_resonance(path: &std::path::Path) -> Result<ResonanceData> {
    let text = std::fs::read_to_string(path)?;
    let def: ResonanceDef = serde_json::from_str(&text)?;
    def.to_resonance()
}
