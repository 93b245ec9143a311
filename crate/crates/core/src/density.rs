//! Expansion densities, their distribution functions and moments.
//!
//! Every variant has the form `φ(x; 0, c₀) (1 + a₁H₁ + a₂H₂ + a₃H₃)` with
//! `H_k φ = (-∂)^k φ`, so the distribution function telescopes to
//! `Φ - φ (a₁ + a₂H₁ + a₃H₂)` and the moments follow from
//! `∫ x^m H_k φ = m!/(m-k)! E[Z^{m-k}]`. The density is signed and is never
//! clamped.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::constants::{high_regime, low_regime, ExpansionConstants};
use crate::error::{Error, Result};

/// `H_k(x; 0, c₀) = e^{x²/(2c₀)} (-∂_x)^k e^{-x²/(2c₀)}` for `k ∈ {1, 2, 3}`.
pub fn hermite(k: u32, x: f64, c0: f64) -> Result<f64> {
    if !(c0 > 0.0) {
        return Err(Error::domain(format!("c0 must be positive, got {c0}")));
    }
    match k {
        1 => Ok(x / c0),
        2 => Ok(x * x / (c0 * c0) - 1.0 / c0),
        3 => Ok(x * x * x / (c0 * c0 * c0) - 3.0 * x / (c0 * c0)),
        _ => Err(Error::domain(format!("Hermite order {k} is not supported"))),
    }
}

fn h1(x: f64, c0: f64) -> f64 {
    x / c0
}

fn h2(x: f64, c0: f64) -> f64 {
    x * x / (c0 * c0) - 1.0 / c0
}

fn h3(x: f64, c0: f64) -> f64 {
    x * x * x / (c0 * c0 * c0) - 3.0 * x / (c0 * c0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    NormalOnly,
    /// The density with regime indicators.
    Expansion,
    /// All correction terms kept, with the split drift coefficient.
    ExpansionPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub constants: ExpansionConstants,
    pub horizon: f64,
    pub variant: Variant,
}

impl DensityModel {
    pub fn new(constants: ExpansionConstants, horizon: f64, variant: Variant) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("T must be positive, got {horizon}")));
        }
        if !(constants.c0 > 0.0) {
            return Err(Error::domain("c0 must be positive"));
        }
        Ok(Self {
            constants,
            horizon,
            variant,
        })
    }

    /// Coefficients `(a₁, a₂, a₃)` of `H₁, H₂, H₃`.
    ///
    /// `ExpansionPlus` omits the `c₃` term when `c₃′` is unavailable
    /// (`H >= 2/3`, where it diverges, or not computed).
    pub fn coefficients(&self) -> [f64; 3] {
        let c = &self.constants;
        let t = self.horizon;
        let h = c.hurst;
        let sqrt_inv = t.powf(-0.5);
        let t_q = t.powf(-c.q);
        let t_c2 = t.powf(4.0 * h - 3.0);
        let c3 = c.c3.unwrap_or(0.0);
        match self.variant {
            Variant::NormalOnly => [0.0; 3],
            Variant::Expansion => [
                c.c1 * t_q,
                if high_regime(h) { 0.5 * c.c2 * t_c2 } else { 0.0 },
                if low_regime(h) { c3 / 3.0 * sqrt_inv } else { 0.0 },
            ],
            Variant::ExpansionPlus => [
                c.c11_plus * sqrt_inv + c.c12_plus * t_q,
                0.5 * c.c2 * t_c2,
                c3 / 3.0 * sqrt_inv,
            ],
        }
    }

    fn phi(&self, x: f64) -> f64 {
        let c0 = self.constants.c0;
        (-0.5 * x * x / c0).exp() / (2.0 * std::f64::consts::PI * c0).sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let c0 = self.constants.c0;
        let [a1, a2, a3] = self.coefficients();
        self.phi(x) * (1.0 + a1 * h1(x, c0) + a2 * h2(x, c0) + a3 * h3(x, c0))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let c0 = self.constants.c0;
        let [a1, a2, a3] = self.coefficients();
        let big_phi = 0.5 * erfc(-x / (2.0 * c0).sqrt());
        big_phi - self.phi(x) * (a1 + a2 * h1(x, c0) + a3 * h2(x, c0))
    }

    /// Raw moment of order 1, 2 or 3 of the signed density.
    pub fn moment(&self, order: u32) -> Result<f64> {
        let c0 = self.constants.c0;
        let [a1, a2, a3] = self.coefficients();
        match order {
            1 => Ok(a1),
            2 => Ok(c0 + 2.0 * a2),
            3 => Ok(3.0 * c0 * a1 + 6.0 * a3),
            _ => Err(Error::domain(format!("moment order {order} is not supported"))),
        }
    }
}
