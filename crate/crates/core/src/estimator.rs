//! The moment estimator of `θ`, its bias correction and the clipping to the
//! parameter space.
//!
//! `θ̃ = (Q_T / (σ²HΓ(2H)T))^{-1/(2H)}` inverts the stationary second moment
//! `μ(θ) = σ²HΓ(2H)θ^{-2H}` at the time average of `X²`. The corrected value
//! `θ̂° = θ̃ - T^{-1/2-q} β(θ̃)` is kept if both `θ̃` and `θ̂°` lie in `Θ`;
//! otherwise the fallback `θ*` is reported.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::constants::bias_correcting_beta;
use crate::error::{Error, Result};
use crate::fou::ModelParams;

/// Upper end of the `q = 1/2` regime (inclusive).
pub const H_SEAM: f64 = 0.625;

pub fn mu(theta: f64, sigma: f64, hurst: f64) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain(format!("theta must be positive, got {theta}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::domain(format!("Hurst index must lie in (0, 1), got {hurst}")));
    }
    Ok(sigma * sigma * hurst * gamma(2.0 * hurst) * theta.powf(-2.0 * hurst))
}

fn check_expansion_range(hurst: f64) -> Result<()> {
    if hurst > 0.5 && hurst < 0.75 {
        Ok(())
    } else {
        Err(Error::domain(format!("need H in (1/2, 3/4), got {hurst}")))
    }
}

/// `q(H) = min(1/2, 3 - 4H)`.
pub fn q_exponent(hurst: f64) -> Result<f64> {
    check_expansion_range(hurst)?;
    Ok(if hurst <= H_SEAM { 0.5 } else { 3.0 - 4.0 * hurst })
}

pub fn moment_estimate(q_t: f64, horizon: f64, sigma: f64, hurst: f64) -> Result<f64> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::domain(format!("T must be positive, got {horizon}")));
    }
    if q_t == 0.0 {
        return Err(Error::Estimation("Q_T = 0: the estimator is undefined".into()));
    }
    if !(q_t > 0.0 && q_t.is_finite()) {
        return Err(Error::domain(format!("Q_T must be positive and finite, got {q_t}")));
    }
    let unit = mu(1.0, sigma, hurst)?;
    let theta = (q_t / (unit * horizon)).powf(-1.0 / (2.0 * hurst));
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::Estimation(format!("moment estimate {theta} is not finite")));
    }
    Ok(theta)
}

/// The bounded parameter space `Θ = (theta_lo, theta_hi)` and its fallback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub theta_star: f64,
}

impl Default for ParamSpace {
    fn default() -> Self {
        Self {
            theta_lo: 0.1,
            theta_hi: 10.0,
            theta_star: 1.0,
        }
    }
}

impl ParamSpace {
    pub fn new(theta_lo: f64, theta_hi: f64, theta_star: f64) -> Result<Self> {
        let s = Self {
            theta_lo,
            theta_hi,
            theta_star,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_lo > 0.0 && self.theta_hi > self.theta_lo && self.theta_hi.is_finite()) {
            return Err(Error::domain(format!(
                "parameter space needs 0 < theta_lo < theta_hi < inf, got ({}, {})",
                self.theta_lo, self.theta_hi
            )));
        }
        if !self.contains(self.theta_star) {
            return Err(Error::domain(format!(
                "theta_star {} is not inside the parameter space",
                self.theta_star
            )));
        }
        Ok(())
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta > self.theta_lo && theta < self.theta_hi
    }
}

/// The correction function `β`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum BetaSpec {
    #[default]
    Zero,
    /// The choice that makes `c₁` vanish.
    BiasCorrect,
    Constant(f64),
}

impl BetaSpec {
    /// `β(θ)` for the model's `σ`, `H` and `x₀`.
    pub fn evaluate(&self, theta: f64, model: &ModelParams) -> Result<f64> {
        match *self {
            BetaSpec::Zero => Ok(0.0),
            BetaSpec::Constant(b) => Ok(b),
            BetaSpec::BiasCorrect => bias_correcting_beta(theta, model.sigma, model.h(), model.x0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub q_t: f64,
    pub theta_tilde: f64,
    pub theta_hat: f64,
    pub clipped: bool,
    pub q_exponent: f64,
}

/// Applies `θ̂° = θ̃ - T^{-1/2-q} β(θ̃)` and the clipping rule; returns
/// `(θ̂, clipped)`.
pub fn bias_corrected_estimate(
    theta_tilde: f64,
    horizon: f64,
    space: &ParamSpace,
    beta: &BetaSpec,
    model: &ModelParams,
) -> Result<(f64, bool)> {
    if !theta_tilde.is_finite() {
        return Err(Error::domain("theta_tilde must be finite"));
    }
    if !(horizon > 0.0) {
        return Err(Error::domain("T must be positive"));
    }
    let q = q_exponent(model.h())?;
    if !space.contains(theta_tilde) {
        return Ok((space.theta_star, true));
    }
    let b = beta.evaluate(theta_tilde, model)?;
    let corrected = theta_tilde - horizon.powf(-0.5 - q) * b;
    if space.contains(corrected) {
        Ok((corrected, false))
    } else {
        Ok((space.theta_star, true))
    }
}

/// Both estimators from an observed `Q_T`. `model.theta` is not used.
pub fn estimate(
    q_t: f64,
    horizon: f64,
    model: &ModelParams,
    space: &ParamSpace,
    beta: &BetaSpec,
) -> Result<EstimatorResult> {
    model.check_estimation_range()?;
    let theta_tilde = moment_estimate(q_t, horizon, model.sigma, model.h())?;
    let (theta_hat, clipped) = bias_corrected_estimate(theta_tilde, horizon, space, beta, model)?;
    Ok(EstimatorResult {
        q_t,
        theta_tilde,
        theta_hat,
        clipped,
        q_exponent: q_exponent(model.h())?,
    })
}
