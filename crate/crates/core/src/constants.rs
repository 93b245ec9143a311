//! The scalars of the expansion densities.
//!
//! Everything is closed form except `c₃′`, a two-dimensional quadrature. It is
//! homogeneous of degree one in `θ`, so it is computed once per `(H, spec)` at
//! `θ = 1`, cached, and rescaled.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::estimator::{q_exponent, BetaSpec, H_SEAM};
use crate::fou::ModelParams;
use crate::kernels::{cu2_closed_form, cu3_quadrature, KernelParams};
use crate::quadrature::{Estimate, QuadratureSpec};

fn check(theta: f64, sigma: f64, hurst: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain(format!("theta must be positive, got {theta}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(hurst > 0.5 && hurst < 0.75) {
        return Err(Error::domain(format!("need H in (1/2, 3/4), got {hurst}")));
    }
    Ok(())
}

/// `c₀(θ, H)`.
pub fn c0(theta: f64, hurst: f64) -> Result<f64> {
    Ok(cu2_closed_form(&KernelParams::new(theta, hurst)?))
}

/// `c₂ = -(2H-1)θ^{4H-2} / (2H²(3-4H)Γ(2H)²)`.
pub fn c2(theta: f64, hurst: f64) -> Result<f64> {
    check(theta, 1.0, hurst)?;
    let h = hurst;
    let g = gamma(2.0 * h);
    Ok(-(2.0 * h - 1.0) * theta.powf(4.0 * h - 2.0) / (2.0 * h * h * (3.0 - 4.0 * h) * g * g))
}

/// `G(θ) = -2σ²H²Γ(2H)θ^{-2H-1}`.
pub fn g_cap(theta: f64, sigma: f64, hurst: f64) -> Result<f64> {
    check(theta, sigma, hurst)?;
    let h = hurst;
    Ok(-2.0 * sigma * sigma * h * h * gamma(2.0 * h) * theta.powf(-2.0 * h - 1.0))
}

/// `C(θ) = σ²HΓ(2H+2)θ^{-2H-2} / 2`.
pub fn c_cap(theta: f64, sigma: f64, hurst: f64) -> Result<f64> {
    check(theta, sigma, hurst)?;
    let h = hurst;
    Ok(0.5 * sigma * sigma * h * gamma(2.0 * h + 2.0) * theta.powf(-2.0 * h - 2.0))
}

/// `b∞(θ) = -σ²α_H(4H-1)Γ(2H-1)θ^{-2H-1}/2 + x₀²/(2θ)`.
pub fn b_inf(theta: f64, sigma: f64, hurst: f64, x0: f64) -> Result<f64> {
    check(theta, sigma, hurst)?;
    let h = hurst;
    let alpha = h * (2.0 * h - 1.0);
    Ok(-0.5 * sigma * sigma * alpha * (4.0 * h - 1.0) * gamma(2.0 * h - 1.0) * theta.powf(-2.0 * h - 1.0)
        + x0 * x0 / (2.0 * theta))
}

/// `λ = (2H+1)/(2θ)`.
pub fn lambda(theta: f64, hurst: f64) -> Result<f64> {
    check(theta, 1.0, hurst)?;
    Ok((2.0 * hurst + 1.0) / (2.0 * theta))
}

/// `1{H <= 5/8}`: the regime where the `c₃` and drift corrections are of
/// order `T^{-1/2}`.
pub fn low_regime(hurst: f64) -> bool {
    hurst <= H_SEAM
}

/// `1{H >= 5/8}`: the regime where the `c₂` variance correction is kept.
pub fn high_regime(hurst: f64) -> bool {
    hurst >= H_SEAM
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// The `β` that makes `c₁` vanish: `1{H <= 5/8} (G⁻¹b∞ + λc₀)` at `θ`.
pub fn bias_correcting_beta(theta: f64, sigma: f64, hurst: f64, x0: f64) -> Result<f64> {
    check(theta, sigma, hurst)?;
    if !low_regime(hurst) {
        return Ok(0.0);
    }
    Ok(b_inf(theta, sigma, hurst, x0)? / g_cap(theta, sigma, hurst)? + lambda(theta, hurst)? * c0(theta, hurst)?)
}

type CacheKey = (u64, u64, u64, usize, u64, bool);

fn cache() -> &'static Mutex<HashMap<CacheKey, Estimate>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Estimate>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `c₃′(θ, H)`, cached per `(H, spec)`.
pub fn c3_prime(theta: f64, hurst: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    KernelParams::new(theta, hurst)?;
    let key = (
        hurst.to_bits(),
        spec.rel_tol.to_bits(),
        spec.abs_tol.to_bits(),
        spec.max_subdivisions,
        spec.tail_cutoff.to_bits(),
        spec.singularity_split,
    );
    let cached = cache().lock().unwrap().get(&key).copied();
    let unit = match cached {
        Some(v) => v,
        None => {
            let v = cu3_quadrature(&KernelParams::new(1.0, hurst)?, spec)?;
            cache().lock().unwrap().insert(key, v);
            v
        }
    };
    Ok(unit.scale(theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionConstants {
    pub c0: f64,
    pub c2: f64,
    /// `None` when not computed (`H > 5/8`) or divergent (`H >= 2/3`).
    pub c3_prime: Option<f64>,
    pub c3: Option<f64>,
    #[serde(rename = "G")]
    pub g_cap: f64,
    #[serde(rename = "C_cap")]
    pub c_cap: f64,
    pub b_inf: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub tau: f64,
    pub c1: f64,
    pub c11_plus: f64,
    pub c12_plus: f64,
    pub q: f64,
    pub beta_at_theta: f64,
    #[serde(rename = "H")]
    pub hurst: f64,
    pub theta: f64,
    pub sigma: f64,
    pub x0: f64,
}

/// Assembles every constant at the model's `θ`. `c₃′` is computed when the
/// density needs it (`H <= 5/8`); see [`ExpansionConstants::with_c3_prime`].
pub fn assemble_constants(
    params: &ModelParams,
    beta: &BetaSpec,
    spec: &QuadratureSpec,
) -> Result<ExpansionConstants> {
    params.check_estimation_range()?;
    spec.validate()?;
    let (theta, sigma, h, x0) = (params.theta, params.sigma, params.h(), params.x0);
    let c0 = c0(theta, h)?;
    let g = g_cap(theta, sigma, h)?;
    let b = b_inf(theta, sigma, h, x0)?;
    let lam = lambda(theta, h)?;
    let beta_at_theta = beta.evaluate(theta, params)?;
    let low = indicator(low_regime(h));
    let kappa = low * lam;
    let tau = low * b / g - beta_at_theta;
    let mut out = ExpansionConstants {
        c0,
        c2: c2(theta, h)?,
        c3_prime: None,
        c3: None,
        g_cap: g,
        c_cap: c_cap(theta, sigma, h)?,
        b_inf: b,
        lambda: lam,
        kappa,
        tau,
        c1: tau + kappa * c0,
        c11_plus: b / g + lam * c0,
        c12_plus: -beta_at_theta,
        q: q_exponent(h)?,
        beta_at_theta,
        hurst: h,
        theta,
        sigma,
        x0,
    };
    if low_regime(h) {
        out = out.with_c3_prime(spec)?;
    }
    Ok(out)
}

impl ExpansionConstants {
    /// Fills in `c₃′` and `c₃` (finite only for `H < 2/3`).
    pub fn with_c3_prime(mut self, spec: &QuadratureSpec) -> Result<Self> {
        let c3p = c3_prime(self.theta, self.hurst, spec)?.value;
        self.c3_prime = Some(c3p);
        self.c3 = Some(c3p + 3.0 * self.lambda * self.c0 * self.c0);
        Ok(self)
    }
}

/// A failed identity: `lhs != rhs` beyond the tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub identity: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

/// Relative tolerance of [`internal_consistency_check`].
pub const IDENTITY_TOL: f64 = 1e-12;

/// Rechecks every defining identity of `c`; an empty list means consistent.
pub fn internal_consistency_check(c: &ExpansionConstants) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |identity: &'static str, lhs: f64, rhs: f64, scale: f64| {
        let tol = IDENTITY_TOL * (lhs.abs().max(rhs.abs()).max(scale));
        if !((lhs - rhs).abs() <= tol) {
            out.push(Violation { identity, lhs, rhs });
        }
    };
    let (th, s, h, x0) = (c.theta, c.sigma, c.hurst, c.x0);
    let closed = |r: Result<f64>| r.unwrap_or(f64::NAN);
    push("c0 = closed form", c.c0, closed(c0(th, h)), 0.0);
    push("c2 = closed form", c.c2, closed(c2(th, h)), 0.0);
    push("G = closed form", c.g_cap, closed(g_cap(th, s, h)), 0.0);
    push("C = closed form", c.c_cap, closed(c_cap(th, s, h)), 0.0);
    push("b_inf = closed form", c.b_inf, closed(b_inf(th, s, h, x0)), 0.0);
    push("lambda = (2H+1)/(2 theta)", c.lambda, (2.0 * h + 1.0) / (2.0 * th), 0.0);
    push("lambda = -C/G", c.lambda, -c.c_cap / c.g_cap, 0.0);
    let low = indicator(low_regime(h));
    push("kappa = 1{H<=5/8} lambda", c.kappa, low * c.lambda, 0.0);
    let gb = c.b_inf / c.g_cap;
    push("tau = 1{H<=5/8} b_inf/G - beta", c.tau, low * gb - c.beta_at_theta, gb.abs() + c.beta_at_theta.abs());
    push("c1 = tau + kappa c0", c.c1, c.tau + c.kappa * c.c0, c.tau.abs() + (c.kappa * c.c0).abs());
    if let (Some(c3), Some(c3p)) = (c.c3, c.c3_prime) {
        push("c3 = c3' + 3 lambda c0^2", c3, c3p + 3.0 * c.lambda * c.c0 * c.c0, c3p.abs());
    }
    push("c11+ = b_inf/G + lambda c0", c.c11_plus, gb + c.lambda * c.c0, gb.abs() + c.lambda * c.c0);
    push("c12+ = -beta", c.c12_plus, -c.beta_at_theta, 0.0);
    push(
        "c11+ + c12+ = c1 + 1{H>5/8}(b_inf/G + lambda c0)",
        c.c11_plus + c.c12_plus,
        c.c1 + (1.0 - low) * (gb + c.lambda * c.c0),
        c.c11_plus.abs() + c.c12_plus.abs(),
    );
    push("q = q(H)", c.q, closed(q_exponent(h)), 0.0);
    if h == H_SEAM {
        // Both branches of q and both indicator regimes meet here.
        push("q branches agree at H = 5/8", 0.5, 3.0 - 4.0 * h, 0.0);
        let both = indicator(low_regime(h) && high_regime(h));
        push("both regimes active at H = 5/8", both, 1.0, 0.0);
    }
    out
}
