//! Singular kernels and the quadratures behind the expansion constants.
//!
//! Every kernel here is a window integral
//!
//! ```text
//! M(lo, hi, d) = ∫_lo^hi exp(-θ|s|) |s - d|^(2H-2) ds
//! ```
//!
//! written in coordinates centred on the peak of the exponential factor. The
//! offset `d` of the algebraic singularity is passed in directly rather than
//! recovered as a difference of two absolute positions, so it stays exact even
//! far out on the half line.
//!
//! Outer integrals over unbounded ranges use the map `t = s (e^w - 1)` up to a
//! large `t_max`, and the remaining power-law tail is added analytically.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_cells, Estimate, QuadratureSpec};

/// Parameters shared by all kernels: `θ`, `H`, `α_H = H(2H-1)` and
/// `K_U = -θ^{2H} / (4H²Γ(2H))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub theta: f64,
    pub hurst: f64,
    pub alpha_h: f64,
    pub k_u: f64,
}

impl KernelParams {
    pub fn new(theta: f64, hurst: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::domain(format!("theta must be positive, got {theta}")));
        }
        if !(hurst > 0.5 && hurst < 0.75) {
            return Err(Error::domain(format!(
                "kernels need H in (1/2, 3/4), got {hurst}"
            )));
        }
        Ok(Self {
            theta,
            hurst,
            alpha_h: hurst * (2.0 * hurst - 1.0),
            k_u: -theta.powf(2.0 * hurst) / (4.0 * hurst * hurst * gamma(2.0 * hurst)),
        })
    }

    /// The singular exponent `2H - 2`.
    pub fn exponent(&self) -> f64 {
        2.0 * self.hurst - 2.0
    }
}

/// `a(x1, x2, x3) = exp(-θ|x1 - x2|) |x2 - x3|^(2H-2)`.
pub fn kernel_a(x1: f64, x2: f64, x3: f64, p: &KernelParams) -> Result<f64> {
    if x2 == x3 {
        return Err(Error::domain("kernel a is singular at x2 = x3"));
    }
    Ok((-p.theta * (x1 - x2).abs()).exp() * (x2 - x3).abs().powf(p.exponent()))
}

/// Closed form of the untruncated full-line kernel at zero offset,
/// `∫ exp(-θ|z|) |z|^(2H-2) dz = 2Γ(2H-1)θ^(1-2H)`.
pub fn full_line_kernel_at_zero(p: &KernelParams) -> f64 {
    2.0 * gamma(2.0 * p.hurst - 1.0) * p.theta.powf(1.0 - 2.0 * p.hurst)
}

/// The constant of the uniform bound `ā(r) <= C (1 ∧ r^(2H-2))`.
pub fn kernel_bound_constant(p: &KernelParams) -> f64 {
    let h = p.hurst;
    let th = p.theta;
    2f64.powf(3.0 - 2.0 * h) / th * (1.0 + (-1f64).exp() / (2.0 * h - 1.0))
        + 2.0 / th
        + 2.0 / (2.0 * h - 1.0)
}

pub fn kernel_bound(r: f64, p: &KernelParams) -> f64 {
    kernel_bound_constant(p) * r.abs().powf(p.exponent()).min(1.0)
}

/// Inner kernel windows are converged relative to their own size: far out on
/// the half line they are tiny, yet multiplied by large Jacobians.
fn inner(spec: &QuadratureSpec) -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: f64::MIN_POSITIVE,
        ..*spec
    }
}

/// `M(lo, hi, d)` with `lo, hi` already clipped to `[-L, L]`.
fn window(lo: f64, hi: f64, d: f64, p: &KernelParams, spec: &QuadratureSpec) -> Result<Estimate> {
    if !(hi > lo) {
        return Ok(Estimate::ZERO);
    }
    let mut pts = [lo, hi, lo, lo];
    let mut n = 2;
    for c in [0.0, d] {
        if c > lo && c < hi && !pts[..n].contains(&c) {
            pts[n] = c;
            n += 1;
        }
    }
    let pts = &mut pts[..n];
    pts.sort_by(f64::total_cmp);
    let spec = inner(spec);
    let mut total = Estimate::ZERO;
    for w in pts.windows(2) {
        total = total + piece(w[0], w[1], d, p, &spec)?;
    }
    // Truncated exponential tails: ∫_L^∞ e^{-θs}|s-d|^p ds <= e^{-R} ā(0).
    let l = spec.tail_cutoff / p.theta;
    let tail = (-spec.tail_cutoff).exp() * full_line_kernel_at_zero(p);
    total.error += tail * ((lo <= -l) as u8 + (hi >= l) as u8) as f64;
    Ok(total)
}

/// One smooth piece `[a, b]` of a window; `d` is outside `(a, b)`.
fn piece(a: f64, b: f64, d: f64, p: &KernelParams, spec: &QuadratureSpec) -> Result<Estimate> {
    let th = p.theta;
    let e = p.exponent();
    let direct = |s: f64| (-th * s.abs()).exp() * (s - d).abs().powf(e);
    let len = b - a;
    let delta = if d <= a { a - d } else { d - b };
    if !spec.singularity_split || delta >= len {
        return integrate(direct, &[a, b], spec, "kernel window");
    }
    // Near the singularity substitute v = r^(2H-1), r = |s - d|, which turns
    // r^(2H-2) dr into dv / (2H-1).
    let near = len.min((1.0 / th).max(delta));
    let k = e + 1.0;
    let sign = if d <= a { 1.0 } else { -1.0 };
    let sub = |v: f64| (-th * (d + sign * v.powf(1.0 / k)).abs()).exp() / k;
    let mut est = integrate(
        sub,
        &[delta.powf(k), (delta + near).powf(k)],
        spec,
        "kernel window (regularized)",
    )?;
    if near < len {
        let (ra, rb) = if d <= a { (a + near, b) } else { (a, b - near) };
        est = est + integrate(direct, &[ra, rb], spec, "kernel window")?;
    }
    Ok(est)
}

fn half_line_offset(x: f64, d: f64, p: &KernelParams, spec: &QuadratureSpec) -> Result<Estimate> {
    let l = spec.tail_cutoff / p.theta;
    window((-x).max(-l), l, d, p, spec)
}

/// `A(x, y) = ∫_0^∞ exp(-θ|x - u|) |u - y|^(2H-2) du` for `x, y >= 0`.
pub fn half_line_kernel(x: f64, y: f64, p: &KernelParams, spec: &QuadratureSpec) -> Result<Estimate> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::domain("half-line kernel needs x, y >= 0"));
    }
    spec.validate()?;
    half_line_offset(x, y - x, p, spec)
}

/// `ā(r) = ∫_R exp(-θ|z|) |z - r|^(2H-2) dz`.
pub fn full_line_kernel(r: f64, p: &KernelParams, spec: &QuadratureSpec) -> Result<Estimate> {
    spec.validate()?;
    let l = spec.tail_cutoff / p.theta;
    window(-l, l, r, p, spec)
}

/// `a_T(x, y) = ∫_0^T exp(-θ|x - z|) |z - y|^(2H-2) dz` for `x, y ∈ [0, T]`.
pub fn truncated_kernel(
    x: f64,
    y: f64,
    t: f64,
    p: &KernelParams,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    if !(t > 0.0 && (0.0..=t).contains(&x) && (0.0..=t).contains(&y)) {
        return Err(Error::domain("truncated kernel needs 0 <= x, y <= T"));
    }
    spec.validate()?;
    truncated_offset(x, y - x, t, p, spec)
}

fn truncated_offset(x: f64, d: f64, t: f64, p: &KernelParams, spec: &QuadratureSpec) -> Result<Estimate> {
    let l = spec.tail_cutoff / p.theta;
    window((-x).max(-l), (t - x).min(l), d, p, spec)
}

/// `(4H-1)θ / (2H)² · (1 + Γ(3-4H)Γ(4H-1) / (Γ(2H)Γ(2-2H)))`.
pub fn cu2_closed_form(p: &KernelParams) -> f64 {
    let h = p.hurst;
    p.theta * (4.0 * h - 1.0) / (4.0 * h * h)
        * (1.0
            + gamma(3.0 - 4.0 * h) * gamma(4.0 * h - 1.0)
                / (gamma(2.0 * h) * gamma(2.0 - 2.0 * h)))
}

/// How an outer integral is mapped onto `w`.
struct LogMap {
    /// Length scale of the near-linear part of the map.
    scale: f64,
    /// Upper end of the quadrature range.
    t_max: f64,
    /// For a half line, the analytic tail beyond `t_max`.
    tail: Option<PowerTail>,
}

/// `g(t) ~ c t^(-1-decay) (1 + O((s/t)^correction))` for large `t`.
#[derive(Clone, Copy)]
struct PowerTail {
    decay: f64,
    correction: f64,
    /// Scale `s` past which the asymptotic regime sets in.
    onset: f64,
}

/// Width of the initial cells in `w`.
const CELL: f64 = 2.0;

impl LogMap {
    fn finite(scale: f64, end: f64) -> Self {
        Self {
            scale,
            t_max: end,
            tail: None,
        }
    }

    /// Half line cut at `reach` times the onset of the power-law regime.
    fn half_line(scale: f64, reach: f64, tail: PowerTail) -> Self {
        Self {
            scale,
            t_max: reach * tail.onset.max(scale),
            tail: Some(tail),
        }
    }

    fn t(&self, w: f64) -> f64 {
        self.scale * w.exp_m1()
    }

    fn w(&self, t: f64) -> f64 {
        (t / self.scale).ln_1p()
    }

    /// Cell boundaries in `w`: unit steps plus the images of `kinks`.
    fn points(&self, kinks: &[f64]) -> Vec<f64> {
        let w_max = self.w(self.t_max);
        let mut pts: Vec<f64> = (0..)
            .map(|i| i as f64 * CELL)
            .take_while(|&w| w < w_max)
            .collect();
        pts.push(w_max);
        for &k in kinks {
            if k > 0.0 && k < self.t_max {
                pts.push(self.w(k));
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// Evaluates `g` and stashes the first error: quadrature integrands must be
/// plain `f64` functions.
struct Fallible {
    err: std::sync::Mutex<Option<Error>>,
}

impl Fallible {
    fn new() -> Self {
        Self {
            err: std::sync::Mutex::new(None),
        }
    }

    fn eval(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                let mut slot = self.err.lock().unwrap();
                if slot.is_none() {
                    *slot = Some(e);
                }
                f64::NAN
            }
        }
    }

    fn finish(&self, r: Result<Estimate>) -> Result<Estimate> {
        if let Some(e) = self.err.lock().unwrap().take() {
            return Err(e);
        }
        r
    }
}

fn log_mapped<G: Fn(f64) -> Result<f64> + Sync>(
    g: G,
    map: &LogMap,
    kinks: &[f64],
    spec: &QuadratureSpec,
    parallel: bool,
    what: &str,
) -> Result<Estimate> {
    let fail = Fallible::new();
    let f = |w: f64| {
        let t = map.t(w);
        fail.eval(g(t)) * (t + map.scale)
    };
    let pts = map.points(kinks);
    let body = if parallel {
        integrate_cells(&f, &pts, spec, what)
    } else {
        integrate(&f, &pts, spec, what)
    };
    let body = fail.finish(body)?;
    let tail = match map.tail {
        None => Estimate::ZERO,
        Some(pt) => {
            let v = g(map.t_max)? * map.t_max / pt.decay;
            let rel = 10.0 * (pt.onset.max(map.scale) / map.t_max).powf(pt.correction);
            Estimate {
                value: v,
                error: v.abs() * rel,
            }
        }
    };
    Ok(body + tail)
}

/// `J2 = ∫_0^∞ A(0, x) A(x, 0) dx`.
fn j2(p: &KernelParams, spec: &QuadratureSpec) -> Result<Estimate> {
    let inner_spec = spec.with_rel_tol(spec.rel_tol * 0.1);
    let l = spec.tail_cutoff / p.theta;
    let g = |x: f64| -> Result<f64> {
        let a = half_line_offset(0.0, x, p, &inner_spec)?;
        let b = half_line_offset(x, -x, p, &inner_spec)?;
        Ok(a.value * b.value)
    };
    let s = 1.0 / p.theta;
    let tail = PowerTail {
        decay: 3.0 - 4.0 * p.hurst,
        correction: 1.0,
        onset: s,
    };
    let map = LogMap::half_line(s, 1e12, tail);
    log_mapped(g, &map, &[l], spec, true, "C_U(2) outer integral")
}

/// `C_U(2) = 8 K_U² α_H² ∫_0^∞ A(0,x) A(x,0) dx`, computed by quadrature as an
/// independent check of [`cu2_closed_form`].
pub fn cu2_quadrature(p: &KernelParams, spec: &QuadratureSpec) -> Result<Estimate> {
    spec.validate()?;
    let j = j2(p, spec)?;
    Ok(j.scale(8.0 * (p.k_u * p.alpha_h).powi(2)))
}

/// `B(y) = ∫_0^∞ A(y, z) A(z, 0) dz`.
fn j3_inner(y: f64, p: &KernelParams, spec: &QuadratureSpec) -> Result<Estimate> {
    let l = spec.tail_cutoff / p.theta;
    let s = 1.0 / p.theta;
    let half = 0.5 * y;
    let kinks = [l, y - l, y + l, half - l, l - half];
    // z ∈ [0, y/2], measured from z = 0.
    let lower = log_mapped(
        |z| Ok(half_line_offset(y, z - y, p, spec)?.value * half_line_offset(z, -z, p, spec)?.value),
        &LogMap::finite(s, half),
        &kinks,
        spec,
        false,
        "C_U(3) inner integral",
    )?;
    // z ∈ [y/2, y], measured back from z = y.
    let upper = log_mapped(
        |t| {
            let z = y - t;
            Ok(half_line_offset(y, -t, p, spec)?.value * half_line_offset(z, -z, p, spec)?.value)
        },
        &LogMap::finite(s, half),
        &kinks.map(|k| y - k),
        spec,
        false,
        "C_U(3) inner integral",
    )?;
    // z ∈ [y, ∞).
    let beyond = log_mapped(
        |t| {
            let z = y + t;
            Ok(half_line_offset(y, t, p, spec)?.value * half_line_offset(z, -z, p, spec)?.value)
        },
        &LogMap::half_line(
            s,
            1e6,
            PowerTail {
                decay: 3.0 - 4.0 * p.hurst,
                correction: 1.0,
                onset: y,
            },
        ),
        &[l],
        spec,
        false,
        "C_U(3) inner integral",
    )?;
    Ok(lower + upper + beyond)
}

/// `J3 = ∫∫_{(0,∞)²} A(0, y) A(y, z) A(z, 0) dy dz`.
fn j3(p: &KernelParams, spec: &QuadratureSpec) -> Result<Estimate> {
    let inner_spec = spec.with_rel_tol(spec.rel_tol * 0.1);
    let l = spec.tail_cutoff / p.theta;
    let g = |y: f64| -> Result<f64> {
        let a = half_line_offset(0.0, y, p, &inner(&inner_spec))?;
        let b = j3_inner(y, p, &inner_spec)?;
        Ok(a.value * b.value)
    };
    // B(y) approaches its power law only like y^-(2H-1).
    let s = 1.0 / p.theta;
    let tail = PowerTail {
        decay: 4.0 - 6.0 * p.hurst,
        correction: 2.0 * p.hurst - 1.0,
        onset: s,
    };
    let map = LogMap::half_line(s, 1e12, tail);
    log_mapped(g, &map, &[l, 2.0 * l], spec, true, "C_U(3) outer integral")
}

/// `C_U(3) = 24 K_U³ α_H³ ∫∫ A(0,y) A(y,z) A(z,0) dy dz`; finite for `H < 2/3`.
pub fn cu3_quadrature(p: &KernelParams, spec: &QuadratureSpec) -> Result<Estimate> {
    if p.hurst >= 2.0 / 3.0 {
        return Err(Error::domain(format!(
            "C_U(3) diverges for H >= 2/3, got {}",
            p.hurst
        )));
    }
    spec.validate()?;
    let j = j3(p, spec)?;
    Ok(j.scale(24.0 * (p.k_u * p.alpha_h).powi(3)))
}

/// `E[Γ²(U_T, U_T)] = 2 K_U² α_H² T^(-1) ∫∫_{[0,T]²} a_T(x,y) a_T(y,x) dx dy`.
pub fn gamma2_finite_t(p: &KernelParams, t_horizon: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    if !(t_horizon > 0.0 && t_horizon.is_finite()) {
        return Err(Error::domain("T must be positive"));
    }
    spec.validate()?;
    let big_t = t_horizon;
    let inner_spec = spec.with_rel_tol(spec.rel_tol * 0.1);
    let l = spec.tail_cutoff / p.theta;
    // The integrand is symmetric in (x, y); integrate over t = y - x > 0.
    let g = |t: f64| -> Result<f64> {
        let span = big_t - t;
        let pair = |x: f64| -> Result<f64> {
            let u = truncated_offset(x, t, big_t, p, &inner_spec)?;
            let v = truncated_offset(x + t, -t, big_t, p, &inner_spec)?;
            Ok(u.value * v.value)
        };
        let fail = Fallible::new();
        let f = |x: f64| fail.eval(pair(x));
        let mut total = 0.0;
        let mut pts = vec![0.0, span];
        for k in [l, l - t, big_t - l, span - l] {
            if k > 0.0 && k < span {
                pts.push(k);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        if span - l > l {
            // Both windows are the full [-L, L] for x ∈ [L, T - t - L].
            let full = full_line_kernel(t, p, &inner_spec)?.value;
            total += full * full * (span - 2.0 * l);
            let left: Vec<f64> = pts.iter().copied().filter(|&x| x <= l).collect();
            let right: Vec<f64> = pts.iter().copied().filter(|&x| x >= span - l).collect();
            let ends = integrate(&f, &left, &inner_spec, "gamma factor inner integral").and_then(
                |a| Ok(a + integrate(&f, &right, &inner_spec, "gamma factor inner integral")?),
            );
            total += fail.finish(ends)?.value;
        } else {
            total += fail
                .finish(integrate(&f, &pts, &inner_spec, "gamma factor inner integral"))?
                .value;
        }
        Ok(total)
    };
    let map = LogMap::finite(1.0 / p.theta, big_t);
    let kinks = [l, big_t - l, big_t - 2.0 * l, 2.0 * l];
    let i = log_mapped(g, &map, &kinks, spec, true, "gamma factor outer integral")?;
    Ok(i.scale(4.0 * (p.k_u * p.alpha_h).powi(2) / big_t))
}
