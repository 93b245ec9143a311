use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use fou_core::constants::{assemble_constants, low_regime, ExpansionConstants};
use fou_core::density::{DensityModel, Variant};
use fou_core::estimator;
use fou_core::fgn::{SampleGrid, SeedRecord};
use fou_core::fou::{quadratic_functional, simulate_fou, ModelParams};
use fou_core::kernels::{cu2_closed_form, cu2_quadrature, gamma2_finite_t, KernelParams};
use fou_core::montecarlo::{kde, run_experiment, McConfig, McSummary};
use fou_core::quadrature::QuadratureSpec;

use crate::settings::{parse_grid, parse_list, Settings};
use crate::{svg, CliError};

/// Figure configurations: `(H, T)` at θ = 2, σ = 1, x0 = 0.
pub const FIGURES: [(f64, f64); 8] = [
    (0.55, 50.0),
    (0.55, 100.0),
    (0.625, 50.0),
    (0.625, 100.0),
    (0.7, 100.0),
    (0.7, 400.0),
    (0.55, 400.0),
    (0.625, 400.0),
];

const OVERLAY_POINTS: usize = 401;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Invalid(format!("{}: {e}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn grid_for(horizon: f64, steps: Option<usize>) -> Result<SampleGrid, CliError> {
    Ok(match steps {
        Some(n) => SampleGrid::new(horizon, n)?,
        None => SampleGrid::with_default_steps(horizon)?,
    })
}

pub fn simulate(s: &Settings) -> Result<String, CliError> {
    let p = s.model()?;
    let grid = grid_for(s.horizon()?, s.steps)?;
    let seed = SeedRecord::new(s.seed.unwrap_or(1), s.stream.unwrap_or(0));
    let path = simulate_fou(&p, &grid, seed)?;
    let mut csv = String::from("t,value\n");
    for (k, v) in path.values.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", grid.time(k), v);
    }
    emit(s.out.as_deref(), &csv)?;
    let q = quadratic_functional(&path.values, grid.dt());
    Ok(format!(
        "simulate: {} points, T={}, Q_T={q}, seed={} stream={}",
        path.values.len(),
        grid.horizon,
        seed.seed,
        seed.stream
    ))
}

/// Reads `t,value` rows on a uniform grid starting anywhere.
fn read_path(path: &Path) -> Result<(Vec<f64>, f64, f64), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let bad = |line: usize, why: &str| CliError::Invalid(format!("{}:{line}: {why}", path.display()));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim().replace(' ', "") == "t,value" => {}
        _ => return Err(bad(1, "expected header `t,value`")),
    }
    let (mut ts, mut xs) = (Vec::new(), Vec::new());
    for (i, l) in lines {
        let mut f = l.split(',');
        let (Some(t), Some(x), None) = (f.next(), f.next(), f.next()) else {
            return Err(bad(i + 1, "expected two columns"));
        };
        let t: f64 = t.trim().parse().map_err(|_| bad(i + 1, "bad t"))?;
        let x: f64 = x.trim().parse().map_err(|_| bad(i + 1, "bad value"))?;
        if !(t.is_finite() && x.is_finite()) {
            return Err(bad(i + 1, "non-finite entry"));
        }
        ts.push(t);
        xs.push(x);
    }
    if ts.len() < 3 {
        return Err(bad(0, "need at least three rows"));
    }
    let horizon = ts[ts.len() - 1] - ts[0];
    let dt = horizon / (ts.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(bad(0, "times must increase"));
    }
    for (k, t) in ts.iter().enumerate() {
        if (t - ts[0] - k as f64 * dt).abs() > 1e-9 * horizon {
            return Err(bad(k + 2, "times are not equally spaced"));
        }
    }
    Ok((xs, horizon, dt))
}

pub fn estimate(s: &Settings) -> Result<String, CliError> {
    let input = s
        .input
        .as_deref()
        .ok_or_else(|| CliError::Invalid("missing required setting `input`".into()))?;
    // θ is not used by the estimator; any valid value will do.
    let p = ModelParams::new(
        s.theta.unwrap_or(1.0),
        s.sigma.unwrap_or(1.0),
        s.hurst.ok_or_else(|| CliError::Invalid("missing required setting `H`".into()))?,
        s.x0.unwrap_or(0.0),
    )?;
    p.check_estimation_range()?;
    let (beta, space) = (s.beta()?, s.space()?);
    let (xs, horizon, dt) = read_path(input)?;
    let q = quadratic_functional(&xs, dt);
    let r = estimator::estimate(q, horizon, &p, &space, &beta)?;
    let mut doc = serde_json::to_value(r).expect("serializable");
    doc["T"] = json!(horizon);
    doc["steps"] = json!(xs.len() - 1);
    emit(s.out.as_deref(), &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))?;
    Ok(format!(
        "estimate: T={horizon}, theta_tilde={}, theta_hat={}, clipped={}",
        r.theta_tilde, r.theta_hat, r.clipped
    ))
}

fn expansion_constants(s: &Settings, p: &ModelParams, spec: &QuadratureSpec) -> Result<ExpansionConstants, CliError> {
    Ok(assemble_constants(p, &s.beta()?, spec)?)
}

pub fn constants(s: &Settings) -> Result<String, CliError> {
    let p = s.model()?;
    let spec = s.quadrature()?;
    let mut c = expansion_constants(s, &p, &spec)?;
    if s.with_c3.unwrap_or(false) && c.c3_prime.is_none() {
        c = c.with_c3_prime(&spec)?;
    }
    let doc = serde_json::to_value(c).expect("serializable");
    emit(s.out.as_deref(), &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))?;
    if let Some(path) = &s.csv {
        let obj = doc.as_object().expect("struct");
        let header: Vec<&str> = obj.keys().map(String::as_str).collect();
        let row: Vec<String> = obj
            .values()
            .map(|v| match v {
                serde_json::Value::Null => String::new(),
                other => other.to_string(),
            })
            .collect();
        let text = format!("{}\n{}\n", header.join(","), row.join(","));
        std::fs::write(path, text).map_err(|e| io_err(path, e))?;
    }
    Ok(format!(
        "constants: theta={} H={} c0={} c1={} c2={} c3={}",
        c.theta,
        c.hurst,
        c.c0,
        c.c1,
        c.c2,
        c.c3.map_or("none".to_string(), |v| v.to_string())
    ))
}

struct Densities {
    normal: DensityModel,
    expansion: DensityModel,
    plus: DensityModel,
}

impl Densities {
    fn new(c: ExpansionConstants, horizon: f64) -> Result<Self, CliError> {
        Ok(Self {
            normal: DensityModel::new(c, horizon, Variant::NormalOnly)?,
            expansion: DensityModel::new(c, horizon, Variant::Expansion)?,
            plus: DensityModel::new(c, horizon, Variant::ExpansionPlus)?,
        })
    }
}

pub fn density(s: &Settings) -> Result<String, CliError> {
    let p = s.model()?;
    let horizon = s.horizon()?;
    let xs = parse_grid(s.grid.as_deref().unwrap_or("-4:4:401"))?;
    let spec = s.quadrature()?;
    let c = expansion_constants(s, &p, &spec)?;
    let d = Densities::new(c, horizon)?;
    let mut csv = String::from("x,normal_pdf,expansion_pdf,expansion_plus_pdf\n");
    for &x in &xs {
        let _ = writeln!(csv, "{x},{},{},{}", d.normal.pdf(x), d.expansion.pdf(x), d.plus.pdf(x));
    }
    emit(s.out.as_deref(), &csv)?;
    Ok(format!("density: {} points, H={} T={horizon} c0={}", xs.len(), p.h(), c.c0))
}

fn mc_config(s: &Settings, p: ModelParams, horizon: f64) -> Result<McConfig, CliError> {
    let mut cfg = McConfig::new(p, horizon)?;
    cfg.space = s.space()?;
    cfg.beta = s.beta()?;
    if let Some(n) = s.steps {
        cfg.steps = n;
    }
    if let Some(n) = s.reps {
        cfg.replications = n;
    }
    cfg.seed = s.seed.unwrap_or(1);
    if let Some(b) = s.bins {
        cfg.bins = b;
    }
    cfg.statistic = s.statistic()?;
    cfg.validate()?;
    Ok(cfg)
}

fn run_study(s: &Settings, cfg: &McConfig, label: &str) -> Result<String, CliError> {
    let out_dir = s.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let spec = s.quadrature()?;
    let c = expansion_constants(s, &cfg.params, &spec)?;
    let d = Densities::new(c, cfg.horizon)?;
    let summary = run_experiment(cfg, &c)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
    write_study(&out_dir, cfg, &c, &d, &summary, s.svg.unwrap_or(false), label)?;
    Ok(format!(
        "{label}: {} replications ({} clipped, {} failed), mean={:.4} var={:.4} ks normal={:.4} expansion={:.4} plus={:.4} -> {}",
        summary.scaled_errors.len(),
        summary.clipped_count,
        summary.failed_count,
        summary.mean,
        summary.variance,
        summary.ks_normal,
        summary.ks_expansion,
        summary.ks_expansion_plus,
        out_dir.display()
    ))
}

fn write_study(
    dir: &Path,
    cfg: &McConfig,
    c: &ExpansionConstants,
    d: &Densities,
    m: &McSummary,
    with_svg: bool,
    label: &str,
) -> Result<(), CliError> {
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| io_err(&p, e))
    };
    let doc = json!({
        "theta": cfg.params.theta,
        "H": cfg.params.h(),
        "sigma": cfg.params.sigma,
        "x0": cfg.params.x0,
        "T": cfg.horizon,
        "steps": cfg.steps,
        "reps": cfg.replications,
        "seed": cfg.seed,
        "bins": cfg.bins,
        "statistic": cfg.statistic,
        "beta": cfg.beta,
        "theta_lo": cfg.space.theta_lo,
        "theta_hi": cfg.space.theta_hi,
        "theta_star": cfg.space.theta_star,
        "c0": c.c0,
        "expansion_variance": d.expansion.moment(2)?,
        "samples": m.scaled_errors.len(),
        "mean": m.mean,
        "variance": m.variance,
        "skewness": m.skewness,
        "ks_normal": m.ks_normal,
        "ks_expansion": m.ks_expansion,
        "ks_expansion_plus": m.ks_expansion_plus,
        "clipped_count": m.clipped_count,
        "failed_count": m.failed_count,
    });
    write("summary.json", &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))?;

    let dens = m.histogram.densities();
    let mut hist = String::from("bin_lo,bin_hi,count,density\n");
    for (i, w) in m.histogram.edges.windows(2).enumerate() {
        let _ = writeln!(hist, "{},{},{},{}", w[0], w[1], m.histogram.counts[i], dens[i]);
    }
    write("histogram.csv", &hist)?;

    let (lo, hi) = (m.histogram.edges[0], m.histogram.edges[m.histogram.edges.len() - 1]);
    let xs: Vec<f64> = (0..OVERLAY_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (OVERLAY_POINTS - 1) as f64)
        .collect();
    let emp = kde(&m.scaled_errors, &xs);
    let curves: Vec<[f64; 3]> = xs
        .iter()
        .map(|&x| [d.normal.pdf(x), d.expansion.pdf(x), d.plus.pdf(x)])
        .collect();
    let mut overlay = String::from("x,empirical_kde,normal_pdf,expansion_pdf,expansion_plus_pdf\n");
    for ((x, k), [a, b, cc]) in xs.iter().zip(&emp).zip(&curves) {
        let _ = writeln!(overlay, "{x},{k},{a},{b},{cc}");
    }
    write("overlay.csv", &overlay)?;

    let mut errs = String::from("scaled_error\n");
    for e in &m.scaled_errors {
        let _ = writeln!(errs, "{e}");
    }
    write("scaled_errors.csv", &errs)?;

    if with_svg {
        let title = format!(
            "{label}: theta={} H={} T={} N={}",
            cfg.params.theta,
            cfg.params.h(),
            cfg.horizon,
            m.scaled_errors.len()
        );
        write("overlay.svg", &svg::overlay(&title, &m.histogram.edges, &dens, &xs, &curves))?;
    }
    Ok(())
}

pub fn mc(s: &Settings) -> Result<String, CliError> {
    let p = s.model()?;
    let cfg = mc_config(s, p, s.horizon()?)?;
    run_study(s, &cfg, "mc")
}

pub fn reproduce_figure(s: &Settings) -> Result<String, CliError> {
    let id = s
        .id
        .ok_or_else(|| CliError::Invalid("missing required setting `id`".into()))?;
    let &(h, horizon) = id
        .checked_sub(1)
        .and_then(|i| FIGURES.get(i as usize))
        .ok_or_else(|| CliError::Invalid(format!("figure id {id} is not in 1..=8")))?;
    let fixed = [
        ("theta", s.theta.is_some()),
        ("H", s.hurst.is_some()),
        ("sigma", s.sigma.is_some()),
        ("x0", s.x0.is_some()),
        ("T", s.horizon.is_some()),
    ];
    if let Some((k, _)) = fixed.iter().find(|(_, set)| *set) {
        return Err(CliError::Invalid(format!("`{k}` is fixed by the figure id")));
    }
    let p = ModelParams::new(2.0, 1.0, h, 0.0)?;
    let mut s = s.clone();
    s.svg = Some(s.svg.unwrap_or(true));
    let cfg = mc_config(&s, p, horizon)?;
    run_study(&s, &cfg, &format!("figure {id}"))
}

fn lattice(s: &Settings, thetas: &str, hs: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let ts = parse_list(s.thetas.as_deref().unwrap_or(thetas), "thetas")?;
    let hs = parse_list(s.hs.as_deref().unwrap_or(hs), "hs")?;
    let mut out = Vec::new();
    for &t in &ts {
        for &h in &hs {
            KernelParams::new(t, h)?;
            out.push((t, h));
        }
    }
    Ok(out)
}

pub fn verify_constants(s: &Settings) -> Result<String, CliError> {
    let spec = s.quadrature()?;
    let points = lattice(s, "1,2", "0.55,0.6,0.625,0.7")?;
    let mut csv = String::from("theta,H,c0_closed,c0_quad,rel_err\n");
    let mut worst: f64 = 0.0;
    for (t, h) in points.iter().copied() {
        let kp = KernelParams::new(t, h)?;
        let closed = cu2_closed_form(&kp);
        let quad = cu2_quadrature(&kp, &spec)?.value;
        let rel = (quad - closed).abs() / closed.abs();
        worst = worst.max(rel);
        let _ = writeln!(csv, "{t},{h},{closed},{quad},{rel}");
    }
    emit(s.out.as_deref(), &csv)?;
    Ok(format!("verify-constants: {} points, max rel_err {worst:e}", points.len()))
}

pub fn verify_gamma(s: &Settings) -> Result<String, CliError> {
    let spec = s.quadrature()?;
    let points = lattice(s, "2", "0.7")?;
    let horizons = parse_list(s.horizons.as_deref().unwrap_or("100,200,400"), "horizons")?;
    if let Some(t) = horizons.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(CliError::Invalid(format!("horizon {t} must be positive")));
    }
    let mut csv = String::from("theta,H,T,gamma2,c0,c2,residual_ratio\n");
    for (theta, h) in points.iter().copied() {
        let kp = KernelParams::new(theta, h)?;
        let c0 = cu2_closed_form(&kp);
        let c2 = fou_core::constants::c2(theta, h)?;
        for &t in &horizons {
            let g = gamma2_finite_t(&kp, t, &spec)?.value;
            // (Γ₂ - c₀) / (c₂ T^{4H-3}); tends to 1 for H > 5/8.
            let ratio = (g - c0) / (c2 * t.powf(4.0 * h - 3.0));
            let _ = writeln!(csv, "{theta},{h},{t},{g},{c0},{c2},{}", ratio);
        }
    }
    emit(s.out.as_deref(), &csv)?;
    Ok(format!(
        "verify-gamma: {} rows{}",
        points.len() * horizons.len(),
        if points.iter().any(|&(_, h)| low_regime(h)) {
            " (the c2 normalization is only meaningful for H > 5/8)"
        } else {
            ""
        }
    ))
}
