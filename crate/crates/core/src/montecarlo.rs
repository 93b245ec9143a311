//! Replicated simulate-and-estimate experiments.
//!
//! Replication `i` uses the random stream `(seed, i)` and is independent of
//! every other; results are collected in replication order, so a summary does
//! not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::ExpansionConstants;
use crate::density::{DensityModel, Variant};
use crate::error::{Error, Result};
use crate::estimator::{estimate, BetaSpec, ParamSpace};
use crate::fgn::{FgnGenerator, SampleGrid, SeedRecord};
use crate::fou::{fou_from_increments, quadratic_functional, ModelParams};

/// Which estimator the summary is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// The moment estimator `θ̃`.
    Tilde,
    /// The corrected and clipped `θ̂`.
    #[default]
    Hat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub params: ModelParams,
    pub space: ParamSpace,
    pub beta: BetaSpec,
    pub horizon: f64,
    pub steps: usize,
    pub replications: usize,
    pub seed: u64,
    pub bins: usize,
    pub statistic: Statistic,
}

/// Smallest accepted number of replications.
pub const MIN_REPLICATIONS: usize = 100;

impl McConfig {
    /// Desk-scale defaults: `10⁴` replications, default mesh, 60 bins.
    pub fn new(params: ModelParams, horizon: f64) -> Result<Self> {
        let grid = SampleGrid::with_default_steps(horizon)?;
        Ok(Self {
            params,
            space: ParamSpace::default(),
            beta: BetaSpec::Zero,
            horizon,
            steps: grid.steps,
            replications: 10_000,
            seed: 1,
            bins: 60,
            statistic: Statistic::Hat,
        })
    }

    pub fn grid(&self) -> Result<SampleGrid> {
        SampleGrid::new(self.horizon, self.steps)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.check_estimation_range()?;
        self.space.validate()?;
        self.grid()?;
        if self.replications < MIN_REPLICATIONS {
            return Err(Error::domain(format!(
                "need at least {MIN_REPLICATIONS} replications, got {}",
                self.replications
            )));
        }
        if self.bins == 0 {
            return Err(Error::domain("need at least one histogram bin"));
        }
        Ok(())
    }
}

/// Per-replication estimates, in replication order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replications {
    pub theta_tilde: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub clipped_count: usize,
    pub failed_count: usize,
}

impl Replications {
    /// `√T(θ - θ₀)` for the chosen statistic.
    pub fn scaled_errors(&self, cfg: &McConfig) -> Vec<f64> {
        let v = match cfg.statistic {
            Statistic::Tilde => &self.theta_tilde,
            Statistic::Hat => &self.theta_hat,
        };
        let s = cfg.horizon.sqrt();
        v.iter().map(|t| s * (t - cfg.params.theta)).collect()
    }
}

/// Largest tolerated fraction of failed replications.
pub const MAX_FAILURE_RATE: f64 = 0.01;

/// Runs all replications and returns the estimates; failed replications are
/// dropped and counted.
pub fn simulate_replications(cfg: &McConfig) -> Result<Replications> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let generator = FgnGenerator::new(cfg.params.hurst, &grid)?;
    let results: Vec<Result<(f64, f64, bool)>> = (0..cfg.replications as u64)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(grid.steps), Vec::with_capacity(grid.steps + 1)),
            |(incr, path), i| {
                let seed = SeedRecord::new(cfg.seed, i);
                generator.fill(&mut seed.rng(), incr);
                fou_from_increments(&cfg.params, &grid, incr, path)?;
                let q = quadratic_functional(path, grid.dt());
                let r = estimate(q, cfg.horizon, &cfg.params, &cfg.space, &cfg.beta)?;
                Ok((r.theta_tilde, r.theta_hat, r.clipped))
            },
        )
        .collect();
    let mut out = Replications {
        theta_tilde: Vec::with_capacity(cfg.replications),
        theta_hat: Vec::with_capacity(cfg.replications),
        clipped_count: 0,
        failed_count: 0,
    };
    for r in results {
        match r {
            Ok((tilde, hat, clipped)) => {
                out.theta_tilde.push(tilde);
                out.theta_hat.push(hat);
                out.clipped_count += clipped as usize;
            }
            Err(e) if e.is_numerical() => out.failed_count += 1,
            Err(e) => return Err(e),
        }
    }
    if out.failed_count as f64 > MAX_FAILURE_RATE * cfg.replications as f64 {
        return Err(Error::TooManyFailures {
            failed: out.failed_count,
            total: cfg.replications,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins spanning the data range.
    pub fn new(data: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let (lo, hi) = data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let (lo, hi) = if data.is_empty() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + i as f64 * width })
            .collect();
        let mut counts = vec![0u64; bins];
        for &x in data {
            let i = (((x - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Self { edges, counts }
    }

    /// Counts normalized to a probability density.
    pub fn densities(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, w)| c as f64 / (total as f64 * (w[1] - w[0])))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub scaled_errors: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub ks_normal: f64,
    pub ks_expansion: f64,
    pub ks_expansion_plus: f64,
    pub clipped_count: usize,
    pub failed_count: usize,
    pub histogram: Histogram,
}

/// Sample mean, unbiased variance and moment skewness.
pub fn moments(data: &[f64]) -> (f64, f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let (m2, m3) = data.iter().fold((0.0, 0.0), |(a, b), &x| {
        let d = x - mean;
        (a + d * d, b + d * d * d)
    });
    let var = m2 / (n - 1.0);
    let skew = (m3 / n) / (m2 / n).powf(1.5);
    (mean, var, skew)
}

pub fn run_experiment(cfg: &McConfig, constants: &ExpansionConstants) -> Result<McSummary> {
    let reps = simulate_replications(cfg)?;
    summarize(cfg, constants, &reps)
}

pub fn summarize(cfg: &McConfig, constants: &ExpansionConstants, reps: &Replications) -> Result<McSummary> {
    let scaled_errors = reps.scaled_errors(cfg);
    let mut sorted = scaled_errors.clone();
    sorted.sort_by(f64::total_cmp);
    let model = |v| DensityModel::new(*constants, cfg.horizon, v);
    let normal = model(Variant::NormalOnly)?;
    let expansion = model(Variant::Expansion)?;
    let plus = model(Variant::ExpansionPlus)?;
    let (mean, variance, skewness) = moments(&scaled_errors);
    Ok(McSummary {
        mean,
        variance,
        skewness,
        ks_normal: ks_statistic(&sorted, |x| normal.cdf(x)),
        ks_expansion: ks_statistic(&sorted, |x| expansion.cdf(x)),
        ks_expansion_plus: ks_statistic(&sorted, |x| plus.cdf(x)),
        clipped_count: reps.clipped_count,
        failed_count: reps.failed_count,
        histogram: Histogram::new(&scaled_errors, cfg.bins),
        scaled_errors,
    })
}

/// Two-sided one-sample Kolmogorov–Smirnov statistic; `sorted` ascending.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub empirical: f64,
    pub predicted: f64,
    pub ratio: f64,
    /// Jackknife standard error of the ratio.
    pub ratio_se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Normal 95% quantile used for the confidence interval.
const Z95: f64 = 1.959_963_984_540_054;

/// Compares `Var(√T(θ̃ - θ))` with `c₀ + 1{H >= 5/8} c₂ T^{4H-3}`.
pub fn empirical_variance_check(cfg: &McConfig, constants: &ExpansionConstants) -> Result<VarianceReport> {
    let reps = simulate_replications(cfg)?;
    let tilde = McConfig {
        statistic: Statistic::Tilde,
        ..*cfg
    };
    let data = reps.scaled_errors(&tilde);
    let predicted = DensityModel::new(
        ExpansionConstants {
            c1: 0.0,
            ..*constants
        },
        cfg.horizon,
        Variant::Expansion,
    )?
    .moment(2)?;
    Ok(variance_report(&data, predicted))
}

/// Variance ratio with a leave-one-out jackknife interval.
pub fn variance_report(data: &[f64], predicted: f64) -> VarianceReport {
    let n = data.len() as f64;
    let s1: f64 = data.iter().sum();
    let s2: f64 = data.iter().map(|x| x * x).sum();
    let var = |s1: f64, s2: f64, m: f64| (s2 - s1 * s1 / m) / (m - 1.0);
    let empirical = var(s1, s2, n);
    let loo: Vec<f64> = data.iter().map(|x| var(s1 - x, s2 - x * x, n - 1.0)).collect();
    let loo_mean = loo.iter().sum::<f64>() / n;
    let jack_var = (n - 1.0) / n * loo.iter().map(|v| (v - loo_mean).powi(2)).sum::<f64>();
    let ratio = empirical / predicted;
    let ratio_se = jack_var.sqrt() / predicted;
    VarianceReport {
        empirical,
        predicted,
        ratio,
        ratio_se,
        ci_lo: ratio - Z95 * ratio_se,
        ci_hi: ratio + Z95 * ratio_se,
    }
}

/// Gaussian kernel density estimate with Silverman's bandwidth.
pub fn kde(data: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = data.len() as f64;
    let (_, var, _) = moments(data);
    let bw = 1.06 * var.sqrt() * n.powf(-0.2);
    let norm = 1.0 / (n * bw * (2.0 * std::f64::consts::PI).sqrt());
    grid.par_iter()
        .map(|&x| {
            norm * data
                .iter()
                .map(|&d| (-0.5 * ((x - d) / bw).powi(2)).exp())
                .sum::<f64>()
        })
        .collect()
}
