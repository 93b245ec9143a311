//! Command-line groups, the JSON configuration file and their merge.
//!
//! A configuration file is a flat JSON object whose keys are the long flag
//! names (`theta`, `H`, `T`, `reps`, `rel_tol`, ...). Flags given on the
//! command line override file values; unknown keys are rejected.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use fou_core::estimator::{BetaSpec, ParamSpace};
use fou_core::fou::ModelParams;
use fou_core::montecarlo::Statistic;
use fou_core::quadrature::QuadratureSpec;

use crate::CliError;

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ModelArgs {
    /// Drift parameter θ > 0.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Hurst index.
    #[arg(long = "H")]
    #[serde(rename = "H", skip_serializing_if = "Option::is_none")]
    pub hurst: Option<f64>,
    /// Noise scale (default 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Initial value (default 0).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct HorizonArgs {
    /// Time horizon T.
    #[arg(long = "T")]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Number of grid steps (default: smallest power of two with dt <= 0.025).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct EstimatorArgs {
    /// Correction function: zero, bias_correct or constant.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<String>,
    /// Value of β for `--beta constant`.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_value: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_lo: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_hi: Option<f64>,
    /// Fallback value reported when the estimate leaves the parameter space.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct QuadArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_subdivisions: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_cutoff: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singularity_split: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct McArgs {
    /// Number of replications (default 10000).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Root seed; replication i uses stream i (default 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Histogram bins (default 60).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Estimator behind the scaled errors: hat (default) or tilde.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<String>,
    /// Also write an SVG overlay plot.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svg: Option<bool>,
    /// Output directory (default: current directory).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct OutArgs {
    /// Output file (default: standard output).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Every key a configuration file may carry.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub theta: Option<f64>,
    #[serde(rename = "H")]
    pub hurst: Option<f64>,
    pub sigma: Option<f64>,
    pub x0: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub steps: Option<usize>,
    pub beta: Option<String>,
    pub beta_value: Option<f64>,
    pub theta_lo: Option<f64>,
    pub theta_hi: Option<f64>,
    pub theta_star: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_subdivisions: Option<usize>,
    pub tail_cutoff: Option<f64>,
    pub singularity_split: Option<bool>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub stream: Option<u64>,
    pub bins: Option<usize>,
    pub statistic: Option<String>,
    pub svg: Option<bool>,
    pub out_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub grid: Option<String>,
    pub thetas: Option<String>,
    pub hs: Option<String>,
    pub horizons: Option<String>,
    pub id: Option<u32>,
    pub with_c3: Option<bool>,
}

/// Overlays the flag groups on the configuration file and validates the keys.
pub fn merge(config: Option<&Path>, groups: &[Value]) -> Result<Settings, CliError> {
    let mut merged = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text)
                .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?
            {
                Value::Object(m) => m,
                _ => return Err(CliError::Invalid("configuration must be a JSON object".into())),
            }
        }
        None => Map::new(),
    };
    for g in groups {
        if let Value::Object(m) = g {
            for (k, v) in m {
                merged.insert(k.clone(), v.clone());
            }
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Invalid(format!("configuration: {e}")))
}

pub fn group<T: Serialize>(g: &T) -> Value {
    serde_json::to_value(g).expect("flag groups serialize")
}

fn required<T>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Invalid(format!("missing required setting `{name}`")))
}

impl Settings {
    pub fn model(&self) -> Result<ModelParams, CliError> {
        Ok(ModelParams::new(
            required(self.theta, "theta")?,
            self.sigma.unwrap_or(1.0),
            required(self.hurst, "H")?,
            self.x0.unwrap_or(0.0),
        )?)
    }

    pub fn horizon(&self) -> Result<f64, CliError> {
        required(self.horizon, "T")
    }

    pub fn beta(&self) -> Result<BetaSpec, CliError> {
        match self.beta.as_deref().unwrap_or("zero") {
            "zero" => Ok(BetaSpec::Zero),
            "bias_correct" => Ok(BetaSpec::BiasCorrect),
            "constant" => {
                let v = required(self.beta_value, "beta_value")?;
                if !v.is_finite() {
                    return Err(CliError::Invalid("beta_value must be finite".into()));
                }
                Ok(BetaSpec::Constant(v))
            }
            other => Err(CliError::Invalid(format!(
                "unknown beta mode `{other}` (expected zero, bias_correct or constant)"
            ))),
        }
    }

    pub fn space(&self) -> Result<ParamSpace, CliError> {
        let d = ParamSpace::default();
        Ok(ParamSpace::new(
            self.theta_lo.unwrap_or(d.theta_lo),
            self.theta_hi.unwrap_or(d.theta_hi),
            self.theta_star.unwrap_or(d.theta_star),
        )?)
    }

    pub fn quadrature(&self) -> Result<QuadratureSpec, CliError> {
        let d = QuadratureSpec::default();
        let spec = QuadratureSpec {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            max_subdivisions: self.max_subdivisions.unwrap_or(d.max_subdivisions),
            tail_cutoff: self.tail_cutoff.unwrap_or(d.tail_cutoff),
            singularity_split: self.singularity_split.unwrap_or(d.singularity_split),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn statistic(&self) -> Result<Statistic, CliError> {
        match self.statistic.as_deref().unwrap_or("hat") {
            "hat" => Ok(Statistic::Hat),
            "tilde" => Ok(Statistic::Tilde),
            other => Err(CliError::Invalid(format!(
                "unknown statistic `{other}` (expected hat or tilde)"
            ))),
        }
    }
}

/// Parses `lo:hi:n` into `n` equally spaced points.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Invalid(format!("grid `{s}` must be lo:hi:n with lo < hi and n >= 2"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi && n >= 2) {
        return Err(bad());
    }
    Ok((0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect())
}

/// Parses a comma-separated list of numbers.
pub fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Invalid(format!("{what}: cannot parse `{x}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = parse_grid("-4:4:401").unwrap();
        assert_eq!(g.len(), 401);
        assert_eq!((g[0], g[200], g[400]), (-4.0, 0.0, 4.0));
        assert!(parse_grid("1:0:5").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"theta": 3, "H": 0.6, "sigma": 2}"#).unwrap();
        let flags = ModelArgs {
            theta: Some(1.5),
            ..Default::default()
        };
        let s = merge(Some(&path), &[group(&flags)]).unwrap();
        assert_eq!((s.theta, s.hurst, s.sigma), (Some(1.5), Some(0.6), Some(2.0)));
        std::fs::write(&path, r#"{"thetaa": 3}"#).unwrap();
        assert!(merge(Some(&path), &[]).is_err());
    }
}
