//! Exact simulation of fractional Gaussian noise.
//!
//! The `n x n` Toeplitz covariance of the increments is embedded in a
//! circulant matrix of order `2n` whose eigenvalues are one FFT away
//! (Davies–Harte). If the embedding is not nonnegative definite beyond a
//! relative rounding tolerance, the sampler falls back to a dense Cholesky
//! factor of the covariance itself.
//!
//! Random streams: replication `i` under seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` with `set_stream(i)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Circulant eigenvalues below `-EIGEN_TOL * max` reject the fast path.
pub const EIGEN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.0 && h < 1.0 {
            Ok(Self(h))
        } else {
            Err(Error::domain(format!("Hurst index must lie in (0, 1), got {h}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}

/// A uniform grid of `steps` intervals on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub horizon: f64,
    pub steps: usize,
}

/// Largest step used by [`SampleGrid::with_default_steps`].
pub const DEFAULT_MAX_DT: f64 = 0.025;

impl SampleGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        if steps < 2 {
            return Err(Error::domain(format!("need at least 2 steps, got {steps}")));
        }
        Ok(Self { horizon, steps })
    }

    /// The smallest power of two with `dt <= 0.025`.
    pub fn with_default_steps(horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        let need = (horizon / DEFAULT_MAX_DT).ceil().max(2.0);
        if need > (1u64 << 40) as f64 {
            return Err(Error::domain("horizon too long for the default mesh"));
        }
        Self::new(horizon, (need as usize).next_power_of_two())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }
}

/// Where a random draw came from: base seed plus stream (replication) index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub stream: u64,
}

impl SeedRecord {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgnSample {
    pub increments: Vec<f64>,
    pub hurst: HurstParam,
    pub dt: f64,
    pub seed: SeedRecord,
}

/// Values on a uniform grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SamplePath {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.dt)
    }
}

/// `γ_H(k) = dt^{2H}/2 (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H})`.
pub fn fgn_autocovariance(hurst: f64, lag: u64, dt: f64) -> Result<f64> {
    let h = HurstParam::new(hurst)?.value();
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    Ok(dt.powf(2.0 * h) * unit_autocovariance(h, lag))
}

fn unit_autocovariance(h: f64, lag: u64) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    let k = lag as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).powf(e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FgnMethod {
    Circulant,
    Dense,
}

#[derive(Clone)]
enum Factor {
    Circulant {
        /// `sqrt(λ_j / 2n)`.
        scale: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Dense(DMatrix<f64>),
}

/// A reusable sampler for fGn with fixed `H` and `n`, generating at unit
/// spacing and rescaling by `dt^H`.
#[derive(Clone)]
pub struct FgnGenerator {
    hurst: HurstParam,
    n: usize,
    dt: f64,
    min_eigenvalue: f64,
    factor: Factor,
}

impl std::fmt::Debug for FgnGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FgnGenerator")
            .field("hurst", &self.hurst)
            .field("n", &self.n)
            .field("dt", &self.dt)
            .field("method", &self.method())
            .field("min_eigenvalue", &self.min_eigenvalue)
            .finish()
    }
}

impl FgnGenerator {
    pub fn new(hurst: HurstParam, grid: &SampleGrid) -> Result<Self> {
        Self::build(hurst, grid, None)
    }

    /// Forces one of the two factorizations (the circulant one only if it is
    /// valid).
    pub fn with_method(hurst: HurstParam, grid: &SampleGrid, method: FgnMethod) -> Result<Self> {
        Self::build(hurst, grid, Some(method))
    }

    fn build(hurst: HurstParam, grid: &SampleGrid, force: Option<FgnMethod>) -> Result<Self> {
        let n = grid.steps;
        let h = hurst.value();
        let eig = circulant_eigenvalues(h, n);
        let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let circulant_ok = min >= -EIGEN_TOL * max;
        let method = match force {
            Some(FgnMethod::Circulant) if !circulant_ok => {
                return Err(Error::Factorization {
                    n,
                    min_eigenvalue: min,
                })
            }
            Some(m) => m,
            None if circulant_ok => FgnMethod::Circulant,
            None => FgnMethod::Dense,
        };
        let factor = match method {
            FgnMethod::Circulant => {
                let m = eig.len() as f64;
                Factor::Circulant {
                    scale: eig.iter().map(|&l| (l.max(0.0) / m).sqrt()).collect(),
                    fft: FftPlanner::new().plan_fft_forward(eig.len()),
                }
            }
            FgnMethod::Dense => {
                let cov = DMatrix::from_fn(n, n, |i, j| unit_autocovariance(h, i.abs_diff(j) as u64));
                let chol = cov.cholesky().ok_or(Error::Factorization {
                    n,
                    min_eigenvalue: min,
                })?;
                Factor::Dense(chol.unpack())
            }
        };
        Ok(Self {
            hurst,
            n,
            dt: grid.dt(),
            min_eigenvalue: min,
            factor,
        })
    }

    pub fn method(&self) -> FgnMethod {
        match self.factor {
            Factor::Circulant { .. } => FgnMethod::Circulant,
            Factor::Dense(_) => FgnMethod::Dense,
        }
    }

    /// Smallest eigenvalue of the circulant embedding (unit spacing).
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Draws `n` increments into `out`.
    pub fn fill<R: rand::Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        let s = self.dt.powf(self.hurst.value());
        out.clear();
        match &self.factor {
            Factor::Circulant { scale, fft } => {
                let mut buf: Vec<Complex<f64>> = scale
                    .iter()
                    .map(|&c| {
                        let a: f64 = StandardNormal.sample(rng);
                        let b: f64 = StandardNormal.sample(rng);
                        Complex::new(c * a, c * b)
                    })
                    .collect();
                fft.process(&mut buf);
                // Real and imaginary parts are independent exact draws; the
                // real part alone is used.
                out.extend(buf[..self.n].iter().map(|z| z.re * s));
            }
            Factor::Dense(l) => {
                let z = DVector::from_fn(self.n, |_, _| StandardNormal.sample(rng));
                out.extend((l * z).iter().map(|v| v * s));
            }
        }
    }

    pub fn sample(&self, seed: SeedRecord) -> FgnSample {
        let mut increments = Vec::with_capacity(self.n);
        self.fill(&mut seed.rng(), &mut increments);
        FgnSample {
            increments,
            hurst: self.hurst,
            dt: self.dt,
            seed,
        }
    }
}

/// Eigenvalues of the circulant with first row
/// `(γ0, ..., γ_{n-1}, γ_n, γ_{n-1}, ..., γ1)` at unit spacing.
pub fn circulant_eigenvalues(h: f64, n: usize) -> Vec<f64> {
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex::new(unit_autocovariance(h, lag as u64), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut row);
    row.into_iter().map(|z| z.re).collect()
}

pub fn simulate_fgn(hurst: HurstParam, grid: &SampleGrid, seed: SeedRecord) -> Result<FgnSample> {
    Ok(FgnGenerator::new(hurst, grid)?.sample(seed))
}

/// Partial sums starting from 0: fBm on the grid.
pub fn cumulate_to_fbm(sample: &FgnSample) -> SamplePath {
    let mut values = Vec::with_capacity(sample.increments.len() + 1);
    let mut acc = 0.0;
    values.push(acc);
    for &x in &sample.increments {
        acc += x;
        values.push(acc);
    }
    SamplePath {
        dt: sample.dt,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid() {
        assert_eq!(SampleGrid::with_default_steps(50.0).unwrap().steps, 2048);
        assert_eq!(SampleGrid::with_default_steps(100.0).unwrap().steps, 4096);
        assert_eq!(SampleGrid::with_default_steps(0.01).unwrap().steps, 2);
        let g = SampleGrid::new(3.0, 7).unwrap();
        assert!((g.dt() * 7.0 - 3.0).abs() <= f64::EPSILON * 3.0);
        assert_eq!(g.time(7), 3.0);
    }

    #[test]
    fn autocovariance_examples() {
        assert_eq!(fgn_autocovariance(0.3, 0, 1.0).unwrap(), 1.0);
        assert_eq!(fgn_autocovariance(0.5, 1, 1.0).unwrap(), 0.0);
        assert!((fgn_autocovariance(0.75, 1, 1.0).unwrap() - 0.414_213_562_373_095_05).abs() < 1e-15);
        assert!(fgn_autocovariance(1.0, 1, 1.0).is_err());
        assert!(fgn_autocovariance(0.6, 1, 0.0).is_err());
    }

    #[test]
    fn dense_and_circulant_agree_in_method() {
        let g = SampleGrid::new(1.0, 16).unwrap();
        let h = HurstParam::new(0.7).unwrap();
        assert_eq!(FgnGenerator::new(h, &g).unwrap().method(), FgnMethod::Circulant);
        let d = FgnGenerator::with_method(h, &g, FgnMethod::Dense).unwrap();
        assert_eq!(d.method(), FgnMethod::Dense);
        assert_eq!(d.sample(SeedRecord::new(1, 0)).increments.len(), 16);
    }

    #[test]
    fn hurst_deserialization_validates() {
        assert!(serde_json::from_str::<HurstParam>("0.6").is_ok());
        assert!(serde_json::from_str::<HurstParam>("1.2").is_err());
    }
}
