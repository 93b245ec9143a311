//! Globally adaptive Gauss–Kronrod integration.
//!
//! The engine bisects whichever subinterval currently carries the largest
//! error estimate, in the style of QUADPACK's QAG/QAGP drivers, using the
//! 10-point Gauss / 21-point Kronrod pair. Subintervals are visited and summed
//! in a fixed order so results are bit-reproducible.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and limits shared by every quadrature in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Exponential factors `exp(-theta |s|)` are truncated at `|s| = tail_cutoff / theta`.
    pub tail_cutoff: f64,
    /// Split integration ranges at the algebraic singularity and regularize it
    /// by substitution. Switching this off integrates across the singularity
    /// directly, which is only useful for testing.
    pub singularity_split: bool,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-7,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
            tail_cutoff: 40.0,
            singularity_split: true,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        if !(self.tail_cutoff > 0.0) {
            return Err(Error::domain("tail cutoff must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::domain("max_subdivisions must be at least 1"));
        }
        Ok(())
    }

    /// Same limits with a different relative tolerance.
    pub fn with_rel_tol(&self, rel_tol: f64) -> Self {
        Self { rel_tol, ..*self }
    }
}

/// A quadrature value with its absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate {
        value: 0.0,
        error: 0.0,
    };

    pub fn scale(self, factor: f64) -> Estimate {
        Estimate {
            value: self.value * factor,
            error: self.error * factor.abs(),
        }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

impl std::iter::Sum for Estimate {
    fn sum<I: Iterator<Item = Estimate>>(iter: I) -> Estimate {
        iter.fold(Estimate::ZERO, |a, b| a + b)
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_250_940,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// One application of the 21-point Kronrod rule on `[a, b]`.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    let mut abs_sum = WGK[10] * fc.abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
        abs_sum += WGK[j] * (fv1[j].abs() + fv2[j].abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Estimate { value, error: err }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    a: f64,
    b: f64,
    est: Estimate,
    splittable: bool,
}

/// Integrates `f` over `[points[0], points[last]]`, starting from the cells
/// delimited by consecutive `points` (which must be sorted ascending).
///
/// Fails with [`Error::Quadrature`] if the global error estimate is still above
/// `max(abs_tol, rel_tol * |value|)` after `max_subdivisions` bisections.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    spec: &QuadratureSpec,
    what: &str,
) -> Result<Estimate> {
    let mut cells: Vec<Cell> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| Cell {
            a: w[0],
            b: w[1],
            est: gk21(&f, w[0], w[1]),
            splittable: true,
        })
        .collect();
    if cells.is_empty() {
        return Ok(Estimate::ZERO);
    }
    let mut subdivisions = 0;
    loop {
        let total: Estimate = cells.iter().map(|c| c.est).sum();
        if !total.value.is_finite() {
            return Err(Error::Quadrature {
                what: what.to_string(),
                value: total.value,
                error: total.error,
                subdivisions,
            });
        }
        let target = spec.abs_tol.max(spec.rel_tol * total.value.abs());
        if total.error <= target {
            return Ok(total);
        }
        // Bisect the worst splittable cell.
        let worst = cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.splittable)
            .max_by(|(_, x), (_, y)| x.est.error.total_cmp(&y.est.error))
            .map(|(i, _)| i);
        let Some(i) = worst else {
            // Nothing left to refine: the remaining error is at roundoff level.
            return Ok(total);
        };
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                what: what.to_string(),
                value: total.value,
                error: total.error,
                subdivisions,
            });
        }
        let cell = cells[i];
        let mid = 0.5 * (cell.a + cell.b);
        if !(mid > cell.a && mid < cell.b) || (cell.b - cell.a) <= 1e3 * f64::EPSILON * mid.abs() {
            cells[i].splittable = false;
            continue;
        }
        let left = gk21(&f, cell.a, mid);
        let right = gk21(&f, mid, cell.b);
        cells[i] = Cell {
            a: cell.a,
            b: mid,
            est: left,
            splittable: true,
        };
        cells.insert(
            i + 1,
            Cell {
                a: mid,
                b: cell.b,
                est: right,
                splittable: true,
            },
        );
        subdivisions += 1;
    }
}

/// Like [`integrate`], but every initial cell is refined independently (on the
/// rayon pool) against its own tolerance. Cell results are summed in cell
/// order, so the value does not depend on scheduling.
pub fn integrate_cells<F: Fn(f64) -> f64 + Sync>(
    f: F,
    points: &[f64],
    spec: &QuadratureSpec,
    what: &str,
) -> Result<Estimate> {
    let parts: Vec<Result<Estimate>> = points
        .par_windows(2)
        .map(|w| integrate(&f, w, spec, what))
        .collect();
    let mut total = Estimate::ZERO;
    for p in parts {
        total = total + p?;
    }
    Ok(total)
}
