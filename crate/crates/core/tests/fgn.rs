use fou_core::fgn::*;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

fn hurst(h: f64) -> HurstParam {
    HurstParam::new(h).unwrap()
}

/// `R_H(t, s)` of standard fBm.
fn fbm_cov(h: f64, t: f64, s: f64) -> f64 {
    0.5 * (t.powf(2.0 * h) + s.powf(2.0 * h) - (t - s).abs().powf(2.0 * h))
}

proptest! {
    #[test]
    fn autocovariance_is_second_difference_of_fbm_covariance(h in 0.01..0.99f64, k in 0u64..5000) {
        let kf = k as f64;
        let via_r = fbm_cov(h, kf + 1.0, 1.0) - fbm_cov(h, kf, 1.0);
        let g = fgn_autocovariance(h, k, 1.0).unwrap();
        let scale = (kf + 1.0).powf(2.0 * h);
        prop_assert!((g - via_r).abs() <= 4.0 * f64::EPSILON * scale, "{g} vs {via_r}");
    }

    #[test]
    fn long_memory_positive_correlation(h in 0.51..0.99f64, k in 1u64..10_000) {
        prop_assert!(fgn_autocovariance(h, k, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn dt_scaling(h in 0.05..0.95f64, k in 0u64..50, dt in 0.001..10.0f64) {
        let a = fgn_autocovariance(h, k, dt).unwrap();
        let b = fgn_autocovariance(h, k, 1.0).unwrap() * dt.powf(2.0 * h);
        prop_assert!((a - b).abs() <= 1e-13 * b.abs().max(1e-300));
    }
}

#[test]
fn circulant_embedding_is_nonnegative() {
    for h in [0.51, 0.55, 0.625, 0.7, 0.74] {
        for n in [1 << 8, 1 << 12, 1 << 16] {
            let eig = circulant_eigenvalues(h, n);
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min);
            assert!(min >= -EIGEN_TOL * max, "H={h} n={n} min={min}");
            let g = FgnGenerator::new(hurst(h), &SampleGrid::new(1.0, n).unwrap()).unwrap();
            assert_eq!(g.method(), FgnMethod::Circulant);
        }
    }
}

#[test]
fn output_is_deterministic() {
    let grid = SampleGrid::new(10.0, 1000).unwrap();
    let a = simulate_fgn(hurst(0.7), &grid, SeedRecord::new(42, 3)).unwrap();
    let b = simulate_fgn(hurst(0.7), &grid, SeedRecord::new(42, 3)).unwrap();
    let c = simulate_fgn(hurst(0.7), &grid, SeedRecord::new(42, 4)).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_ne!(a.increments, c.increments);
}

/// Sample autocovariances over independent paths, with standard errors from
/// the per-path products.
fn lag_stats(gen: &FgnGenerator, paths: u64, lags: usize, pos: usize) -> Vec<(f64, f64)> {
    let mut sums = vec![(0.0, 0.0); lags + 1];
    let mut buf = Vec::new();
    for i in 0..paths {
        gen.fill(&mut SeedRecord::new(99, i).rng(), &mut buf);
        for (k, s) in sums.iter_mut().enumerate() {
            let v = buf[pos] * buf[pos + k];
            s.0 += v;
            s.1 += v * v;
        }
    }
    let n = paths as f64;
    sums.iter()
        .map(|&(s1, s2)| {
            let m = s1 / n;
            (m, ((s2 / n - m * m) / n).sqrt())
        })
        .collect()
}

#[test]
fn white_noise_case() {
    let grid = SampleGrid::new(1024.0, 1024).unwrap();
    let g = FgnGenerator::new(hurst(0.5), &grid).unwrap();
    let x = g.sample(SeedRecord::new(5, 0)).increments;
    let n = x.len() as f64;
    let lag1: f64 = x.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1.0);
    // Standard error of the lag-1 product mean under independence is 1/sqrt(n-1).
    assert!(lag1.abs() < 3.0 / (n - 1.0).sqrt(), "{lag1}");
}

#[test]
fn autocovariances_match_for_h07() {
    let dt = 0.1;
    let grid = SampleGrid::new(4096.0 * dt, 4096).unwrap();
    let g = FgnGenerator::new(hurst(0.7), &grid).unwrap();
    for (k, (m, se)) in lag_stats(&g, 3000, 5, 1000).into_iter().enumerate() {
        let exact = fgn_autocovariance(0.7, k as u64, dt).unwrap();
        assert!((m - exact).abs() < 3.0 * se, "lag {k}: {m} vs {exact} ± {se}");
    }
}

#[test]
fn dense_fallback_has_the_same_law() {
    let grid = SampleGrid::new(64.0, 64).unwrap();
    let g = FgnGenerator::with_method(hurst(0.65), &grid, FgnMethod::Dense).unwrap();
    for (k, (m, se)) in lag_stats(&g, 4000, 3, 20).into_iter().enumerate() {
        let exact = fgn_autocovariance(0.65, k as u64, 1.0).unwrap();
        assert!((m - exact).abs() < 3.0 * se, "lag {k}: {m} vs {exact} ± {se}");
    }
}

#[test]
fn marginal_chi_square() {
    // First increments of 10⁴ independent paths against N(0, dt^{2H}).
    let (h, dt) = (0.7, 0.05);
    let grid = SampleGrid::new(16.0 * dt, 16).unwrap();
    let g = FgnGenerator::new(hurst(h), &grid).unwrap();
    let sd = dt.powf(h);
    let normal = Normal::new(0.0, sd).unwrap();
    let bins = 20;
    let mut counts = vec![0usize; bins];
    let mut buf = Vec::new();
    let n = 10_000;
    for i in 0..n {
        g.fill(&mut SeedRecord::new(8, i).rng(), &mut buf);
        let u = normal.cdf(buf[0]);
        counts[((u * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let e = n as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "chi2 = {stat}, p = {p}");
}

#[test]
fn cumulation() {
    let s = |v: Vec<f64>| FgnSample {
        increments: v,
        hurst: hurst(0.6),
        dt: 1.0,
        seed: SeedRecord::new(0, 0),
    };
    assert_eq!(cumulate_to_fbm(&s(vec![0.0; 5])).values, vec![0.0; 6]);
    assert_eq!(cumulate_to_fbm(&s(vec![2.5])).values, vec![0.0, 2.5]);
}

#[test]
fn fbm_terminal_variance() {
    let grid = SampleGrid::new(1.0, 1 << 12).unwrap();
    let g = FgnGenerator::new(hurst(0.6), &grid).unwrap();
    let n = 4000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for i in 0..n {
        let path = cumulate_to_fbm(&g.sample(SeedRecord::new(17, i)));
        let b = *path.values.last().unwrap();
        s1 += b * b;
        s2 += b.powi(4);
    }
    let m = s1 / n as f64;
    let se = ((s2 / n as f64 - m * m) / n as f64).sqrt();
    assert!((m - 1.0).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn invalid_inputs() {
    assert!(HurstParam::new(0.0).is_err());
    assert!(HurstParam::new(1.0).is_err());
    assert!(SampleGrid::new(1.0, 1).is_err());
    assert!(SampleGrid::new(-1.0, 8).is_err());
}
