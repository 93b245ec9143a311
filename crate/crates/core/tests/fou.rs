use fou_core::estimator::mu;
use fou_core::fgn::*;
use fou_core::fou::*;
use proptest::prelude::*;

fn params(theta: f64, sigma: f64, h: f64, x0: f64) -> ModelParams {
    ModelParams::new(theta, sigma, h, x0).unwrap()
}

fn run(p: &ModelParams, grid: &SampleGrid, incr: &[f64]) -> Vec<f64> {
    let mut v = Vec::new();
    fou_from_increments(p, grid, incr, &mut v).unwrap();
    v
}

#[test]
fn starts_at_x0() {
    let p = params(1.0, 1.0, 0.6, -2.5);
    let path = simulate_fou(&p, &SampleGrid::new(5.0, 128).unwrap(), SeedRecord::new(1, 0)).unwrap();
    assert_eq!(path.values[0], -2.5);
    assert_eq!(path.values.len(), 129);
}

fn mean_se(sum: f64, sum_sq: f64, n: f64) -> (f64, f64) {
    let m = sum / n;
    (m, ((sum_sq / n - m * m) / n).sqrt())
}

#[test]
fn brownian_case_matches_classical_transition() {
    // With H = 1/2 the scheme must reproduce the exact OU transition:
    // Var(X_t) = σ²(1 - e^{-2θt})/(2θ), Cov(X_t, X_{t+dt}) = e^{-θdt} Var(X_t).
    let (theta, sigma) = (1.0, 1.0);
    let p = params(theta, sigma, 0.5, 0.0);
    let grid = SampleGrid::new(2.56, 256).unwrap();
    let gen = FgnGenerator::new(p.hurst, &grid).unwrap();
    let k = 100;
    let n = 10_000;
    let (mut a1, mut a2, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let path = simulate_fou_with(&p, &grid, &gen, SeedRecord::new(21, i)).unwrap();
        let (x, y) = (path.values[k], path.values[k + 1]);
        a1 += x * x;
        a2 += x.powi(4);
        b1 += x * y;
        b2 += (x * y).powi(2);
    }
    let t = grid.time(k);
    let var = sigma * sigma * (1.0 - (-2.0 * theta * t).exp()) / (2.0 * theta);
    let (m0, se0) = mean_se(a1, a2, n as f64);
    let (m1, se1) = mean_se(b1, b2, n as f64);
    assert!((m0 - var).abs() < 3.0 * se0, "{m0} vs {var} ± {se0}");
    let cov = (-theta * grid.dt()).exp() * var;
    assert!((m1 - cov).abs() < 3.0 * se1, "{m1} vs {cov} ± {se1}");
}

#[test]
fn long_run_variance_is_mu() {
    let (theta, h) = (1.0, 0.7);
    let p = params(theta, 1.0, h, 0.0);
    let grid = SampleGrid::with_default_steps(20.0).unwrap();
    let gen = FgnGenerator::new(p.hurst, &grid).unwrap();
    let n = 10_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for i in 0..n {
        let path = simulate_fou_with(&p, &grid, &gen, SeedRecord::new(4, i)).unwrap();
        let x = *path.values.last().unwrap();
        s1 += x * x;
        s2 += x.powi(4);
    }
    let (m, se) = mean_se(s1, s2, n as f64);
    let target = mu(theta, 1.0, h).unwrap();
    assert!((m - target).abs() < 3.0 * se, "{m} vs {target} ± {se}");
}

#[test]
fn mesh_refinement_changes_q_within_bound() {
    // The same driver observed at dt, dt/2, dt/4, ... by aggregating a fine
    // fGn sample pairwise.
    let p = params(2.0, 1.0, 0.7, 0.0);
    let t = 50.0;
    let fine = SampleGrid::new(t, 8192).unwrap();
    let gen = FgnGenerator::new(p.hurst, &fine).unwrap();
    let paths = 40;
    let mut diffs = [0.0; 3];
    for i in 0..paths {
        let mut incr = gen.sample(SeedRecord::new(6, i)).increments;
        let mut q = Vec::new();
        for _ in 0..4 {
            let grid = SampleGrid::new(t, incr.len()).unwrap();
            q.push(quadratic_functional(&run(&p, &grid, &incr), grid.dt()) / t);
            incr = incr.chunks(2).map(|c| c[0] + c[1]).collect();
        }
        for k in 0..3 {
            diffs[k] += (q[k + 1] - q[k]).abs() / paths as f64;
        }
    }
    for (k, d) in diffs.iter().enumerate() {
        // diffs[k] compares dt_k = t/8192 * 2^(k+1) with dt_k / 2.
        let dt = t / 8192.0 * 2f64.powi(k as i32 + 1);
        assert!(*d <= mesh_bias_bound(&p, dt).unwrap(), "dt={dt}: {d}");
    }
    assert!(diffs[0] < diffs[1] && diffs[1] < diffs[2], "{diffs:?}");
}

proptest! {
    #[test]
    fn odd_symmetry(x0 in -3.0..3.0f64, seed in 0u64..1000) {
        let p = params(1.3, 0.8, 0.62, x0);
        let m = params(1.3, 0.8, 0.62, -x0);
        let grid = SampleGrid::new(4.0, 64).unwrap();
        let incr = simulate_fgn(p.hurst, &grid, SeedRecord::new(seed, 0)).unwrap().increments;
        let neg: Vec<f64> = incr.iter().map(|x| -x).collect();
        let a = run(&p, &grid, &incr);
        let b = run(&m, &grid, &neg);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(*x, -*y);
        }
        prop_assert_eq!(quadratic_functional(&a, grid.dt()), quadratic_functional(&b, grid.dt()));
    }

    #[test]
    fn sigma_scaling(lambda in 0.1..10.0f64, seed in 0u64..1000) {
        let p = params(0.7, 1.0, 0.66, 0.0);
        let q = params(0.7, lambda, 0.66, 0.0);
        let grid = SampleGrid::new(3.0, 64).unwrap();
        let incr = simulate_fgn(p.hurst, &grid, SeedRecord::new(seed, 1)).unwrap().increments;
        let a = run(&p, &grid, &incr);
        let b = run(&q, &grid, &incr);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((lambda * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
        let qa = quadratic_functional(&a, grid.dt());
        let qb = quadratic_functional(&b, grid.dt());
        prop_assert!((lambda * lambda * qa - qb).abs() <= 1e-12 * qb);
    }

    #[test]
    fn q_is_nonnegative(values in proptest::collection::vec(-1e3..1e3f64, 2..50), dt in 1e-3..1.0f64) {
        let q = quadratic_functional(&values, dt);
        prop_assert!(q >= 0.0);
        prop_assert_eq!(q == 0.0, values.iter().all(|&x| x == 0.0));
    }
}

#[test]
fn rejects_bad_parameters() {
    assert!(ModelParams::new(0.0, 1.0, 0.6, 0.0).is_err());
    assert!(ModelParams::new(1.0, -1.0, 0.6, 0.0).is_err());
    assert!(ModelParams::new(1.0, 1.0, 1.2, 0.0).is_err());
    assert!(params(1.0, 1.0, 0.8, 0.0).check_estimation_range().is_err());
    assert!(params(1.0, 0.0, 0.6, 0.0).check_estimation_range().is_err());
}
