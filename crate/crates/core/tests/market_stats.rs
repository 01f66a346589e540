use fracbin::kernel::*;
use fracbin::market::{enumerate_paths, simulate_batch, SeedSpec};
use fracbin::stats::{exact_sum, Estimate};

fn table(n: usize) -> KernelTable {
    let p = ModelParams::new(0.75, 1.0, 0.25, 1.0).unwrap();
    build_kernel_table(n, &p, &QuadratureConfig::default()).unwrap()
}

#[test]
fn first_sign_is_fair() {
    let n = 100_000u64;
    let ones: Vec<f64> = (0..n)
        .map(|i| SeedSpec { master_seed: 9, path_index: i }.signs(1).as_slice()[0] as f64)
        .collect();
    let mean = ones.iter().sum::<f64>() / n as f64;
    assert!(mean.abs() <= 3.0 / (n as f64).sqrt(), "{mean}");
}

#[test]
fn history_variance_matches_kernel() {
    let t = table(256);
    let paths = simulate_batch(&t, 42, 0, 10_000).unwrap();
    let y: Vec<f64> = paths.iter().map(|p| p.y_at(256)).collect();
    let m = y.iter().sum::<f64>() / y.len() as f64;
    let sq: Vec<f64> = y.iter().map(|v| (v - m) * (v - m)).collect();
    let est = Estimate::from_samples(&sq);
    let want = t.y_variance(256).unwrap();
    assert!((est.mean - want).abs() <= 3.0 * est.se, "{} +- {} vs {want}", est.mean, est.se);
    // a fixed linear functional of the signs is centred
    let lin: Vec<f64> = paths.iter().map(|p| p.signs.xi(1) - 2.0 * p.signs.xi(100)).collect();
    let e = Estimate::from_samples(&lin);
    assert!(e.mean.abs() <= 3.0 * e.se);
}

#[test]
fn reconstruction_and_summation_order() {
    let t = table(256);
    let nh = 256f64.powf(0.75);
    for p in simulate_batch(&t, 7, 0, 20).unwrap() {
        for n in 1..=256 {
            let ratio = p.s_at(n) / p.s_at(n - 1) - 1.0;
            assert!((ratio - p.x_at(n) / nh).abs() <= 1e-14, "n={n}");
            let reverse: f64 = (1..n).rev().map(|i| t.j(n, i) * p.signs.xi(i)).sum();
            let y = p.y_at(n);
            assert!((reverse - y).abs() <= 1e-12 * y.abs().max(1e-300) + 1e-15);
            assert_eq!(p.x_at(n), y + t.g(n) * p.signs.xi(n));
        }
    }
}

#[test]
fn enumerated_mean_of_xi_times_history_vanishes() {
    let t = table(10);
    for k in 2..=10 {
        let total = exact_sum(enumerate_paths(&t).unwrap().map(|p| {
            let p = p.unwrap();
            p.signs.xi(k) * p.y_at(k - 1)
        }));
        assert_eq!(total, 0.0, "k={k}");
    }
}

#[test]
fn frozen_constants() {
    // 2^{5/4} = 2.3784142300054420...
    let r = rho(1, 0.625).unwrap();
    assert!((r - 0.189_207_115_002_721_07).abs() < 1e-15, "{r}");
    let p = ModelParams::with_hurst(0.75).unwrap();
    let limit = theta_limit(&p, 1e-12).unwrap();
    let v3_unit = limit.v3 / (p.g() * p.g());
    assert!((v3_unit - 0.378_414_230_005_442_1).abs() < 1e-14, "{v3_unit}");
}
