mod common;

use common::{oracle_g, oracle_j};
use fracbin::kernel::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn first_weights_match_oracle() {
    let p = ModelParams::with_hurst(0.75).unwrap();
    let q = QuadratureConfig::default();
    let j = compute_j(2, 1, &p, &q).unwrap();
    let g = compute_g(2, &p, &q).unwrap();
    assert!(rel(j, oracle_j(2, 1, &p)) < 1e-8, "{j} vs {}", oracle_j(2, 1, &p));
    assert!(rel(g, oracle_g(2, &p)) < 1e-8, "{g} vs {}", oracle_g(2, &p));
}

#[test]
fn sampled_weights_match_oracle() {
    let q = QuadratureConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for hurst in [0.6, 0.75, 0.9] {
        let p = ModelParams::with_hurst(hurst).unwrap();
        let table = build_kernel_table(256, &p, &q).unwrap();
        for _ in 0..100 {
            let n = rng.random_range(2..=256);
            let i = rng.random_range(1..n);
            let want = oracle_j(n, i, &p);
            let got = table.j(n, i);
            assert!(rel(got, want) < 1e-8, "H={hurst} j_{n}({i}) = {got} vs {want}");
        }
        for n in [1, 2, 3, 17, 256] {
            let want = oracle_g(n, &p);
            assert!(rel(table.g(n), want) < 1e-8, "H={hurst} g_{n} = {} vs {want}", table.g(n));
        }
    }
}

#[test]
fn g_tends_to_limit() {
    let p = ModelParams::with_hurst(0.75).unwrap();
    let q = QuadratureConfig::default();
    let g = p.g();
    let g8 = compute_g(8, &p, &q).unwrap();
    let g512 = compute_g(512, &p, &q).unwrap();
    assert!((g512 / g - 1.0).abs() < (g8 / g - 1.0).abs());
    for n in [2usize, 8, 64, 512] {
        let r = compute_g(n, &p, &q).unwrap() / g;
        let upper = (1.0 + 1.0 / (n as f64 - 1.0)).powf(p.hurst - 0.5);
        assert!(r >= 1.0 - 1e-10 && r <= upper * (1.0 + 1e-10), "n={n} ratio {r}");
    }
}

#[test]
fn off_diagonal_decay_rate() {
    // j_i(i - k) <= C k^{H - 3/2}: the fitted constant is stable across i
    let p = ModelParams::with_hurst(0.75).unwrap();
    let table = build_kernel_table(1024, &p, &QuadratureConfig::default()).unwrap();
    let exponent = p.hurst - 1.5;
    let constant = |i: usize| {
        (1..=3 * i / 4)
            .map(|k| table.j(i, i - k) / (k as f64).powf(exponent))
            .fold(0.0, f64::max)
    };
    let (c256, c1024) = (constant(256), constant(1024));
    assert!(c256.is_finite() && c1024.is_finite());
    assert!((c1024 / c256 - 1.0).abs() < 0.1, "{c256} vs {c1024}");
}

#[test]
fn cross_expectation_tends_to_series() {
    let p = ModelParams::with_hurst(0.75).unwrap();
    let table = build_kernel_table(512, &p, &QuadratureConfig::default()).unwrap();
    let limit = theta_limit(&p, 1e-10).unwrap();
    let v4 = limit.v4;
    let e32 = table.y_cross_expectation(32).unwrap();
    let e512 = table.y_cross_expectation(512).unwrap();
    assert!((e512 - v4).abs() < (e32 - v4).abs(), "{e32} {e512} {v4}");
    assert_eq!(table.y_cross_expectation(2).unwrap(), 0.0);
    assert_eq!(table.y_variance(1).unwrap(), 0.0);
}
