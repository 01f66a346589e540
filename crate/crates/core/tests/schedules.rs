use fracbin::arbitrage::{friction_exponent, make_schedules, Schedules};
use fracbin::kernel::*;

#[test]
fn schedule_limits_along_horizons() {
    let p = ModelParams::with_hurst(0.75).unwrap();
    let big = build_kernel_table(1 << 13, &p, &QuadratureConfig::default()).unwrap();
    let theta = theta_limit(&p, 1e-10).unwrap().theta;
    let e = friction_exponent(p.hurst);
    let rows: Vec<Schedules> = (8..=13)
        .map(|k| make_schedules(&big.prefix(1 << k).unwrap(), theta, 1.0, 1.0).unwrap())
        .collect();
    for s in &rows {
        assert!(s.eps > 0.0 && s.c_hat > 0.0 && s.c > 0.0 && s.big_c > 0.0 && s.lambda > 0.0);
        // the eps exponent is min(1/2, 2 - 2H) = 1/2 at H = 3/4
        let n = s.horizon as f64;
        assert!((s.eps - n.ln() / n.sqrt()).abs() <= 1e-15);
    }
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        assert!(b.c < a.c, "c_N not decreasing: {a:?} {b:?}");
        assert!(b.big_c > a.big_c, "C_N not increasing: {a:?} {b:?}");
        let little_o = |s: &Schedules| {
            let n = s.horizon as f64;
            s.lambda * n.powf(e) / n.ln().sqrt()
        };
        assert!(little_o(b) < little_o(a));
    }
    // B12 grows like N^{H - 1/2}
    let scaled: Vec<f64> = rows
        .iter()
        .map(|s| s.b12 * (s.horizon as f64).powf(0.5 - p.hurst))
        .collect();
    let (lo, hi) = scaled.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi / lo < 1.5, "{scaled:?}");
}
