//! Reference implementations shared by the integration tests. Nothing here
//! reuses the library's quadrature.

#![allow(dead_code)]

use fracbin::kernel::ModelParams;

/// Double-exponential nodes on (0, 1): `(distance from 0, distance from 1,
/// weight)` for the midpoint rule with `m` points in `tau` on [-5, 5].
fn de_nodes(m: usize) -> Vec<(f64, f64, f64)> {
    let h = 10.0 / m as f64;
    (0..m)
        .map(|k| {
            let tau = -5.0 + (k as f64 + 0.5) * h;
            let s = std::f64::consts::PI * tau.sinh();
            let lo = 1.0 / (1.0 + (-s).exp());
            let hi = 1.0 / (1.0 + s.exp());
            let w = h * std::f64::consts::PI * tau.cosh() * lo * hi;
            (lo, hi, w)
        })
        .collect()
}

fn de_square<F: Fn((f64, f64), (f64, f64)) -> f64>(f: &F, m: usize) -> f64 {
    let nodes = de_nodes(m);
    let mut total = 0.0;
    for &(xl, xh, wx) in &nodes {
        let mut row = 0.0;
        for &(yl, yh, wy) in &nodes {
            row += wy * f((xl, xh), (yl, yh));
        }
        total += wx * row;
    }
    total
}

/// Midpoint rule in the double-exponential variable at 200 and 100 points
/// per axis, combined by one Richardson step.
fn richardson<F: Fn((f64, f64), (f64, f64)) -> f64>(f: F) -> f64 {
    let fine = de_square(&f, 200);
    let coarse = de_square(&f, 100);
    (4.0 * fine - coarse) / 3.0
}

pub fn oracle_j(n: usize, i: usize, p: &ModelParams) -> f64 {
    let hh = p.hurst;
    let v = richardson(|(xl, xh), (vl, _)| {
        let x = (i - 1) as f64 + xl;
        let outer = (vl + (n - 1) as f64).powf(hh - 0.5);
        let gap = (n - 1 - i) as f64 + xh + vl;
        x.powf(0.5 - hh) * outer * gap.powf(hh - 1.5)
    });
    p.sigma * p.c_h * v
}

pub fn oracle_g(n: usize, p: &ModelParams) -> f64 {
    let hh = p.hurst;
    let v = richardson(|(xl, xh), (yl, _)| {
        let x = (n - 1) as f64 + xl;
        x.powf(0.5 - hh) * xh.powf(hh - 0.5) * (yl * xh + x).powf(hh - 0.5) * yl.powf(hh - 1.5)
    });
    p.sigma * p.c_h * v
}
