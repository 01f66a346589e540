//! Autocovariance of the limiting fractional noise and the series constants
//! built from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::params::ModelParams;
use crate::kernel::quadrature::GaussLegendre;

/// Autocovariance `rho(k) = ((k+1)^{2h} + |k-1|^{2h} - 2 k^{2h}) / 2` of
/// fractional Gaussian noise with Hurst index `h`.
pub fn rho(k: u64, h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::domain(format!("rho requires h in (0, 1], got {h}")));
    }
    Ok(rho_real(k as f64, h))
}

/// Above this lag the binomial expansion replaces the closed form, which
/// cancels catastrophically for large `t`.
const SERIES_FROM: f64 = 4.0;

pub(crate) fn rho_real(t: f64, h: f64) -> f64 {
    let e = 2.0 * h;
    if t < SERIES_FROM {
        return 0.5 * ((t + 1.0).powf(e) + (t - 1.0).abs().powf(e) - 2.0 * t.powf(e));
    }
    // rho(t) = t^{2h} sum_{j>=1} C(2h, 2j) t^{-2j}; every term is positive.
    let inv2 = 1.0 / (t * t);
    let mut coef = e * (e - 1.0) / 2.0;
    let mut pow = inv2;
    let mut sum = coef * pow;
    let mut j = 1.0;
    loop {
        // C(e, 2j+2) = C(e, 2j) (e-2j)(e-2j-1) / ((2j+1)(2j+2))
        coef *= (e - 2.0 * j) * (e - 2.0 * j - 1.0) / ((2.0 * j + 1.0) * (2.0 * j + 2.0));
        pow *= inv2;
        let term = coef * pow;
        sum += term;
        j += 1.0;
        if term <= 1e-18 * sum || j > 200.0 {
            break;
        }
    }
    t.powf(e) * sum
}

/// A series value with a certified error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub bound: f64,
    /// Number of terms summed explicitly before the tail estimate.
    pub terms: u64,
}

/// Sum `sum_{k >= first} a(k)` for a positive, decreasing, convex `a` that
/// decays like `lead * t^{-(1 + gamma)}`.
///
/// The first `K` terms are summed directly. For convex `a` the tail is
/// bracketed by `int_{K+1}^inf a + a(K+1)/2 <= tail <= int_{K+1/2}^inf a`;
/// the midpoint of the bracket is used and half its width is the reported
/// bound. `K` doubles until `scale * bound <= tol`.
pub(crate) fn convex_series<A: Fn(f64) -> f64>(
    a: A,
    first: u64,
    gamma: f64,
    lead: f64,
    scale: f64,
    tol: f64,
) -> Result<SeriesValue> {
    if !(tol > 0.0) {
        return Err(Error::domain("tail tolerance must be positive"));
    }
    let rule = GaussLegendre::new(16);
    let mut k_max = first.max(8);
    let mut partial = 0.0;
    let mut next = first;
    loop {
        while next <= k_max {
            partial += a(next as f64);
            next += 1;
        }
        let kf = k_max as f64;
        let lower = power_tail_integral(&a, kf + 1.0, gamma, lead, &rule) + 0.5 * a(kf + 1.0);
        let upper = power_tail_integral(&a, kf + 0.5, gamma, lead, &rule);
        let half = 0.5 * (upper - lower).abs();
        if scale * half <= tol {
            return Ok(SeriesValue {
                value: scale * (partial + 0.5 * (lower + upper)),
                bound: scale * half,
                terms: k_max,
            });
        }
        if k_max > 1 << 40 {
            return Err(Error::domain(format!(
                "series tail bound {} cannot reach tolerance {tol}",
                scale * half
            )));
        }
        k_max *= 2;
    }
}

/// `int_T^inf a(t) dt` through `t = T s^{-1/gamma}`, which turns the power
/// tail into an almost constant integrand on `(0, 1]`.
fn power_tail_integral<A: Fn(f64) -> f64>(a: &A, start: f64, gamma: f64, lead: f64, rule: &GaussLegendre) -> f64 {
    let integrand = |s: f64| {
        let t = start * (-s.ln() / gamma).exp();
        a(t) * start / gamma * (-(1.0 / gamma + 1.0) * s.ln()).exp()
    };
    // Below s_min the relative deviation from the limit constant is ~1e-17.
    let s_min = (1e-17 * start).powf(gamma).min(0.5);
    let mut acc = 0.0;
    let mut hi = 1.0;
    while hi > s_min {
        let lo = 0.5 * hi;
        acc += rule.integrate(lo, hi, integrand);
        hi = lo;
    }
    acc + hi * lead * start.powf(-gamma) / gamma
}

/// The limit constant of the base strategy's terminal value together with
/// its two components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaLimit {
    pub theta: f64,
    /// `4 g^2 sum_{k>=2} rho(k) rho(k-1)`
    pub v4: f64,
    /// `g^2 (2^{H+1/2} - 2)`
    pub v3: f64,
    pub tail_bound: f64,
    pub terms: u64,
}

pub fn theta_limit(params: &ModelParams, tail_tol: f64) -> Result<ThetaLimit> {
    params.validate()?;
    let h = params.h();
    if h >= 0.75 {
        return Err(Error::domain("series diverges for h >= 3/4"));
    }
    let g = params.g();
    let lead = (h * (2.0 * h - 1.0)).powi(2);
    let gamma = 3.0 - 4.0 * h;
    let series = convex_series(
        |t| rho_real(t, h) * rho_real(t - 1.0, h),
        2,
        gamma,
        lead,
        4.0 * g * g,
        tail_tol,
    )?;
    let v3 = g * g * (2f64.powf(params.hurst + 0.5) - 2.0);
    Ok(ThetaLimit {
        theta: series.value + v3,
        v4: series.value,
        v3,
        tail_bound: series.bound,
        terms: series.terms,
    })
}

/// `4 g^2 sum_{k>=1} rho(k)^2`, the variance of the limit of the history
/// process.
pub fn history_variance_limit(params: &ModelParams, tail_tol: f64) -> Result<SeriesValue> {
    params.validate()?;
    let h = params.h();
    let g = params.g();
    let lead = (h * (2.0 * h - 1.0)).powi(2);
    let first = rho_real(1.0, h).powi(2);
    let rest = convex_series(|t| rho_real(t, h).powi(2), 2, 3.0 - 4.0 * h, lead, 4.0 * g * g, tail_tol)?;
    Ok(SeriesValue {
        value: 4.0 * g * g * first + rest.value,
        ..rest
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_special_values() {
        assert_eq!(rho(1, 0.5).unwrap(), 0.0);
        for h in [0.3, 0.5, 0.6, 0.7] {
            assert!((rho(0, h).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!(rho(1, 0.0).is_err());
        assert!(rho(1, 1.2).is_err());
    }

    #[test]
    fn series_branch_matches_closed_form_near_switch() {
        for h in [0.55, 0.625, 0.7, 0.74] {
            for t in [4.0, 5.0, 7.5] {
                let e = 2.0 * h;
                let direct = 0.5 * ((t + 1.0f64).powf(e) + (t - 1.0f64).powf(e) - 2.0 * t.powf(e));
                let series = rho_real(t, h);
                assert!((direct - series).abs() < 1e-12 * series, "h={h} t={t}");
            }
        }
    }

    #[test]
    fn rho_positive_and_decreasing() {
        for h in [0.51, 0.6, 0.625, 0.7, 0.749] {
            let mut prev = rho(1, h).unwrap();
            assert!(prev > 0.0);
            for k in 2..=10_000u64 {
                let r = rho(k, h).unwrap();
                assert!(r > 0.0 && r < prev, "h={h} k={k}");
                prev = r;
            }
        }
    }

    #[test]
    fn v3_closed_form() {
        // g = 1 requires sigma cH = (H + 1/2)(H - 1/2)
        let p = ModelParams::new(0.75, 1.0, 1.25 * 0.25, 1.0).unwrap();
        let t = theta_limit(&p, 1e-10).unwrap();
        assert!((t.v3 - (2f64.powf(1.25) - 2.0)).abs() < 1e-14);
        assert!((t.v3 - 0.378_414_230_005_442).abs() < 1e-12);
    }

    #[test]
    fn theta_positive_across_hurst_grid() {
        for i in 0..9 {
            let hurst = 0.55 + 0.05 * i as f64;
            let p = ModelParams::with_hurst(hurst).unwrap();
            let t = theta_limit(&p, 1e-10).unwrap();
            assert!(t.theta > 0.0 && t.v4 > 0.0 && t.v3 > 0.0, "H={hurst}");
            assert!(t.tail_bound <= 1e-10);
        }
    }

    #[test]
    fn halving_tolerance_is_consistent() {
        let p = ModelParams::with_hurst(0.8).unwrap();
        let a = theta_limit(&p, 1e-6).unwrap();
        let b = theta_limit(&p, 0.5e-6).unwrap();
        assert!((a.theta - b.theta).abs() <= a.tail_bound);
    }

    #[test]
    fn tail_estimate_matches_long_direct_sum() {
        // Direct summation to 2e6 plus a crude integral tail.
        let h = 0.6;
        let direct: f64 = (2..=2_000_000u64).map(|k| rho_real(k as f64, h) * rho_real(k as f64 - 1.0, h)).sum();
        let lead = (h * (2.0 * h - 1.0)).powi(2);
        let gamma = 3.0 - 4.0 * h;
        let tail = lead * 2.0e6f64.powf(-gamma) / gamma;
        let s = convex_series(|t| rho_real(t, h) * rho_real(t - 1.0, h), 2, gamma, lead, 1.0, 1e-13).unwrap();
        assert!((s.value - (direct + tail)).abs() < 1e-9, "{} vs {}", s.value, direct + tail);
    }
}
