use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the fractional binary market.
///
/// `c_h` is the normalisation constant that multiplies both kernel integrals
/// (`j_n(i)` and `g_n`). The limit weight `g` is derived from it so that
/// `g_n -> g` holds with the same constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub hurst: f64,
    pub sigma: f64,
    pub c_h: f64,
    pub s0: f64,
}

impl ModelParams {
    pub fn new(hurst: f64, sigma: f64, c_h: f64, s0: f64) -> Result<Self> {
        let p = ModelParams {
            hurst,
            sigma,
            c_h,
            s0,
        };
        p.validate()?;
        Ok(p)
    }

    /// `sigma = c_h = s0 = 1`.
    pub fn with_hurst(hurst: f64) -> Result<Self> {
        Self::new(hurst, 1.0, 1.0, 1.0)
    }

    /// `sigma = s0 = 1` with the kernel constant of [`standard_c_h`], so that
    /// the rescaled random walk converges to a standard fractional Brownian
    /// motion.
    pub fn standard(hurst: f64) -> Result<Self> {
        Self::new(hurst, 1.0, standard_c_h(hurst)?, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.5 && self.hurst < 1.0) {
            return Err(Error::domain(format!(
                "Hurst exponent must lie in (1/2, 1), got {}",
                self.hurst
            )));
        }
        for (name, v) in [("sigma", self.sigma), ("cH", self.c_h), ("s0", self.s0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// `H - 1/2`, the exponent that appears throughout the kernel integrands.
    #[inline]
    pub fn alpha(&self) -> f64 {
        self.hurst - 0.5
    }

    /// Hurst exponent of the limiting autocovariance, `H/2 + 1/4`.
    #[inline]
    pub fn h(&self) -> f64 {
        self.hurst / 2.0 + 0.25
    }

    /// Limit of the diagonal weights `g_n`.
    #[inline]
    pub fn g(&self) -> f64 {
        self.sigma * self.c_h / ((self.hurst + 0.5) * (self.hurst - 0.5))
    }
}

/// `(H - 1/2) sqrt(H (2H - 1) / B(2 - 2H, H - 1/2))`, the kernel constant of
/// the Molchan-Golosov representation of standard fractional Brownian motion
/// expressed in the normalisation used by [`ModelParams::c_h`].
pub fn standard_c_h(hurst: f64) -> Result<f64> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::domain(format!("Hurst exponent must lie in (1/2, 1), got {hurst}")));
    }
    let b = statrs::function::beta::beta(2.0 - 2.0 * hurst, hurst - 0.5);
    Ok((hurst - 0.5) * (hurst * (2.0 * hurst - 1.0) / b).sqrt())
}

/// Settings of the panel-doubling Gauss-Legendre rule.
///
/// `nodes_per_panel` counts the nodes of one two-dimensional panel; it must be
/// a perfect square (the tensor rule uses `sqrt(nodes_per_panel)` points per
/// axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub nodes_per_panel: u32,
    pub max_panels: u32,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            nodes_per_panel: 64,
            max_panels: 1024,
            rel_tol: 1e-10,
            abs_tol: 1e-14,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_panel < 2 {
            return Err(Error::domain("nodes_per_panel must be at least 2"));
        }
        let order = self.order();
        if order * order != self.nodes_per_panel as usize {
            return Err(Error::domain(format!(
                "nodes_per_panel must be a perfect square, got {}",
                self.nodes_per_panel
            )));
        }
        if self.max_panels == 0 {
            return Err(Error::domain("max_panels must be positive"));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        Ok(())
    }

    /// Gauss-Legendre points per axis.
    pub fn order(&self) -> usize {
        ((self.nodes_per_panel as f64).sqrt().round() as usize).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants() {
        let p = ModelParams::with_hurst(0.75).unwrap();
        assert!((p.h() - 0.625).abs() < 1e-15);
        assert!((p.g() - 1.0 / (1.25 * 0.25)).abs() < 1e-12);
        for hurst in [0.51, 0.6, 0.75, 0.9, 0.99] {
            let p = ModelParams::with_hurst(hurst).unwrap();
            assert!(p.h() > 0.5 && p.h() < 0.75);
            assert!(p.g() > 0.0);
        }
    }

    #[test]
    fn standard_constant() {
        // B(1/2, 1/4) = Gamma(1/2) Gamma(1/4) / Gamma(3/4)
        let b: f64 = 1.772_453_850_905_516 * 3.625_609_908_221_908 / 1.225_416_702_465_178;
        let want = 0.25 * (0.375 / b).sqrt();
        assert!((standard_c_h(0.75).unwrap() - want).abs() < 1e-14);
        assert!(standard_c_h(0.5).is_err());
    }

    #[test]
    fn rejects_out_of_domain() {
        assert!(ModelParams::with_hurst(0.5).is_err());
        assert!(ModelParams::with_hurst(1.0).is_err());
        assert!(ModelParams::new(0.7, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.7, 1.0, -1.0, 1.0).is_err());
        assert!(ModelParams::new(0.7, 1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn quadrature_config_checks() {
        assert!(QuadratureConfig::default().validate().is_ok());
        assert_eq!(QuadratureConfig::default().order(), 8);
        let bad = QuadratureConfig {
            nodes_per_panel: 10,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = QuadratureConfig {
            rel_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
