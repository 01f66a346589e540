use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Euclidean norm of the residuals in log space.
    pub residual: f64,
}

pub fn rate_fit(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            what: "rate fit abscissae vs ordinates",
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::Degenerate(format!("rate fit needs 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Degenerate("rate fit needs positive finite values".into()));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Degenerate("rate fit abscissae must increase strictly".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        .sqrt();
    if !slope.is_finite() {
        return Err(Error::Degenerate("rate fit slope is not finite".into()));
    }
    Ok(RateFit {
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        slope,
        intercept,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let f = rate_fit(&xs, &sq).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && f.intercept.abs() < 1e-14 && f.residual < 1e-14);
        let f = rate_fit(&xs, &[3.0; 4]).unwrap();
        assert!(f.slope.abs() < 1e-15);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn noisy_power_law() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (1..=40).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x.powf(-0.5) * (1.0 + 0.05 * (rng.random::<f64>() - 0.5))).collect();
        let f = rate_fit(&xs, &ys).unwrap();
        // log noise has sd about 0.015; the slope's sampling error is far below 0.02
        assert!((f.slope + 0.5).abs() < 0.02, "{}", f.slope);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(rate_fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(rate_fit(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(rate_fit(&[1.0, 2.0, 3.0], &[1.0, 0.0, 3.0]).is_err());
        assert!(rate_fit(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }
}
