use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::params::{ModelParams, QuadratureConfig};
use crate::kernel::quadrature::{
    converged, integrate_unit_square, regular_axis, CellSingularities, Coord, CornerSingularity, EdgeExponents,
    GaussLegendre, Side,
};

fn check_quadrature(quad: &QuadratureConfig) -> Result<GaussLegendre> {
    quad.validate()?;
    Ok(GaussLegendre::new(quad.order()))
}

fn j_with_rule(n: usize, i: usize, params: &ModelParams, quad: &QuadratureConfig, rule: &GaussLegendre) -> Result<f64> {
    if n < 2 || i < 1 || i >= n {
        return Err(Error::Index { index: i, horizon: n });
    }
    let a = params.alpha();
    let x0 = (i - 1) as f64;
    let u0 = (n - 1) as f64;
    let gap = (n - 1 - i) as f64;
    let sing = CellSingularities {
        x: EdgeExponents {
            lower: (i == 1).then_some(-a),
            upper: None,
        },
        y: EdgeExponents::default(),
        corner: (i == n - 1).then_some(CornerSingularity {
            x: Side::Upper,
            y: Side::Lower,
            exponent: a - 1.0,
        }),
    };
    // x in [i-1, i], u in [n-1, n]; the singular factor (u - x)^(a-1) sits at
    // x = i, u = n - 1 when the two intervals touch.
    let f = |cx: Coord, cy: Coord| {
        let x = x0 + cx.lo;
        let u = u0 + cy.lo;
        let d = gap + cx.hi + cy.lo;
        (a * (u / x).ln() + (a - 1.0) * d.ln()).exp()
    };
    let v = integrate_unit_square(f, &sing, rule, quad, || format!("j_{n}({i})"))?;
    Ok(params.sigma * params.c_h * v)
}

fn g_with_rule(n: usize, params: &ModelParams, quad: &QuadratureConfig, rule: &GaussLegendre) -> Result<f64> {
    if n < 1 {
        return Err(Error::Index { index: n, horizon: n });
    }
    let a = params.alpha();
    if n == 1 {
        return g_first(params, quad, rule);
    }
    let x0 = (n - 1) as f64;
    let sing = CellSingularities {
        x: EdgeExponents {
            lower: None,
            upper: Some(a),
        },
        y: EdgeExponents {
            lower: Some(a - 1.0),
            upper: None,
        },
        corner: None,
    };
    let f = |cx: Coord, cy: Coord| {
        let x = x0 + cx.lo;
        let w = cx.hi;
        let y = cy.lo;
        (a * ((w / x).ln() + (y * w + x).ln()) + (a - 1.0) * y.ln()).exp()
    };
    let v = integrate_unit_square(f, &sing, rule, quad, || format!("g_{n}"))?;
    Ok(params.sigma * params.c_h * v)
}

/// Panel counts of the tabulated rule for cells away from every singularity.
const FAST_LEVELS: [usize; 3] = [1, 2, 4];

/// Nodes of the plain tensor rule at each level of [`FAST_LEVELS`]. On a
/// regular cell the integrand factors as `x^(-a) u^a d^(a-1)` with
/// `d = gap + (i - x) + (u - n + 1)`, so the three factors can be tabulated
/// per `i`, per `n` and per gap.
struct RegularGrid {
    axes: Vec<Vec<(Coord, f64)>>,
    alpha: f64,
}

impl RegularGrid {
    fn new(rule: &GaussLegendre, quad: &QuadratureConfig, alpha: f64) -> Self {
        let axes = FAST_LEVELS
            .iter()
            .filter(|&&p| p <= quad.max_panels as usize)
            .map(|&p| regular_axis(rule, p))
            .collect();
        RegularGrid { axes, alpha }
    }

    /// `w x^(-a)` on `[i-1, i]`.
    fn x_weights(&self, i: usize) -> Vec<Vec<f64>> {
        let x0 = (i - 1) as f64;
        self.axes
            .iter()
            .map(|axis| axis.iter().map(|(c, w)| w * (-self.alpha * (x0 + c.lo).ln()).exp()).collect())
            .collect()
    }

    /// `w u^a` on `[n-1, n]`.
    fn u_weights(&self, n: usize) -> Vec<Vec<f64>> {
        let u0 = (n - 1) as f64;
        self.axes
            .iter()
            .map(|axis| axis.iter().map(|(c, w)| w * (self.alpha * (u0 + c.lo).ln()).exp()).collect())
            .collect()
    }

    fn gap_powers(&self, gap: usize) -> Vec<Vec<f64>> {
        let g = gap as f64;
        let e = self.alpha - 1.0;
        self.axes
            .iter()
            .map(|axis| {
                let mut out = Vec::with_capacity(axis.len() * axis.len());
                for (cx, _) in axis {
                    for (cy, _) in axis {
                        out.push((e * (g + cx.hi + cy.lo).ln()).exp());
                    }
                }
                out
            })
            .collect()
    }
}

fn regular_sum(xw: &[f64], uw: &[f64], d: &[f64]) -> f64 {
    xw.iter()
        .zip(d.chunks_exact(uw.len()))
        .map(|(wx, row)| wx * row.iter().zip(uw).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// `None` when the tabulated levels do not reach the tolerance.
fn regular_j(xw: &[Vec<f64>], uw: &[Vec<f64>], d: &[Vec<f64>], quad: &QuadratureConfig) -> Option<f64> {
    let mut prev = regular_sum(xw.first()?, &uw[0], &d[0]);
    for l in 1..xw.len() {
        let cur = regular_sum(&xw[l], &uw[l], &d[l]);
        if converged(prev, cur, quad) {
            return Some(cur);
        }
        prev = cur;
    }
    None
}

fn is_regular(n: usize, i: usize) -> bool {
    i > 1 && i + 1 < n
}

/// `g_1`: substituting `z = y (1 - x) + x` and then `x = z s` turns the
/// integral into `int int z^a s^(-a) (1 - s)^(a-1) ds dz`, whose
/// singularities all sit on edges.
fn g_first(params: &ModelParams, quad: &QuadratureConfig, rule: &GaussLegendre) -> Result<f64> {
    let a = params.alpha();
    let sing = CellSingularities {
        x: EdgeExponents {
            lower: Some(-a),
            upper: Some(a - 1.0),
        },
        y: EdgeExponents {
            lower: Some(a),
            upper: None,
        },
        corner: None,
    };
    let f = |cs: Coord, cz: Coord| (a * (cz.lo / cs.lo).ln() + (a - 1.0) * cs.hi.ln()).exp();
    let v = integrate_unit_square(f, &sing, rule, quad, || "g_1".to_string())?;
    Ok(params.sigma * params.c_h * v)
}

/// `j_n(i)`, the weight of `xi_i` in the increment `X_n`.
pub fn compute_j(n: usize, i: usize, params: &ModelParams, quad: &QuadratureConfig) -> Result<f64> {
    params.validate()?;
    let rule = check_quadrature(quad)?;
    if is_regular(n, i) {
        let grid = RegularGrid::new(&rule, quad, params.alpha());
        let xw = grid.x_weights(i);
        let uw = grid.u_weights(n);
        let d = grid.gap_powers(n - 1 - i);
        if let Some(v) = regular_j(&xw, &uw, &d, quad) {
            return Ok(params.sigma * params.c_h * v);
        }
    }
    j_with_rule(n, i, params, quad, &rule)
}

/// `g_n`, the weight of the current sign `xi_n` in `X_n`.
pub fn compute_g(n: usize, params: &ModelParams, quad: &QuadratureConfig) -> Result<f64> {
    params.validate()?;
    let rule = check_quadrature(quad)?;
    g_with_rule(n, params, quad, &rule)
}

/// All kernel weights up to a horizon `N`.
///
/// `g` holds `g_1..g_N`; `j` stores the rows `j_n(1..n-1)` for `n = 2..N`
/// back to back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub(crate) horizon: usize,
    pub(crate) params: ModelParams,
    pub(crate) quad: QuadratureConfig,
    pub(crate) g: Vec<f64>,
    pub(crate) j: Vec<f64>,
}

/// Offset of row `n` in the flattened `j` storage.
#[inline]
pub(crate) fn row_offset(n: usize) -> usize {
    (n - 2) * (n - 1) / 2
}

/// Number of stored `j` values for horizon `n`.
#[inline]
pub(crate) fn j_len(n: usize) -> usize {
    if n < 2 {
        0
    } else {
        (n - 1) * n / 2
    }
}

pub fn build_kernel_table(horizon: usize, params: &ModelParams, quad: &QuadratureConfig) -> Result<KernelTable> {
    if horizon < 2 {
        return Err(Error::domain(format!("kernel table needs N >= 2, got {horizon}")));
    }
    params.validate()?;
    let rule = check_quadrature(quad)?;
    // Rows are independent and each value is computed by the same sequence of
    // operations whichever thread runs it, so the result is bit-identical.
    let g = (1..=horizon)
        .into_par_iter()
        .map(|n| g_with_rule(n, params, quad, &rule))
        .collect::<Result<Vec<_>>>()?;
    let grid = RegularGrid::new(&rule, quad, params.alpha());
    let xw: Vec<_> = (0..horizon).into_par_iter().map(|i| if i >= 2 { grid.x_weights(i) } else { Vec::new() }).collect();
    let uw: Vec<_> = (0..=horizon).into_par_iter().map(|n| if n >= 4 { grid.u_weights(n) } else { Vec::new() }).collect();
    let dp: Vec<_> = (0..horizon).into_par_iter().map(|gap| if gap >= 1 { grid.gap_powers(gap) } else { Vec::new() }).collect();
    let scale = params.sigma * params.c_h;
    let rows = (2..horizon + 1)
        .into_par_iter()
        .map(|n| {
            (1..n)
                .map(|i| {
                    if is_regular(n, i) {
                        if let Some(v) = regular_j(&xw[i], &uw[n], &dp[n - 1 - i], quad) {
                            return Ok(scale * v);
                        }
                    }
                    j_with_rule(n, i, params, quad, &rule)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut j = Vec::with_capacity(j_len(horizon));
    for row in rows {
        j.extend(row);
    }
    Ok(KernelTable {
        horizon,
        params: *params,
        quad: *quad,
        g,
        j,
    })
}

impl KernelTable {
    pub(crate) fn from_parts(
        horizon: usize,
        params: ModelParams,
        quad: QuadratureConfig,
        g: Vec<f64>,
        j: Vec<f64>,
    ) -> Result<Self> {
        if g.len() != horizon {
            return Err(Error::LengthMismatch {
                what: "g row",
                expected: horizon,
                actual: g.len(),
            });
        }
        if j.len() != j_len(horizon) {
            return Err(Error::LengthMismatch {
                what: "j rows",
                expected: j_len(horizon),
                actual: j.len(),
            });
        }
        Ok(KernelTable {
            horizon,
            params,
            quad,
            g,
            j,
        })
    }

    /// The horizon `N`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn quad(&self) -> &QuadratureConfig {
        &self.quad
    }

    /// `g_n` for `1 <= n <= N`.
    #[inline]
    pub fn g(&self, n: usize) -> f64 {
        self.g[n - 1]
    }

    pub fn g_row(&self) -> &[f64] {
        &self.g
    }

    /// `j_n(i)` for `1 <= i < n <= N`.
    #[inline]
    pub fn j(&self, n: usize, i: usize) -> f64 {
        debug_assert!(i >= 1 && i < n && n <= self.horizon);
        self.j[row_offset(n) + i - 1]
    }

    /// `j_n(1..n-1)`; empty for `n = 1`.
    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        if n < 2 {
            return &[];
        }
        let off = row_offset(n);
        &self.j[off..off + n - 1]
    }

    pub fn j_flat(&self) -> &[f64] {
        &self.j
    }

    /// `j_n(i)` with zero outside `1 <= i < n`.
    #[inline]
    pub fn j_or_zero(&self, n: usize, i: usize) -> f64 {
        if i >= 1 && i < n && n <= self.horizon {
            self.j(n, i)
        } else {
            0.0
        }
    }

    /// The table for a smaller horizon. The weights do not depend on `N`, so
    /// this is a plain truncation.
    pub fn prefix(&self, horizon: usize) -> Result<KernelTable> {
        if horizon < 2 || horizon > self.horizon {
            return Err(Error::Index {
                index: horizon,
                horizon: self.horizon,
            });
        }
        Ok(KernelTable {
            horizon,
            params: self.params,
            quad: self.quad,
            g: self.g[..horizon].to_vec(),
            j: self.j[..j_len(horizon)].to_vec(),
        })
    }

    fn check_index(&self, k: usize, min: usize) -> Result<()> {
        if k < min || k > self.horizon {
            return Err(Error::Index {
                index: k,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// `E[Y_{k-1} Y_k] = sum_{i <= k-2} j_k(i) j_{k-1}(i)`.
    pub fn y_cross_expectation(&self, k: usize) -> Result<f64> {
        self.check_index(k, 2)?;
        let cur = self.row(k);
        let prev = self.row(k - 1);
        Ok(prev.iter().zip(cur).map(|(a, b)| a * b).sum())
    }

    /// `Var Y_k = sum_{i < k} j_k(i)^2`.
    pub fn y_variance(&self, k: usize) -> Result<f64> {
        self.check_index(k, 1)?;
        Ok(self.row(k).iter().map(|v| v * v).sum())
    }

    /// `sum_{i < n} j_n(i)`, the largest possible `|Y_n|`.
    pub fn y_bound(&self, n: usize) -> f64 {
        self.row(n).iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn small_table_shape() {
        let p = ModelParams::with_hurst(0.75).unwrap();
        let t = build_kernel_table(2, &p, &quad()).unwrap();
        assert_eq!(t.g_row().len(), 2);
        assert_eq!(t.j_flat().len(), 1);
        assert!(t.j(2, 1) > 0.0);
        assert!(build_kernel_table(1, &p, &quad()).is_err());
    }

    #[test]
    fn table_matches_pointwise_calls() {
        let p = ModelParams::with_hurst(0.7).unwrap();
        let t = build_kernel_table(9, &p, &quad()).unwrap();
        for n in 2..=9 {
            assert_eq!(t.g(n), compute_g(n, &p, &quad()).unwrap());
            for i in 1..n {
                assert_eq!(t.j(n, i), compute_j(n, i, &p, &quad()).unwrap());
            }
        }
        let pre = t.prefix(5).unwrap();
        assert_eq!(pre, build_kernel_table(5, &p, &quad()).unwrap());
    }

    #[test]
    fn g_sandwich_small_n() {
        for hurst in [0.6, 0.75, 0.9] {
            let p = ModelParams::with_hurst(hurst).unwrap();
            let g = p.g();
            for n in [2usize, 3, 8, 64] {
                let gn = compute_g(n, &p, &quad()).unwrap();
                let upper = g * (1.0 + 1.0 / (n as f64 - 1.0)).powf(hurst - 0.5);
                assert!(gn >= g * (1.0 - 1e-9) && gn <= upper * (1.0 + 1e-9), "H={hurst} n={n} gn={gn} g={g}");
            }
        }
    }

    #[test]
    fn first_diagonal_weight_closed_form() {
        // g_1 = sigma cH Gamma(a) Gamma(1 - a) / (a + 1)
        for hurst in [0.55, 0.75, 0.9] {
            let p = ModelParams::with_hurst(hurst).unwrap();
            let a = p.alpha();
            let exact = std::f64::consts::PI / ((a + 1.0) * (std::f64::consts::PI * a).sin());
            let g1 = compute_g(1, &p, &quad()).unwrap();
            assert!((g1 / exact - 1.0).abs() < 1e-9, "H={hurst} {g1} vs {exact}");
        }
    }

    #[test]
    fn diagonal_limit() {
        // j_n(n-1) -> g (2^{H+1/2} - 2)
        let p = ModelParams::with_hurst(0.75).unwrap();
        let lim = p.g() * (2f64.powf(1.25) - 2.0);
        let j = compute_j(2000, 1999, &p, &quad()).unwrap();
        assert!((j / lim - 1.0).abs() < 1e-3, "{j} vs {lim}");
    }

    #[test]
    fn index_errors() {
        let p = ModelParams::with_hurst(0.75).unwrap();
        assert!(compute_j(3, 3, &p, &quad()).is_err());
        assert!(compute_j(3, 0, &p, &quad()).is_err());
        assert!(compute_g(0, &p, &quad()).is_err());
        let t = build_kernel_table(4, &p, &quad()).unwrap();
        assert!(t.y_cross_expectation(5).is_err());
        assert!(t.y_variance(0).is_err());
        assert_eq!(t.y_cross_expectation(2).unwrap(), 0.0);
        assert_eq!(t.y_variance(1).unwrap(), 0.0);
    }
}
