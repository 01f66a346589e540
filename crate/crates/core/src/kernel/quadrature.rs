//! Panel-doubling Gauss-Legendre quadrature on the unit square, with
//! power substitutions for integrable edge singularities and a Duffy
//! transform for a corner singularity of the form `(p + q)^beta`.
//!
//! The integrand receives each coordinate as a [`Coord`], i.e. as its
//! distances from both edges of the cell. Distances to a singular edge are
//! produced directly by the substitution, so they keep full relative
//! precision even when they are tiny.

use crate::error::{Error, Result};
use crate::kernel::params::QuadratureConfig;

/// A point of `[0, 1]` given by its distance from each end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coord {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

/// Exponents `alpha > -1` of integrable singularities `dist^alpha` at the
/// ends of one axis.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EdgeExponents {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// Singularity `(p + q)^exponent` at one vertex of the unit square, where
/// `p`, `q` are the distances from that vertex along each axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerSingularity {
    pub x: Side,
    pub y: Side,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellSingularities {
    pub x: EdgeExponents,
    pub y: EdgeExponents,
    pub corner: Option<CornerSingularity>,
}

/// Gauss-Legendre rule mapped to `[0, 1]`. Nodes are stored together with
/// their complements so that `1 - t` is exact.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    lo: Vec<f64>,
    hi: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let mut z = vec![0.0; order];
        let mut w = vec![0.0; order];
        let m = order.div_ceil(2);
        for k in 0..m {
            // Newton iteration on P_order from the Chebyshev-like guess.
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (order as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            if d != 0.0 {
                dp = d;
            }
            let weight = 2.0 / ((1.0 - x * x) * dp * dp);
            // x is the k-th largest root; mirror it exactly.
            z[k] = -x;
            z[order - 1 - k] = x;
            w[k] = weight;
            w[order - 1 - k] = weight;
        }
        if order % 2 == 1 {
            z[order / 2] = 0.0;
        }
        GaussLegendre {
            lo: z.iter().map(|&x| 0.5 * (1.0 + x)).collect(),
            hi: z.iter().map(|&x| 0.5 * (1.0 - x)).collect(),
            weights: w.iter().map(|&x| 0.5 * x).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.weights.len()
    }

    /// Nodes on `[0, 1]`.
    pub fn nodes(&self) -> &[f64] {
        &self.lo
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// One-dimensional integral of `f` over `[a, b]` with this rule.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let w = b - a;
        let mut acc = 0.0;
        for (t, wt) in self.lo.iter().zip(&self.weights) {
            acc += wt * f(a + w * t);
        }
        acc * w
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `f` over the unit square to the configured tolerance.
///
/// Axes with singular factors at both ends, or with an edge singularity
/// opposite a singular corner, are split at `1/2`. On each resulting
/// sub-cell the singular edge (or corner) is removed by a power map applied
/// to the whole sub-cell, and the mapped, now smooth, integrand is summed
/// with `P x P` tensor Gauss-Legendre panels, `P = 1, 2, 4, ...`, until two
/// successive totals agree. A sub-cell at a singular corner only treats the
/// corner.
pub fn integrate_unit_square<F>(
    f: F,
    sing: &CellSingularities,
    rule: &GaussLegendre,
    cfg: &QuadratureConfig,
    what: impl FnOnce() -> String,
) -> Result<f64>
where
    F: Fn(Coord, Coord) -> f64,
{
    let cells = sub_cells(sing);
    let total = |panels: usize| cells.iter().map(|c| c.sum(&f, rule, panels)).sum::<f64>();
    let mut prev = total(1);
    let mut panels = 2usize;
    let mut last_change = f64::INFINITY;
    while panels <= cfg.max_panels as usize {
        let cur = total(panels);
        last_change = (cur - prev).abs();
        if converged(prev, cur, cfg) {
            return Ok(cur);
        }
        prev = cur;
        panels *= 2;
    }
    Err(Error::Quadrature {
        what: what(),
        panels: panels / 2,
        last_change,
    })
}

/// Exponent `k` of the map `d = t^k` for a factor `d^(e-1)`: the smallest
/// `k >= MIN_GRADING` with `k e` an integer. The Jacobian then turns the
/// singular factor into an integer power of `t`, and the remaining smooth
/// factors become `C^k` functions of `t`.
fn grading(e: f64) -> f64 {
    (MIN_GRADING * e).ceil().max(1.0) / e
}

const MIN_GRADING: f64 = 3.0;

/// Stopping rule shared by every panel-doubling loop.
#[inline]
pub(crate) fn converged(prev: f64, cur: f64, cfg: &QuadratureConfig) -> bool {
    (cur - prev).abs() <= (cfg.rel_tol * cur.abs()).max(cfg.abs_tol)
}

/// `[start, start + len]` along one axis, possibly with a singular end.
#[derive(Debug, Clone, Copy)]
struct Segment {
    start: f64,
    len: f64,
    /// Singular end of the segment, with the exponent of the factor there.
    singular: Option<(Side, f64)>,
}

#[derive(Debug, Clone, Copy)]
enum SubCell {
    Tensor(Segment, Segment),
    Corner {
        x: Segment,
        y: Segment,
        corner: CornerSingularity,
    },
}

fn axis_segments(edges: &EdgeExponents, split: bool) -> Vec<Segment> {
    if split {
        vec![
            Segment {
                start: 0.0,
                len: 0.5,
                singular: edges.lower.map(|e| (Side::Lower, e)),
            },
            Segment {
                start: 0.5,
                len: 0.5,
                singular: edges.upper.map(|e| (Side::Upper, e)),
            },
        ]
    } else {
        let singular = match (edges.lower, edges.upper) {
            (Some(e), _) => Some((Side::Lower, e)),
            (None, Some(e)) => Some((Side::Upper, e)),
            (None, None) => None,
        };
        vec![Segment {
            start: 0.0,
            len: 1.0,
            singular,
        }]
    }
}

fn touches(seg: &Segment, side: Side) -> bool {
    match side {
        Side::Lower => seg.start == 0.0,
        Side::Upper => seg.start + seg.len == 1.0,
    }
}

fn opposite(side: Side, edges: &EdgeExponents) -> bool {
    match side {
        Side::Lower => edges.upper.is_some(),
        Side::Upper => edges.lower.is_some(),
    }
}

fn sub_cells(sing: &CellSingularities) -> Vec<SubCell> {
    let both = |e: &EdgeExponents| e.lower.is_some() && e.upper.is_some();
    let split_x = both(&sing.x) || sing.corner.is_some_and(|c| opposite(c.x, &sing.x));
    let split_y = both(&sing.y) || sing.corner.is_some_and(|c| opposite(c.y, &sing.y));
    let xs = axis_segments(&sing.x, split_x);
    let ys = axis_segments(&sing.y, split_y);
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for x in &xs {
        for y in &ys {
            match sing.corner {
                Some(c) if touches(x, c.x) && touches(y, c.y) => out.push(SubCell::Corner {
                    x: *x,
                    y: *y,
                    corner: c,
                }),
                _ => out.push(SubCell::Tensor(*x, *y)),
            }
        }
    }
    out
}

/// A point of `[0, 1]` given by both distances, in a mapped variable.
#[derive(Clone, Copy)]
struct Unit {
    lo: f64,
    hi: f64,
}

impl Unit {
    /// `t^k` and `1 - t^k`, both to full relative precision.
    fn power(self, k: f64) -> Unit {
        let ln = if self.lo < 0.5 { self.lo.ln() } else { (-self.hi).ln_1p() };
        Unit {
            lo: (k * ln).exp(),
            hi: -(k * ln).exp_m1(),
        }
    }

    /// Jacobian `k t^(k-1)` of [`Unit::power`].
    fn power_jacobian(self, k: f64) -> f64 {
        let ln = if self.lo < 0.5 { self.lo.ln() } else { (-self.hi).ln_1p() };
        k * ((k - 1.0) * ln).exp()
    }
}

/// Position `start + len * u` of a segment as a [`Coord`] of the full axis.
fn place(seg: &Segment, u: Unit) -> Coord {
    Coord {
        lo: seg.start + seg.len * u.lo,
        hi: (1.0 - seg.start - seg.len) + seg.len * u.hi,
    }
}

/// Point at distance `seg.len * d` (with `1 - d` given as `rest`) from the
/// given end of the segment.
fn from_side(seg: &Segment, side: Side, d: Unit) -> Coord {
    match side {
        Side::Lower => place(seg, d),
        Side::Upper => place(seg, Unit { lo: d.hi, hi: d.lo }),
    }
}

/// Nodes of panel `p` out of `panels` on `[0, 1]`.
fn panel_units(rule: &GaussLegendre, p: usize, panels: usize, out: &mut Vec<(Unit, f64)>) {
    out.clear();
    let w = 1.0 / panels as f64;
    let below = p as f64 * w;
    let above = (panels - 1 - p) as f64 * w;
    for ((t, tc), wt) in rule.lo.iter().zip(&rule.hi).zip(&rule.weights) {
        out.push((
            Unit {
                lo: below + w * t,
                hi: above + w * tc,
            },
            wt * w,
        ));
    }
}

/// Mapped nodes of one segment panel.
fn segment_nodes(seg: &Segment, units: &[(Unit, f64)], out: &mut Vec<(Coord, f64)>) {
    out.clear();
    match seg.singular {
        None => out.extend(units.iter().map(|&(u, w)| (place(seg, u), w * seg.len))),
        Some((side, alpha)) => {
            let k = grading(alpha + 1.0);
            out.extend(units.iter().map(|&(u, w)| {
                let d = u.power(k);
                (from_side(seg, side, d), w * seg.len * u.power_jacobian(k))
            }));
        }
    }
}

impl SubCell {
    fn sum<F>(&self, f: &F, rule: &GaussLegendre, panels: usize) -> f64
    where
        F: Fn(Coord, Coord) -> f64,
    {
        match self {
            SubCell::Tensor(x, y) => tensor_sum(f, x, y, rule, panels),
            SubCell::Corner { x, y, corner } => corner_sum(f, x, y, corner, rule, panels),
        }
    }
}

fn tensor_sum<F>(f: &F, x: &Segment, y: &Segment, rule: &GaussLegendre, panels: usize) -> f64
where
    F: Fn(Coord, Coord) -> f64,
{
    let mut units = Vec::with_capacity(rule.order());
    let mut xs = Vec::with_capacity(rule.order());
    let mut ys = Vec::with_capacity(rule.order());
    let mut total = 0.0;
    for px in 0..panels {
        panel_units(rule, px, panels, &mut units);
        segment_nodes(x, &units, &mut xs);
        for py in 0..panels {
            panel_units(rule, py, panels, &mut units);
            segment_nodes(y, &units, &mut ys);
            let mut acc = 0.0;
            for &(cx, wx) in &xs {
                let mut row = 0.0;
                for &(cy, wy) in &ys {
                    row += wy * f(cx, cy);
                }
                acc += wx * row;
            }
            total += acc;
        }
    }
    total
}

/// Duffy split of the sub-cell into the two triangles meeting at the
/// singular corner, with radius `r = t^k` and angle-like `s` in `[0, 1]`.
fn corner_sum<F>(
    f: &F,
    x: &Segment,
    y: &Segment,
    corner: &CornerSingularity,
    rule: &GaussLegendre,
    panels: usize,
) -> f64
where
    F: Fn(Coord, Coord) -> f64,
{
    let k = grading(corner.exponent + 2.0);
    let mut ts = Vec::with_capacity(rule.order());
    let mut ss = Vec::with_capacity(rule.order());
    let mut total = 0.0;
    for pt in 0..panels {
        panel_units(rule, pt, panels, &mut ts);
        for ps in 0..panels {
            panel_units(rule, ps, panels, &mut ss);
            let mut acc = 0.0;
            for &(t, wt) in &ts {
                let r = t.power(k);
                // area element r dr ds of the triangle map, dr = k t^(k-1) dt
                let jac = wt * x.len * y.len * r.lo * t.power_jacobian(k);
                let mut inner = 0.0;
                for &(s, ws) in &ss {
                    let rs = Unit {
                        lo: r.lo * s.lo,
                        hi: r.hi + r.lo * s.hi,
                    };
                    let a = f(from_side(x, corner.x, r), from_side(y, corner.y, rs));
                    let b = f(from_side(x, corner.x, rs), from_side(y, corner.y, r));
                    inner += ws * (a + b);
                }
                acc += jac * inner;
            }
            total += acc;
        }
    }
    total
}

/// All nodes of the plain rule with `panels` panels on `[0, 1]`, in panel
/// order, with their weights.
pub(crate) fn regular_axis(rule: &GaussLegendre, panels: usize) -> Vec<(Coord, f64)> {
    let seg = Segment {
        start: 0.0,
        len: 1.0,
        singular: None,
    };
    let mut all = Vec::with_capacity(panels * rule.order());
    let mut units = Vec::with_capacity(rule.order());
    let mut one = Vec::with_capacity(rule.order());
    for p in 0..panels {
        panel_units(rule, p, panels, &mut units);
        segment_nodes(&seg, &units, &mut one);
        all.extend_from_slice(&one);
    }
    all
}
