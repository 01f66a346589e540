//! The base strategy, its four-term decomposition, the stopped and scaled
//! strategies and the deterministic schedules that drive them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelTable, ModelParams};
use crate::ledger::{friction_decomposition, gains, run_ledger, FrictionDecomposition, LedgerResult, Positions};
use crate::market::MarketPath;
use crate::report::{fmt_float, fmt_index};

/// Stock holdings `phi_k = N^{H-1} X_k / S_k`, with `phi_{-1} = phi_0 = 0`.
pub fn base_positions(path: &MarketPath, params: &ModelParams) -> Positions {
    let n = path.horizon();
    let scale = (n as f64).powf(params.hurst - 1.0);
    let mut values = Vec::with_capacity(n + 2);
    values.push(0.0);
    for k in 0..=n {
        values.push(scale * path.x_at(k) / path.s_at(k));
    }
    Positions::new(values).expect("at least two entries")
}

/// `theta[i][k]` and the prefix sums `sums[i][k]` for `k = 0..N`; index 0
/// and the `k = 1` terms are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaDecomposition {
    pub theta: [Vec<f64>; 4],
    pub sums: [Vec<f64>; 4],
}

impl ThetaDecomposition {
    pub fn horizon(&self) -> usize {
        self.theta[0].len() - 1
    }

    /// `S^{(1)}_n + ... + S^{(4)}_n`.
    pub fn total(&self, n: usize) -> f64 {
        self.sums.iter().map(|s| s[n]).sum()
    }

    /// `S^{(i)}_n` for `i = 1..4`.
    #[inline]
    pub fn s(&self, i: usize, n: usize) -> f64 {
        self.sums[i - 1][n]
    }
}

/// Splits `X_{k-1} X_k` into `g_{k-1} g_k xi_{k-1} xi_k`, `g_k xi_k Y_{k-1}`,
/// `g_{k-1} xi_{k-1} Y_k` and `Y_{k-1} Y_k`.
pub fn theta_decomposition(path: &MarketPath, table: &KernelTable) -> Result<ThetaDecomposition> {
    let n = path.horizon();
    if n != table.horizon() {
        return Err(Error::LengthMismatch {
            what: "path vs kernel horizon",
            expected: table.horizon(),
            actual: n,
        });
    }
    let mut theta: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n + 1]);
    for k in 2..=n {
        let (g0, g1) = (table.g(k - 1), table.g(k));
        let (x0, x1) = (path.signs.xi(k - 1), path.signs.xi(k));
        let (y0, y1) = (path.y_at(k - 1), path.y_at(k));
        theta[0][k] = g0 * g1 * x0 * x1;
        theta[1][k] = g1 * x1 * y0;
        theta[2][k] = g0 * x0 * y1;
        theta[3][k] = y0 * y1;
    }
    let sums = std::array::from_fn(|i| {
        let mut acc = 0.0;
        theta[i]
            .iter()
            .map(|t| {
                acc += t;
                acc
            })
            .collect()
    });
    Ok(ThetaDecomposition { theta, sums })
}

/// Deterministic per-horizon constants of the stopped strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    pub horizon: usize,
    pub hurst: f64,
    pub theta: f64,
    pub kappa: f64,
    pub eps_multiplier: f64,
    /// `eps_multiplier * ln N / N^{min(1/2, 2 - 2H)}`
    pub eps: f64,
    /// `max_{2<=n<=N} [g_{n-1} g_n + g_n sum_{l<=n-2} j_{n-1}(l)]`
    pub b12: f64,
    pub c_hat: f64,
    pub c: f64,
    /// Profit target `theta / (2 c)`.
    pub big_c: f64,
    pub lambda: f64,
}

/// Exponent `min(2H - 1/4, H + 1/2)` of the transaction cost schedule.
pub fn friction_exponent(hurst: f64) -> f64 {
    (2.0 * hurst - 0.25).min(hurst + 0.5)
}

pub fn make_schedules(table: &KernelTable, theta: f64, kappa: f64, eps_multiplier: f64) -> Result<Schedules> {
    let n = table.horizon();
    if n < 3 {
        return Err(Error::domain(format!("schedules need N >= 3, got {n}")));
    }
    for (name, v) in [("theta", theta), ("kappa", kappa), ("epsilon multiplier", eps_multiplier)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let hurst = table.params().hurst;
    let nf = n as f64;
    let ln = nf.ln();
    let eps = eps_multiplier * ln / nf.powf(0.5f64.min(2.0 - 2.0 * hurst));
    let b12 = (2..=n)
        .map(|k| table.g(k - 1) * table.g(k) + table.g(k) * table.y_bound(k - 1))
        .fold(0.0, f64::max);
    let c_hat = 4.0 * eps + b12 / nf;
    let c = c_hat.sqrt();
    let lambda = kappa * nf.powf(-friction_exponent(hurst)) / ln.sqrt();
    let s = Schedules {
        horizon: n,
        hurst,
        theta,
        kappa,
        eps_multiplier,
        eps,
        b12,
        c_hat,
        c,
        big_c: theta / (2.0 * c),
        lambda,
    };
    if !(s.big_c.is_finite() && s.lambda > 0.0 && s.lambda < 1.0) {
        return Err(Error::Degenerate(format!("schedules out of range at N = {n}: {s:?}")));
    }
    Ok(s)
}

/// First-passage indices of `S^{(i)}/N` below `-eps`, and their combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingReport {
    pub t: [Option<usize>; 4],
    /// `min(T1, T2, T3 - 1, T4 - 1)`; `Some(0)` means the strategy never
    /// trades.
    pub t_n: Option<usize>,
}

impl StoppingReport {
    pub fn stopped(&self) -> bool {
        self.t_n.is_some()
    }
}

/// `S_k / N < -eps`, the breach test shared by the scan and its checks.
#[inline]
pub fn breaches(s: f64, horizon: usize, eps: f64) -> bool {
    s / (horizon as f64) < -eps
}

pub fn stopping_times(decomp: &ThetaDecomposition, eps: f64) -> Result<StoppingReport> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("eps must be positive, got {eps}")));
    }
    let n = decomp.horizon();
    let t: [Option<usize>; 4] = std::array::from_fn(|i| (1..=n).find(|&k| breaches(decomp.sums[i][k], n, eps)));
    let t_n = [t[0], t[1], t[2].map(|v| v - 1), t[3].map(|v| v - 1)].into_iter().flatten().min();
    Ok(StoppingReport { t, t_n })
}

/// Checks by direct scan that every `T_i` is the first breach and that
/// `T_N` is the stated combination.
pub fn verify_first_passage(decomp: &ThetaDecomposition, eps: f64, report: &StoppingReport) -> bool {
    let n = decomp.horizon();
    let each = (0..4).all(|i| {
        let s = &decomp.sums[i];
        let end = report.t[i].unwrap_or(n + 1);
        let clean = (1..end.min(n + 1)).all(|k| !breaches(s[k], n, eps));
        clean && report.t[i].is_none_or(|t| t >= 1 && t <= n && breaches(s[t], n, eps))
    });
    let shifted = [report.t[0], report.t[1], report.t[2].map(|v| v - 1), report.t[3].map(|v| v - 1)];
    let combined = shifted.iter().flatten().min().copied() == report.t_n;
    each && combined
}

/// `phi_k 1{k < T_N}`.
pub fn stopped_positions(base: &Positions, stop: &StoppingReport) -> Positions {
    let n = base.horizon();
    let until = stop.t_n.unwrap_or(n + 1);
    let mut values = base.as_slice().to_vec();
    for k in until..=n {
        values[k + 1] = 0.0;
    }
    Positions::new(values).expect("same length as base")
}

/// `phi_hat / c_N`.
pub fn scaled_positions(stopped: &Positions, schedules: &Schedules) -> Positions {
    Positions::new(stopped.as_slice().iter().map(|v| v / schedules.c).collect()).expect("same length")
}

/// The scaled strategy run with costs `lambda_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionRun {
    pub lambda: f64,
    /// Bookkeeping and cost split of `psi` at `lambda_N`.
    pub ledger: LedgerResult,
    /// Cost split of the unscaled stopped strategy at the same `lambda_N`.
    pub stopped: FrictionDecomposition,
}

impl FrictionRun {
    /// `max_n |Vs1_n|` of `psi`.
    pub fn max_abs_vs1(&self) -> f64 {
        self.ledger.friction.vs1.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_n |Vs1_n|` of the stopped strategy.
    pub fn max_abs_vs1_stopped(&self) -> f64 {
        self.stopped.vs1.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max_n (Vs1_n + Vs2_n + Vs3_n)` of the stopped strategy.
    pub fn max_penalty_stopped(&self) -> f64 {
        (0..self.stopped.vs1.len()).map(|n| self.stopped.penalty(n)).fold(0.0, f64::max)
    }
}

pub fn friction_run(path: &MarketPath, stopped: &Positions, psi: &Positions, lambda: f64) -> Result<FrictionRun> {
    Ok(FrictionRun {
        lambda,
        ledger: run_ledger(psi, &path.s, lambda)?,
        stopped: friction_decomposition(stopped, &path.s, lambda)?,
    })
}

/// Every intermediate of the strategy pipeline on one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRun {
    pub decomposition: ThetaDecomposition,
    pub stopping: StoppingReport,
    pub phi: Positions,
    pub phi_hat: Positions,
    pub psi: Positions,
    /// `V_n(phi)`, `n = 0..N`.
    pub v_phi: Vec<f64>,
    pub v_phi_hat: Vec<f64>,
    pub v_psi: Vec<f64>,
    pub friction: FrictionRun,
}

impl PathRun {
    pub fn horizon(&self) -> usize {
        self.v_phi.len() - 1
    }

    /// `max_n |N V_n(phi) - sum_i S^{(i)}_n|`, relative as in
    /// [`crate::ledger::close`].
    pub fn decomposition_error(&self) -> f64 {
        let nf = self.horizon() as f64;
        self.v_phi
            .iter()
            .enumerate()
            .map(|(n, v)| {
                let a = nf * v;
                let b = self.decomposition.total(n);
                (a - b).abs() / a.abs().max(b.abs()).max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// `max_n |V_n(phi_hat) - V_{n ^ T_N}(phi)|`.
    pub fn stopping_error(&self) -> f64 {
        let n = self.horizon();
        let t = self.stopping.t_n.unwrap_or(n);
        self.v_phi_hat
            .iter()
            .enumerate()
            .map(|(k, v)| (v - self.v_phi[k.min(t)]).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_v_psi(&self) -> f64 {
        self.v_psi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_v_phi_hat(&self) -> f64 {
        self.v_phi_hat.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `V_N^{lambda_N}(psi(lambda_N))`.
    pub fn v_psi_lambda(&self) -> f64 {
        *self.friction.ledger.value.last().expect("nonempty")
    }
}

pub fn run_path(path: &MarketPath, table: &KernelTable, schedules: &Schedules) -> Result<PathRun> {
    if schedules.horizon != path.horizon() {
        return Err(Error::LengthMismatch {
            what: "schedules vs path horizon",
            expected: schedules.horizon,
            actual: path.horizon(),
        });
    }
    let decomposition = theta_decomposition(path, table)?;
    let stopping = stopping_times(&decomposition, schedules.eps)?;
    let phi = base_positions(path, table.params());
    let phi_hat = stopped_positions(&phi, &stopping);
    let psi = scaled_positions(&phi_hat, schedules);
    let v_phi = gains(&phi, &path.s)?;
    let v_phi_hat = gains(&phi_hat, &path.s)?;
    let v_psi = gains(&psi, &path.s)?;
    let friction = friction_run(path, &phi_hat, &psi, schedules.lambda)?;
    Ok(PathRun {
        decomposition,
        stopping,
        phi,
        phi_hat,
        psi,
        v_phi,
        v_phi_hat,
        v_psi,
        friction,
    })
}

pub const EXPERIMENT_HEADER: &str = "N,H,path_index,T1,T2,T3,T4,TN,V_phi,V_psi,minV_psi,V_psi_lambda,lambda_N,c_N,C_N";

/// One line of the experiment CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub horizon: usize,
    pub hurst: f64,
    pub path_index: u64,
    pub t: [Option<usize>; 4],
    pub t_n: Option<usize>,
    pub v_phi: f64,
    pub v_psi: f64,
    pub min_v_psi: f64,
    pub v_psi_lambda: f64,
    pub lambda: f64,
    pub c: f64,
    pub big_c: f64,
}

impl ExperimentRow {
    pub fn new(path_index: u64, run: &PathRun, s: &Schedules) -> Self {
        ExperimentRow {
            horizon: s.horizon,
            hurst: s.hurst,
            path_index,
            t: run.stopping.t,
            t_n: run.stopping.t_n,
            v_phi: *run.v_phi.last().expect("nonempty"),
            v_psi: *run.v_psi.last().expect("nonempty"),
            min_v_psi: run.min_v_psi(),
            v_psi_lambda: run.v_psi_lambda(),
            lambda: s.lambda,
            c: s.c,
            big_c: s.big_c,
        }
    }

    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.horizon,
            fmt_float(self.hurst),
            self.path_index,
            fmt_index(self.t[0]),
            fmt_index(self.t[1]),
            fmt_index(self.t[2]),
            fmt_index(self.t[3]),
            fmt_index(self.t_n),
            fmt_float(self.v_phi),
            fmt_float(self.v_psi),
            fmt_float(self.min_v_psi),
            fmt_float(self.v_psi_lambda),
            fmt_float(self.lambda),
            fmt_float(self.c),
            fmt_float(self.big_c),
        )
    }
}
