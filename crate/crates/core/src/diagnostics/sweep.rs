//! Monte Carlo sweep over horizons and the reports derived from it.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact;
use super::fit::{rate_fit, RateFit};
use crate::arbitrage::{make_schedules, run_path, verify_first_passage, ExperimentRow, Schedules};
use crate::error::{Error, Result};
use crate::kernel::{theta_limit, KernelTable, ModelParams, ThetaLimit};
use crate::market::simulate_batch;
use crate::stats::Estimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub params: ModelParams,
    pub n_list: Vec<usize>,
    pub paths_per_n: usize,
    pub master_seed: u64,
    pub epsilon_multiplier: f64,
    pub kappa: f64,
    pub tail_tol: f64,
}

impl McConfig {
    pub fn new(params: ModelParams, n_list: Vec<usize>, paths_per_n: usize, master_seed: u64) -> Self {
        McConfig {
            params,
            n_list,
            paths_per_n,
            master_seed,
            epsilon_multiplier: 1.0,
            kappa: 1.0,
            tail_tol: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_list.is_empty() {
            return Err(Error::domain("the horizon list is empty"));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain(format!("horizons must increase strictly: {:?}", self.n_list)));
        }
        if self.n_list[0] < 8 {
            return Err(Error::domain(format!("horizons must be at least 8, got {}", self.n_list[0])));
        }
        if self.paths_per_n < 100 {
            return Err(Error::domain(format!("need at least 100 paths per horizon, got {}", self.paths_per_n)));
        }
        for (name, v) in [
            ("epsilon multiplier", self.epsilon_multiplier),
            ("kappa", self.kappa),
            ("tail tolerance", self.tail_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn max_horizon(&self) -> usize {
        self.n_list.last().copied().unwrap_or(0)
    }
}

/// Per-path summary kept by the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub row: ExperimentRow,
    /// `S^{(i)}_N / N`.
    pub s_over_n: [f64; 4],
    pub min_v_phi_hat: f64,
    /// `max_n |S^{(4)}_n - E S^{(4)}_n|^2`.
    pub sup_s_star_sq: f64,
    /// `max_n |S^{(1)}_n| / N`.
    pub sup_s1_over_n: f64,
    pub max_abs_vs1: f64,
    pub max_abs_vs1_stopped: f64,
    pub max_penalty_stopped: f64,
    pub friction_identity_error: f64,
    pub decomposition_error: f64,
    pub stopping_error: f64,
    pub first_passage_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonRun {
    pub schedules: Schedules,
    pub records: Vec<PathRecord>,
}

impl HorizonRun {
    pub fn horizon(&self) -> usize {
        self.schedules.horizon
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", crate::arbitrage::EXPERIMENT_HEADER)?;
        for r in &self.records {
            r.row.write(&mut w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub config: McConfig,
    pub theta: ThetaLimit,
    pub runs: Vec<HorizonRun>,
}

const BLOCK: usize = 16;

fn record_block(
    table: &KernelTable,
    schedules: &Schedules,
    mean_s4: &[f64],
    seed: u64,
    first: u64,
    count: usize,
) -> Result<Vec<PathRecord>> {
    let n = table.horizon();
    let nf = n as f64;
    simulate_batch(table, seed, first, count)?
        .iter()
        .enumerate()
        .map(|(j, path)| {
            let run = run_path(path, table, schedules)?;
            let d = &run.decomposition;
            let sup_s_star_sq = (1..=n).map(|k| (d.sums[3][k] - mean_s4[k]).powi(2)).fold(0.0, f64::max);
            let sup_s1_over_n = (1..=n).map(|k| d.sums[0][k].abs() / nf).fold(0.0, f64::max);
            Ok(PathRecord {
                row: ExperimentRow::new(first + j as u64, &run, schedules),
                s_over_n: std::array::from_fn(|i| d.sums[i][n] / nf),
                min_v_phi_hat: run.min_v_phi_hat(),
                sup_s_star_sq,
                sup_s1_over_n,
                max_abs_vs1: run.friction.max_abs_vs1(),
                max_abs_vs1_stopped: run.friction.max_abs_vs1_stopped(),
                max_penalty_stopped: run.friction.max_penalty_stopped(),
                friction_identity_error: run.friction.ledger.identity_error(),
                decomposition_error: run.decomposition_error(),
                stopping_error: run.stopping_error(),
                first_passage_ok: verify_first_passage(d, schedules.eps, &run.stopping),
            })
        })
        .collect()
}

/// Runs paths `0..paths_per_n` of `master_seed` at every horizon. `table`
/// must reach the largest horizon; smaller ones use its prefix.
pub fn run_sweep(config: &McConfig, table: &KernelTable) -> Result<Sweep> {
    config.validate()?;
    if table.params() != &config.params {
        return Err(Error::domain("kernel table parameters differ from the sweep configuration"));
    }
    if table.horizon() < config.max_horizon() {
        return Err(Error::Index {
            index: config.max_horizon(),
            horizon: table.horizon(),
        });
    }
    let theta = theta_limit(&config.params, config.tail_tol)?;
    let mut runs = Vec::with_capacity(config.n_list.len());
    for &n in &config.n_list {
        let t = table.prefix(n)?;
        let schedules = make_schedules(&t, theta.theta, config.kappa, config.epsilon_multiplier)?;
        let mean_s4 = exact::expected_s4(&t);
        let blocks = config.paths_per_n.div_ceil(BLOCK);
        let records: Vec<Vec<PathRecord>> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let first = b * BLOCK;
                let count = BLOCK.min(config.paths_per_n - first);
                record_block(&t, &schedules, &mean_s4, config.master_seed, first as u64, count)
            })
            .collect::<Result<_>>()?;
        runs.push(HorizonRun {
            schedules,
            records: records.into_iter().flatten().collect(),
        });
    }
    Ok(Sweep {
        config: config.clone(),
        theta,
        runs,
    })
}

fn estimate<F: Fn(&PathRecord) -> f64>(run: &HorizonRun, f: F) -> Estimate {
    let xs: Vec<f64> = run.records.iter().map(f).collect();
    Estimate::from_samples(&xs)
}

fn proportion<F: Fn(&PathRecord) -> bool>(run: &HorizonRun, f: F) -> Estimate {
    Estimate::proportion(run.records.iter().map(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnRow {
    pub horizon: usize,
    /// `S^{(i)}_N / N`.
    pub terms: [Estimate; 4],
    /// `0, 0, g^2 (2^{H+1/2} - 2)` and the limit of the fourth term.
    pub targets: [f64; 4],
    pub v_phi: Estimate,
    pub theta: f64,
    /// `|mean V_N(phi) - theta|`
    pub error: f64,
}

pub fn lln_report(sweep: &Sweep) -> Vec<LlnRow> {
    let th = &sweep.theta;
    sweep
        .runs
        .iter()
        .map(|run| {
            let v_phi = estimate(run, |r| r.row.v_phi);
            LlnRow {
                horizon: run.horizon(),
                terms: std::array::from_fn(|i| estimate(run, |r| r.s_over_n[i])),
                targets: [0.0, 0.0, th.v3, th.v4],
                v_phi,
                theta: th.theta,
                error: (v_phi.mean - th.theta).abs(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaaRow {
    pub horizon: usize,
    pub schedules: Schedules,
    /// `P(V_N(phi) > theta (1 - e))` for `e = 1/4`.
    pub p_phi_quarter: Estimate,
    /// The same for `e = 1/2`.
    pub p_phi_half: Estimate,
    /// `P(V_N(psi) >= C_N)`
    pub p_psi: Estimate,
    /// `C_N - c_* (lambda_N / c_N) N^{2H - 1/2}`
    pub friction_target: f64,
    /// `P(V_N^{lambda_N}(psi) >= friction_target)`
    pub p_friction: Estimate,
    pub p_stop: [Estimate; 4],
    pub p_stop_n: Estimate,
    /// Paths with `min_n V_n(psi) < -c_N`.
    pub violations: usize,
    /// Paths with `min_n V_n(phi_hat) < -c_hat_N`.
    pub stopped_violations: usize,
    /// Mean over paths of `max_n |Vs1_n|` for `psi` and for the stopped
    /// strategy.
    pub mean_max_vs1: Estimate,
    pub mean_max_vs1_stopped: Estimate,
    pub max_friction_identity_error: f64,
    pub max_decomposition_error: f64,
    pub max_stopping_error: f64,
    pub first_passage_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaaReport {
    /// `max` over horizons, paths and times of
    /// `(Vs1_n + Vs2_n + Vs3_n) / N^{2H - 1/2}` for the stopped strategy.
    pub c_star: f64,
    pub rows: Vec<SaaRow>,
    /// Growth of `max_n |Vs1_n|` against `N`; `None` below three horizons.
    pub vs1_fit: Option<RateFit>,
    pub vs1_stopped_fit: Option<RateFit>,
}

fn penalty_scale(n: usize, hurst: f64) -> f64 {
    (n as f64).powf(2.0 * hurst - 0.5)
}

pub fn saa_report(sweep: &Sweep) -> Result<SaaReport> {
    let hurst = sweep.config.params.hurst;
    let theta = sweep.theta.theta;
    let c_star = sweep
        .runs
        .iter()
        .flat_map(|run| {
            let scale = penalty_scale(run.horizon(), hurst);
            run.records.iter().map(move |r| r.max_penalty_stopped / scale)
        })
        .fold(0.0, f64::max);
    let rows: Vec<SaaRow> = sweep
        .runs
        .iter()
        .map(|run| {
            let s = run.schedules;
            let friction_target = s.big_c - c_star * (s.lambda / s.c) * penalty_scale(s.horizon, hurst);
            SaaRow {
                horizon: s.horizon,
                schedules: s,
                p_phi_quarter: proportion(run, |r| r.row.v_phi > 0.75 * theta),
                p_phi_half: proportion(run, |r| r.row.v_phi > 0.5 * theta),
                p_psi: proportion(run, |r| r.row.v_psi >= s.big_c),
                friction_target,
                p_friction: proportion(run, |r| r.row.v_psi_lambda >= friction_target),
                p_stop: std::array::from_fn(|i| proportion(run, |r| r.row.t[i].is_some())),
                p_stop_n: proportion(run, |r| r.row.t_n.is_some()),
                violations: run.records.iter().filter(|r| r.row.min_v_psi < -s.c).count(),
                stopped_violations: run.records.iter().filter(|r| r.min_v_phi_hat < -s.c_hat).count(),
                mean_max_vs1: estimate(run, |r| r.max_abs_vs1),
                mean_max_vs1_stopped: estimate(run, |r| r.max_abs_vs1_stopped),
                max_friction_identity_error: run.records.iter().map(|r| r.friction_identity_error).fold(0.0, f64::max),
                max_decomposition_error: run.records.iter().map(|r| r.decomposition_error).fold(0.0, f64::max),
                max_stopping_error: run.records.iter().map(|r| r.stopping_error).fold(0.0, f64::max),
                first_passage_failures: run.records.iter().filter(|r| !r.first_passage_ok).count(),
            }
        })
        .collect();
    let fit = |f: &dyn Fn(&SaaRow) -> f64| -> Result<Option<RateFit>> {
        if rows.len() < 3 {
            return Ok(None);
        }
        let xs: Vec<f64> = rows.iter().map(|r| r.horizon as f64).collect();
        let ys: Vec<f64> = rows.iter().map(f).collect();
        rate_fit(&xs, &ys).map(Some)
    };
    let vs1_fit = fit(&|r| r.mean_max_vs1.mean)?;
    let vs1_stopped_fit = fit(&|r| r.mean_max_vs1_stopped.mean)?;
    Ok(SaaReport {
        c_star,
        rows,
        vs1_fit,
        vs1_stopped_fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxInequalityRow {
    pub horizon: usize,
    /// `E[max_n |S*_n|^2]`
    pub sup_s_star_sq: Estimate,
    /// `ln N N^{4H - 2}`
    pub bound_shape: f64,
    pub p_stop: [Estimate; 4],
    /// `1/(N eps^2)` for `i = 1, 2, 3` and `ln N / (N^{4-4H} eps^2)` for `i = 4`.
    pub stop_shapes: [f64; 4],
    /// `P(max_n |S^{(1)}_n / N| > eps_N)`
    pub kolmogorov_p: Estimate,
    /// `Var(S^{(1)}_N / N) / eps_N^2`
    pub kolmogorov_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxInequalityReport {
    pub rows: Vec<MaxInequalityRow>,
    /// `E[max |S*|^2]` against `N`.
    pub fit: RateFit,
}

pub fn max_inequality_report(sweep: &Sweep, table: &KernelTable) -> Result<MaxInequalityReport> {
    if sweep.runs.len() < 3 {
        return Err(Error::Degenerate("the maximal inequality fit needs three horizons".into()));
    }
    let hurst = sweep.config.params.hurst;
    let rows: Vec<MaxInequalityRow> = sweep
        .runs
        .iter()
        .map(|run| {
            let s = run.schedules;
            let nf = s.horizon as f64;
            let eps2 = s.eps * s.eps;
            let var_s1 = exact::var_s1(&table.prefix(s.horizon)?) / (nf * nf);
            let generic = 1.0 / (nf * eps2);
            Ok(MaxInequalityRow {
                horizon: s.horizon,
                sup_s_star_sq: estimate(run, |r| r.sup_s_star_sq),
                bound_shape: nf.ln() * nf.powf(4.0 * hurst - 2.0),
                p_stop: std::array::from_fn(|i| proportion(run, |r| r.row.t[i].is_some())),
                stop_shapes: [generic, generic, generic, nf.ln() / (nf.powf(4.0 - 4.0 * hurst) * eps2)],
                kolmogorov_p: proportion(run, |r| r.sup_s1_over_n > s.eps),
                kolmogorov_bound: var_s1 / eps2,
            })
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.horizon as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.sup_s_star_sq.mean).collect();
    Ok(MaxInequalityReport {
        fit: rate_fit(&xs, &ys)?,
        rows,
    })
}
