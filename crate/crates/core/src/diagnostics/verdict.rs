//! Pass/fail flags over a finished sweep.

use serde::{Deserialize, Serialize};

use super::exact::{martingale_variances, mixingale_norms};
use super::fit::{rate_fit, RateFit};
use super::sweep::{lln_report, max_inequality_report, saa_report, LlnRow, MaxInequalityReport, SaaReport, Sweep};
use crate::error::Result;
use crate::kernel::KernelTable;
use crate::stats::Estimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Slope of the exact mixingale norms at lag `k` over `m` in `[8, 128]`
/// (clipped to `m < k - 1`).
pub fn mixingale_fit(k: usize, table: &KernelTable) -> Result<RateFit> {
    let ms: Vec<usize> = (8..=128).filter(|m| m + 1 < k).collect();
    let norms = mixingale_norms(k, &ms, table)?;
    let xs: Vec<f64> = ms.iter().map(|&m| m as f64).collect();
    rate_fit(&xs, &norms)
}

/// Slope of `Var(Y_{N,k})` in `k + 1` over `k` in `[4, 64]`.
pub fn martingale_fit(n: usize, table: &KernelTable) -> Result<RateFit> {
    let ks: Vec<usize> = (4..=64).filter(|k| k + 2 < n).collect();
    let vars = martingale_variances(n, &ks, table)?;
    let xs: Vec<f64> = ks.iter().map(|&k| (k + 1) as f64).collect();
    rate_fit(&xs, &vars)
}

/// Everything `verify` reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub lln: Vec<LlnRow>,
    pub saa: SaaReport,
    pub max_inequality: MaxInequalityReport,
    pub mixingale: RateFit,
    pub mixingale_k: usize,
    pub martingale: RateFit,
    pub martingale_n: usize,
    pub flags: Vec<Flag>,
}

impl Verification {
    pub fn all_pass(&self) -> bool {
        self.flags.iter().all(|f| f.pass)
    }
}

/// `b >= a` up to twice the combined standard error.
fn not_below(a: &Estimate, b: &Estimate) -> bool {
    b.mean >= a.mean - 2.0 * (a.se * a.se + b.se * b.se).sqrt()
}

pub fn verify(sweep: &Sweep, table: &KernelTable) -> Result<Verification> {
    let hurst = sweep.config.params.hurst;
    let lln = lln_report(sweep);
    let saa = saa_report(sweep)?;
    let max_inequality = max_inequality_report(sweep, table)?;
    let mixingale_k = table.horizon().min(512);
    let mixingale = mixingale_fit(mixingale_k, table)?;
    let martingale_n = table.horizon().min(1024);
    let martingale = martingale_fit(martingale_n, table)?;

    let mut flags = Vec::new();
    let mut flag = |name: &str, pass: bool, detail: String| {
        flags.push(Flag {
            name: name.to_string(),
            pass,
            detail,
        })
    };

    let decomp = saa.rows.iter().map(|r| r.max_decomposition_error).fold(0.0, f64::max);
    flag("decomposition identity", decomp <= 1e-9, format!("max relative error {decomp:e}"));
    let stop = saa.rows.iter().map(|r| r.max_stopping_error).fold(0.0, f64::max);
    let passage: usize = saa.rows.iter().map(|r| r.first_passage_failures).sum();
    flag(
        "stopped value and first passage",
        stop <= 1e-12 && passage == 0,
        format!("max error {stop:e}, {passage} first-passage failures"),
    );
    let violations: usize = saa.rows.iter().map(|r| r.violations + r.stopped_violations).sum();
    flag("admissibility", violations == 0, format!("{violations} violations"));

    let errors: Vec<f64> = lln.iter().map(|r| r.error).collect();
    flag(
        "LLN error decreasing",
        errors.windows(2).all(|w| w[1] < w[0]),
        format!("{errors:?}"),
    );
    let last = lln.last().expect("nonempty sweep");
    flag(
        "LLN final within 25%",
        last.error <= 0.25 * last.theta,
        format!("mean {} vs theta {}", last.v_phi.mean, last.theta),
    );
    let centred = lln.iter().all(|r| (0..2).all(|i| r.terms[i].mean.abs() <= 3.0 * r.terms[i].se));
    flag(
        "terms 1 and 2 centred",
        centred,
        format!(
            "{:?}",
            lln.iter().map(|r| [r.terms[0].mean / r.terms[0].se, r.terms[1].mean / r.terms[1].se]).collect::<Vec<_>>()
        ),
    );
    let t3 = last.terms[2];
    flag(
        "term 3 limit",
        (t3.mean - last.targets[2]).abs() <= 3.0 * t3.se,
        format!("{} +- {} vs {}", t3.mean, t3.se, last.targets[2]),
    );

    let rows = &saa.rows;
    let final_row = rows.last().expect("nonempty sweep");
    flag(
        "success probability trend",
        rows.windows(2).all(|w| not_below(&w[0].p_phi_half, &w[1].p_phi_half)) && final_row.p_phi_half.mean >= 0.7,
        format!("{:?}", rows.iter().map(|r| r.p_phi_half.mean).collect::<Vec<_>>()),
    );
    flag(
        "stopping gap",
        rows.iter()
            .all(|r| r.p_phi_half.mean - r.p_psi.mean <= r.p_stop_n.mean + 2.0 * r.p_stop_n.se),
        format!(
            "{:?}",
            rows.iter().map(|r| (r.p_phi_half.mean - r.p_psi.mean, r.p_stop_n.mean)).collect::<Vec<_>>()
        ),
    );
    flag(
        "stopping probability decreasing",
        rows.windows(2).all(|w| w[1].p_stop_n.mean < w[0].p_stop_n.mean),
        format!("{:?}", rows.iter().map(|r| r.p_stop_n.mean).collect::<Vec<_>>()),
    );

    flag(
        "mixingale decay",
        mixingale.slope <= 2.0 * hurst - 2.0 + 0.25,
        format!("slope {} at k = {mixingale_k}", mixingale.slope),
    );
    flag(
        "martingale variance decay",
        martingale.slope <= -(5.0 - 4.0 * hurst) + 0.5,
        format!("slope {} at N = {martingale_n}", martingale.slope),
    );
    let sup_slope = max_inequality.fit.slope;
    flag(
        "maximal inequality rate",
        (sup_slope - (4.0 * hurst - 2.0)).abs() <= 0.4,
        format!("slope {sup_slope}"),
    );
    flag(
        "Kolmogorov bound",
        max_inequality
            .rows
            .iter()
            .all(|r| r.kolmogorov_p.mean <= r.kolmogorov_bound + 3.0 * r.kolmogorov_p.se),
        format!(
            "{:?}",
            max_inequality.rows.iter().map(|r| (r.kolmogorov_p.mean, r.kolmogorov_bound)).collect::<Vec<_>>()
        ),
    );

    let friction = rows.iter().map(|r| r.max_friction_identity_error).fold(0.0, f64::max);
    flag("friction identity", friction <= 1e-9, format!("max relative error {friction:e}"));
    let vs1 = saa.vs1_fit.as_ref().map_or(f64::NAN, |f| f.slope);
    flag(
        "friction growth rate",
        (vs1 - (2.0 * hurst - 0.5)).abs() <= 0.3,
        format!("slope {vs1}"),
    );
    flag(
        "friction success",
        rows.windows(2).all(|w| not_below(&w[0].p_friction, &w[1].p_friction)) && final_row.p_friction.mean >= 0.6,
        format!("{:?}", rows.iter().map(|r| r.p_friction.mean).collect::<Vec<_>>()),
    );

    Ok(Verification {
        lln,
        saa,
        max_inequality,
        mixingale,
        mixingale_k,
        martingale,
        martingale_n,
        flags,
    })
}
