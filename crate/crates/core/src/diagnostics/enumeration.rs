//! Brute-force moments over all `2^N` sign paths, compared against the
//! closed forms of [`super::exact`].

use serde::{Deserialize, Serialize};

use super::exact;
use crate::arbitrage::{base_positions, theta_decomposition};
use crate::error::Result;
use crate::kernel::{KernelTable, ModelParams};
use crate::ledger::gains;
use crate::market::enumerate_paths;
use crate::stats::ExactSum;

/// One closed form against its enumerated counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub family: String,
    pub label: String,
    pub analytic: f64,
    pub enumerated: f64,
}

impl Check {
    pub fn discrepancy(&self) -> f64 {
        (self.analytic - self.enumerated).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationReport {
    pub horizon: usize,
    pub params: ModelParams,
    pub paths: u64,
    pub checks: Vec<Check>,
    /// The enumerated `E[S^{(1)}_N]` and `E[S^{(2)}_N]` as computed, before
    /// any comparison.
    pub mean_s1: f64,
    pub mean_s2: f64,
}

impl EnumerationReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.checks.iter().map(Check::discrepancy).fold(0.0, f64::max)
    }

    /// Largest discrepancy per family, in first-seen order.
    pub fn by_family(&self) -> Vec<(String, f64, usize)> {
        let mut out: Vec<(String, f64, usize)> = Vec::new();
        for c in &self.checks {
            match out.iter_mut().find(|(f, _, _)| *f == c.family) {
                Some(entry) => {
                    entry.1 = entry.1.max(c.discrepancy());
                    entry.2 += 1;
                }
                None => out.push((c.family.clone(), c.discrepancy(), 1)),
            }
        }
        out
    }
}

fn mean(values: &[f64]) -> f64 {
    let mut acc = ExactSum::new();
    for v in values {
        acc.add(*v);
    }
    acc.value() / values.len() as f64
}

fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    let centred: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    mean(&centred)
}

/// `E[f | xi_1..xi_q]` on every path. Paths are ordered with `xi_1` as the
/// most significant bit, so each conditioning event is a contiguous block.
fn conditional(values: &[f64], q: usize, n: usize) -> Vec<f64> {
    let size = 1usize << (n - q);
    values.chunks(size).flat_map(|block| std::iter::repeat_n(mean(block), size)).collect()
}

pub fn enumeration_suite(table: &KernelTable) -> Result<EnumerationReport> {
    let n = table.horizon();
    let count = 1usize << n;
    let mut theta: [Vec<Vec<f64>>; 4] = std::array::from_fn(|_| vec![Vec::with_capacity(count); n + 1]);
    let mut sums: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(count));
    let mut v_terminal = Vec::with_capacity(count);
    let mut ys: Vec<Vec<f64>> = vec![Vec::with_capacity(count); n + 1];
    for path in enumerate_paths(table)? {
        let path = path?;
        let d = theta_decomposition(&path, table)?;
        for i in 0..4 {
            for k in 0..=n {
                theta[i][k].push(d.theta[i][k]);
            }
            sums[i].push(d.sums[i][n]);
        }
        let phi = base_positions(&path, table.params());
        v_terminal.push(*gains(&phi, &path.s)?.last().expect("nonempty"));
        for (k, y) in ys.iter_mut().enumerate() {
            y.push(path.y_at(k));
        }
    }

    let mut checks = Vec::new();
    let mut push = |family: &str, label: String, analytic: f64, enumerated: f64| {
        checks.push(Check {
            family: family.to_string(),
            label,
            analytic,
            enumerated,
        })
    };

    // Means of S^{(i)}_N summed term by term, each term averaged exactly.
    let term_means: [Vec<f64>; 4] = std::array::from_fn(|i| theta[i].iter().map(|t| mean(t)).collect());
    let mean_s = |i: usize| {
        let mut acc = ExactSum::new();
        for v in &term_means[i] {
            acc.add(*v);
        }
        acc.value()
    };
    let (mean_s1, mean_s2) = (mean_s(0), mean_s(1));
    push("mean V_N(phi)", format!("N={n}"), exact::expected_terminal_value(table), mean(&v_terminal));
    push("mean S1_N", format!("N={n}"), 0.0, mean_s1);
    push("mean S2_N", format!("N={n}"), 0.0, mean_s2);
    push("mean S3_N", format!("N={n}"), exact::expected_s3(table), mean_s(2));
    let s4 = exact::expected_s4(table);
    let mut acc = ExactSum::new();
    for k in 1..=n {
        acc.add(term_means[3][k]);
        push("mean S4_n", format!("n={k}"), s4[k], acc.value());
    }

    push("var S1_N", format!("N={n}"), exact::var_s1(table), variance(&sums[0]));
    push("var S2_N", format!("N={n}"), exact::var_s2(table), variance(&sums[1]));
    push("var S3_N", format!("N={n}"), exact::var_s3(table), variance(&sums[2]));
    for k in 1..=n {
        push("var Y_k", format!("k={k}"), table.y_variance(k)?, variance(&ys[k]));
    }
    for k in 2..=n {
        let prod: Vec<f64> = ys[k - 1].iter().zip(&ys[k]).map(|(a, b)| a * b).collect();
        push("mean Y_{k-1} Y_k", format!("k={k}"), table.y_cross_expectation(k)?, mean(&prod));
    }

    // Centred products Y*_k, k = 1..N (Y*_1 = 0).
    let ystar: Vec<Vec<f64>> = (0..=n)
        .map(|k| {
            if k < 2 {
                return vec![0.0; count];
            }
            let prod: Vec<f64> = ys[k - 1].iter().zip(&ys[k]).map(|(a, b)| a * b).collect();
            let m = mean(&prod);
            prod.iter().map(|v| v - m).collect()
        })
        .collect();
    // E[. | F*_j] conditions on xi_1..xi_{j-1}; F*_j is trivial for j <= 1.
    let cond_star = |k: usize, j: isize| conditional(&ystar[k], (j - 1).max(0) as usize, n);

    for k in 2..=n {
        let ms: Vec<usize> = (0..k).collect();
        let analytic = exact::mixingale_norms(k, &ms, table)?;
        for (m, a) in ms.iter().zip(analytic) {
            let c = cond_star(k, k as isize - *m as isize);
            let sq: Vec<f64> = c.iter().map(|v| v * v).collect();
            push("mixingale norm", format!("k={k} m={m}"), a, mean(&sq).sqrt());
        }
    }

    let ks: Vec<usize> = (0..=n - 2).collect();
    let analytic = exact::martingale_variances(n, &ks, table)?;
    for (k, a) in ks.iter().zip(analytic) {
        let mut y = vec![0.0; count];
        for i in k + 2..=n {
            let hi = cond_star(i, (i - k) as isize);
            let lo = cond_star(i, (i - k) as isize - 1);
            for ((acc, h), l) in y.iter_mut().zip(&hi).zip(&lo) {
                *acc += h - l;
            }
        }
        push("martingale variance", format!("N={n} k={k}"), a, variance(&y));
    }

    Ok(EnumerationReport {
        horizon: n,
        params: *table.params(),
        paths: count as u64,
        checks,
        mean_s1,
        mean_s2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel_table, QuadratureConfig};

    #[test]
    fn small_horizon_suite_agrees() {
        let p = ModelParams::standard(0.75).unwrap();
        let t = build_kernel_table(8, &p, &QuadratureConfig::default()).unwrap();
        let r = enumeration_suite(&t).unwrap();
        assert!(r.max_discrepancy() < 1e-12, "{:?}", r.by_family());
        assert_eq!(r.mean_s1, 0.0);
        assert_eq!(r.mean_s2, 0.0);
        assert_eq!(r.paths, 256);
    }

    #[test]
    fn block_conditioning() {
        let v = [1.0, 3.0, 5.0, 7.0];
        assert_eq!(conditional(&v, 0, 2), vec![4.0; 4]);
        assert_eq!(conditional(&v, 1, 2), vec![2.0, 2.0, 6.0, 6.0]);
        assert_eq!(conditional(&v, 2, 2), v.to_vec());
    }
}
