//! Closed-form moments computed from the kernel table alone.

use crate::error::{Error, Result};
use crate::kernel::KernelTable;
use crate::stats::ExactSum;

fn check_horizon(n: usize, table: &KernelTable) -> Result<()> {
    if n < 2 || n > table.horizon() {
        return Err(Error::Index {
            index: n,
            horizon: table.horizon(),
        });
    }
    Ok(())
}

/// `j_i(l) j_{i-1}(p) + j_i(p) j_{i-1}(l)`, zero outside the kernel's range.
#[inline]
fn pair_weight(table: &KernelTable, i: usize, l: usize, p: usize) -> f64 {
    table.j_or_zero(i, l) * table.j_or_zero(i - 1, p) + table.j_or_zero(i, p) * table.j_or_zero(i - 1, l)
}

/// `|| E[Y*_k | F*_{k-m}] ||_2` for each `m`, where `F*_j` is generated by
/// `xi_1..xi_{j-1}`.
pub fn mixingale_norms(k: usize, m_list: &[usize], table: &KernelTable) -> Result<Vec<f64>> {
    if k == 0 || k > table.horizon() {
        return Err(Error::Index {
            index: k,
            horizon: table.horizon(),
        });
    }
    Ok(m_list
        .iter()
        .map(|&m| {
            if k <= m + 1 {
                return 0.0;
            }
            let q = k - m - 1;
            let mut acc = ExactSum::new();
            for p in 2..=q {
                for l in 1..p {
                    let w = pair_weight(table, k, l, p);
                    acc.add(w * w);
                }
            }
            acc.value().sqrt()
        })
        .collect())
}

/// `Var(Y_{N,k}) = sum_{i=k+2}^N sum_{l<=i-k-2} (j_i(l) j_{i-1}(p) + j_i(p) j_{i-1}(l))^2`
/// with `p = i - k - 1`.
pub fn martingale_variances(n: usize, k_list: &[usize], table: &KernelTable) -> Result<Vec<f64>> {
    check_horizon(n, table)?;
    k_list
        .iter()
        .map(|&k| {
            if k + 2 > n {
                return Err(Error::Index { index: k, horizon: n });
            }
            let mut acc = ExactSum::new();
            for i in k + 2..=n {
                let p = i - k - 1;
                for l in 1..p {
                    let w = pair_weight(table, i, l, p);
                    acc.add(w * w);
                }
            }
            Ok(acc.value())
        })
        .collect()
}

/// `(1/N) sum_{k=2}^N [g_{k-1} j_k(k-1) + sum_{l<=k-2} j_k(l) j_{k-1}(l)]`,
/// the mean terminal value of the base strategy.
pub fn expected_terminal_value(table: &KernelTable) -> f64 {
    let n = table.horizon();
    let mut acc = ExactSum::new();
    for k in 2..=n {
        acc.add(table.g(k - 1) * table.j(k, k - 1));
        acc.add(table.y_cross_expectation(k).expect("k in range"));
    }
    acc.value() / n as f64
}

/// `E[S^{(3)}_N] = sum_{k=2}^N g_{k-1} j_k(k-1)`.
pub fn expected_s3(table: &KernelTable) -> f64 {
    let mut acc = ExactSum::new();
    for k in 2..=table.horizon() {
        acc.add(table.g(k - 1) * table.j(k, k - 1));
    }
    acc.value()
}

/// `E[S^{(4)}_n]` for `n = 0..N`.
pub fn expected_s4(table: &KernelTable) -> Vec<f64> {
    let mut out = vec![0.0; table.horizon() + 1];
    let mut acc = ExactSum::new();
    for k in 2..=table.horizon() {
        acc.add(table.y_cross_expectation(k).expect("k in range"));
        out[k] = acc.value();
    }
    out
}

/// `Var S^{(1)}_N = sum_{l=2}^N g_{l-1}^2 g_l^2`.
pub fn var_s1(table: &KernelTable) -> f64 {
    let mut acc = ExactSum::new();
    for l in 2..=table.horizon() {
        acc.add((table.g(l - 1) * table.g(l)).powi(2));
    }
    acc.value()
}

/// `Var S^{(2)}_N = sum_{k=2}^N g_k^2 Var Y_{k-1}`.
pub fn var_s2(table: &KernelTable) -> f64 {
    let mut acc = ExactSum::new();
    for k in 2..=table.horizon() {
        acc.add(table.g(k).powi(2) * table.y_variance(k - 1).expect("k in range"));
    }
    acc.value()
}

/// `Var S^{(3)}_N = sum_{l=2}^N g_{l-1}^2 sum_{i<=l-2} j_l(i)^2`.
pub fn var_s3(table: &KernelTable) -> f64 {
    let mut acc = ExactSum::new();
    for l in 2..=table.horizon() {
        let row = table.row(l);
        let inner: f64 = row[..l - 2].iter().map(|v| v * v).sum();
        acc.add(table.g(l - 1).powi(2) * inner);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel_table, ModelParams, QuadratureConfig};

    fn table(n: usize) -> KernelTable {
        build_kernel_table(n, &ModelParams::with_hurst(0.7).unwrap(), &QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn trivial_ranges_vanish() {
        let t = table(10);
        let norms = mixingale_norms(6, &[5, 6, 9], &t).unwrap();
        assert_eq!(norms, vec![0.0, 0.0, 0.0]);
        assert!(mixingale_norms(6, &[1], &t).unwrap()[0] > 0.0);
        assert_eq!(martingale_variances(10, &[8], &t).unwrap(), vec![0.0]);
        assert!(martingale_variances(10, &[9], &t).is_err());
        assert!(mixingale_norms(11, &[1], &t).is_err());
        assert!(martingale_variances(11, &[0], &t).is_err());
    }

    #[test]
    fn norms_decrease_in_lag() {
        let t = table(60);
        let ms: Vec<usize> = (0..50).collect();
        let norms = mixingale_norms(60, &ms, &t).unwrap();
        for w in norms.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn terminal_value_splits_into_terms() {
        let t = table(25);
        let want = (expected_s3(&t) + expected_s4(&t)[25]) / 25.0;
        assert!((expected_terminal_value(&t) - want).abs() < 1e-14);
    }
}
