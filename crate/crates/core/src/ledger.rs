//! Self-financing bookkeeping with proportional costs on sales.
//!
//! A position process is indexed by `k = -1..N`; `Delta_k phi = phi_k -
//! phi_{k-1}` is the trade made at time `k` at price `S_k`. Purchases pay
//! `S_k`, sales receive `(1 - lambda) S_k`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::fmt_float;

/// Holdings `phi_{-1}, phi_0, ..., phi_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    values: Vec<f64>,
}

impl Positions {
    /// `values[k + 1]` is the holding at time `k`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::LengthMismatch {
                what: "positions need indices -1 and 0",
                expected: 2,
                actual: values.len(),
            });
        }
        Ok(Positions { values })
    }

    pub fn zeros(horizon: usize) -> Self {
        Positions {
            values: vec![0.0; horizon + 2],
        }
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 2
    }

    /// Holding at time `k`, `-1 <= k <= N`.
    #[inline]
    pub fn at(&self, k: isize) -> f64 {
        self.values[(k + 1) as usize]
    }

    #[inline]
    pub(crate) fn set(&mut self, k: isize, v: f64) {
        self.values[(k + 1) as usize] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Trade at time `k >= 0`.
    #[inline]
    pub fn delta(&self, k: usize) -> f64 {
        self.values[k + 1] - self.values[k]
    }

    pub fn scaled(&self, factor: f64) -> Positions {
        Positions {
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

fn check_prices(phi: &Positions, prices: &[f64]) -> Result<()> {
    if prices.len() != phi.horizon() + 1 {
        return Err(Error::LengthMismatch {
            what: "prices S_0..S_N vs positions",
            expected: phi.horizon() + 1,
            actual: prices.len(),
        });
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::domain(format!("transaction cost must lie in [0, 1), got {lambda}")));
    }
    Ok(())
}

#[inline]
fn pos(v: f64) -> f64 {
    v.max(0.0)
}

#[inline]
fn neg(v: f64) -> f64 {
    (-v).max(0.0)
}

/// Bond holdings that make `phi1` self-financing with equality, starting
/// from `phi0_init` at time `-1`.
pub fn derive_bond_positions(phi1: &Positions, prices: &[f64], lambda: f64, phi0_init: f64) -> Result<Positions> {
    check_prices(phi1, prices)?;
    check_lambda(lambda)?;
    let n = phi1.horizon();
    let mut bond = Positions::zeros(n);
    bond.set(-1, phi0_init);
    let mut acc = phi0_init;
    for k in 0..=n {
        let d = phi1.delta(k);
        acc = acc - pos(d) * prices[k] + (1.0 - lambda) * neg(d) * prices[k];
        bond.set(k as isize, acc);
    }
    Ok(bond)
}

/// Liquidation values `V_n = phi0_n + (1 - lambda) phi1_n^+ S_n - phi1_n^- S_n`
/// for `n = 0..N`.
pub fn liquidation_values(phi0: &Positions, phi1: &Positions, prices: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_prices(phi1, prices)?;
    check_lambda(lambda)?;
    if phi0.horizon() != phi1.horizon() {
        return Err(Error::LengthMismatch {
            what: "bond vs stock positions",
            expected: phi1.horizon(),
            actual: phi0.horizon(),
        });
    }
    Ok((0..=phi1.horizon())
        .map(|k| {
            let h = phi1.at(k as isize);
            phi0.at(k as isize) + (1.0 - lambda) * pos(h) * prices[k] - neg(h) * prices[k]
        })
        .collect())
}

/// Frictionless gains `sum_{k=1..n} phi_{k-1} (S_k - S_{k-1})` for
/// `n = 0..N`, accumulated left to right.
pub fn gains(phi1: &Positions, prices: &[f64]) -> Result<Vec<f64>> {
    check_prices(phi1, prices)?;
    let mut out = Vec::with_capacity(prices.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..prices.len() {
        acc += phi1.at(k as isize - 1) * (prices[k] - prices[k - 1]);
        out.push(acc);
    }
    Ok(out)
}

/// Value process of a zero-endowment strategy split into its frictionless
/// part and the three cost sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionDecomposition {
    pub lambda: f64,
    /// Reconstructed `V_n^lambda`, `n = 0..N`.
    pub value: Vec<f64>,
    /// `V_0^lambda`, the cost of the initial trade.
    pub initial: f64,
    pub gains: Vec<f64>,
    /// Sums over `k <= n` of `[Delta phi >= 0] Delta(phi^+ S)`.
    pub vs1: Vec<f64>,
    /// Sums of `[Delta phi < 0] Delta(phi^- S)`.
    pub vs2: Vec<f64>,
    /// Sums of `[Delta phi < 0] phi_{k-1} Delta S`.
    pub vs3: Vec<f64>,
}

impl FrictionDecomposition {
    /// `Vs1_n + Vs2_n + Vs3_n`.
    pub fn penalty(&self, n: usize) -> f64 {
        self.vs1[n] + self.vs2[n] + self.vs3[n]
    }
}

pub fn friction_decomposition(phi1: &Positions, prices: &[f64], lambda: f64) -> Result<FrictionDecomposition> {
    check_prices(phi1, prices)?;
    check_lambda(lambda)?;
    let n = phi1.horizon();
    let d0 = phi1.delta(0);
    let h0 = phi1.at(0);
    let initial = if phi1.at(-1) == 0.0 {
        -lambda * h0.abs() * prices[0]
    } else {
        -pos(d0) * prices[0] + (1.0 - lambda) * neg(d0) * prices[0] + (1.0 - lambda) * pos(h0) * prices[0]
            - neg(h0) * prices[0]
    };
    let gains = gains(phi1, prices)?;
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    let mut vs1 = vec![0.0];
    let mut vs2 = vec![0.0];
    let mut vs3 = vec![0.0];
    let mut value = vec![initial];
    for k in 1..=n {
        let prev = phi1.at(k as isize - 1);
        let cur = phi1.at(k as isize);
        if cur - prev >= 0.0 {
            s1 += pos(cur) * prices[k] - pos(prev) * prices[k - 1];
        } else {
            s2 += neg(cur) * prices[k] - neg(prev) * prices[k - 1];
            s3 += prev * (prices[k] - prices[k - 1]);
        }
        vs1.push(s1);
        vs2.push(s2);
        vs3.push(s3);
        value.push(initial + gains[k] - lambda * (s1 + s2 + s3));
    }
    Ok(FrictionDecomposition {
        lambda,
        value,
        initial,
        gains,
        vs1,
        vs2,
        vs3,
    })
}

/// Mixed absolute/relative agreement used by all identity checks.
#[inline]
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Bookkeeping and decomposition of one strategy on one price path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerResult {
    pub phi0: Positions,
    pub phi1: Positions,
    /// Liquidation values from the bond account, `n = 0..N`.
    pub value: Vec<f64>,
    pub friction: FrictionDecomposition,
}

impl LedgerResult {
    /// Largest mismatch between bookkeeping and decomposition, measured as
    /// in [`close`].
    pub fn identity_error(&self) -> f64 {
        self.value
            .iter()
            .zip(&self.friction.value)
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
            .fold(0.0, f64::max)
    }

    /// Ledger dump with columns `n,phi0,phi1,S,V_lambda,Vs1,Vs2,Vs3`.
    pub fn write_csv<W: Write>(&self, prices: &[f64], mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,phi0,phi1,S,V_lambda,Vs1,Vs2,Vs3")?;
        for (n, price) in prices.iter().enumerate() {
            let k = n as isize;
            writeln!(
                w,
                "{n},{},{},{},{},{},{},{}",
                fmt_float(self.phi0.at(k)),
                fmt_float(self.phi1.at(k)),
                fmt_float(*price),
                fmt_float(self.value[n]),
                fmt_float(self.friction.vs1[n]),
                fmt_float(self.friction.vs2[n]),
                fmt_float(self.friction.vs3[n]),
            )?;
        }
        Ok(())
    }
}

/// Runs a zero-endowment strategy through both the bond account and the
/// decomposition.
pub fn run_ledger(phi1: &Positions, prices: &[f64], lambda: f64) -> Result<LedgerResult> {
    let phi0 = derive_bond_positions(phi1, prices, lambda, 0.0)?;
    let value = liquidation_values(&phi0, phi1, prices, lambda)?;
    let friction = friction_decomposition(phi1, prices, lambda)?;
    Ok(LedgerResult {
        phi0,
        phi1: phi1.clone(),
        value,
        friction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prices() -> Vec<f64> {
        vec![1.0, 1.1, 0.9, 1.3, 1.2]
    }

    #[test]
    fn no_trades() {
        let phi = Positions::zeros(4);
        let bond = derive_bond_positions(&phi, &prices(), 0.2, 3.0).unwrap();
        assert!(bond.as_slice().iter().all(|&b| b == 3.0));
        let v = liquidation_values(&bond, &phi, &prices(), 0.2).unwrap();
        assert!(v.iter().all(|&x| x == 3.0));
    }

    #[test]
    fn round_trip_trade() {
        // buy one unit at 0, sell it at N
        let mut phi = Positions::zeros(4);
        for k in 0..4 {
            phi.set(k, 1.0);
        }
        let p = prices();
        let b0 = derive_bond_positions(&phi, &p, 0.0, 2.0).unwrap();
        assert_eq!(b0.at(4), 2.0 - p[0] + p[4]);
        let b = derive_bond_positions(&phi, &p, 0.25, 2.0).unwrap();
        assert_eq!(b.at(4), 2.0 - p[0] + 0.75 * p[4]);
    }

    #[test]
    fn long_and_short_valuation() {
        let p = prices();
        let mut long = Positions::zeros(4);
        let mut short = Positions::zeros(4);
        for k in -1..=4 {
            long.set(k, 1.0);
            short.set(k, -1.0);
        }
        let zero = Positions::zeros(4);
        assert_eq!(liquidation_values(&zero, &long, &p, 0.0).unwrap(), p);
        let v = liquidation_values(&zero, &short, &p, 0.3).unwrap();
        assert_eq!(v, p.iter().map(|x| -x).collect::<Vec<_>>());
    }

    #[test]
    fn frictionless_reduces_to_gains() {
        let phi = Positions::new(vec![0.0, 0.5, -1.0, 2.0, 0.3, 0.0]).unwrap();
        let d = friction_decomposition(&phi, &prices(), 0.0).unwrap();
        assert_eq!(d.value, d.gains);
    }

    #[test]
    fn monotone_long_has_no_sale_terms() {
        let phi = Positions::new(vec![0.0, 0.1, 0.2, 0.2, 0.5, 0.9]).unwrap();
        let d = friction_decomposition(&phi, &prices(), 0.1).unwrap();
        assert!(d.vs2.iter().all(|&v| v == 0.0));
        assert!(d.vs3.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let phi = Positions::zeros(4);
        assert!(derive_bond_positions(&phi, &prices()[..3], 0.0, 0.0).is_err());
        assert!(derive_bond_positions(&phi, &prices(), 1.0, 0.0).is_err());
        assert!(friction_decomposition(&phi, &prices(), -0.1).is_err());
        assert!(Positions::new(vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn bookkeeping_matches_decomposition(
            steps in proptest::collection::vec((-2.0f64..2.0, -0.2f64..0.2), 1..40),
            lambda in 0.0f64..0.9,
            start in -1.0f64..1.0,
        ) {
            let mut prices = vec![1.0];
            let mut values = vec![start];
            for (h, r) in &steps {
                values.push(*h);
                let last = *prices.last().unwrap();
                prices.push(last * (1.0 + r));
            }
            values.push(0.0);
            let phi = Positions::new(values).unwrap();
            let r = run_ledger(&phi, &prices, lambda).unwrap();
            prop_assert!(r.identity_error() <= 1e-12);
        }

        #[test]
        fn terminal_value_nonincreasing_in_lambda(
            hs in proptest::collection::vec(-2.0f64..2.0, 2..30),
            l1 in 0.0f64..0.5,
            dl in 0.0f64..0.4,
        ) {
            let n = hs.len();
            let prices: Vec<f64> = (0..=n).map(|k| 1.0 + 0.1 * ((k * 7 % 5) as f64)).collect();
            let mut values = vec![0.0];
            values.extend(hs);
            values.push(0.0);
            values.truncate(n + 2);
            let phi = Positions::new(values).unwrap();
            let a = friction_decomposition(&phi, &prices, l1).unwrap();
            let b = friction_decomposition(&phi, &prices, l1 + dl).unwrap();
            prop_assert!(b.value[n] <= a.value[n] + 1e-12);
        }
    }
}
