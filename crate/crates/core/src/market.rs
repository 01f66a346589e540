//! Price paths of the binary market driven by a sign sequence.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelTable;
use crate::report::fmt_float;
use crate::stats::dot;

/// Largest horizon accepted by [`enumerate_paths`].
pub const MAX_ENUMERATION: usize = 22;

/// A sequence `xi_1..xi_N` of signs, each exactly `-1` or `+1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignPath(Vec<i8>);

impl SignPath {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(pos) = signs.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidSign {
                position: pos + 1,
                value: signs[pos] as i64,
            });
        }
        Ok(SignPath(signs))
    }

    pub fn from_i64(signs: &[i64]) -> Result<Self> {
        if let Some(pos) = signs.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidSign {
                position: pos + 1,
                value: signs[pos],
            });
        }
        Ok(SignPath(signs.iter().map(|&s| s as i8).collect()))
    }

    /// Bits of `code` from the most significant of the `n` used: bit set
    /// means `+1`.
    pub fn from_code(code: u64, n: usize) -> Self {
        SignPath((0..n).map(|k| if code >> (n - 1 - k) & 1 == 1 { 1 } else { -1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    /// `xi_k` for `1 <= k <= N`.
    #[inline]
    pub fn xi(&self, k: usize) -> f64 {
        self.0[k - 1] as f64
    }

    pub fn negated(&self) -> SignPath {
        SignPath(self.0.iter().map(|s| -s).collect())
    }
}

/// Identifies the sign stream of one Monte Carlo path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub path_index: u64,
}

impl SeedSpec {
    /// `n` fair signs. Path `path_index` reads stream `path_index` of the
    /// ChaCha8 generator keyed by `master_seed`, so every path is available
    /// without generating the ones before it.
    pub fn signs(&self, n: usize) -> SignPath {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.path_index);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let word = rng.next_u64();
            let take = (n - out.len()).min(64);
            for b in 0..take {
                out.push(if word >> b & 1 == 1 { 1 } else { -1 });
            }
        }
        SignPath(out)
    }
}

/// One realisation of the market.
///
/// `y[n-1]`, `x[n-1]` hold `Y_n`, `X_n` for `n = 1..N`; `s[n]` holds `S_n`
/// for `n = 0..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketPath {
    pub signs: SignPath,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
}

impl MarketPath {
    pub fn horizon(&self) -> usize {
        self.x.len()
    }

    /// `Y_n`, with `Y_0 = 0`.
    #[inline]
    pub fn y_at(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.y[n - 1]
        }
    }

    /// `X_n`, with the convention `X_0 = 0`.
    #[inline]
    pub fn x_at(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.x[n - 1]
        }
    }

    #[inline]
    pub fn s_at(&self, n: usize) -> f64 {
        self.s[n]
    }

    /// Path dump with columns `n,xi,Y,X,S`; row `n = 0` carries `xi = 0`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,xi,Y,X,S")?;
        writeln!(w, "0,0,{},{},{}", fmt_float(0.0), fmt_float(0.0), fmt_float(self.s[0]))?;
        for n in 1..=self.horizon() {
            writeln!(
                w,
                "{n},{},{},{},{}",
                self.signs.as_slice()[n - 1],
                fmt_float(self.y[n - 1]),
                fmt_float(self.x[n - 1]),
                fmt_float(self.s[n])
            )?;
        }
        Ok(())
    }
}

fn check_length(signs: &SignPath, table: &KernelTable) -> Result<()> {
    if signs.len() != table.horizon() {
        return Err(Error::LengthMismatch {
            what: "signs vs kernel horizon",
            expected: table.horizon(),
            actual: signs.len(),
        });
    }
    Ok(())
}

/// Builds `X` and `S` from precomputed history values.
fn assemble(signs: SignPath, y: Vec<f64>, table: &KernelTable) -> Result<MarketPath> {
    let n_total = table.horizon();
    let scale = (n_total as f64).powf(table.params().hurst);
    let mut x = Vec::with_capacity(n_total);
    let mut s = Vec::with_capacity(n_total + 1);
    s.push(table.params().s0);
    for n in 1..=n_total {
        let xn = y[n - 1] + table.g(n) * signs.xi(n);
        let factor = 1.0 + xn / scale;
        if !(factor > 0.0) {
            return Err(Error::NonPositivePrice { n, factor });
        }
        x.push(xn);
        s.push(factor * s[n - 1]);
    }
    Ok(MarketPath { signs, y, x, s })
}

/// The path generated by a given sign sequence. Drift is zero.
pub fn path_from_signs(signs: SignPath, table: &KernelTable) -> Result<MarketPath> {
    check_length(&signs, table)?;
    let xi: Vec<f64> = signs.as_slice().iter().map(|&s| s as f64).collect();
    let y = (1..=table.horizon()).map(|n| dot(table.row(n), &xi[..n - 1])).collect();
    assemble(signs, y, table)
}

pub fn simulate_path(table: &KernelTable, seed: SeedSpec) -> Result<MarketPath> {
    path_from_signs(seed.signs(table.horizon()), table)
}

/// Paths `first..first + count` of `master_seed`, in index order.
///
/// The history values are computed row by row across the whole batch so
/// that each kernel row is read from cache once per batch. Every `Y_n` is
/// still the same [`dot`] as in [`path_from_signs`], so results do not
/// depend on batching or on the number of worker threads.
pub fn simulate_batch(table: &KernelTable, master_seed: u64, first: u64, count: usize) -> Result<Vec<MarketPath>> {
    const BLOCK: usize = 16;
    let n_total = table.horizon();
    let idx: Vec<u64> = (0..count as u64).map(|k| first + k).collect();
    let blocks: Vec<Vec<MarketPath>> = idx
        .par_chunks(BLOCK)
        .map(|chunk| {
            let signs: Vec<SignPath> = chunk
                .iter()
                .map(|&path_index| SeedSpec { master_seed, path_index }.signs(n_total))
                .collect();
            let xi: Vec<Vec<f64>> = signs
                .iter()
                .map(|s| s.as_slice().iter().map(|&v| v as f64).collect())
                .collect();
            let mut ys = vec![Vec::with_capacity(n_total); chunk.len()];
            for n in 1..=n_total {
                let row = table.row(n);
                for (y, xi) in ys.iter_mut().zip(&xi) {
                    y.push(dot(row, &xi[..n - 1]));
                }
            }
            signs
                .into_iter()
                .zip(ys)
                .map(|(s, y)| assemble(s, y, table))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

/// All `2^N` paths in lexicographic sign order (`xi_1` most significant,
/// `-1` before `+1`).
pub fn enumerate_paths(table: &KernelTable) -> Result<impl Iterator<Item = Result<MarketPath>> + '_> {
    let n = table.horizon();
    if n > MAX_ENUMERATION {
        return Err(Error::TooLarge {
            n,
            limit: MAX_ENUMERATION,
        });
    }
    Ok((0..1u64 << n).map(move |code| path_from_signs(SignPath::from_code(code, n), table)))
}
