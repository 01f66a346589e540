//! Binary on-disk format for kernel tables.
//!
//! Layout (little-endian): magic `FBKT`, version `u32`, `H`, `sigma`, `cH`,
//! `s0` as `f64`, `N` as `u64`, `rel_tol` as `f64`, `nodes_per_panel` as
//! `u32`, then `g_1..g_N` and the `j` rows for `n = 2..N`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kernel::params::{ModelParams, QuadratureConfig};
use crate::kernel::table::{build_kernel_table, j_len, KernelTable};

pub const MAGIC: [u8; 4] = *b"FBKT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 4 * 8 + 8 + 8 + 4;

/// Environment variable that overrides the cache directory.
pub const CACHE_DIR_ENV: &str = "FRACBIN_CACHE_DIR";

/// The fields stored in a cache header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheHeader {
    pub params: ModelParams,
    pub horizon: u64,
    pub rel_tol: f64,
    pub nodes_per_panel: u32,
}

impl CacheHeader {
    pub fn of(table: &KernelTable) -> Self {
        CacheHeader {
            params: table.params,
            horizon: table.horizon as u64,
            rel_tol: table.quad.rel_tol,
            nodes_per_panel: table.quad.nodes_per_panel,
        }
    }

    pub fn expected(horizon: usize, params: &ModelParams, quad: &QuadratureConfig) -> Self {
        CacheHeader {
            params: *params,
            horizon: horizon as u64,
            rel_tol: quad.rel_tol,
            nodes_per_panel: quad.nodes_per_panel,
        }
    }

    /// Bitwise comparison, so that `-0.0 != 0.0` and NaN never matches.
    fn matches(&self, other: &CacheHeader) -> bool {
        let a = &self.params;
        let b = &other.params;
        a.hurst.to_bits() == b.hurst.to_bits()
            && a.sigma.to_bits() == b.sigma.to_bits()
            && a.c_h.to_bits() == b.c_h.to_bits()
            && a.s0.to_bits() == b.s0.to_bits()
            && self.horizon == other.horizon
            && self.rel_tol.to_bits() == other.rel_tol.to_bits()
            && self.nodes_per_panel == other.nodes_per_panel
    }
}

pub fn encode(table: &KernelTable) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * (table.g.len() + table.j.len()));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [table.params.hurst, table.params.sigma, table.params.c_h, table.params.s0] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(table.horizon as u64).to_le_bytes());
    out.extend_from_slice(&table.quad.rel_tol.to_le_bytes());
    out.extend_from_slice(&table.quad.nodes_per_panel.to_le_bytes());
    for v in table.g.iter().chain(&table.j) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take<const K: usize>(&mut self) -> Result<[u8; K]> {
        if self.buf.len() < K {
            return Err(Error::Cache("truncated header".into()));
        }
        let (head, rest) = self.buf.split_at(K);
        self.buf = rest;
        Ok(head.try_into().expect("split length"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

/// Parse just the header.
pub fn decode_header(bytes: &[u8]) -> Result<CacheHeader> {
    let mut r = Reader { buf: bytes };
    if r.take::<4>()? != MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Cache(format!("unsupported version {version}")));
    }
    let hurst = r.f64()?;
    let sigma = r.f64()?;
    let c_h = r.f64()?;
    let s0 = r.f64()?;
    let params = ModelParams::new(hurst, sigma, c_h, s0).map_err(|e| Error::Cache(e.to_string()))?;
    let horizon = r.u64()?;
    let rel_tol = r.f64()?;
    let nodes_per_panel = r.u32()?;
    Ok(CacheHeader {
        params,
        horizon,
        rel_tol,
        nodes_per_panel,
    })
}

/// Decode a cache file. Never panics; every malformed input is an
/// [`Error::Cache`].
pub fn decode(bytes: &[u8]) -> Result<KernelTable> {
    let header = decode_header(bytes)?;
    let horizon = usize::try_from(header.horizon).map_err(|_| Error::Cache("horizon overflows".into()))?;
    if horizon < 2 {
        return Err(Error::Cache(format!("horizon {horizon} below 2")));
    }
    let quad = QuadratureConfig {
        nodes_per_panel: header.nodes_per_panel,
        rel_tol: header.rel_tol,
        ..QuadratureConfig::default()
    };
    quad.validate().map_err(|e| Error::Cache(e.to_string()))?;
    let count = horizon
        .checked_mul(horizon - 1)
        .map(|v| v / 2)
        .and_then(|v| v.checked_add(horizon))
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| Error::Cache("payload size overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count {
        return Err(Error::Cache(format!(
            "payload has {} bytes, header implies {count}",
            payload.len()
        )));
    }
    let mut values = Vec::with_capacity(count / 8);
    for chunk in payload.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Cache(format!("non-positive or non-finite weight {v}")));
        }
        values.push(v);
    }
    let j = values.split_off(horizon);
    debug_assert_eq!(j.len(), j_len(horizon));
    KernelTable::from_parts(horizon, header.params, quad, values, j)
}

/// Decode and require that the header describes the requested table.
pub fn decode_matching(bytes: &[u8], horizon: usize, params: &ModelParams, quad: &QuadratureConfig) -> Result<KernelTable> {
    let header = decode_header(bytes)?;
    if !header.matches(&CacheHeader::expected(horizon, params, quad)) {
        return Err(Error::Cache("header does not match the requested table".into()));
    }
    let mut table = decode(bytes)?;
    table.quad = *quad;
    Ok(table)
}

/// File name derived from the exact bit patterns of every input.
pub fn cache_file_name(horizon: usize, params: &ModelParams, quad: &QuadratureConfig) -> String {
    format!(
        "kernel-N{horizon}-H{:016x}-s{:016x}-c{:016x}-p{:016x}-r{:016x}-a{:016x}-q{}-m{}.fbkt",
        params.hurst.to_bits(),
        params.sigma.to_bits(),
        params.c_h.to_bits(),
        params.s0.to_bits(),
        quad.rel_tol.to_bits(),
        quad.abs_tol.to_bits(),
        quad.nodes_per_panel,
        quad.max_panels,
    )
}

/// `$FRACBIN_CACHE_DIR`, or `.fracbin-cache` in the working directory.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".fracbin-cache"))
}

pub fn write_cache(path: &Path, table: &KernelTable) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, encode(table)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Where a table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Built,
}

/// Load the table from `dir` if a valid matching cache exists, otherwise
/// build it and write the cache. A corrupt or mismatched file is rebuilt.
pub fn load_or_build(
    dir: &Path,
    horizon: usize,
    params: &ModelParams,
    quad: &QuadratureConfig,
) -> Result<(KernelTable, CacheOutcome)> {
    let path = dir.join(cache_file_name(horizon, params, quad));
    if let Ok(bytes) = fs::read(&path) {
        if let Ok(table) = decode_matching(&bytes, horizon, params, quad) {
            return Ok((table, CacheOutcome::Hit));
        }
    }
    let table = build_kernel_table(horizon, params, quad)?;
    write_cache(&path, &table)?;
    Ok((table, CacheOutcome::Built))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> KernelTable {
        let p = ModelParams::with_hurst(0.75).unwrap();
        build_kernel_table(6, &p, &QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn round_trip() {
        let t = table();
        let bytes = encode(&t);
        assert_eq!(bytes.len(), HEADER_LEN + 8 * (6 + 15));
        assert_eq!(decode(&bytes).unwrap(), t);
    }

    #[test]
    fn rejects_corruption() {
        let t = table();
        let bytes = encode(&t);
        for cut in [0, 3, HEADER_LEN - 1, HEADER_LEN, bytes.len() - 1] {
            assert!(decode(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(decode(&bad).is_err());
        let mut bad = bytes.clone();
        bad[HEADER_LEN..HEADER_LEN + 8].copy_from_slice(&(-1.0f64).to_le_bytes());
        assert!(decode(&bad).is_err());
        let mut bad = bytes.clone();
        // absurd horizon
        bad[40..48].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode(&bad).is_err());
        let mut longer = bytes;
        longer.push(0);
        assert!(decode(&longer).is_err());
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let t = table();
        let bytes = encode(&t);
        let other = ModelParams::with_hurst(0.7).unwrap();
        assert!(decode_matching(&bytes, 6, &other, &t.quad).is_err());
        assert!(decode_matching(&bytes, 7, &t.params, &t.quad).is_err());
        assert!(decode_matching(&bytes, 6, &t.params, &t.quad).is_ok());
    }

    #[test]
    fn load_or_build_reuses_cache() {
        let dir = tempfile::tempdir().unwrap();
        let p = ModelParams::with_hurst(0.8).unwrap();
        let q = QuadratureConfig::default();
        let (a, first) = load_or_build(dir.path(), 5, &p, &q).unwrap();
        let (b, second) = load_or_build(dir.path(), 5, &p, &q).unwrap();
        assert_eq!(first, CacheOutcome::Built);
        assert_eq!(second, CacheOutcome::Hit);
        assert_eq!(a, b);
        let path = dir.path().join(cache_file_name(5, &p, &q));
        fs::write(&path, b"garbage").unwrap();
        let (_, third) = load_or_build(dir.path(), 5, &p, &q).unwrap();
        assert_eq!(third, CacheOutcome::Built);
    }
}
