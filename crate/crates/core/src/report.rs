//! Text formats shared by every artifact writer.

/// Scientific notation with 17 significant digits, which round-trips every
/// `f64` exactly.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// `none` for a missing stopping index.
pub fn fmt_index(v: Option<usize>) -> String {
    v.map_or_else(|| "none".to_string(), |k| k.to_string())
}
