//! Parser for horizon lists such as `256,1024,4096`.

use crate::error::{Error, Result};

/// Longest accepted list; far beyond any useful sweep.
pub const MAX_ENTRIES: usize = 64;

/// Parses comma-separated decimal horizons. Blanks around entries are
/// ignored; the values must increase strictly. An entry may also be written
/// as a power of two, `2^k`.
pub fn parse_n_list(input: &str) -> Result<Vec<usize>> {
    let mut out: Vec<usize> = Vec::new();
    for (pos, raw) in input.split(',').enumerate() {
        let item = raw.trim();
        if item.is_empty() {
            return Err(Error::Parse(format!("empty entry at position {pos}")));
        }
        if out.len() == MAX_ENTRIES {
            return Err(Error::Parse(format!("more than {MAX_ENTRIES} horizons")));
        }
        let value = parse_entry(item).ok_or_else(|| Error::Parse(format!("invalid horizon {item:?}")))?;
        if let Some(&last) = out.last() {
            if value <= last {
                return Err(Error::Parse(format!("horizons must increase strictly: {value} after {last}")));
            }
        }
        out.push(value);
    }
    Ok(out)
}

fn parse_entry(item: &str) -> Option<usize> {
    if let Some(exp) = item.strip_prefix("2^") {
        let k: u32 = digits(exp)?.try_into().ok()?;
        return 1usize.checked_shl(k).filter(|_| k < usize::BITS);
    }
    digits(item)
}

fn digits(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// The canonical spelling, which [`parse_n_list`] reads back unchanged.
pub fn format_n_list(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
