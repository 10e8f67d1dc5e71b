//! Time values with explicit units. Bare numbers are femtoseconds.

use crate::error::{Error, Result};

const UNITS: [(&str, f64); 5] = [("fs", 1.0), ("ps", 1e3), ("ns", 1e6), ("us", 1e9), ("ms", 1e12)];

/// Parses `"1e6fs"`, `"2.5 ns"`, `"300ps"` or `"42"` into femtoseconds.
pub fn parse_time(s: &str) -> Result<f64> {
    let t = s.trim();
    let (num, scale) = UNITS
        .iter()
        .find_map(|(u, k)| t.strip_suffix(u).map(|n| (n.trim_end(), *k)))
        .unwrap_or((t, 1.0));
    let v: f64 = num
        .parse()
        .map_err(|_| Error::Parse(format!("cannot read {s:?} as a time")))?;
    let fs = v * scale;
    if fs.is_finite() {
        Ok(fs)
    } else {
        Err(Error::Parse(format!("time {s:?} is not finite")))
    }
}
