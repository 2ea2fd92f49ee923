//! CSV plumbing shared by the CLI and the report emitter.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// 17 significant digits, which always parse back to the same `f64`.
/// Positional notation unless the magnitude is extreme.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.16e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-20..=20).contains(&exp) {
        format!("{:.*}", (16 - exp).max(0) as usize, x)
    } else {
        sci
    }
}

/// `prefix1,…,prefixd` followed by one line per row of a row-major sample.
pub fn sample_csv(prefix: &str, d: usize, values: &[f64]) -> String {
    let mut out = (1..=d).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in values.chunks_exact(d) {
        let line = row.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "{line}");
    }
    out
}

pub fn write_sample_csv(path: &Path, prefix: &str, d: usize, values: &[f64]) -> Result<()> {
    std::fs::write(path, sample_csv(prefix, d, values))?;
    Ok(())
}

/// Parses a CSV written by [`sample_csv`]; returns `(d, values)`.
pub fn parse_sample_csv(text: &str) -> Result<(usize, Vec<f64>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidParameter("empty CSV".into()))?;
    let d = header.split(',').count();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: fields.len() });
        }
        for f in fields {
            values.push(
                f.trim()
                    .parse()
                    .map_err(|e| Error::InvalidParameter(format!("line {}: {f:?}: {e}", i + 2)))?,
            );
        }
    }
    Ok((d, values))
}
