//! Report emission: atomic file writes, reproducible float formatting, and
//! the CSV layouts used by the sweep and table commands.

use std::path::Path;

use crate::error::Result;
use crate::norms::Exponent;
use crate::scaling::{SweepResult, SweepRow};

/// Print a float with 17 significant digits, '.' decimal, no locale.
pub fn fmt_g17(x: f64) -> String {
    if x == f64::INFINITY {
        return "inf".into();
    }
    if x == f64::NEG_INFINITY {
        return "-inf".into();
    }
    format!("{x:.16e}")
}

/// θ/q column format: integers plain, "inf" for ∞.
pub fn fmt_exponent(e: Exponent) -> String {
    match e {
        Exponent::Infinity => "inf".into(),
        Exponent::Finite(v) if v.fract() == 0.0 => format!("{}", v as i64),
        Exponent::Finite(v) => format!("{v}"),
    }
}

/// Write bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// CSV for a sweep: header plus one row per (θ, n).
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from(
        "theta,q,m,n,lower,upper,lower_provenance,upper_provenance,seed,wall_time_s\n",
    );
    for r in &result.rows {
        out.push_str(&sweep_csv_row(r));
        out.push('\n');
    }
    out
}

fn sweep_csv_row(r: &SweepRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        fmt_exponent(r.theta),
        fmt_exponent(Exponent::Finite(r.q)),
        r.m,
        r.n,
        fmt_g17(r.lower),
        fmt_g17(r.upper),
        r.lower_provenance,
        r.upper_provenance,
        r.seed,
        fmt_g17(r.wall_time_s),
    )
}

/// CSV for the two-sided octahedron table: one row per n.
pub fn kashin_csv(rows: &[(usize, f64, f64, f64)]) -> String {
    let mut out = String::from("n,lower_formula,upper_search,ratio\n");
    for &(n, lower, upper, ratio) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            n,
            fmt_g17(lower),
            fmt_g17(upper),
            fmt_g17(ratio)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_significant_digits() {
        assert_eq!(fmt_g17(0.25), "2.5000000000000000e-1");
        assert_eq!(fmt_g17(-1.0), "-1.0000000000000000e0");
        assert_eq!(fmt_g17(f64::INFINITY), "inf");
        // round-trips exactly
        let x = 0.1234567890123456789_f64;
        let s = fmt_g17(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn exponent_format() {
        assert_eq!(fmt_exponent(Exponent::Infinity), "inf");
        assert_eq!(fmt_exponent(Exponent::Finite(1.0)), "1");
        assert_eq!(fmt_exponent(Exponent::Finite(2.5)), "2.5");
    }

    #[test]
    fn atomic_write_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x/report.json");
        write_atomic(&path, b"{\"a\":1}").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"{\"a\":1}");
        // overwrite
        write_atomic(&path, b"{}").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"{}");
    }
}
