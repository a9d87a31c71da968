//! CSV output with a fixed, byte-reproducible number format.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::observables::ObservableSeries;
use crate::{Error, Result, TimeGrid};

/// `x` in fixed notation with 12 significant digits. Values too small to
/// show a digit within 40 decimals print as zero.
pub fn format_value(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return format!("{:.11}", 0.0);
    }
    // Exponent after rounding to 12 digits, so 9.99999999999995 counts as 10.
    let sci = format!("{x:.11e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (11 - exp).clamp(0, 40) as usize;
    let s = format!("{x:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        format!("{:.11}", 0.0)
    } else {
        s
    }
}

/// The CSV document for `series`, which must share one grid.
pub fn render_csv(series: &[ObservableSeries]) -> Result<String> {
    let grid: Option<TimeGrid> = series.first().map(|s| s.grid);
    for s in series {
        if Some(s.grid) != grid {
            return Err(Error::GridMismatch(format!("series '{}' is on a different grid", s.name)));
        }
        if s.values.len() != s.grid.len() || s.stderr.len() != s.grid.len() {
            return Err(Error::DimensionMismatch(format!("series '{}' has the wrong length", s.name)));
        }
    }
    let mut out = String::from("t");
    for s in series {
        write!(out, ",{0},{0}_stderr", s.name).unwrap();
    }
    out.push('\n');
    if let Some(grid) = grid {
        for k in 0..grid.len() {
            out.push_str(&format_value(grid.time(k)));
            for s in series {
                out.push(',');
                out.push_str(&format_value(s.values[k]));
                out.push(',');
                out.push_str(&format_value(s.stderr[k]));
            }
            out.push('\n');
        }
    }
    Ok(out)
}

/// Writes `bytes` to `path` through a sibling temp file and a rename, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn export_csv(series: &[ObservableSeries], path: &Path) -> Result<()> {
    write_atomic(path, render_csv(series)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_value(0.0), "0.00000000000");
        assert_eq!(format_value(1.0), "1.00000000000");
        assert_eq!(format_value(0.25), "0.250000000000");
        assert_eq!(format_value(-123.456), "-123.456000000");
        assert_eq!(format_value(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_value(9.999999999999995), "10.0000000000");
        assert_eq!(format_value(1e-5), "0.0000100000000000");
        assert_eq!(format_value(1e-60), "0.00000000000");
        assert_eq!(format_value(f64::NAN), "nan");
    }

    #[test]
    fn empty_list_is_header_only() {
        assert_eq!(render_csv(&[]).unwrap(), "t\n");
    }

    #[test]
    fn constant_series_rows() {
        let grid = TimeGrid::new(1.0, 0.25).unwrap();
        let s = ObservableSeries::constant(grid, "p", 0.5);
        let text = render_csv(&[s]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,p,p_stderr");
        assert_eq!(lines.len(), grid.n_steps() + 2);
        assert_eq!(lines[2], "0.250000000000,0.500000000000,0.00000000000");
        assert!(lines[1..].iter().all(|l| l.split(',').nth(1) == Some("0.500000000000")));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn reexport_is_byte_identical() {
        let grid = TimeGrid::new(1.0, 0.1).unwrap();
        let mut s = ObservableSeries::constant(grid, "x", 0.0);
        s.values.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64 * 0.37).sin());
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        export_csv(&[s.clone()], &a).unwrap();
        export_csv(&[s], &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = ObservableSeries::constant(TimeGrid::new(1.0, 0.1).unwrap(), "a", 0.0);
        let b = ObservableSeries::constant(TimeGrid::new(1.0, 0.05).unwrap(), "b", 0.0);
        assert!(matches!(render_csv(&[a, b]), Err(Error::GridMismatch(_))));
    }
}
