//! Convergence tables: rates, regression slopes and text output.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{DpmError, Result};
use crate::problems::ProblemId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RateConvention {
    /// Rate per halving of the spacing, i.e. against `sqrt(DOF)`.
    #[default]
    SqrtDof,
    /// `log(E_{n-1}/E_n) / log(DOF_{n-1}/DOF_n)` as written, sign included.
    Literal,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TableFormat {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = DpmError;

    fn from_str(s: &str) -> Result<TableFormat> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(DpmError::InvalidInput(format!("unknown table format '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub dof: usize,
    pub error: f64,
    /// Blank for the first row.
    pub rate: Option<f64>,
    /// Nodes where the error is sampled, if known.
    pub active: Option<usize>,
}

fn check_point(dof: usize, e: f64) -> Result<()> {
    if dof == 0 {
        return Err(DpmError::InvalidInput("DOF must be positive".into()));
    }
    if !(e > 0.0) || !e.is_finite() {
        return Err(DpmError::InvalidInput(format!("error must be positive and finite, got {e}")));
    }
    Ok(())
}

/// Observed rate between two consecutive refinements.
pub fn rate(prev: (usize, f64), next: (usize, f64), convention: RateConvention) -> Result<f64> {
    check_point(prev.0, prev.1)?;
    check_point(next.0, next.1)?;
    if prev.0 == next.0 {
        return Err(DpmError::InvalidInput("rate needs two distinct DOF values".into()));
    }
    let num = (prev.1 / next.1).ln();
    Ok(match convention {
        RateConvention::SqrtDof => num / (next.0 as f64 / prev.0 as f64).sqrt().ln(),
        RateConvention::Literal => num / (prev.0 as f64 / next.0 as f64).ln(),
    })
}

/// Negated slope of the least-squares line through `(log10 sqrt(DOF), log10 E)`.
pub fn fitted_rate(points: &[(usize, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(DpmError::InvalidInput("a fit needs at least two points".into()));
    }
    for &(d, e) in points {
        check_point(d, e)?;
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).sqrt().log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(DpmError::InvalidInput("a fit needs distinct DOF values".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(-sxy / sxx)
}

/// Records with rates filled in from consecutive pairs.
pub fn records(points: &[(usize, f64)], convention: RateConvention) -> Result<Vec<ConvergenceRecord>> {
    let mut out = Vec::with_capacity(points.len());
    for (i, &(dof, error)) in points.iter().enumerate() {
        check_point(dof, error)?;
        let rate = if i == 0 {
            None
        } else {
            if dof <= points[i - 1].0 {
                return Err(DpmError::InvalidInput("DOF must increase down the table".into()));
            }
            Some(rate(points[i - 1], (dof, error), convention)?)
        };
        out.push(ConvergenceRecord { dof, error, rate, active: None });
    }
    Ok(out)
}

/// `1.7105e-05` style: four decimals, signed two-digit exponent.
pub fn format_error(v: f64) -> String {
    let s = format!("{v:.4e}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let e: i32 = exp.parse().unwrap_or(0);
            let sign = if e < 0 { '-' } else { '+' };
            format!("{mantissa}e{sign}{:02}", e.abs())
        }
        None => s,
    }
}

pub fn format_rate(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.2}")).unwrap_or_default()
}

pub fn emit_table(records: &[ConvergenceRecord], format: TableFormat) -> String {
    let with_active = !records.is_empty() && records.iter().all(|r| r.active.is_some());
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(if with_active { "DOF,E,Rate,Active\n" } else { "DOF,E,Rate\n" });
            for r in records {
                let _ = write!(out, "{},{},{}", r.dof, format_error(r.error), format_rate(r.rate));
                if with_active {
                    let _ = write!(out, ",{}", r.active.unwrap_or(0));
                }
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            if with_active {
                out.push_str("| DOF | E | Rate | Active |\n|---:|---:|---:|---:|\n");
            } else {
                out.push_str("| DOF | E | Rate |\n|---:|---:|---:|\n");
            }
            for r in records {
                let rate = r.rate.map(|v| format!("{v:.2}")).unwrap_or_else(|| "---".into());
                let _ = write!(out, "| {} | {} | {} |", r.dof, format_error(r.error), rate);
                if with_active {
                    let _ = write!(out, " {} |", r.active.unwrap_or(0));
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Read back a table written by [`emit_table`] in CSV form.
pub fn parse_csv(text: &str) -> Result<Vec<ConvergenceRecord>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(DpmError::Parse { line: 1, message: "missing header".into() })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[..3] != ["DOF", "E", "Rate"] {
        return Err(DpmError::Parse { line: 1, message: format!("unexpected header '{header}'") });
    }
    let with_active = cols.get(3) == Some(&"Active");
    let mut out = Vec::new();
    for (i, line) in lines {
        let bad = |m: String| DpmError::Parse { line: i + 1, message: m };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != cols.len() {
            return Err(bad(format!("expected {} fields, found {}", cols.len(), f.len())));
        }
        let dof = f[0].parse().map_err(|e| bad(format!("DOF: {e}")))?;
        let error = f[1].parse().map_err(|e| bad(format!("E: {e}")))?;
        let rate = if f[2].is_empty() { None } else { Some(f[2].parse().map_err(|e| bad(format!("Rate: {e}")))?) };
        let active = if with_active { Some(f[3].parse().map_err(|e| bad(format!("Active: {e}")))?) } else { None };
        out.push(ConvergenceRecord { dof, error, rate, active });
    }
    Ok(out)
}

/// Reference errors at DOF 10000, 40000, 160000.
pub fn reference_errors(problem: ProblemId, order: usize, implicit: bool) -> Option<[f64; 3]> {
    use ProblemId::*;
    let e = match (problem, order, implicit) {
        (Tp1a, 2, false) => [1.7105e-05, 4.1980e-06, 1.0135e-06],
        (Tp1a, 4, false) => [2.4782e-06, 5.9672e-08, 1.7396e-09],
        (Tp3a, 2, false) => [1.7721e-05, 4.3619e-06, 1.0526e-06],
        (Tp3a, 4, false) => [2.3422e-06, 5.7588e-08, 1.8398e-09],
        (Tp2a, 2, false) => [3.6380e-05, 8.8360e-06, 2.1331e-06],
        (Tp2a, 4, false) => [7.7484e-09, 4.5617e-10, 2.6398e-11],
        (Tp2b, 2, false) => [7.1899e-02, 1.7868e-02, 4.4952e-03],
        (Tp2b, 4, false) => [7.3065e-03, 6.0014e-04, 3.3086e-05],
        (Tp2c, 2, false) => [1.1178e-01, 1.8941e-02, 4.0950e-03],
        (Tp2c, 4, false) => [1.1392e-03, 5.9291e-05, 3.2716e-06],
        (Tp2c, 2, true) => [1.0377e-01, 1.7727e-02, 3.8853e-03],
        (Tp2c, 4, true) => [1.0905e-03, 5.5494e-05, 3.0003e-06],
        _ => return None,
    };
    Some(e)
}

pub const REFERENCE_DOF: [usize; 3] = [10000, 40000, 160000];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_match_reference_columns() {
        let r = rate((10000, 1.7105e-5), (40000, 4.1980e-6), RateConvention::SqrtDof).unwrap();
        assert_eq!(format!("{r:.2}"), "2.03");
        let r = rate((40000, 5.9672e-8), (160000, 1.7396e-9), RateConvention::SqrtDof).unwrap();
        assert_eq!(format!("{r:.2}"), "5.10");
        let r = rate((10000, 4e-4), (40000, 1e-4), RateConvention::SqrtDof).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        let lit = rate((10000, 1.7105e-5), (40000, 4.1980e-6), RateConvention::Literal).unwrap();
        assert!((lit + 1.0135).abs() < 1e-3, "{lit}");
    }

    #[test]
    fn rate_rejects_nonpositive_error() {
        assert!(rate((100, 0.0), (400, 1.0), RateConvention::SqrtDof).is_err());
        assert!(rate((100, 1.0), (400, -1.0), RateConvention::SqrtDof).is_err());
    }

    #[test]
    fn fitted_rate_of_power_law_is_exact() {
        let pts: Vec<(usize, f64)> = [100usize, 200, 400].iter().map(|&n| (n * n, 3.0 * (n as f64).powi(-4))).collect();
        assert!((fitted_rate(&pts).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn table_matches_reference_layout() {
        let pts: Vec<(usize, f64)> = REFERENCE_DOF.iter().copied().zip(reference_errors(ProblemId::Tp1a, 2, false).unwrap()).collect();
        let recs = records(&pts, RateConvention::SqrtDof).unwrap();
        let md = emit_table(&recs, TableFormat::Markdown);
        let rows: Vec<&str> = md.lines().skip(2).collect();
        assert_eq!(rows, ["| 10000 | 1.7105e-05 | --- |", "| 40000 | 4.1980e-06 | 2.03 |", "| 160000 | 1.0135e-06 | 2.05 |"]);
        assert_eq!(emit_table(&[], TableFormat::Csv), "DOF,E,Rate\n");
    }

    #[test]
    fn csv_round_trip() {
        let mut recs = records(&[(10000, 1.25e-3), (40000, 3.125e-4)], RateConvention::SqrtDof).unwrap();
        let text = emit_table(&recs, TableFormat::Csv);
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].error, 1.25e-3);
        assert_eq!(back[1].rate, Some(2.0));
        recs[0].active = Some(7);
        recs[1].active = Some(31);
        let back = parse_csv(&emit_table(&recs, TableFormat::Csv)).unwrap();
        assert_eq!(back[1].active, Some(31));
    }

    #[test]
    fn error_format() {
        assert_eq!(format_error(1.7105e-5), "1.7105e-05");
        assert_eq!(format_error(0.11178), "1.1178e-01");
        assert_eq!(format_error(12.5), "1.2500e+01");
    }
}
