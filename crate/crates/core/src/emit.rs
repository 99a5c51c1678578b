//! Writing run and sweep results to disk.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::{CurveRow, RunReport};
use crate::sweep::SweepReport;
use crate::util::fmt_f64;

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// `angle_column` names the first column (`theta_deg` or `phi_deg`).
pub fn curve_csv(angle_column: &str, rows: &[CurveRow]) -> String {
    let mut out = format!("{angle_column},moment_theory,moment_estimated\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(r.angle_deg),
            opt(r.theory),
            fmt_f64(r.estimated)
        );
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| Error::config(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(path)
}

/// Writes `moment2.csv`, `moment4.csv`, `eye.csv` and `report.json`.
pub fn emit_run(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    Ok(vec![
        write(dir, "moment2.csv", &curve_csv("theta_deg", &report.moment2))?,
        write(dir, "moment4.csv", &curve_csv("phi_deg", &report.moment4))?,
        write(dir, "eye.csv", &report.eye.to_csv())?,
        write(dir, "report.json", &to_json(report)?)?,
    ])
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut out = String::from(
        "ratio,rep_rate_hz,trials,failures,gated_samples,\
         theta0_err_median_deg,theta0_err_iqr_deg,phi0_err_median_deg,phi0_err_iqr_deg,\
         corr_soi_median,corr_soi_iqr\n",
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.ratio),
            fmt_f64(r.rep_rate_hz),
            r.trials,
            r.failures,
            r.gated_samples,
            opt(r.theta0_error_deg.map(|s| s.median)),
            opt(r.theta0_error_deg.map(|s| s.iqr)),
            opt(r.phi0_error_deg.map(|s| s.median)),
            opt(r.phi0_error_deg.map(|s| s.iqr)),
            fmt_f64(r.corr_soi.median),
            fmt_f64(r.corr_soi.iqr),
        );
    }
    out
}

pub fn trials_csv(report: &SweepReport) -> String {
    let mut out = String::from(
        "ratio,trial,seed,status,gated_samples,theta0_err_deg,phi0_err_deg,corr_soi\n",
    );
    for t in &report.trials {
        let status = match (&t.status, &t.error) {
            (Some(s), _) => serde_json::to_value(s)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default(),
            (None, _) => "error".to_owned(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(t.ratio),
            t.trial,
            t.seed,
            status,
            t.gated_samples,
            opt(t.theta0_error_deg),
            opt(t.phi0_error_deg),
            fmt_f64(t.corr_soi),
        );
    }
    out
}

/// Writes `sweep.csv`, `trials.csv` and `sweep.json`.
pub fn emit_sweep(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    Ok(vec![
        write(dir, "sweep.csv", &sweep_csv(report))?,
        write(dir, "trials.csv", &trials_csv(report))?,
        write(dir, "sweep.json", &to_json(report)?)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_csv_leaves_missing_theory_blank() {
        let rows = [
            CurveRow {
                angle_deg: 0.0,
                theory: Some(1.5),
                estimated: 1.25,
            },
            CurveRow {
                angle_deg: 45.0,
                theory: None,
                estimated: 2.0,
            },
        ];
        let csv = curve_csv("theta_deg", &rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "theta_deg,moment_theory,moment_estimated");
        assert_eq!(
            lines[1],
            "0.0000000000000000e0,1.5000000000000000e0,1.2500000000000000e0"
        );
        assert_eq!(lines[2], "4.5000000000000000e1,,2.0000000000000000e0");
    }

    #[test]
    fn json_round_trips_floats() {
        let x = [0.1f64, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300];
        let back: Vec<f64> = serde_json::from_str(&to_json(&x).unwrap()).unwrap();
        assert_eq!(back, x);
    }
}
