//! Convergence experiments across an n-schedule and their CSV output.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Engine, ExperimentConfig};
use crate::error::{Error, Result};
use crate::gpde::{solve_diag_2d, solve_terminal, PdeGrid1D};
use crate::payoffs::{PathPayoff, PayoffKind};
use crate::strong_walk::strong_dp_value;
use crate::uncertainty_set::UncertaintySet;
use crate::weak_dp;

pub const CSV_HEADER: &str = "n,weak_value,strong_value,pde_reference,weak_abs_err,strong_abs_err,gap,runtime_ms";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub weak_value: Option<f64>,
    pub strong_value: Option<f64>,
    pub pde_reference: Option<f64>,
    pub weak_abs_err: Option<f64>,
    pub strong_abs_err: Option<f64>,
    /// `weak_value - strong_value`.
    pub gap: Option<f64>,
    pub runtime_ms: Option<f64>,
    /// Engine failure for this n, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub metadata: ReportMetadata,
    /// Whether `runtime_ms` is written to CSV. Off by default so that reruns
    /// produce identical bytes.
    pub timings: bool,
}

impl ConvergenceReport {
    /// Rows whose gap falls below `-tol`, which the inclusion of strong laws
    /// in weak laws forbids.
    pub fn sandwich_violations(&self, tol: f64) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| r.gap.is_some_and(|g| g < -tol))
            .map(|r| r.n)
            .collect()
    }

    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }
}

/// Continuous-time reference for Markovian terminal payoffs: the 1d scheme,
/// or the 2d scheme on diagonal hulls. `None` when no PDE applies.
pub fn pde_reference(payoff: &PathPayoff, set: &UncertaintySet, horizon: f64, points_per_sd: f64) -> Result<Option<f64>> {
    if payoff.kind() != PayoffKind::Terminal {
        return Ok(None);
    }
    match payoff.dim() {
        1 => {
            let grid = PdeGrid1D::auto(set, horizon, points_per_sd)?;
            Ok(Some(solve_terminal(payoff.function(), set, &grid)?.value_at_origin))
        }
        2 if set.is_diagonal() => Ok(Some(solve_diag_2d(payoff.function(), set, horizon, None)?)),
        _ => Ok(None),
    }
}

fn run_row(cfg: &ExperimentConfig, payoff: &PathPayoff, set: &UncertaintySet, n: usize, pde: Option<f64>) -> ConvergenceRow {
    let start = Instant::now();
    let mut row = ConvergenceRow {
        n,
        weak_value: None,
        strong_value: None,
        pde_reference: pde,
        weak_abs_err: None,
        strong_abs_err: None,
        gap: None,
        runtime_ms: None,
        error: None,
    };
    let mut errors = Vec::new();
    if cfg.runs(Engine::Weak) {
        match weak_dp::evaluate(payoff, set, n, cfg.horizon, &cfg.weak_config(false)) {
            Ok(r) => row.weak_value = Some(r.value),
            Err(e) => errors.push(format!("weak: {e}")),
        }
    }
    if cfg.runs(Engine::Strong) {
        match strong_dp_value(payoff, set, n, cfg.horizon, &cfg.strong_config(false)) {
            Ok(r) => row.strong_value = Some(r.value),
            Err(e) => errors.push(format!("strong: {e}")),
        }
    }
    row.weak_abs_err = row.weak_value.zip(pde).map(|(w, p)| (w - p).abs());
    row.strong_abs_err = row.strong_value.zip(pde).map(|(s, p)| (s - p).abs());
    row.gap = row.weak_value.zip(row.strong_value).map(|(w, s)| w - s);
    if cfg.timings {
        row.runtime_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

/// Runs the configured engines for every n of the schedule. n-levels run
/// concurrently; rows come back in schedule order. Engine failures are kept
/// as flagged rows.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let set = cfg.uncertainty_set()?;
    let payoff = cfg.payoff()?;
    let pde = if cfg.runs(Engine::Pde) {
        pde_reference(&payoff, &set, cfg.horizon, cfg.pde.points_per_sd)?
    } else {
        None
    };
    let rows = cfg
        .n_schedule
        .par_iter()
        .map(|&n| run_row(cfg, &payoff, &set, n, pde))
        .collect();
    Ok(ConvergenceReport {
        rows,
        metadata: ReportMetadata {
            config_hash: cfg.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
        },
        timings: cfg.timings,
    })
}

/// Decimal rendering with 10 significant digits.
pub fn format_sig10(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (9 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".into()
        } else {
            t.to_string()
        }
    } else {
        s
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(format_sig10).unwrap_or_default()
}

/// The CSV text of a report: header plus one line per row, LF endings.
pub fn csv_string(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    let mut rows: Vec<&ConvergenceRow> = report.rows.iter().collect();
    rows.sort_by_key(|r| r.n);
    for r in rows {
        let runtime = if report.timings { cell(r.runtime_ms) } else { String::new() };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n,
            cell(r.weak_value),
            cell(r.strong_value),
            cell(r.pde_reference),
            cell(r.weak_abs_err),
            cell(r.strong_abs_err),
            cell(r.gap),
            runtime
        );
    }
    out
}

pub fn emit_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(report)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig10(4.0), "4");
        assert_eq!(format_sig10(0.7978845608028654), "0.7978845608");
        assert_eq!(format_sig10(-1.0), "-1");
        assert_eq!(format_sig10(123456.78912345), "123456.7891");
        assert_eq!(format_sig10(1.5e-7), "0.00000015");
        assert_eq!(format_sig10(0.0), "0");
    }

    #[test]
    fn missing_values_are_empty_cells() {
        let report = ConvergenceReport {
            rows: (0..3)
                .map(|i| ConvergenceRow {
                    n: 4 << i,
                    weak_value: Some(1.0),
                    strong_value: None,
                    pde_reference: None,
                    weak_abs_err: None,
                    strong_abs_err: None,
                    gap: None,
                    runtime_ms: Some(3.0),
                    error: None,
                })
                .collect(),
            metadata: ReportMetadata {
                config_hash: String::new(),
                version: String::new(),
                seed: 0,
            },
            timings: false,
        };
        let text = csv_string(&report);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "4,1,,,,,,");
        assert!(!text.contains('\r'));
    }
}
