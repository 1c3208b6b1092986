//! Runs, residual studies and sweeps, with all file emission.
//!
//! Layout: `<out>/<name>/manifest.json`, `snap_*.csv`, `slopes.csv`,
//! `breaking.json`, `residuals.csv` (and `order.json` / `summary.csv` for
//! studies and sweeps).

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{
    consistency_order, fit_exponent, residual_of_field, OrderStudy, ResidualReport, StudySetup,
};
use crate::breaking::{
    breaking_report, invariant_drift, slope_ode_bounds_check, smooth_window_drift, Breaker, BreakingReport,
    SMOOTH_SLOPE,
};
use crate::config::{
    ConfigError, ExactStrings, ExperimentSpec, ResidualStudySpec, Resolved, SweepCell, SweepSpec,
};
use crate::error::Error;
use crate::grid::Field;
use crate::output::{csv_line, fmt_float, snapshot_name, to_json};
use crate::params::{classify, Classification, CoefficientSet, Scaling};
use crate::solver::{self, RunResult, Termination};

pub const THREADS_ENV: &str = "WAVELAB_THREADS";
pub const SLOPES_HEADER: &str = "t,max_slope,argmax,min_slope,argmin,invariant";

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Model(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Usage(String),
}

impl AppError {
    /// 2 for anything wrong with the inputs, 1 for failures while computing or writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Usage(_) => 2,
            AppError::Model(Error::AtMu { .. } | Error::Diverged { .. }) | AppError::Io { .. } => 1,
            AppError::Model(_) => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> AppError + '_ {
    move |source| AppError::Io { path: path.display().to_string(), source }
}

fn write_file(path: &Path, contents: &str) -> Result<(), AppError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Create the run directory and drop files a previous run may have left behind.
fn prepare_dir(dir: &Path) -> Result<(), AppError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let stale = (name.starts_with("snap_") && name.ends_with(".csv"))
            || matches!(name.as_str(), "breaking.json" | "residuals.csv" | "order.json" | "summary.csv");
        if stale && entry.path().is_file() {
            fs::remove_file(entry.path()).map_err(io_err(&entry.path()))?;
        }
    }
    Ok(())
}

fn write_field(path: &Path, field: &Field) -> Result<(), AppError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    field.write_csv(&mut w, "u").and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn slopes_csv(result: &RunResult) -> String {
    let mut out = String::with_capacity(64 * result.slope_series.len());
    out.push_str(SLOPES_HEADER);
    out.push('\n');
    for (s, inv) in result.slope_series.iter().zip(&result.invariant_series) {
        out.push_str(&csv_line(
            [s.time, s.max_slope, s.argmax, s.min_slope, s.argmin, *inv].map(fmt_float),
        ));
    }
    out
}

pub fn residuals_csv(rows: &[ResidualReport]) -> String {
    let mut out = String::from(ResidualReport::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsSummary {
    pub checked: usize,
    pub passed: usize,
    pub pass_fraction: f64,
    pub all_ok: bool,
}

/// Contents of `breaking.json`.
#[derive(Debug, Clone, Serialize)]
pub struct BreakingFile {
    #[serde(flatten)]
    pub report: BreakingReport,
    pub threshold: f64,
    pub bounds_check: BoundsSummary,
}

#[derive(Debug, Clone, Serialize)]
struct SeriesSummary {
    samples: usize,
    final_time: f64,
    max_slope: f64,
    min_slope: f64,
    invariant_initial: f64,
    invariant_final: f64,
    invariant_drift: f64,
    invariant_drift_smooth: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    name: &'a str,
    version: &'static str,
    effective: &'a ExperimentSpec,
    coefficients: CoefficientSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_coefficients: Option<ExactStrings>,
    classification: Classification,
    scaling: Scaling,
    dt: f64,
    steps: usize,
    termination: Termination,
    snapshots: Vec<SnapshotEntry>,
    series: SeriesSummary,
    files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct SnapshotEntry {
    file: String,
    time: f64,
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub resolved: Resolved,
    pub result: RunResult,
    pub breaking: Option<BreakingFile>,
    pub residuals: Vec<ResidualReport>,
}

impl RunOutcome {
    pub fn classification(&self) -> Option<Breaker> {
        self.breaking.as_ref().map(|b| b.report.classification)
    }
}

/// Resolve, integrate, analyse and write one run to `<parent>/<name>`.
pub fn execute_run(spec: &ExperimentSpec, parent: &Path) -> Result<RunOutcome, AppError> {
    let resolved = spec.resolve()?;
    let dir = parent.join(&resolved.effective.name);
    let result = solver::run(&resolved.run)?;
    let analysis = resolved.effective.analysis;
    let scaling = resolved.run.scaling;

    let mut fields: Vec<(f64, &Field)> = result.snapshots.iter().map(|s| (s.time, &s.field)).collect();
    let final_time = result.slope_series.last().map_or(0.0, |s| s.time);
    if fields.last().is_none_or(|(t, _)| *t != final_time) {
        fields.push((final_time, &result.final_field));
    }

    let breaking = if analysis.breaking {
        let initial = resolved.run.initial_profile.sample(resolved.run.grid);
        let report = breaking_report(&result, &initial, &scaling, analysis.criterion_mode, resolved.threshold)?;
        let check = slope_ode_bounds_check(&result.slope_series, &scaling, report.criterion.c0);
        let passed = check.verdicts.iter().filter(|v| v.ok()).count();
        let bounds_check = BoundsSummary {
            checked: check.verdicts.len(),
            passed,
            pass_fraction: check.pass_fraction(),
            all_ok: check.all_ok(),
        };
        Some(BreakingFile { report, threshold: resolved.threshold, bounds_check })
    } else {
        None
    };

    let residuals = match (analysis.residuals, &resolved.family) {
        (true, Some(family)) => fields
            .iter()
            .map(|(t, f)| {
                residual_of_field(family, f, &scaling, analysis.u_from_zeta, *t).map_err(|e| {
                    Error::InvalidParameter(format!("residual of the snapshot at t = {}: {e}", fmt_float(*t)))
                })
            })
            .collect::<Result<Vec<_>, _>>()?,
        _ => Vec::new(),
    };

    prepare_dir(&dir)?;
    let mut files = Vec::new();
    let mut snapshots = Vec::new();
    for (i, (t, field)) in fields.iter().enumerate() {
        let name = snapshot_name(i, *t);
        write_field(&dir.join(&name), field)?;
        snapshots.push(SnapshotEntry { file: name.clone(), time: *t });
        files.push(name);
    }
    write_file(&dir.join("slopes.csv"), &slopes_csv(&result))?;
    files.push("slopes.csv".into());
    if let Some(b) = &breaking {
        write_file(&dir.join("breaking.json"), &to_json(b))?;
        files.push("breaking.json".into());
    }
    if analysis.residuals {
        write_file(&dir.join("residuals.csv"), &residuals_csv(&residuals))?;
        files.push("residuals.csv".into());
    }

    let slopes = &result.slope_series;
    let inv = &result.invariant_series;
    let manifest = Manifest {
        name: &resolved.effective.name,
        version: env!("CARGO_PKG_VERSION"),
        effective: &resolved.effective,
        coefficients: resolved.run.coeffs,
        exact_coefficients: resolved.exact.map(ExactStrings::from),
        classification: classify(&resolved.run.coeffs),
        scaling,
        dt: resolved.run.dt,
        steps: result.steps,
        termination: result.termination,
        snapshots,
        series: SeriesSummary {
            samples: slopes.len(),
            final_time,
            max_slope: slopes.iter().map(|s| s.max_slope).fold(f64::NEG_INFINITY, f64::max),
            min_slope: slopes.iter().map(|s| s.min_slope).fold(f64::INFINITY, f64::min),
            invariant_initial: inv.first().copied().unwrap_or(0.0),
            invariant_final: inv.last().copied().unwrap_or(0.0),
            invariant_drift: invariant_drift(inv),
            invariant_drift_smooth: smooth_window_drift(&result, SMOOTH_SLOPE),
        },
        files,
    };
    write_file(&dir.join("manifest.json"), &to_json(&manifest))?;
    Ok(RunOutcome { dir, resolved, result, breaking, residuals })
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderPointOut {
    pub mu: f64,
    pub eps: f64,
    pub residual: f64,
}

/// Contents of `order.json`.
#[derive(Debug, Clone, Serialize)]
pub struct OrderFile {
    pub exponent: f64,
    pub points: Vec<OrderPointOut>,
}

#[derive(Debug, Clone, Serialize)]
struct StudyManifest<'a> {
    name: &'a str,
    version: &'static str,
    study: &'a ResidualStudySpec,
    synthetic: bool,
    files: [&'static str; 2],
}

/// `mu^2` at every point, so the fitted exponent is 2 up to rounding.
fn synthetic_study(mu_list: &[f64]) -> Result<OrderStudy, Error> {
    if mu_list.len() < 3 {
        return Err(Error::TooFewPoints { need: 3, got: mu_list.len() });
    }
    let points: Vec<_> = mu_list
        .iter()
        .map(|&mu| {
            let residual = mu * mu;
            let eps = mu.sqrt();
            let report = ResidualReport {
                mu,
                eps,
                time: 0.0,
                r1_l2: 1.0,
                r1_sup: 1.0,
                r2_l2: 0.0,
                r2_sup: 0.0,
                r1_l2_raw: residual,
                r1_sup_raw: residual,
                r2_l2_raw: 0.0,
                r2_sup_raw: 0.0,
            };
            crate::asymptotics::OrderPoint { mu, eps, residual, report }
        })
        .collect();
    let exponent = fit_exponent(&points.iter().map(|p| (p.mu, p.residual)).collect::<Vec<_>>())?;
    Ok(OrderStudy { exponent, points })
}

pub fn execute_residual_study(
    spec: &ResidualStudySpec,
    parent: &Path,
    force_synthetic: bool,
) -> Result<(PathBuf, OrderFile), AppError> {
    let synthetic = spec.synthetic || force_synthetic;
    let study = if synthetic {
        synthetic_study(&spec.mu_list)?
    } else {
        let setup = StudySetup {
            family: spec.family,
            grid: spec.grid.resolve()?,
            initial_profile: spec.initial_profile,
            t_probe: spec.t_probe,
            u_from_zeta: spec.u_from_zeta,
        };
        consistency_order(&setup, &spec.mu_list)?
    };
    let dir = parent.join(&spec.name);
    prepare_dir(&dir)?;
    let order = OrderFile {
        exponent: study.exponent,
        points: study.points.iter().map(|p| OrderPointOut { mu: p.mu, eps: p.eps, residual: p.residual }).collect(),
    };
    write_file(&dir.join("order.json"), &to_json(&order))?;
    let rows: Vec<_> = study.points.iter().map(|p| p.report).collect();
    write_file(&dir.join("residuals.csv"), &residuals_csv(&rows))?;
    let manifest = StudyManifest {
        name: &spec.name,
        version: env!("CARGO_PKG_VERSION"),
        study: spec,
        synthetic,
        files: ["order.json", "residuals.csv"],
    };
    write_file(&dir.join("manifest.json"), &to_json(&manifest))?;
    Ok((dir, order))
}

/// Thread count from `--threads`, else `WAVELAB_THREADS`, else rayon's default (`None`).
pub fn thread_count(cli: Option<usize>) -> Result<Option<usize>, AppError> {
    if cli.is_some() {
        return Ok(cli);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| AppError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        _ => Ok(None),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub termination: Termination,
    pub classification: Option<Breaker>,
    pub detected_time: Option<f64>,
    pub bracket_ok: Option<bool>,
}

/// One row of `summary.csv`; failed cells keep their error message.
#[derive(Debug, Clone)]
pub struct CellSummary {
    pub cell: SweepCell,
    pub outcome: Result<CellResult, String>,
}

fn opt_float(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

pub fn summary_csv(axes: &[String], rows: &[CellSummary]) -> String {
    let mut out = csv_line(
        ["cell".to_string()]
            .into_iter()
            .chain(axes.iter().cloned())
            .chain(["termination", "termination_time", "classification", "detected_time", "bracket_ok", "error"].map(String::from)),
    );
    for row in rows {
        let mut cells = vec![row.cell.label.clone()];
        cells.extend(row.cell.values.iter().map(|(_, v)| fmt_float(*v)));
        match &row.outcome {
            Ok(r) => cells.extend([
                r.termination.label().to_string(),
                opt_float(r.termination.time()),
                r.classification.map(|c| c.to_string()).unwrap_or_default(),
                opt_float(r.detected_time),
                r.bracket_ok.map(|b| b.to_string()).unwrap_or_default(),
                String::new(),
            ]),
            Err(msg) => cells.extend([
                "error".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                msg.replace([',', '\n', '\r'], ";"),
            ]),
        }
        out.push_str(&csv_line(cells));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct SweepManifest<'a> {
    name: &'a str,
    version: &'static str,
    sweep: &'a SweepSpec,
    cells: Vec<&'a str>,
}

/// Run every cell on a rayon pool; per-cell failures land in the summary.
pub fn execute_sweep(spec: &SweepSpec, parent: &Path, threads: Option<usize>) -> Result<(PathBuf, Vec<CellSummary>), AppError> {
    let cells = spec.cells()?;
    let dir = parent.join(&spec.name);
    prepare_dir(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| AppError::Usage(format!("cannot start thread pool: {e}")))?;
    let rows: Vec<CellSummary> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let outcome = execute_run(&cell.spec, &dir)
                    .map(|o| {
                        let b = o.breaking.as_ref();
                        CellResult {
                            termination: o.result.termination,
                            classification: b.map(|b| b.report.classification),
                            detected_time: b.and_then(|b| b.report.detected_time),
                            bracket_ok: b.and_then(|b| b.report.bracket_ok),
                        }
                    })
                    .map_err(|e| e.to_string());
                CellSummary { cell: cell.clone(), outcome }
            })
            .collect()
    });
    let axes: Vec<String> = spec.axes.keys().cloned().collect();
    write_file(&dir.join("summary.csv"), &summary_csv(&axes, &rows))?;
    let manifest = SweepManifest {
        name: &spec.name,
        version: env!("CARGO_PKG_VERSION"),
        sweep: spec,
        cells: cells.iter().map(|c| c.label.as_str()).collect(),
    };
    write_file(&dir.join("manifest.json"), &to_json(&manifest))?;
    Ok((dir, rows))
}
