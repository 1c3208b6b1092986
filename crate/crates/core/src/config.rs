//! JSON experiment descriptions and their resolution into solver inputs.
//!
//! A run config looks like
//!
//! ```json
//! {
//!   "name": "figplung",
//!   "preset": "ch",
//!   "scaling": { "mu": 0.2 },
//!   "grid": { "length": 10.0, "n": 4096 },
//!   "dt": "auto",
//!   "t_end": 8.0,
//!   "snapshots": { "count": 9 },
//!   "initial_profile": { "kind": "gaussian", "amplitude": 1.0, "sharpness": 100.0 }
//! }
//! ```
//!
//! Exactly one of `preset`, `family` or `coefficients` selects the equation.
//! `eps` defaults to `sqrt(mu)`, `mu0` and `big_m` to 1.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{StudyFamily, UFromZeta, STANDARD_MU_LIST};
use crate::breaking::CriterionMode;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::{CoefficientSet, ExactCoefficients, Preset, Rational, Scaling};
use crate::solver::{default_dt, InitialProfile, RunConfig, DEFAULT_STOP_ON_SLOPE};

/// Failure to turn a file into a usable config.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {field}: {source}")]
    Parse { path: String, field: String, source: serde_json::Error },
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: shown.clone(), source })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = match e.path().to_string() {
            p if p == "." => "<root>".to_string(),
            p => p,
        };
        ConfigError::Parse { path: shown, field, source: e.into_inner() }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default = "one")]
    pub mu0: f64,
    #[serde(default = "one")]
    pub big_m: f64,
}

fn one() -> f64 {
    1.0
}

impl ScalingSpec {
    pub fn resolve(&self) -> Result<Scaling> {
        Scaling::new(self.eps.unwrap_or(self.mu.sqrt()), self.mu, self.mu0, self.big_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub length: f64,
    pub n: usize,
    /// Left end of the periodic cell; `-length/2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<f64>,
}

impl GridSpec {
    pub fn resolve(&self) -> Result<Grid> {
        Grid::with_origin(self.length, self.n, self.origin.unwrap_or(-0.5 * self.length))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DtKeyword {
    Auto,
}

/// `"auto"` or an explicit positive step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtPolicy {
    Explicit(f64),
    Keyword(DtKeyword),
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Keyword(DtKeyword::Auto)
    }
}

/// Either `{"count": k}` (evenly spaced over `[0, t_end]`) or `{"times": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SnapshotSchedule {
    Count(usize),
    Times(Vec<f64>),
}

impl Default for SnapshotSchedule {
    fn default() -> Self {
        SnapshotSchedule::Count(9)
    }
}

impl SnapshotSchedule {
    pub fn times(&self, t_end: f64) -> Vec<f64> {
        match self {
            SnapshotSchedule::Count(0) => Vec::new(),
            SnapshotSchedule::Count(1) => vec![0.0],
            SnapshotSchedule::Count(k) => (0..*k).map(|i| t_end * i as f64 / (*k - 1) as f64).collect(),
            SnapshotSchedule::Times(t) => t.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    #[serde(default = "yes")]
    pub breaking: bool,
    #[serde(default)]
    pub criterion_mode: CriterionMode,
    /// Slope magnitude used for classification; defaults to `stop_on_slope`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Green-Naghdi residuals of every snapshot (needs a preset or family).
    #[serde(default)]
    pub residuals: bool,
    #[serde(default)]
    pub u_from_zeta: UFromZeta,
}

fn yes() -> bool {
    true
}

impl Default for Analysis {
    fn default() -> Self {
        Self { breaking: true, criterion_mode: CriterionMode::default(), threshold: None, residuals: false, u_from_zeta: UFromZeta::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<StudyFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<CoefficientSet>,
    pub scaling: ScalingSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub dt: DtPolicy,
    pub t_end: f64,
    #[serde(default)]
    pub snapshots: SnapshotSchedule,
    #[serde(default)]
    pub initial_profile: InitialProfile,
    #[serde(default)]
    pub asselin: f64,
    #[serde(default = "default_stop")]
    pub stop_on_slope: f64,
    #[serde(default)]
    pub linearized: bool,
    #[serde(default)]
    pub analysis: Analysis,
    /// Parent directory for the run directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn default_stop() -> f64 {
    DEFAULT_STOP_ON_SLOPE
}

/// Family a preset belongs to, when it has one.
pub fn preset_family(preset: Preset) -> Option<StudyFamily> {
    Some(match preset {
        Preset::CamassaHolm => StudyFamily::VelocityTwoParam { p: Rational::new(-1, 3), theta2: Rational::new(1, 2) },
        Preset::DegasperisProcesi => {
            StudyFamily::VelocityTwoParam { p: Rational::new(-77, 216), theta2: Rational::new(23, 36) }
        }
        Preset::SurfaceQ112 => StudyFamily::Surface { q: Rational::new(1, 12) },
        Preset::Velocity(p) => StudyFamily::Velocity { p: Rational(p) },
        Preset::Bbm(_) => return None,
    })
}

/// Coefficients as exact fractions, for manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactStrings {
    pub alpha: String,
    pub beta: String,
    pub gamma: String,
    pub delta: String,
    pub iota: String,
    pub kappa: String,
}

impl From<ExactCoefficients> for ExactStrings {
    fn from(c: ExactCoefficients) -> Self {
        Self {
            alpha: c.alpha.to_string(),
            beta: c.beta.to_string(),
            gamma: c.gamma.to_string(),
            delta: c.delta.to_string(),
            iota: c.iota.to_string(),
            kappa: c.kappa.to_string(),
        }
    }
}

/// Everything a run needs after defaults and shorthands are expanded.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    /// The input with every default filled in (explicit dt, times, eps, origin).
    pub effective: ExperimentSpec,
    pub run: RunConfig,
    pub family: Option<StudyFamily>,
    pub exact: Option<ExactCoefficients>,
    pub threshold: f64,
}

impl ExperimentSpec {
    pub fn resolve(&self) -> Result<Resolved> {
        let bad = |m: String| Error::InvalidParameter(m);
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(bad(format!("name {:?} is not a usable directory name", self.name)));
        }
        let (coeffs, family, exact) = match (&self.preset, &self.family, &self.coefficients) {
            (Some(p), None, None) => {
                let preset: Preset = p.parse()?;
                (preset.coefficients(), preset_family(preset), Some(preset.exact()))
            }
            (None, Some(f), None) => {
                let exact = exact_of_family(f)?;
                (exact.to_f64(), Some(*f), Some(exact))
            }
            (None, None, Some(c)) => (*c, None, None),
            _ => return Err(bad("give exactly one of preset, family or coefficients".into())),
        };
        let scaling = self.scaling.resolve()?;
        let grid = self.grid.resolve()?;
        let dt = match self.dt {
            DtPolicy::Keyword(DtKeyword::Auto) => default_dt(&grid, &coeffs, scaling.mu),
            DtPolicy::Explicit(dt) => dt,
        };
        let times = self.snapshots.times(self.t_end);
        let run = RunConfig {
            coeffs,
            scaling,
            grid,
            dt,
            t_end: self.t_end,
            snapshot_times: times.clone(),
            initial_profile: self.initial_profile,
            asselin: self.asselin,
            stop_on_slope: self.stop_on_slope,
            linearized: self.linearized,
        };
        run.validate()?;
        if self.analysis.residuals && family.is_none() {
            return Err(bad("residual analysis needs a preset or family with a known reconstruction".into()));
        }
        let threshold = self.analysis.threshold.unwrap_or(self.stop_on_slope);
        if !(threshold > 0.0) {
            return Err(bad(format!("analysis threshold must be positive, got {threshold}")));
        }
        let mut effective = self.clone();
        effective.scaling = ScalingSpec { eps: Some(scaling.eps), ..self.scaling };
        effective.grid.origin = Some(grid.origin);
        effective.dt = DtPolicy::Explicit(dt);
        effective.snapshots = SnapshotSchedule::Times(times);
        effective.analysis.threshold = Some(threshold);
        effective.output_dir = None;
        Ok(Resolved { effective, run, family, exact, threshold })
    }
}

fn exact_of_family(f: &StudyFamily) -> Result<ExactCoefficients> {
    use crate::params::{coeffs_surface_family, coeffs_velocity_family, coeffs_velocity_two_param};
    Ok(match *f {
        StudyFamily::Velocity { p } => coeffs_velocity_family(p.0),
        StudyFamily::VelocityTwoParam { p, theta2 } => coeffs_velocity_two_param(p.0, theta2.0)?,
        StudyFamily::Surface { q } => coeffs_surface_family(q.0),
    })
}

fn standard_mu_list() -> Vec<f64> {
    STANDARD_MU_LIST.to_vec()
}

/// Residual-order study over a list of `mu` with `eps = sqrt(mu)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualStudySpec {
    pub name: String,
    pub family: StudyFamily,
    pub grid: GridSpec,
    #[serde(default)]
    pub initial_profile: InitialProfile,
    #[serde(default)]
    pub t_probe: f64,
    #[serde(default = "standard_mu_list")]
    pub mu_list: Vec<f64>,
    #[serde(default)]
    pub u_from_zeta: UFromZeta,
    /// Replace the measured residuals by `mu^2`; checks the fitter alone.
    #[serde(default)]
    pub synthetic: bool,
}

/// Cartesian grid of overrides applied to a base run config.
///
/// Axis names: `amplitude`, `sharpness`, `mu`, `eps`, `n`, `length`, `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub name: String,
    pub base: ExperimentSpec,
    pub axes: BTreeMap<String, Vec<f64>>,
}

pub const SWEEP_AXES: [&str; 7] = ["amplitude", "sharpness", "mu", "eps", "n", "length", "t_end"];

/// One cell: its label and the values it takes on each axis, in axis order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub label: String,
    pub values: Vec<(String, f64)>,
    pub spec: ExperimentSpec,
}

impl SweepSpec {
    pub fn cells(&self) -> Result<Vec<SweepCell>> {
        if let Some(bad) = self.axes.keys().find(|k| !SWEEP_AXES.contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!(
                "unknown sweep axis {bad:?}; valid axes: {}",
                SWEEP_AXES.join(", ")
            )));
        }
        if self.axes.is_empty() || self.axes.values().any(Vec::is_empty) {
            return Err(Error::InvalidParameter("sweep grid is empty".into()));
        }
        let mut combos: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for (axis, vals) in &self.axes {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    vals.iter().map(move |&v| {
                        let mut c = c.clone();
                        c.push((axis.clone(), v));
                        c
                    })
                })
                .collect();
        }
        let width = combos.len().saturating_sub(1).to_string().len().max(3);
        combos
            .into_iter()
            .enumerate()
            .map(|(i, values)| {
                let label = format!("cell_{i:0width$}");
                let mut spec = self.base.clone();
                spec.name = label.clone();
                spec.output_dir = None;
                for (axis, v) in &values {
                    apply_axis(&mut spec, axis, *v)?;
                }
                Ok(SweepCell { label, values, spec })
            })
            .collect()
    }
}

fn apply_axis(spec: &mut ExperimentSpec, axis: &str, v: f64) -> Result<()> {
    match axis {
        "amplitude" | "sharpness" => {
            let InitialProfile::Gaussian { amplitude, sharpness, center } = spec.initial_profile else {
                return Err(Error::InvalidParameter(format!("axis {axis:?} needs a gaussian initial profile")));
            };
            spec.initial_profile = if axis == "amplitude" {
                InitialProfile::Gaussian { amplitude: v, sharpness, center }
            } else {
                InitialProfile::Gaussian { amplitude, sharpness: v, center }
            };
        }
        "mu" => spec.scaling.mu = v,
        "eps" => spec.scaling.eps = Some(v),
        "n" => {
            if !(v >= 0.0 && v.fract() == 0.0) {
                return Err(Error::InvalidParameter(format!("grid size {v} is not a whole number")));
            }
            spec.grid.n = v as usize;
        }
        "length" => spec.grid.length = v,
        "t_end" => spec.t_end = v,
        _ => unreachable!("axes are checked before application"),
    }
    Ok(())
}
