//! Slope tracking, conserved functionals, the blow-up criterion and breaker classification.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm, spectral_diff, Field, NormKind};
use crate::params::Scaling;
use crate::solver::{RunResult, Termination};

/// Extremal slopes of one field and where they occur.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeSample {
    pub time: f64,
    pub max_slope: f64,
    pub argmax: f64,
    pub min_slope: f64,
    pub argmin: f64,
}

/// `(max, argmax, min, argmin)` of the centered first difference; first index wins ties.
pub(crate) fn extremes(u: &[f64], dx: f64) -> (f64, usize, f64, usize) {
    let n = u.len();
    let s = 0.5 / dx;
    let (mut hi, mut ihi, mut lo, mut ilo) = (f64::NEG_INFINITY, 0, f64::INFINITY, 0);
    for i in 0..n {
        let d = s * (u[(i + 1) % n] - u[(i + n - 1) % n]);
        if d > hi {
            hi = d;
            ihi = i;
        }
        if d < lo {
            lo = d;
            ilo = i;
        }
    }
    (hi, ihi, lo, ilo)
}

/// Grid max/min of `diff(field, 1)`. Ties go to the smallest `x`.
pub fn extremal_slopes(field: &Field) -> SlopeSample {
    let (max_slope, imax, min_slope, imin) = extremes(&field.values, field.grid.dx());
    SlopeSample { time: 0.0, max_slope, argmax: field.grid.x(imax), min_slope, argmin: field.grid.x(imin) }
}

/// `sum u^2 dx - mu beta sum (D+ u)^2 dx`, with the forward difference `D+`.
pub(crate) fn quadratic_invariant_values(u: &[f64], dx: f64, mu: f64, beta: f64) -> f64 {
    let n = u.len();
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..n {
        let d = u[(i + 1) % n] - u[i];
        a += u[i] * u[i];
        b += d * d;
    }
    a * dx - mu * beta * b / dx
}

pub fn quadratic_invariant(u: &Field, mu: f64, beta: f64) -> f64 {
    quadratic_invariant_values(&u.values, u.grid.dx(), mu, beta)
}

/// `int zeta^2 + (mu/12) zeta_x^2`.
pub fn invariant_i(zeta: &Field, mu: f64) -> f64 {
    quadratic_invariant(zeta, mu, -1.0 / 12.0)
}

/// `int zeta^2 + (mu/12) zeta_x^2 + zeta_xx^2 + (mu/12) zeta_xxx^2`, derivatives taken spectrally.
pub fn energy_e(zeta: &Field, mu: f64) -> f64 {
    let sq = |f: &Field| f.values.iter().map(|v| v * v).sum::<f64>() * f.grid.dx();
    let w = mu / 12.0;
    sq(zeta) + w * sq(&spectral_diff(zeta, 1)) + sq(&spectral_diff(zeta, 2)) + w * sq(&spectral_diff(zeta, 3))
}

/// Which supremum the blow-up criterion compares against its bound.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionMode {
    /// `(sup zeta0)^2`.
    #[default]
    SupZeta0,
    /// `(sup zeta0')^2`, the initial slope `M(0)`.
    SupZeta0Prime,
}

impl CriterionMode {
    pub fn other(self) -> Self {
        match self {
            CriterionMode::SupZeta0 => CriterionMode::SupZeta0Prime,
            CriterionMode::SupZeta0Prime => CriterionMode::SupZeta0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltCriterion {
    pub mode: CriterionMode,
    pub lhs: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub c0: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub mode: CriterionMode,
    pub m0: f64,
    pub t_lower: f64,
    pub t_upper: f64,
    /// The same comparison in the other mode.
    pub alternate: AltCriterion,
}

/// The five-term bound on the squared supremum.
pub fn criterion_rhs(c0: f64, eps: f64, mu: f64) -> f64 {
    let m34 = mu.powf(-0.75);
    (28.0 / 3.0) * c0 * m34
        + 0.5 * eps * c0.powf(1.5) * m34
        + 0.25 * eps * eps * c0 * c0 * m34
        + (7.0 / 3.0) * c0 / mu.sqrt()
        + (16.0 / 3.0) * c0.sqrt() * m34 / eps
}

pub fn blowup_criterion(zeta0: &Field, scaling: &Scaling, mode: CriterionMode) -> Result<CriterionReport> {
    if zeta0.values.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter("blow-up criterion needs a nonzero profile".into()));
    }
    let h1 = norm(zeta0, NormKind::Hs(1))?;
    let c0 = h1 * h1;
    let rhs = criterion_rhs(c0, scaling.eps, scaling.mu);
    let sup = zeta0.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let m0 = extremal_slopes(zeta0).max_slope;
    let lhs_of = |mode: CriterionMode| match mode {
        CriterionMode::SupZeta0 => sup * sup,
        CriterionMode::SupZeta0Prime => m0 * m0,
    };
    if !(m0 > 0.0) {
        return Err(Error::InvalidParameter(format!("initial max slope must be positive, got {m0}")));
    }
    let lhs = lhs_of(mode);
    let alt = mode.other();
    Ok(CriterionReport {
        c0,
        lhs,
        rhs,
        satisfied: lhs >= rhs,
        mode,
        m0,
        t_lower: 1.0 / (4.0 * scaling.eps * m0),
        t_upper: 4.0 / (scaling.eps * m0),
        alternate: AltCriterion { mode: alt, lhs: lhs_of(alt), satisfied: lhs_of(alt) >= rhs },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundVerdict {
    pub time: f64,
    pub m_prime: f64,
    pub lower: f64,
    pub upper: f64,
    pub tolerance: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl BoundVerdict {
    pub fn ok(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsCheck {
    pub verdicts: Vec<BoundVerdict>,
}

impl BoundsCheck {
    pub fn pass_fraction(&self) -> f64 {
        if self.verdicts.is_empty() {
            return 1.0;
        }
        self.verdicts.iter().filter(|v| v.ok()).count() as f64 / self.verdicts.len() as f64
    }

    pub fn all_ok(&self) -> bool {
        self.verdicts.iter().all(BoundVerdict::ok)
    }
}

pub const BOUNDS_ABS_TOL: f64 = 1e-9;

/// Compare centered `M'` against `(7/4) eps M^2 -/+ K` at every interior sample.
///
/// The band allows three times the second-difference estimate of the differencing error.
pub fn slope_ode_bounds_check(series: &[SlopeSample], scaling: &Scaling, c0: f64) -> BoundsCheck {
    let (eps, mu) = (scaling.eps, scaling.mu);
    let k = (14.0 * c0 * eps + 0.75 * eps * eps * c0.powf(1.5) + 0.375 * eps.powi(3) * c0 * c0 + 8.0 * c0.sqrt())
        * mu.powf(-0.75);
    let extra = 3.5 * eps * c0 / mu.sqrt();
    let verdicts = series
        .windows(3)
        .map(|w| {
            let (a, b, c) = (&w[0], &w[1], &w[2]);
            let span = c.time - a.time;
            let m_prime = (c.max_slope - a.max_slope) / span;
            let riccati = 1.75 * eps * b.max_slope * b.max_slope;
            let lower = riccati - k;
            let upper = riccati + k + extra;
            let tolerance = 3.0 * (c.max_slope - 2.0 * b.max_slope + a.max_slope).abs() / span + BOUNDS_ABS_TOL;
            BoundVerdict {
                time: b.time,
                m_prime,
                lower,
                upper,
                tolerance,
                lower_ok: m_prime >= lower - tolerance,
                upper_ok: m_prime <= upper + tolerance,
            }
        })
        .collect();
    BoundsCheck { verdicts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Breaker {
    Plunging,
    Surging,
    None,
}

impl fmt::Display for Breaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Breaker::Plunging => "Plunging",
            Breaker::Surging => "Surging",
            Breaker::None => "None",
        };
        f.write_str(s)
    }
}

/// First sample whose slope magnitude reaches `threshold`.
pub fn first_crossing(series: &[SlopeSample], threshold: f64) -> Option<f64> {
    series.iter().find(|s| s.max_slope.max(-s.min_slope) >= threshold).map(|s| s.time)
}

/// Plunging if the min slope crossed `threshold` first, surging if the max slope did.
///
/// Same-sample crossings go to the larger magnitude. A run that diverged without
/// crossing is judged by the dominant extreme of its last finite sample.
pub fn classify_breaker(result: &RunResult, threshold: f64) -> Breaker {
    if result.termination == Termination::Completed {
        return Breaker::None;
    }
    let dominant = |s: &SlopeSample| if -s.min_slope > s.max_slope { Breaker::Plunging } else { Breaker::Surging };
    let series = &result.slope_series;
    let up = series.iter().position(|s| s.max_slope >= threshold);
    let down = series.iter().position(|s| -s.min_slope >= threshold);
    match (up, down) {
        (Some(i), Some(j)) if i == j => dominant(&series[i]),
        (Some(i), Some(j)) => {
            if i < j {
                Breaker::Surging
            } else {
                Breaker::Plunging
            }
        }
        (Some(_), None) => Breaker::Surging,
        (None, Some(_)) => Breaker::Plunging,
        (None, None) => series.last().map(dominant).unwrap_or(Breaker::None),
    }
}

pub const SENSITIVITY_THRESHOLDS: [(&str, f64); 3] = [("1e3", 1e3), ("1e4", 1e4), ("1e5", 1e5)];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakingReport {
    pub classification: Breaker,
    pub detected_time: Option<f64>,
    pub bracket: [f64; 2],
    /// `detected_time` inside the bracket; null unless the criterion held and breaking was detected.
    pub bracket_ok: Option<bool>,
    pub below_upper: Option<bool>,
    pub above_lower: Option<bool>,
    pub criterion: CriterionReport,
    pub invariant_drift: f64,
    /// Drift restricted to the leading samples whose slopes stay below [`SMOOTH_SLOPE`].
    pub invariant_drift_smooth: f64,
    pub threshold_sensitivity: BTreeMap<String, Option<f64>>,
    pub termination: Termination,
}

/// Largest relative deviation of the invariant series from its first entry.
pub fn invariant_drift(series: &[f64]) -> f64 {
    let Some(&i0) = series.first() else { return 0.0 };
    if i0 == 0.0 {
        return 0.0;
    }
    series.iter().fold(0.0, |m, &v| m.max((v - i0).abs() / i0.abs()))
}

pub const SMOOTH_SLOPE: f64 = 10.0;

/// Invariant drift over the prefix of a run where `|u_x| < limit`.
pub fn smooth_window_drift(result: &RunResult, limit: f64) -> f64 {
    let len = result
        .slope_series
        .iter()
        .position(|s| s.max_slope.max(-s.min_slope) >= limit)
        .unwrap_or(result.slope_series.len());
    invariant_drift(&result.invariant_series[..len.min(result.invariant_series.len())])
}

pub fn breaking_report(
    result: &RunResult,
    initial: &Field,
    scaling: &Scaling,
    mode: CriterionMode,
    threshold: f64,
) -> Result<BreakingReport> {
    let criterion = blowup_criterion(initial, scaling, mode)?;
    let classification = classify_breaker(result, threshold);
    let detected_time = match classification {
        Breaker::None => None,
        _ => result.termination.time(),
    };
    let lower = |t: f64| t >= criterion.t_lower;
    let upper = |t: f64| t <= criterion.t_upper;
    let gate = |f: &dyn Fn(f64) -> bool| detected_time.filter(|_| criterion.satisfied).map(f);
    Ok(BreakingReport {
        classification,
        detected_time,
        bracket: [criterion.t_lower, criterion.t_upper],
        bracket_ok: gate(&|t| lower(t) && upper(t)),
        below_upper: gate(&upper),
        above_lower: gate(&lower),
        criterion,
        invariant_drift: invariant_drift(&result.invariant_series),
        invariant_drift_smooth: smooth_window_drift(result, SMOOTH_SLOPE),
        threshold_sensitivity: SENSITIVITY_THRESHOLDS
            .iter()
            .map(|&(k, t)| (k.to_string(), first_crossing(&result.slope_series, t)))
            .collect(),
        termination: result.termination,
    })
}

/// Scale a profile up until the criterion holds in `mode`; returns the amplitude factor.
pub fn amplitude_for_criterion(zeta0: &Field, scaling: &Scaling, mode: CriterionMode) -> Result<f64> {
    let mut a = 1.0;
    for _ in 0..200 {
        let z = zeta0.map(|v| a * v);
        if blowup_criterion(&z, scaling, mode)?.satisfied {
            return Ok(a);
        }
        a *= 1.25;
    }
    Err(Error::InvalidParameter("no amplitude up to 1.25^200 satisfies the criterion".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn sine(n: usize) -> Field {
        Field::from_fn(Grid::with_origin(2.0 * PI, n, 0.0).unwrap(), f64::sin)
    }

    #[test]
    fn extremal_slopes_examples() {
        let g = Grid::new(3.0, 64).unwrap();
        let c = extremal_slopes(&Field::from_fn(g, |_| 1.0));
        assert_eq!((c.max_slope, c.argmax, c.min_slope, c.argmin), (0.0, g.x(0), 0.0, g.x(0)));

        let s = extremal_slopes(&sine(256));
        assert!((s.max_slope - 1.0).abs() < 1e-3 && s.argmax.abs() < 1e-12);
        assert!((s.min_slope + 1.0).abs() < 1e-3 && (s.argmin - PI).abs() < 1e-12);

        let g = Grid::new(2.0, 4096).unwrap();
        let s = extremal_slopes(&Field::from_fn(g, |x| (-100.0 * x * x).exp()));
        let x0 = -1.0 / 200f64.sqrt();
        let peak = 200f64.sqrt() * (-0.5f64).exp();
        assert!((s.max_slope - peak).abs() < 1e-3 * peak);
        assert!((s.argmax - x0).abs() <= 2.0 * g.dx());
        assert!((s.argmin + x0).abs() <= 2.0 * g.dx());
    }

    #[test]
    fn functional_examples() {
        let z = Field::zeros(Grid::new(1.0, 16).unwrap());
        assert_eq!(invariant_i(&z, 0.2), 0.0);
        assert_eq!(energy_e(&z, 0.2), 0.0);
        let s = sine(512);
        assert!((invariant_i(&s, 0.2) - PI * (1.0 + 1.0 / 60.0)).abs() < 1e-5);
        assert!((energy_e(&s, 0.2) - 2.0 * PI * (1.0 + 1.0 / 60.0)).abs() < 1e-10);
    }

    #[test]
    fn criterion_examples() {
        let scaling = Scaling::camassa_holm(0.2).unwrap();
        let g = Grid::new(8.0, 4096).unwrap();
        assert!(blowup_criterion(&Field::zeros(g), &scaling, CriterionMode::SupZeta0).is_err());

        let a = 3.0;
        let z = Field::from_fn(g, |x| a * (-100.0 * x * x).exp());
        let rep = blowup_criterion(&z, &scaling, CriterionMode::SupZeta0).unwrap();
        let c0 = a * a * 101.0 * (PI / 200.0).sqrt();
        assert!((rep.c0 - c0).abs() < 1e-10 * c0);
        assert!((rep.lhs - 9.0).abs() < 1e-12);
        assert!(!rep.satisfied);
        assert_eq!(rep.t_upper / rep.t_lower, 16.0);
        assert_eq!(rep.alternate.mode, CriterionMode::SupZeta0Prime);

        let doubled = blowup_criterion(&z.map(|v| 2.0 * v), &scaling, CriterionMode::SupZeta0).unwrap();
        assert!((doubled.lhs - 4.0 * rep.lhs).abs() < 1e-12 * doubled.lhs);
        assert!((doubled.c0 - 4.0 * rep.c0).abs() < 1e-10 * doubled.c0);
        assert!((doubled.rhs - criterion_rhs(4.0 * rep.c0, scaling.eps, scaling.mu)).abs() < 1e-9 * doubled.rhs);
    }

    #[test]
    fn bracket_example() {
        // M(0) = 1, eps = 0.4
        let scaling = Scaling::new(0.4, 0.2, 1.0, 1.0).unwrap();
        let g = Grid::with_origin(2.0 * PI, 1 << 16, 0.0).unwrap();
        let rep = blowup_criterion(&Field::from_fn(g, f64::sin), &scaling, CriterionMode::SupZeta0Prime).unwrap();
        assert!((rep.t_lower - 0.625).abs() < 1e-8);
        assert!((rep.t_upper - 10.0).abs() < 1e-7);
    }

    fn riccati(m0: f64, eps: f64, dt: f64, steps: usize) -> Vec<SlopeSample> {
        (0..steps)
            .map(|i| {
                let t = i as f64 * dt;
                let m = m0 / (1.0 - 1.75 * eps * m0 * t);
                SlopeSample { time: t, max_slope: m, argmax: 0.0, min_slope: -m, argmin: 0.0 }
            })
            .collect()
    }

    #[test]
    fn bounds_check_examples() {
        let scaling = Scaling::camassa_holm(0.2).unwrap();
        let flat: Vec<SlopeSample> = (0..10)
            .map(|i| SlopeSample { time: i as f64 * 0.1, max_slope: 0.5, argmax: 0.0, min_slope: -0.5, argmin: 0.0 })
            .collect();
        assert!(slope_ode_bounds_check(&flat, &scaling, 1.0).all_ok());
        let r = riccati(2.0, scaling.eps, 1e-3, 500);
        let check = slope_ode_bounds_check(&r, &scaling, 0.0);
        assert_eq!(check.verdicts.len(), 498);
        assert!(check.all_ok());
        // a series growing faster than Riccati violates the upper bound when C0 = 0
        let fast: Vec<SlopeSample> = r.iter().map(|s| SlopeSample { max_slope: s.max_slope * (1.0 + s.time), ..*s }).collect();
        assert!(!slope_ode_bounds_check(&fast, &scaling, 0.0).all_ok());
    }

    fn fake_result(series: Vec<SlopeSample>, termination: Termination) -> RunResult {
        let g = Grid::new(1.0, 8).unwrap();
        RunResult {
            snapshots: vec![],
            invariant_series: vec![1.0; series.len()],
            slope_series: series,
            termination,
            final_field: Field::zeros(g),
            dt: 0.1,
            steps: 0,
        }
    }

    fn s(t: f64, hi: f64, lo: f64) -> SlopeSample {
        SlopeSample { time: t, max_slope: hi, argmax: 0.0, min_slope: lo, argmin: 0.0 }
    }

    #[test]
    fn classification_rules() {
        let stop = Termination::SlopeStop { time: 0.2 };
        let r = fake_result(vec![s(0.0, 1.0, -1.0), s(0.1, 10.0, -200.0)], stop);
        assert_eq!(classify_breaker(&r, 100.0), Breaker::Plunging);
        let r = fake_result(vec![s(0.0, 1.0, -1.0), s(0.1, 300.0, -200.0)], stop);
        assert_eq!(classify_breaker(&r, 100.0), Breaker::Surging);
        let r = fake_result(vec![s(0.0, 1.0, -1.0), s(0.1, 150.0, -20.0), s(0.2, 150.0, -900.0)], stop);
        assert_eq!(classify_breaker(&r, 100.0), Breaker::Surging);
        let r = fake_result(vec![s(0.0, 1.0, -1.0), s(0.1, 150.0, -20.0)], Termination::Completed);
        assert_eq!(classify_breaker(&r, 100.0), Breaker::None);
        let r = fake_result(vec![s(0.0, 1.0, -1.0), s(0.1, 5.0, -20.0)], Termination::Diverged { time: 0.2 });
        assert_eq!(classify_breaker(&r, 100.0), Breaker::Plunging);
        assert_eq!(first_crossing(&r.slope_series, 10.0), Some(0.1));
        assert_eq!(first_crossing(&r.slope_series, 1e3), None);
    }

    #[test]
    fn drift_is_relative() {
        assert!((invariant_drift(&[2.0, 2.002, 1.999]) - 1e-3).abs() < 1e-12);
        assert_eq!(invariant_drift(&[]), 0.0);
    }
}
