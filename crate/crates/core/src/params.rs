//! Scalings, coefficient families and their classification.
//!
//! The unidirectional models integrated by this crate all have the form
//!
//! ```text
//! u_t + u_x + 3/2 eps u u_x + eps^2 iota u^2 u_x + eps^3 kappa u^3 u_x
//!     + mu (alpha u_xxx + beta u_xxt) = eps mu (gamma u u_xxx + delta u_x u_xx)
//! ```
//!
//! Family formulas are evaluated in exact rational arithmetic so the
//! classification predicates (which are exact equalities) can be decided
//! without rounding. Floating [`CoefficientSet`]s are what the solver consumes.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when classifying floating coefficient sets.
pub const CLASSIFY_TOL: f64 = 1e-12;

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn to_f64(q: Rational64) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Parse `"-1/12"`, `"3"` or a finite decimal such as `"0.25"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational64> {
    let s = text.trim();
    let bad = || Error::InvalidParameter(format!("cannot parse {text:?} as a rational number"));
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| bad())?;
        let d: i64 = den.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(n, d));
    }
    if let Ok(n) = s.parse::<i64>() {
        return Ok(Rational64::from_integer(n));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').ok_or_else(bad)?;
    if frac_part.len() > 15 || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let int: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
    let frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
    let scale = 10i64.pow(frac_part.len() as u32);
    let q = Rational64::from_integer(int) + Rational64::new(frac, scale);
    Ok(if neg { -q } else { q })
}

/// Exact rational for configs: serialises as `"n/d"`, deserialises from a string or an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational(pub Rational64);

impl Rational {
    pub fn new(n: i64, d: i64) -> Self {
        Rational(r(n, d))
    }

    pub fn to_f64(self) -> f64 {
        to_f64(self.0)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_rational(s).map(Rational)
    }
}

impl Serialize for Rational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Rational(Rational64::from_integer(n))),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Dimensionless amplitude/shallowness pair together with the admissible set it lives in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub eps: f64,
    pub mu: f64,
    pub mu0: f64,
    pub big_m: f64,
}

impl Scaling {
    /// Validate `(eps, mu)` against `{mu in (0, mu0), eps <= M sqrt(mu)}`.
    pub fn new(eps: f64, mu: f64, mu0: f64, big_m: f64) -> Result<Self> {
        let fail = |reason: String| Error::Inadmissible { eps, mu, mu0, big_m, reason };
        for (name, v) in [("eps", eps), ("mu", mu), ("mu0", mu0), ("M", big_m)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(fail(format!("{name} must be finite and positive")));
            }
        }
        if mu >= mu0 {
            return Err(fail(format!("mu = {mu} is not below mu0 = {mu0}")));
        }
        let bound = big_m * mu.sqrt();
        if eps > bound * (1.0 + 1e-12) {
            return Err(fail(format!("eps = {eps} exceeds M*sqrt(mu) = {bound}")));
        }
        Ok(Self { eps, mu, mu0, big_m })
    }

    /// The Camassa-Holm scaling `eps = sqrt(mu)` with `mu0 = M = 1`.
    pub fn camassa_holm(mu: f64) -> Result<Self> {
        Self::new(mu.sqrt(), mu, 1.0, 1.0)
    }
}

/// Free-function form of [`Scaling::new`].
pub fn make_scaling(eps: f64, mu: f64, mu0: f64, big_m: f64) -> Result<Scaling> {
    Scaling::new(eps, mu, mu0, big_m)
}

/// Floating coefficients `(alpha, beta, gamma, delta, iota, kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    #[serde(default)]
    pub iota: f64,
    #[serde(default)]
    pub kappa: f64,
}

impl CoefficientSet {
    /// The leapfrog/Crank-Nicolson scheme needs a strictly negative `beta`.
    pub fn solver_admissible(&self) -> bool {
        self.beta < 0.0
    }

    pub fn classify(&self) -> Classification {
        classify(self)
    }
}

/// Exact rational coefficients, as produced by the family formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactCoefficients {
    pub alpha: Rational64,
    pub beta: Rational64,
    pub gamma: Rational64,
    pub delta: Rational64,
    pub iota: Rational64,
    pub kappa: Rational64,
}

impl ExactCoefficients {
    pub fn to_f64(&self) -> CoefficientSet {
        CoefficientSet {
            alpha: to_f64(self.alpha),
            beta: to_f64(self.beta),
            gamma: to_f64(self.gamma),
            delta: to_f64(self.delta),
            iota: to_f64(self.iota),
            kappa: to_f64(self.kappa),
        }
    }

    /// Exact classification.
    pub fn classify(&self) -> Classification {
        let zero = Rational64::from_integer(0);
        let (a, b, g, d) = (self.alpha, self.beta, self.gamma, self.delta);
        if b > zero {
            return Classification::Illposed;
        }
        let plain = self.iota == zero && self.kappa == zero;
        if plain && b < zero && a != b {
            if b == g * -2 && d == g * 2 {
                return Classification::CamassaHolm;
            }
            if b == r(-8, 3) * g && d == g * 3 {
                return Classification::DegasperisProcesi;
            }
        }
        if plain && g == zero && d == zero && a - b == r(1, 6) {
            return Classification::Bbm;
        }
        Classification::Generic
    }
}

/// Which family a coefficient set was generated from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyParam {
    /// Velocity equations, one free parameter `p`.
    VelocityOneParam { p: Rational64 },
    /// Velocity equations at level line `theta`, given through `theta^2`.
    VelocityTwoParam { p: Rational64, theta2: Rational64 },
    /// Surface-elevation equations, free parameter `q`.
    Surface { q: Rational64 },
}

impl FamilyParam {
    pub fn coefficients(&self) -> Result<ExactCoefficients> {
        match *self {
            FamilyParam::VelocityOneParam { p } => Ok(coeffs_velocity_family(p)),
            FamilyParam::VelocityTwoParam { p, theta2 } => coeffs_velocity_two_param(p, theta2),
            FamilyParam::Surface { q } => Ok(coeffs_surface_family(q)),
        }
    }
}

/// `lambda = (theta^2 - 1/3) / 2`, with `theta^2` required in `[0, 1]`.
pub fn level_line_lambda(theta2: Rational64) -> Result<Rational64> {
    if theta2 < r(0, 1) || theta2 > r(1, 1) {
        return Err(Error::InvalidParameter(format!(
            "theta^2 = {theta2} is outside [0, 1]"
        )));
    }
    Ok((theta2 - r(1, 3)) / 2)
}

/// Floating counterpart of [`level_line_lambda`] taking `theta` itself.
pub fn level_line_lambda_f64(theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter(format!("theta = {theta} is outside [0, 1]")));
    }
    Ok(0.5 * (theta * theta - 1.0 / 3.0))
}

/// One-parameter velocity family: `alpha = p`, `beta = p - 1/6`,
/// `gamma = -3p/2 - 1/6`, `delta = -9p/2 - 23/24`.
pub fn coeffs_velocity_family(p: Rational64) -> ExactCoefficients {
    ExactCoefficients {
        alpha: p,
        beta: p - r(1, 6),
        gamma: r(-3, 2) * p - r(1, 6),
        delta: r(-9, 2) * p - r(23, 24),
        iota: r(0, 1),
        kappa: r(0, 1),
    }
}

/// Two-parameter velocity family: the one-parameter family shifted by `lambda`.
pub fn coeffs_velocity_two_param(p: Rational64, theta2: Rational64) -> Result<ExactCoefficients> {
    let lambda = level_line_lambda(theta2)?;
    Ok(ExactCoefficients {
        alpha: p + lambda,
        beta: p - r(1, 6) + lambda,
        gamma: r(-3, 2) * p - r(1, 6) - r(3, 2) * lambda,
        delta: r(-9, 2) * p - r(23, 24) - r(3, 2) * lambda,
        iota: r(0, 1),
        kappa: r(0, 1),
    })
}

/// Floating two-parameter family for an irrational `theta`.
pub fn coeffs_velocity_two_param_f64(p: f64, theta: f64) -> Result<CoefficientSet> {
    let lambda = level_line_lambda_f64(theta)?;
    Ok(CoefficientSet {
        alpha: p + lambda,
        beta: p - 1.0 / 6.0 + lambda,
        gamma: -1.5 * p - 1.0 / 6.0 - 1.5 * lambda,
        delta: -4.5 * p - 23.0 / 24.0 - 1.5 * lambda,
        iota: 0.0,
        kappa: 0.0,
    })
}

/// Surface-elevation family, with the fixed cubic/quartic advection `iota = -3/8`, `kappa = 3/16`.
pub fn coeffs_surface_family(q: Rational64) -> ExactCoefficients {
    ExactCoefficients {
        alpha: q,
        beta: q - r(1, 6),
        gamma: r(-3, 2) * q - r(1, 6),
        delta: r(-9, 2) * q - r(5, 24),
        iota: r(-3, 8),
        kappa: r(3, 16),
    }
}

/// BBM coefficients with `alpha = p`, `beta = p - 1/6` and no nonlinear dispersion.
pub fn coeffs_bbm(p: Rational64) -> ExactCoefficients {
    ExactCoefficients {
        alpha: p,
        beta: p - r(1, 6),
        gamma: r(0, 1),
        delta: r(0, 1),
        iota: r(0, 1),
        kappa: r(0, 1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    CamassaHolm,
    DegasperisProcesi,
    #[serde(rename = "BBM")]
    Bbm,
    Generic,
    Illposed,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Classification::CamassaHolm => "CamassaHolm",
            Classification::DegasperisProcesi => "DegasperisProcesi",
            Classification::Bbm => "BBM",
            Classification::Generic => "Generic",
            Classification::Illposed => "Illposed",
        };
        f.write_str(s)
    }
}

/// Classify a floating coefficient set, deciding equalities to [`CLASSIFY_TOL`].
pub fn classify(c: &CoefficientSet) -> Classification {
    let eq = |x: f64, y: f64| (x - y).abs() <= CLASSIFY_TOL * (1.0 + x.abs().max(y.abs()));
    if c.beta > CLASSIFY_TOL {
        return Classification::Illposed;
    }
    let plain = eq(c.iota, 0.0) && eq(c.kappa, 0.0);
    let beta_neg = c.beta < -CLASSIFY_TOL;
    if plain && beta_neg && !eq(c.alpha, c.beta) {
        if eq(c.beta, -2.0 * c.gamma) && eq(c.delta, 2.0 * c.gamma) {
            return Classification::CamassaHolm;
        }
        if eq(c.beta, -8.0 / 3.0 * c.gamma) && eq(c.delta, 3.0 * c.gamma) {
            return Classification::DegasperisProcesi;
        }
    }
    if plain && eq(c.gamma, 0.0) && eq(c.delta, 0.0) && eq(c.alpha - c.beta, 1.0 / 6.0) {
        return Classification::Bbm;
    }
    Classification::Generic
}

/// Constants mapping a solution `u` to the standard CH/DP form
/// `U(t, x) = u(x/b + (v/c) t, t/c) / a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformParams {
    pub a: f64,
    pub b: f64,
    pub v: f64,
    pub c: f64,
    pub kappa_hat: f64,
    pub classification: Classification,
}

/// Rescaling constants to the standard CH or DP equation.
///
/// `b` is the positive root of `b^2 = -1/(beta mu)`. The amplitude factor uses
/// `a = 2(1 - v)/(eps kappa_hat)` for CH and `a = 8(1 - v)/(3 eps kappa_hat)` for DP.
pub fn standard_form_params(
    coeffs: &CoefficientSet,
    scaling: &Scaling,
    kappa_hat: f64,
) -> Result<TransformParams> {
    let classification = classify(coeffs);
    let amp = match classification {
        Classification::CamassaHolm => 2.0,
        Classification::DegasperisProcesi => 8.0 / 3.0,
        other => return Err(Error::NotIntegrable(other.to_string())),
    };
    if kappa_hat == 0.0 || !kappa_hat.is_finite() {
        return Err(Error::InvalidParameter("kappa_hat must be finite and non-zero".into()));
    }
    if coeffs.beta >= 0.0 {
        return Err(Error::InvalidParameter("beta must be negative".into()));
    }
    let v = coeffs.alpha / coeffs.beta;
    if (1.0 - v).abs() <= CLASSIFY_TOL {
        return Err(Error::InvalidParameter("v = alpha/beta = 1 makes the transform degenerate".into()));
    }
    let b = (-1.0 / (coeffs.beta * scaling.mu)).sqrt();
    Ok(TransformParams {
        a: amp / (scaling.eps * kappa_hat) * (1.0 - v),
        b,
        v,
        c: b * (1.0 - v) / kappa_hat,
        kappa_hat,
        classification,
    })
}

/// Named coefficient presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// Camassa-Holm member of the two-parameter family (`p = -1/3`, `theta^2 = 1/2`).
    CamassaHolm,
    /// Degasperis-Procesi member (`p = -77/216`, `theta^2 = 23/36`).
    DegasperisProcesi,
    /// Surface equation with `q = 1/12`.
    SurfaceQ112,
    Bbm(Rational64),
    /// Member `p` of the one-parameter velocity family.
    Velocity(Rational64),
}

pub const PRESET_NAMES: &str = "ch, dp, surface-q112, bbm(<p>), velocity(<p>)";

impl Preset {
    pub fn exact(&self) -> ExactCoefficients {
        match *self {
            Preset::CamassaHolm => coeffs_velocity_two_param(r(-1, 3), r(1, 2)).expect("valid theta"),
            Preset::DegasperisProcesi => {
                coeffs_velocity_two_param(r(-77, 216), r(23, 36)).expect("valid theta")
            }
            Preset::SurfaceQ112 => coeffs_surface_family(r(1, 12)),
            Preset::Bbm(p) => coeffs_bbm(p),
            Preset::Velocity(p) => coeffs_velocity_family(p),
        }
    }

    pub fn coefficients(&self) -> CoefficientSet {
        self.exact().to_f64()
    }

    /// Whether the evolved field is the surface elevation rather than a velocity.
    pub fn is_surface(&self) -> bool {
        matches!(self, Preset::SurfaceQ112)
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let name = s.trim();
        match name {
            "ch" => Ok(Preset::CamassaHolm),
            "dp" => Ok(Preset::DegasperisProcesi),
            "surface-q112" => Ok(Preset::SurfaceQ112),
            _ => {
                if let Some(arg) = name.strip_prefix("bbm(").and_then(|rest| rest.strip_suffix(')')) {
                    return Ok(Preset::Bbm(parse_rational(arg)?));
                }
                if let Some(arg) = name.strip_prefix("velocity(").and_then(|rest| rest.strip_suffix(')')) {
                    return Ok(Preset::Velocity(parse_rational(arg)?));
                }
                Err(Error::UnknownPreset { name: name.to_string(), valid: PRESET_NAMES.to_string() })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exact(a: (i64, i64), b: (i64, i64), g: (i64, i64), d: (i64, i64)) -> [Rational64; 4] {
        [r(a.0, a.1), r(b.0, b.1), r(g.0, g.1), r(d.0, d.1)]
    }

    fn four(c: &ExactCoefficients) -> [Rational64; 4] {
        [c.alpha, c.beta, c.gamma, c.delta]
    }

    #[test]
    fn rational_serde() {
        let q: Rational = serde_json::from_str("\"-1/12\"").unwrap();
        assert_eq!(q, Rational::new(-1, 12));
        assert_eq!(serde_json::to_string(&q).unwrap(), "\"-1/12\"");
        let k: Rational = serde_json::from_str("3").unwrap();
        assert_eq!(k.to_f64(), 3.0);
        assert!(serde_json::from_str::<Rational>("\"x\"").is_err());
    }

    #[test]
    fn scaling_admissibility() {
        assert!(make_scaling(0.2f64.sqrt(), 0.2, 1.0, 1.0).is_ok());
        assert!(make_scaling(0.1, 0.04, 1.0, 1.0).is_ok());
        let err = make_scaling(0.5, 0.04, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Inadmissible { .. }));
        assert!(err.to_string().contains("admissible"));
        assert!(make_scaling(0.1, 1.5, 1.0, 1.0).is_err());
        assert!(make_scaling(-0.1, 0.2, 1.0, 1.0).is_err());
    }

    #[test]
    fn one_param_family_examples() {
        assert_eq!(four(&coeffs_velocity_family(r(-1, 12))), exact((-1, 12), (-1, 4), (-1, 24), (-7, 12)));
        assert_eq!(four(&coeffs_velocity_family(r(1, 6))), exact((1, 6), (0, 1), (-5, 12), (-41, 24)));
        assert_eq!(four(&coeffs_velocity_family(r(0, 1))), exact((0, 1), (-1, 6), (-1, 6), (-23, 24)));
    }

    #[test]
    fn two_param_family_examples() {
        let ch = coeffs_velocity_two_param(r(-1, 3), r(1, 2)).unwrap();
        assert_eq!(four(&ch), exact((-1, 4), (-5, 12), (5, 24), (5, 12)));
        let dp = coeffs_velocity_two_param(r(-77, 216), r(23, 36)).unwrap();
        assert_eq!(four(&dp), exact((-11, 54), (-10, 27), (5, 36), (5, 12)));
        assert!(coeffs_velocity_two_param(r(0, 1), r(3, 2)).is_err());
        assert!(level_line_lambda_f64(1.1).is_err());
    }

    #[test]
    fn surface_family_examples() {
        let s = coeffs_surface_family(r(1, 12));
        assert_eq!(four(&s), exact((1, 12), (-1, 12), (-7, 24), (-7, 12)));
        assert_eq!((s.iota, s.kappa), (r(-3, 8), r(3, 16)));
        assert_eq!(four(&coeffs_surface_family(r(0, 1))), exact((0, 1), (-1, 6), (-1, 6), (-5, 24)));
        assert_eq!(four(&coeffs_surface_family(r(1, 6))), exact((1, 6), (0, 1), (-5, 12), (-23, 24)));
    }

    #[test]
    fn classification_examples() {
        let mk = |v: [Rational64; 4]| ExactCoefficients {
            alpha: v[0],
            beta: v[1],
            gamma: v[2],
            delta: v[3],
            iota: r(0, 1),
            kappa: r(0, 1),
        };
        let ch = mk(exact((-1, 4), (-5, 12), (5, 24), (5, 12)));
        let dp = mk(exact((-11, 54), (-10, 27), (5, 36), (5, 12)));
        let generic = mk(exact((-5, 12), (-7, 12), (11, 24), (11, 12)));
        assert_eq!(ch.classify(), Classification::CamassaHolm);
        assert_eq!(dp.classify(), Classification::DegasperisProcesi);
        assert_eq!(generic.classify(), Classification::Generic);
        assert_eq!(classify(&ch.to_f64()), Classification::CamassaHolm);
        assert_eq!(classify(&dp.to_f64()), Classification::DegasperisProcesi);
        assert_eq!(classify(&generic.to_f64()), Classification::Generic);
        assert_eq!(coeffs_bbm(r(-1, 12)).classify(), Classification::Bbm);
        assert_eq!(coeffs_velocity_family(r(1, 3)).classify(), Classification::Illposed);
        assert_eq!(coeffs_surface_family(r(1, 12)).classify(), Classification::Generic);
    }

    #[test]
    fn floating_theta_matches_exact_classification() {
        let c = coeffs_velocity_two_param_f64(-1.0 / 3.0, 0.5f64.sqrt()).unwrap();
        assert_eq!(classify(&c), Classification::CamassaHolm);
        let e = coeffs_velocity_two_param(r(-1, 3), r(1, 2)).unwrap().to_f64();
        for (x, y) in [(c.alpha, e.alpha), (c.beta, e.beta), (c.gamma, e.gamma), (c.delta, e.delta)] {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn standard_form_ch_example() {
        let mu = 0.2;
        let scaling = Scaling::camassa_holm(mu).unwrap();
        let coeffs = Preset::CamassaHolm.coefficients();
        let t = standard_form_params(&coeffs, &scaling, 1.0).unwrap();
        assert!((t.v - 0.6).abs() < 1e-14);
        assert!((t.b - 12f64.sqrt()).abs() < 1e-12);
        assert!((t.c - 0.4 * 12f64.sqrt()).abs() < 1e-12);
        assert!((t.a - 2.0 / scaling.eps * 0.4).abs() < 1e-12);
        assert!((t.b * t.b * (-coeffs.beta * mu) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standard_form_dp_example() {
        let scaling = Scaling::camassa_holm(0.2).unwrap();
        let exact_dp = Preset::DegasperisProcesi.exact();
        assert_eq!(exact_dp.alpha / exact_dp.beta, r(11, 20));
        let t = standard_form_params(&exact_dp.to_f64(), &scaling, 2.0).unwrap();
        assert!((t.v - 0.55).abs() < 1e-14);
        assert_eq!(t.classification, Classification::DegasperisProcesi);
        assert!((t.a - 8.0 / (3.0 * scaling.eps * 2.0) * 0.45).abs() < 1e-12);
    }

    #[test]
    fn standard_form_rejections() {
        let scaling = Scaling::camassa_holm(0.2).unwrap();
        let ch = Preset::CamassaHolm.coefficients();
        assert!(standard_form_params(&ch, &scaling, 0.0).is_err());
        let generic = Preset::Velocity(r(-1, 12)).coefficients();
        assert!(matches!(standard_form_params(&generic, &scaling, 1.0), Err(Error::NotIntegrable(_))));
    }

    #[test]
    fn no_dp_member_in_one_param_family() {
        for p in [r(-5, 12), r(0, 1), r(7, 3), r(-100, 7)] {
            let c = coeffs_velocity_family(p);
            assert_eq!(c.delta - c.gamma * 3, r(-11, 24));
        }
    }

    #[test]
    fn presets_parse() {
        assert_eq!("ch".parse::<Preset>().unwrap(), Preset::CamassaHolm);
        assert_eq!("bbm(-1/12)".parse::<Preset>().unwrap(), Preset::Bbm(r(-1, 12)));
        let err = "kdv".parse::<Preset>().unwrap_err();
        assert!(err.to_string().contains("surface-q112"));
        assert_eq!("velocity(1/6)".parse::<Preset>().unwrap().coefficients().beta, 0.0);
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("-1/12").unwrap(), r(-1, 12));
        assert_eq!(parse_rational("0.25").unwrap(), r(1, 4));
        assert_eq!(parse_rational("-.5").unwrap(), r(-1, 2));
        assert_eq!(parse_rational("7").unwrap(), r(7, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn coefficient_json_shape() {
        let json = serde_json::to_value(Preset::SurfaceQ112.coefficients()).unwrap();
        for key in ["alpha", "beta", "gamma", "delta", "iota", "kappa"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back: CoefficientSet = serde_json::from_value(json).unwrap();
        assert_eq!(back, Preset::SurfaceQ112.coefficients());
    }

    proptest! {
        // beta - alpha = -1/6 and gamma + 3 alpha / 2 = -1/6 on both velocity
        // families; (delta + 3 alpha - gamma)/2 is -19/48 + 3 lambda / 2.
        #[test]
        fn family_identities(pn in -500i64..500, pd in 1i64..97, tn in 0i64..=60) {
            let p = r(pn, pd);
            let theta2 = r(tn, 60);
            let lambda = level_line_lambda(theta2).unwrap();
            for (c, shift) in [
                (coeffs_velocity_family(p), r(0, 1)),
                (coeffs_velocity_two_param(p, theta2).unwrap(), lambda),
            ] {
                prop_assert_eq!(c.beta - c.alpha, r(-1, 6));
                prop_assert_eq!(c.gamma + r(3, 2) * c.alpha, r(-1, 6));
                prop_assert_eq!((c.delta + c.alpha * 3 - c.gamma) / 2, r(-19, 48) + r(3, 2) * shift);
            }
            let one = coeffs_velocity_family(p);
            prop_assert_eq!(one, coeffs_velocity_two_param(p, r(1, 3)).unwrap());
        }
    }
}
