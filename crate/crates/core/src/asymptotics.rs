//! Velocity/elevation reconstructions and Green-Naghdi consistency residuals.
//!
//! Time derivatives are never finite-differenced from snapshots: a [`Jet`] carries
//! `(f, f_t, f_tt)` and the evolution equation supplies `u_t` and `u_tt`. All spatial
//! derivatives here are spectral.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_multiplier, norm, spectral_diff, Field, Grid, NormKind};
use num_rational::Rational64;

use crate::params::{
    coeffs_surface_family, coeffs_velocity_family, coeffs_velocity_two_param, level_line_lambda, level_line_lambda_f64,
    CoefficientSet, Rational, Scaling,
};
use crate::solver::{self, InitialProfile, RunConfig, Termination};

/// A field together with its time derivative at the same instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedPair {
    pub field: Field,
    pub field_t: Field,
}

impl TimedPair {
    pub fn new(field: Field, field_t: Field) -> Result<Self> {
        if field.grid != field_t.grid {
            return Err(Error::GridMismatch("field and field_t".into()));
        }
        Ok(Self { field, field_t })
    }

    /// Time derivative by centered differencing of three adjacent levels.
    pub fn from_levels(prev: &Field, cur: &Field, next: &Field, dt: f64) -> Result<Self> {
        let ft = next.zip(prev, |a, b| (a - b) / (2.0 * dt))?;
        Self::new(cur.clone(), ft)
    }
}

/// Truncated time-Taylor data `[f, f_t, f_tt, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub d: Vec<Field>,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn lin(a: &Field, b: &Field, sa: f64, sb: f64) -> Field {
    Field { grid: a.grid, values: a.values.iter().zip(&b.values).map(|(x, y)| sa * x + sb * y).collect() }
}

fn prod(a: &Field, b: &Field) -> Field {
    Field { grid: a.grid, values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect() }
}

impl Jet {
    pub fn new(d: Vec<Field>) -> Self {
        assert!(!d.is_empty());
        Self { d }
    }

    pub fn order(&self) -> usize {
        self.d.len() - 1
    }

    pub fn grid(&self) -> Grid {
        self.d[0].grid
    }

    pub fn pair(&self) -> Result<TimedPair> {
        if self.d.len() < 2 {
            return Err(Error::InvalidParameter("jet carries no time derivative".into()));
        }
        TimedPair::new(self.d[0].clone(), self.d[1].clone())
    }

    fn zip_with(&self, o: &Jet, f: impl Fn(&Field, &Field) -> Field) -> Jet {
        Jet { d: self.d.iter().zip(&o.d).map(|(a, b)| f(a, b)).collect() }
    }

    pub fn add(&self, o: &Jet) -> Jet {
        self.zip_with(o, |a, b| lin(a, b, 1.0, 1.0))
    }

    pub fn axpy(&self, s: f64, o: &Jet) -> Jet {
        self.zip_with(o, |a, b| lin(a, b, 1.0, s))
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet { d: self.d.iter().map(|f| f.map(|v| s * v)).collect() }
    }

    pub fn add_const(&self, c: f64) -> Jet {
        let mut d = self.d.clone();
        d[0] = d[0].map(|v| v + c);
        Jet { d }
    }

    /// Leibniz rule.
    pub fn mul(&self, o: &Jet) -> Jet {
        let m = self.d.len().min(o.d.len());
        let d = (0..m)
            .map(|n| {
                let mut acc = Field::zeros(self.grid());
                for k in 0..=n {
                    acc = lin(&acc, &prod(&self.d[k], &o.d[n - k]), 1.0, binom(n, k));
                }
                acc
            })
            .collect();
        Jet { d }
    }

    pub fn dx(&self, order: u32) -> Jet {
        Jet { d: self.d.iter().map(|f| spectral_diff(f, order)).collect() }
    }

    /// `d/dt`, losing one order.
    pub fn dt(&self) -> Result<Jet> {
        if self.d.len() < 2 {
            return Err(Error::InvalidParameter("cannot differentiate an order-0 jet in time".into()));
        }
        Ok(Jet { d: self.d[1..].to_vec() })
    }

    /// `1/h` up to second order.
    pub fn recip(&self) -> Jet {
        let h = &self.d[0];
        let r = h.map(|v| 1.0 / v);
        let mut d = vec![r.clone()];
        if self.d.len() > 1 {
            let h1 = &self.d[1];
            let r2 = prod(&r, &r);
            d.push(prod(&r2, h1).map(|v| -v));
            if self.d.len() > 2 {
                let h2 = &self.d[2];
                let a = prod(&prod(&r2, &r), &prod(h1, h1));
                let b = prod(&r2, h2);
                d.push(lin(&a, &b, 2.0, -1.0));
            }
        }
        Jet { d }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        Jet { d: self.d[..=order.min(self.order())].to_vec() }
    }
}

/// Lab-frame right-hand side `G` with `(1 + mu beta d^2) u_t = G[u]`, propagated through a jet.
fn lab_rhs(u: &Jet, c: &CoefficientSet, s: &Scaling) -> Jet {
    let (eps, mu) = (s.eps, s.mu);
    let ux = u.dx(1);
    let uxx = u.dx(2);
    let uxxx = u.dx(3);
    let uu = u.mul(u);
    let nonlinear = uu
        .scale(eps * eps * c.iota)
        .axpy(eps * eps * eps * c.kappa, &uu.mul(u))
        .axpy(1.5 * eps, u)
        .mul(&ux);
    ux.add(&nonlinear)
        .axpy(mu * c.alpha, &uxxx)
        .scale(-1.0)
        .axpy(eps * mu * c.gamma, &u.mul(&uxxx))
        .axpy(eps * mu * c.delta, &ux.mul(&uxx))
}

/// `[u, u_t, ..]` up to `order <= 2` from the lab-frame evolution equation.
pub fn evolution_jet(u: &Field, coeffs: &CoefficientSet, scaling: &Scaling, order: usize) -> Result<Jet> {
    if order > 2 {
        return Err(Error::InvalidParameter(format!("jet order {order} not supported")));
    }
    if !coeffs.solver_admissible() {
        return Err(Error::InvalidParameter(format!("beta must be negative, got {}", coeffs.beta)));
    }
    let mb = scaling.mu * coeffs.beta;
    let mut jet = Jet::new(vec![u.clone()]);
    for k in 0..order {
        let g = lab_rhs(&jet, coeffs, scaling);
        let next = apply_multiplier(&g.d[k], |k| 1.0 / (1.0 - mb * k * k));
        jet.d.push(next);
    }
    Ok(jet)
}

pub fn velocity_pair(u: &Field, coeffs: &CoefficientSet, scaling: &Scaling) -> Result<TimedPair> {
    evolution_jet(u, coeffs, scaling, 1)?.pair()
}

/// `zeta = u + (eps/4) u^2 + (mu/6) u_xt - eps mu [(1/6) u u_xx + (5/48) u_x^2]` on a jet.
pub fn zeta_from_u_jet(u: &Jet, scaling: &Scaling) -> Result<Jet> {
    let (eps, mu) = (scaling.eps, scaling.mu);
    let uxt = u.dt()?.dx(1);
    let ux = u.dx(1);
    let u = u.truncate(uxt.order());
    let ux = ux.truncate(uxt.order());
    Ok(u.axpy(0.25 * eps, &u.mul(&u))
        .axpy(mu / 6.0, &uxt)
        .axpy(-eps * mu / 6.0, &u.mul(&u.dx(2)))
        .axpy(-eps * mu * 5.0 / 48.0, &ux.mul(&ux)))
}

pub fn reconstruct_zeta_from_u(u: &TimedPair, scaling: &Scaling) -> Field {
    let jet = Jet::new(vec![u.field.clone(), u.field_t.clone()]);
    zeta_from_u_jet(&jet, scaling).expect("order-1 jet").d.swap_remove(0)
}

/// `u = u^theta + mu lambda u^theta_xx + 2 mu eps lambda u^theta u^theta_xx`, `lambda = (theta^2 - 1/3)/2`.
pub fn velocity_from_level_line(u_theta: &Field, theta: f64, scaling: &Scaling) -> Result<Field> {
    let lambda = level_line_lambda_f64(theta)?;
    if lambda.abs() < 4.0 * f64::EPSILON {
        return Ok(u_theta.clone());
    }
    let (eps, mu) = (scaling.eps, scaling.mu);
    let uxx = spectral_diff(u_theta, 2);
    u_theta.zip(&uxx, |v, d| v + mu * lambda * d + 2.0 * mu * eps * lambda * v * d)
}

/// The depth `h` dividing the correction in the elevation-to-velocity map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HMode {
    /// `h = 1`.
    Unit,
    /// `h = 1 + eps zeta`.
    FreeSurface,
}

/// Options for [`reconstruct_u_from_zeta`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UFromZeta {
    pub h_mode: HMode,
    /// Coefficient of `eps^3 zeta^4`.
    pub quartic: f64,
}

impl Default for UFromZeta {
    /// The combination that inverts [`reconstruct_zeta_from_u`] to `O(mu^2)`.
    fn default() -> Self {
        Self { h_mode: HMode::FreeSurface, quartic: 3.0 / 64.0 }
    }
}

impl UFromZeta {
    /// `h = 1` and the quartic coefficient `1/64`.
    pub fn unit_depth() -> Self {
        Self { h_mode: HMode::Unit, quartic: 1.0 / 64.0 }
    }
}

/// `u = zeta + (1/h)(-(eps/4) z^2 - (eps^2/8) z^3 + c eps^3 z^4 - (mu/6) z_xt + eps mu [(1/6) z z_xx + (1/48) z_x^2])`.
pub fn u_from_zeta_jet(z: &Jet, scaling: &Scaling, opts: UFromZeta) -> Result<Jet> {
    let (eps, mu) = (scaling.eps, scaling.mu);
    let zxt = z.dt()?.dx(1);
    let z = z.truncate(zxt.order());
    let zx = z.dx(1);
    let z2 = z.mul(&z);
    let z3 = z2.mul(&z);
    let corr = z2
        .scale(-0.25 * eps)
        .axpy(-eps * eps / 8.0, &z3)
        .axpy(opts.quartic * eps.powi(3), &z3.mul(&z))
        .axpy(-mu / 6.0, &zxt)
        .axpy(eps * mu / 6.0, &z.mul(&z.dx(2)))
        .axpy(eps * mu / 48.0, &zx.mul(&zx));
    let corr = match opts.h_mode {
        HMode::Unit => corr,
        HMode::FreeSurface => {
            let h = z.scale(eps).add_const(1.0);
            let min_depth = h.d[0].values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
            if !(min_depth > 0.0) {
                return Err(Error::NonPositiveDepth { min_depth });
            }
            corr.mul(&h.recip())
        }
    };
    Ok(z.add(&corr))
}

pub fn reconstruct_u_from_zeta(zeta: &TimedPair, scaling: &Scaling, opts: UFromZeta) -> Result<Field> {
    let jet = Jet::new(vec![zeta.field.clone(), zeta.field_t.clone()]);
    Ok(u_from_zeta_jet(&jet, scaling, opts)?.d.swap_remove(0))
}

/// Green-Naghdi residual norms; `*_raw` are unnormalised, the others divided by `mu^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub mu: f64,
    pub eps: f64,
    pub time: f64,
    pub r1_l2: f64,
    pub r1_sup: f64,
    pub r2_l2: f64,
    pub r2_sup: f64,
    pub r1_l2_raw: f64,
    pub r1_sup_raw: f64,
    pub r2_l2_raw: f64,
    pub r2_sup_raw: f64,
}

impl ResidualReport {
    /// `sqrt(|r1|^2 + |r2|^2)` in L2, unnormalised.
    pub fn combined_raw(&self) -> f64 {
        self.r1_l2_raw.hypot(self.r2_l2_raw)
    }

    pub const CSV_HEADER: &'static str = "mu,eps,t,r1_l2,r1_sup,r2_l2,r2_sup,r1_l2_raw,r1_sup_raw,r2_l2_raw,r2_sup_raw";

    pub fn csv_row(&self) -> String {
        use crate::output::{csv_line, fmt_float};
        csv_line(
            [
                self.mu,
                self.eps,
                self.time,
                self.r1_l2,
                self.r1_sup,
                self.r2_l2,
                self.r2_sup,
                self.r1_l2_raw,
                self.r1_sup_raw,
                self.r2_l2_raw,
                self.r2_sup_raw,
            ]
            .map(fmt_float),
        )
    }
}

/// Raw residual fields `(r1, r2)` before normalisation.
pub fn gn_residual_fields(zeta: &TimedPair, u: &TimedPair, scaling: &Scaling) -> Result<(Field, Field)> {
    let (eps, mu) = (scaling.eps, scaling.mu);
    let g = zeta.field.grid;
    if u.field.grid != g {
        return Err(Error::GridMismatch("zeta and u".into()));
    }
    let h = zeta.field.map(|z| 1.0 + eps * z);
    let min_depth = h.values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if !(min_depth > 0.0) {
        return Err(Error::NonPositiveDepth { min_depth });
    }
    let uu = &u.field;
    let ux = spectral_diff(uu, 1);
    let uxx = spectral_diff(uu, 2);
    let uxt = spectral_diff(&u.field_t, 1);
    let flux = prod(&h, uu);
    let r1 = lin(&zeta.field_t, &spectral_diff(&flux, 1), 1.0, 1.0);

    let inner: Vec<f64> = (0..g.n)
        .map(|i| {
            let hh = h.values[i];
            hh * hh * hh * (uxt.values[i] + eps * uu.values[i] * uxx.values[i] - eps * ux.values[i] * ux.values[i])
        })
        .collect();
    let dinner = spectral_diff(&Field { grid: g, values: inner }, 1);
    let zx = spectral_diff(&zeta.field, 1);
    let r2 = Field {
        grid: g,
        values: (0..g.n)
            .map(|i| {
                u.field_t.values[i] + zx.values[i] + eps * uu.values[i] * ux.values[i]
                    - (mu / 3.0) * dinner.values[i] / h.values[i]
            })
            .collect(),
    };
    Ok((r1, r2))
}

pub fn gn_residual(zeta: &TimedPair, u: &TimedPair, scaling: &Scaling, time: f64) -> Result<ResidualReport> {
    let (r1, r2) = gn_residual_fields(zeta, u, scaling)?;
    let m2 = scaling.mu * scaling.mu;
    let l2 = |f: &Field| norm(f, NormKind::L2).expect("L2 is always defined");
    let (a, b, c, d) = (l2(&r1), r1.max_abs(), l2(&r2), r2.max_abs());
    Ok(ResidualReport {
        mu: scaling.mu,
        eps: scaling.eps,
        time,
        r1_l2: a / m2,
        r1_sup: b / m2,
        r2_l2: c / m2,
        r2_sup: d / m2,
        r1_l2_raw: a,
        r1_sup_raw: b,
        r2_l2_raw: c,
        r2_sup_raw: d,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints { need: 3, got: points.len() });
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::InvalidParameter(format!("log-log fit needs positive data, got {p:?}")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("log-log fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// Which equation is evolved in a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StudyFamily {
    /// One-parameter velocity family; the elevation is reconstructed from `u`.
    Velocity { p: Rational },
    /// Two-parameter family evolving the velocity at level line `theta`.
    VelocityTwoParam { p: Rational, theta2: Rational },
    /// Surface family; the velocity is reconstructed from `zeta`.
    Surface { q: Rational },
}

impl StudyFamily {
    pub fn coefficients(&self) -> Result<CoefficientSet> {
        Ok(match *self {
            StudyFamily::Velocity { p } => coeffs_velocity_family(p.0).to_f64(),
            StudyFamily::VelocityTwoParam { p, theta2 } => coeffs_velocity_two_param(p.0, theta2.0)?.to_f64(),
            StudyFamily::Surface { q } => coeffs_surface_family(q.0).to_f64(),
        })
    }
}

/// Grid and data shared by every point of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySetup {
    pub family: StudyFamily,
    pub grid: Grid,
    pub initial_profile: InitialProfile,
    pub t_probe: f64,
    #[serde(default)]
    pub u_from_zeta: UFromZeta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderPoint {
    pub mu: f64,
    pub eps: f64,
    pub residual: f64,
    pub report: ResidualReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStudy {
    pub exponent: f64,
    pub points: Vec<OrderPoint>,
}

/// Evolve to `t_probe`; a diverged run is an error naming `mu`.
fn evolved(setup: &StudySetup, coeffs: &CoefficientSet, scaling: &Scaling) -> Result<Field> {
    if setup.t_probe == 0.0 {
        return Ok(setup.initial_profile.sample(setup.grid));
    }
    let mut cfg = RunConfig::new(*coeffs, *scaling, setup.grid, setup.t_probe, setup.initial_profile);
    cfg.stop_on_slope = f64::INFINITY;
    let res = solver::run(&cfg)?;
    match res.termination {
        Termination::Completed => Ok(res.final_field),
        t => Err(Error::Diverged { time: t.time().unwrap_or(f64::NAN) }),
    }
}

/// Residual of the reconstructed pair at one `mu`, with `eps = sqrt(mu)`.
pub fn residual_at(setup: &StudySetup, mu: f64) -> Result<ResidualReport> {
    let scaling = Scaling::camassa_holm(mu)?;
    let coeffs = setup.family.coefficients()?;
    let w = evolved(setup, &coeffs, &scaling)?;
    residual_of_field(&setup.family, &w, &scaling, setup.u_from_zeta, setup.t_probe)
}

/// Residual of the pair reconstructed from one evolved field of `family`.
pub fn residual_of_field(
    family: &StudyFamily,
    w: &Field,
    scaling: &Scaling,
    opts: UFromZeta,
    time: f64,
) -> Result<ResidualReport> {
    let coeffs = family.coefficients()?;
    let jet = evolution_jet(w, &coeffs, scaling, 2)?;
    let scaling = *scaling;
    let (zeta, u) = match *family {
        StudyFamily::Surface { .. } => (jet.pair()?, u_from_zeta_jet(&jet, &scaling, opts)?.pair()?),
        StudyFamily::Velocity { .. } => (zeta_from_u_jet(&jet, &scaling)?.pair()?, jet.pair()?),
        StudyFamily::VelocityTwoParam { theta2, .. } => {
            let u_jet = level_line_jet(&jet, theta2.0, &scaling)?;
            (zeta_from_u_jet(&u_jet, &scaling)?.pair()?, u_jet.pair()?)
        }
    };
    gn_residual(&zeta, &u, &scaling, time)
}

/// Depth-averaged velocity jet from a level-line velocity jet, `theta^2` exact.
pub fn level_line_jet(u_theta: &Jet, theta2: Rational64, scaling: &Scaling) -> Result<Jet> {
    let lambda = level_line_lambda(theta2)?;
    let lambda = *lambda.numer() as f64 / *lambda.denom() as f64;
    let (eps, mu) = (scaling.eps, scaling.mu);
    let uxx = u_theta.dx(2);
    Ok(u_theta.axpy(mu * lambda, &uxx).axpy(2.0 * mu * eps * lambda, &u_theta.mul(&uxx)))
}

pub fn consistency_order(setup: &StudySetup, mu_list: &[f64]) -> Result<OrderStudy> {
    if mu_list.len() < 3 {
        return Err(Error::TooFewPoints { need: 3, got: mu_list.len() });
    }
    let points = mu_list
        .iter()
        .map(|&mu| {
            let report = residual_at(setup, mu).map_err(|e| Error::AtMu { mu, source: Box::new(e) })?;
            Ok(OrderPoint { mu, eps: report.eps, residual: report.combined_raw(), report })
        })
        .collect::<Result<Vec<_>>>()?;
    let exponent = fit_exponent(&points.iter().map(|p| (p.mu, p.residual)).collect::<Vec<_>>())?;
    Ok(OrderStudy { exponent, points })
}

/// `||u_back - u||_inf` after mapping `u -> zeta -> u` at one `mu`.
pub fn round_trip_error(u: &Field, coeffs: &CoefficientSet, mu: f64, opts: UFromZeta) -> Result<f64> {
    let scaling = Scaling::camassa_holm(mu)?;
    let u_jet = evolution_jet(u, coeffs, &scaling, 2)?;
    let zeta = zeta_from_u_jet(&u_jet, &scaling)?.pair()?;
    let back = reconstruct_u_from_zeta(&zeta, &scaling, opts)?;
    Ok(back.zip(u, |a, b| a - b)?.max_abs())
}

/// Round-trip errors over `mu_list` and their fitted exponent.
pub fn round_trip_study(u: &Field, coeffs: &CoefficientSet, mu_list: &[f64], opts: UFromZeta) -> Result<OrderStudy> {
    let points = mu_list
        .iter()
        .map(|&mu| {
            let residual = round_trip_error(u, coeffs, mu, opts)?;
            let eps = mu.sqrt();
            let report = ResidualReport {
                mu,
                eps,
                time: 0.0,
                r1_l2: residual / (mu * mu),
                r1_sup: residual / (mu * mu),
                r2_l2: 0.0,
                r2_sup: 0.0,
                r1_l2_raw: residual,
                r1_sup_raw: residual,
                r2_l2_raw: 0.0,
                r2_sup_raw: 0.0,
            };
            Ok(OrderPoint { mu, eps, residual, report })
        })
        .collect::<Result<Vec<_>>>()?;
    let exponent = fit_exponent(&points.iter().map(|p| (p.mu, p.residual)).collect::<Vec<_>>())?;
    Ok(OrderStudy { exponent, points })
}

pub const STANDARD_MU_LIST: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
