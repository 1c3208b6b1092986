//! Uniform periodic grids, finite differences and the `(1 + c d^2)` inverse.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::fmt_float;

pub const MIN_POINTS: usize = 8;

/// Uniform periodic grid on `[origin, origin + length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub length: f64,
    pub n: usize,
    pub origin: f64,
}

impl Grid {
    /// Grid centred on zero.
    pub fn new(length: f64, n: usize) -> Result<Self> {
        Self::with_origin(length, n, -0.5 * length)
    }

    pub fn with_origin(length: f64, n: usize, origin: f64) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::TooFewPoints { need: MIN_POINTS, got: n });
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter(format!("grid length must be positive, got {length}")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidParameter("grid origin must be finite".into()));
        }
        Ok(Self { length, n, origin })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.dx()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Angular wavenumbers in FFT order; the Nyquist entry is positive.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n as i64;
        let base = 2.0 * PI / self.length;
        (0..n).map(|j| base * if j <= n / 2 { j } else { j - n } as f64).collect()
    }

    /// Symbol of `-D2`, i.e. `(4/dx^2) sin^2(k dx / 2)`.
    pub fn d2_symbol(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n)
            .map(|j| {
                let s = (PI * j as f64 / self.n as f64).sin();
                4.0 * s * s / (dx * dx)
            })
            .collect()
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch(format!("{} values for a grid of {} points", values.len(), grid.n)));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.n] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self { grid, values: (0..grid.n).map(|i| f(grid.x(i))).collect() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Write `x,<name>` rows with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W, name: &str) -> std::io::Result<()> {
        writeln!(w, "x,{name}")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", fmt_float(self.grid.x(i)), fmt_float(*v))?;
        }
        Ok(())
    }

    pub fn to_csv(&self, name: &str) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, name).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Centered periodic stencil of accuracy two, written into `out`.
///
/// Orders: `[-1,0,1]/(2dx)`, `[1,-2,1]/dx^2`, `[-1,2,0,-2,1]/(2dx^3)`.
pub fn diff_into(u: &[f64], dx: f64, order: u8, out: &mut [f64]) {
    let n = u.len();
    debug_assert_eq!(out.len(), n);
    debug_assert!(n >= 4);
    let at = |i: isize| u[i.rem_euclid(n as isize) as usize];
    match order {
        1 => {
            let s = 0.5 / dx;
            for i in 1..n - 1 {
                out[i] = s * (u[i + 1] - u[i - 1]);
            }
            out[0] = s * (u[1] - u[n - 1]);
            out[n - 1] = s * (u[0] - u[n - 2]);
        }
        2 => {
            let s = 1.0 / (dx * dx);
            for i in 1..n - 1 {
                out[i] = s * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
            }
            out[0] = s * (u[1] - 2.0 * u[0] + u[n - 1]);
            out[n - 1] = s * (u[0] - 2.0 * u[n - 1] + u[n - 2]);
        }
        3 => {
            let s = 0.5 / (dx * dx * dx);
            for i in 2..n - 2 {
                out[i] = s * (u[i + 2] - 2.0 * u[i + 1] + 2.0 * u[i - 1] - u[i - 2]);
            }
            for i in [0, 1, n - 2, n - 1] {
                let i = i as isize;
                out[i as usize] = s * (at(i + 2) - 2.0 * at(i + 1) + 2.0 * at(i - 1) - at(i - 2));
            }
        }
        _ => unreachable!("stencil order checked by caller"),
    }
}

pub fn diff(field: &Field, order: u8) -> Result<Field> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidParameter(format!("derivative order must be 1, 2 or 3, got {order}")));
    }
    let mut out = vec![0.0; field.grid.n];
    diff_into(&field.values, field.grid.dx(), order, &mut out);
    Ok(Field { grid: field.grid, values: out })
}

/// Forward difference `(u[i+1] - u[i]) / dx`.
pub fn forward_diff(field: &Field) -> Field {
    let n = field.grid.n;
    let dx = field.grid.dx();
    let v = &field.values;
    Field { grid: field.grid, values: (0..n).map(|i| (v[(i + 1) % n] - v[i]) / dx).collect() }
}

fn fft(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

fn ifft_real(mut buf: Vec<Complex64>) -> Vec<f64> {
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Fourier derivative of any order. Odd orders drop the Nyquist mode.
pub fn spectral_diff(field: &Field, order: u32) -> Field {
    let n = field.grid.n;
    let k = field.grid.wavenumbers();
    let mut hat = fft(&field.values);
    let factor = Complex64::new(0.0, 1.0).powu(order);
    for (j, h) in hat.iter_mut().enumerate() {
        if order % 2 == 1 && n % 2 == 0 && j == n / 2 {
            *h = Complex64::new(0.0, 0.0);
        } else {
            *h *= factor * k[j].powi(order as i32);
        }
    }
    Field { grid: field.grid, values: ifft_real(hat) }
}

/// Multiply every Fourier mode by the real symbol `m(k)`.
pub fn apply_multiplier(field: &Field, m: impl Fn(f64) -> f64) -> Field {
    let mut hat = fft(&field.values);
    for (h, k) in hat.iter_mut().zip(field.grid.wavenumbers()) {
        *h *= m(k);
    }
    Field { grid: field.grid, values: ifft_real(hat) }
}

/// Apply `(1 + c D2)`.
pub fn apply_helmholtz(field: &Field, c: f64) -> Field {
    let mut d2 = vec![0.0; field.grid.n];
    diff_into(&field.values, field.grid.dx(), 2, &mut d2);
    let values = field.values.iter().zip(&d2).map(|(&f, &g)| f + c * g).collect();
    Field { grid: field.grid, values }
}

#[derive(Debug, Clone)]
enum Method {
    Identity,
    /// Thomas factorisation of the cyclic system with the Sherman-Morrison correction precomputed.
    Cyclic { off: f64, gamma: f64, cp: Vec<f64>, inv_m: Vec<f64>, z: Vec<f64>, z_den: f64 },
    Fourier { symbol: Vec<f64> },
}

/// Reusable solver for `(1 + c D2) w = f` on a fixed grid.
#[derive(Debug, Clone)]
pub struct HelmholtzSolver {
    grid: Grid,
    c: f64,
    method: Method,
}

impl HelmholtzSolver {
    /// Cyclic tridiagonal path for `c < 0`, Fourier path for `c > 0` when nonsingular.
    pub fn new(grid: Grid, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!("helmholtz coefficient must be finite, got {c}")));
        }
        if c == 0.0 {
            return Ok(Self { grid, c, method: Method::Identity });
        }
        if c > 0.0 {
            return Self::fourier(grid, c);
        }
        let n = grid.n;
        let dx2 = grid.dx() * grid.dx();
        let off = c / dx2;
        let diag = 1.0 - 2.0 * c / dx2;
        let gamma = -diag;
        let mut bb = vec![diag; n];
        bb[0] = diag - gamma;
        bb[n - 1] = diag - off * off / gamma;

        let mut cp = vec![0.0; n];
        let mut inv_m = vec![0.0; n];
        inv_m[0] = 1.0 / bb[0];
        cp[0] = off * inv_m[0];
        for i in 1..n {
            inv_m[i] = 1.0 / (bb[i] - off * cp[i - 1]);
            cp[i] = off * inv_m[i];
        }
        let mut rhs = vec![0.0; n];
        rhs[0] = gamma;
        rhs[n - 1] = off;
        let mut z = vec![0.0; n];
        thomas(&cp, &inv_m, off, &rhs, &mut z);
        let z_den = 1.0 + z[0] + off * z[n - 1] / gamma;
        Ok(Self { grid, c, method: Method::Cyclic { off, gamma, cp, inv_m, z, z_den } })
    }

    /// Force the discrete Fourier multiplier path.
    pub fn fourier(grid: Grid, c: f64) -> Result<Self> {
        let symbol: Vec<f64> = grid.d2_symbol().into_iter().map(|k2| 1.0 - c * k2).collect();
        if symbol.iter().any(|s| s.abs() < 1e-10) {
            return Err(Error::SingularOperator(c));
        }
        Ok(Self { grid, c, method: Method::Fourier { symbol } })
    }

    pub fn coefficient(&self) -> f64 {
        self.c
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn solve_into(&self, f: &[f64], out: &mut [f64]) {
        match &self.method {
            Method::Identity => out.copy_from_slice(f),
            Method::Cyclic { off, gamma, cp, inv_m, z, z_den } => {
                thomas(cp, inv_m, *off, f, out);
                let n = out.len();
                let fact = (out[0] + off * out[n - 1] / gamma) / z_den;
                for (o, zi) in out.iter_mut().zip(z) {
                    *o -= fact * zi;
                }
            }
            Method::Fourier { symbol } => {
                let mut hat = fft(f);
                for (h, s) in hat.iter_mut().zip(symbol) {
                    *h /= *s;
                }
                out.copy_from_slice(&ifft_real(hat));
            }
        }
    }

    pub fn solve(&self, f: &Field) -> Result<Field> {
        self.grid.check_same(&f.grid)?;
        let mut out = vec![0.0; f.grid.n];
        self.solve_into(&f.values, &mut out);
        Ok(Field { grid: f.grid, values: out })
    }
}

/// Constant off-diagonal Thomas sweep with a precomputed factorisation.
fn thomas(cp: &[f64], inv_m: &[f64], off: f64, f: &[f64], x: &mut [f64]) {
    let n = f.len();
    x[0] = f[0] * inv_m[0];
    for i in 1..n {
        x[i] = (f[i] - off * x[i - 1]) * inv_m[i];
    }
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
}

/// Solve `(1 + c D2) w = f` with the default method.
pub fn helmholtz_solve(f: &Field, c: f64) -> Result<Field> {
    HelmholtzSolver::new(f.grid, c)?.solve(f)
}

pub fn helmholtz_solve_fourier(f: &Field, c: f64) -> Result<Field> {
    if c == 0.0 {
        return Ok(f.clone());
    }
    HelmholtzSolver::fourier(f.grid, c)?.solve(f)
}

/// `(1 - (mu/12) D2)^{-1} f`, the discrete convolution with [`KernelP`].
pub fn convolve_p(f: &Field, mu: f64) -> Result<Field> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    helmholtz_solve(f, -mu / 12.0)
}

/// `P(x) = sqrt(3/mu) exp(-2 sqrt(3/mu) |x|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelP {
    pub mu: f64,
    pub decay: f64,
    pub amplitude: f64,
}

impl KernelP {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        let amplitude = (3.0 / mu).sqrt();
        Ok(Self { mu, decay: 2.0 * amplitude, amplitude })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * (-self.decay * x.abs()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelNorms {
    pub sup: f64,
    pub l1: f64,
    pub l2: f64,
    pub sup_dx: f64,
    pub l1_dx: f64,
    pub l2_dx: f64,
}

/// Closed-form Lebesgue norms of `P` and `P_x` on the line.
pub fn kernel_norms(mu: f64) -> Result<KernelNorms> {
    KernelP::new(mu)?;
    let r = 3.0 / mu;
    Ok(KernelNorms {
        sup: r.sqrt(),
        l1: 1.0,
        l2: (0.25 * r).powf(0.25),
        sup_dx: 2.0 * r,
        l1_dx: 2.0 * r.sqrt(),
        l2_dx: 2f64.sqrt() * r.powf(0.75),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Linf,
    L2,
    Hs(u32),
    /// `|u|_{H^s}^2 - mu beta |u_x|_{H^s}^2`.
    Es { s: u32, mu: f64, beta: f64 },
    /// `|u|_{H^s}^2 + mu |u_x|_{H^s}^2`.
    Xs { s: u32, mu: f64 },
}

pub const MAX_SOBOLEV_INDEX: u32 = 3;

/// Discrete norms; Sobolev variants use the Fourier symbol `(1 + k^2)^s`.
pub fn norm(field: &Field, kind: NormKind) -> Result<f64> {
    let (s, extra): (u32, Box<dyn Fn(f64) -> f64>) = match kind {
        NormKind::Linf => return Ok(field.max_abs()),
        NormKind::L2 => return Ok(quadrature_with(field, |v| v * v).sqrt()),
        NormKind::Hs(s) => (s, Box::new(|_| 1.0)),
        NormKind::Es { s, mu, beta } => (s, Box::new(move |k2| 1.0 - mu * beta * k2)),
        NormKind::Xs { s, mu } => (s, Box::new(move |k2| 1.0 + mu * k2)),
    };
    if s > MAX_SOBOLEV_INDEX {
        return Err(Error::InvalidParameter(format!("Sobolev index {s} outside 0..={MAX_SOBOLEV_INDEX}")));
    }
    let hat = fft(&field.values);
    let n = field.grid.n as f64;
    let total: f64 = field
        .grid
        .wavenumbers()
        .iter()
        .zip(&hat)
        .map(|(k, h)| {
            let k2 = k * k;
            (1.0 + k2).powi(s as i32) * extra(k2) * h.norm_sqr()
        })
        .sum();
    Ok((total * field.grid.dx() / n).max(0.0).sqrt())
}

/// Periodic rectangle rule.
pub fn quadrature(field: &Field) -> f64 {
    field.values.iter().sum::<f64>() * field.grid.dx()
}

pub fn quadrature_with(field: &Field, f: impl Fn(f64) -> f64) -> f64 {
    field.values.iter().map(|&v| f(v)).sum::<f64>() * field.grid.dx()
}
