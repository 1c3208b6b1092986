//! Leapfrog / Crank-Nicolson integration in the moving frame `xi = x - t`.
//!
//! The scheme is `(1 + mu beta D2)(u^{n+1} - u^{n-1}) / (2 dt) = F[u^n]` with
//!
//! ```text
//! F[u] = -3/2 eps u u_xi - eps^2 iota u^2 u_xi - eps^3 kappa u^3 u_xi
//!        - mu (alpha - beta) u_xixixi + eps mu (gamma u u_xixixi + delta u_xi u_xixi)
//! ```
//!
//! started by one explicit Euler step.

use serde::{Deserialize, Serialize};

use crate::breaking::{extremes, quadratic_invariant_values, SlopeSample};
use crate::error::{Error, Result};
use crate::grid::{diff_into, Field, Grid, HelmholtzSolver};
use crate::params::{CoefficientSet, Scaling};

pub const DEFAULT_STOP_ON_SLOPE: f64 = 1e4;
pub const DEFAULT_CFL: f64 = 0.25;

/// Named initial data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    /// `amplitude * exp(-sharpness (x - center)^2)`.
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "hundred")]
        sharpness: f64,
        #[serde(default)]
        center: f64,
    },
    /// `amplitude * sin(2 pi mode (x - origin) / L)`.
    Sine { amplitude: f64, mode: u32 },
    Zero,
}

fn one() -> f64 {
    1.0
}

fn hundred() -> f64 {
    100.0
}

impl Default for InitialProfile {
    fn default() -> Self {
        InitialProfile::Gaussian { amplitude: 1.0, sharpness: 100.0, center: 0.0 }
    }
}

impl InitialProfile {
    pub fn sample(&self, grid: Grid) -> Field {
        match *self {
            InitialProfile::Gaussian { amplitude, sharpness, center } => {
                Field::from_fn(grid, |x| amplitude * (-sharpness * (x - center) * (x - center)).exp())
            }
            InitialProfile::Sine { amplitude, mode } => {
                let k = 2.0 * std::f64::consts::PI * mode as f64 / grid.length;
                Field::from_fn(grid, |x| amplitude * (k * (x - grid.origin)).sin())
            }
            InitialProfile::Zero => Field::zeros(grid),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub coeffs: CoefficientSet,
    pub scaling: Scaling,
    pub grid: Grid,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub initial_profile: InitialProfile,
    #[serde(default)]
    pub asselin: f64,
    #[serde(default = "default_stop")]
    pub stop_on_slope: f64,
    /// Drop every term carrying a power of `eps`.
    #[serde(default)]
    pub linearized: bool,
}

fn default_stop() -> f64 {
    DEFAULT_STOP_ON_SLOPE
}

impl RunConfig {
    /// Config with the automatic time step and no snapshots.
    pub fn new(coeffs: CoefficientSet, scaling: Scaling, grid: Grid, t_end: f64, initial_profile: InitialProfile) -> Self {
        Self {
            coeffs,
            scaling,
            grid,
            dt: default_dt(&grid, &coeffs, scaling.mu),
            t_end,
            snapshot_times: Vec::new(),
            initial_profile,
            asselin: 0.0,
            stop_on_slope: DEFAULT_STOP_ON_SLOPE,
            linearized: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if let Some(t) = self.snapshot_times.iter().find(|&&t| !(0.0..=self.t_end).contains(&t)) {
            return bad(format!("snapshot time {t} outside [0, {}]", self.t_end));
        }
        if !self.coeffs.solver_admissible() {
            return bad(format!("the scheme needs beta < 0, got beta = {}", self.coeffs.beta));
        }
        if !(0.0..0.5).contains(&self.asselin) {
            return bad(format!("asselin coefficient must lie in [0, 0.5), got {}", self.asselin));
        }
        if !(self.stop_on_slope > 0.0) {
            return bad(format!("stop_on_slope must be positive, got {}", self.stop_on_slope));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lab,
    Moving,
}

/// Two time levels of the leapfrog scheme, stored in the moving frame.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub time: f64,
    pub current: Field,
    pub previous: Field,
    pub frame: Frame,
}

impl WaveState {
    pub fn initial(u0: Field) -> Self {
        Self { time: 0.0, previous: u0.clone(), current: u0, frame: Frame::Moving }
    }

    /// The current level with coordinates shifted back to the lab frame.
    pub fn lab_field(&self) -> Field {
        to_lab(&self.current, self.time)
    }
}

pub(crate) fn to_lab(field: &Field, time: f64) -> Field {
    let g = field.grid;
    let grid = Grid { origin: g.origin + time, ..g };
    Field { grid, values: field.values.clone() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Diverged { time: f64 },
    SlopeStop { time: f64 },
}

impl Termination {
    pub fn time(&self) -> Option<f64> {
        match *self {
            Termination::Completed => None,
            Termination::Diverged { time } | Termination::SlopeStop { time } => Some(time),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::Diverged { .. } => "diverged",
            Termination::SlopeStop { .. } => "slope_stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    /// Lab-frame field.
    pub field: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub snapshots: Vec<Snapshot>,
    pub slope_series: Vec<SlopeSample>,
    /// Quadratic invariant `sum u^2 dx - mu beta sum (D+ u)^2 dx`, one entry per slope sample.
    pub invariant_series: Vec<f64>,
    pub termination: Termination,
    /// Last finite state, lab frame.
    pub final_field: Field,
    pub dt: f64,
    pub steps: usize,
}

/// Lab-frame linear phase speed `(1 - mu alpha k^2) / (1 - mu beta k^2)`.
pub fn dispersion_speed(k: f64, coeffs: &CoefficientSet, mu: f64) -> Result<f64> {
    let den = 1.0 - mu * coeffs.beta * k * k;
    if den.abs() < 1e-14 {
        return Err(Error::SingularOperator(mu * coeffs.beta));
    }
    Ok((1.0 - mu * coeffs.alpha * k * k) / den)
}

/// `0.25 dx / max(1, max_k |c(k)|, max_k |c(k) - 1|)` over the resolved wavenumbers.
pub fn default_dt(grid: &Grid, coeffs: &CoefficientSet, mu: f64) -> f64 {
    let mut vmax: f64 = 1.0;
    for j in 0..=grid.n / 2 {
        let k = 2.0 * std::f64::consts::PI * j as f64 / grid.length;
        if let Ok(c) = dispersion_speed(k, coeffs, mu) {
            vmax = vmax.max(c.abs()).max((c - 1.0).abs());
        }
    }
    DEFAULT_CFL * grid.dx() / vmax
}

/// Preallocated buffers and the factorised implicit operator.
pub struct Stepper {
    coeffs: CoefficientSet,
    eps: f64,
    mu: f64,
    linearized: bool,
    dt: f64,
    asselin: f64,
    dx: f64,
    solver: HelmholtzSolver,
    ux: Vec<f64>,
    uxx: Vec<f64>,
    uxxx: Vec<f64>,
    rhs: Vec<f64>,
    incr: Vec<f64>,
}

impl Stepper {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let n = config.grid.n;
        let solver = HelmholtzSolver::new(config.grid, config.scaling.mu * config.coeffs.beta)?;
        Ok(Self {
            coeffs: config.coeffs,
            eps: if config.linearized { 0.0 } else { config.scaling.eps },
            mu: config.scaling.mu,
            linearized: config.linearized,
            dt: config.dt,
            asselin: config.asselin,
            dx: config.grid.dx(),
            solver,
            ux: vec![0.0; n],
            uxx: vec![0.0; n],
            uxxx: vec![0.0; n],
            rhs: vec![0.0; n],
            incr: vec![0.0; n],
        })
    }

    fn eval(&mut self, u: &[f64]) {
        diff_into(u, self.dx, 1, &mut self.ux);
        diff_into(u, self.dx, 3, &mut self.uxxx);
        let CoefficientSet { alpha, beta, gamma, delta, iota, kappa } = self.coeffs;
        let (eps, mu) = (self.eps, self.mu);
        let disp = -mu * (alpha - beta);
        if self.linearized {
            for (r, d3) in self.rhs.iter_mut().zip(&self.uxxx) {
                *r = disp * d3;
            }
            return;
        }
        diff_into(u, self.dx, 2, &mut self.uxx);
        let a1 = -1.5 * eps;
        let a2 = -eps * eps * iota;
        let a3 = -eps * eps * eps * kappa;
        let em = eps * mu;
        for i in 0..u.len() {
            let (v, d1, d2, d3) = (u[i], self.ux[i], self.uxx[i], self.uxxx[i]);
            self.rhs[i] = (a1 + v * (a2 + a3 * v)) * v * d1 + disp * d3 + em * (gamma * v * d3 + delta * d1 * d2);
        }
    }

    /// `(1 + mu beta D2)^{-1} F[u]`, left in `self.incr`.
    fn increment(&mut self, u: &[f64]) {
        self.eval(u);
        self.solver.solve_into(&self.rhs, &mut self.incr);
    }

    pub fn first_step(&mut self, state: &WaveState) -> Result<WaveState> {
        self.increment(&state.current.values);
        let dt = self.dt;
        let values: Vec<f64> = state.current.values.iter().zip(&self.incr).map(|(u, w)| u + dt * w).collect();
        let next = Field { grid: state.current.grid, values };
        let time = state.time + dt;
        if !next.is_finite() {
            return Err(Error::Diverged { time });
        }
        Ok(WaveState { time, previous: state.current.clone(), current: next, frame: Frame::Moving })
    }

    pub fn leapfrog_step(&mut self, state: &WaveState) -> Result<WaveState> {
        let mut s = state.clone();
        self.leapfrog_in_place(&mut s, state.time + self.dt)?;
        Ok(s)
    }

    /// Advance in place; on divergence the state is left untouched.
    fn leapfrog_in_place(&mut self, s: &mut WaveState, time: f64) -> Result<()> {
        self.increment(&s.current.values);
        let two_dt = 2.0 * self.dt;
        let next: Vec<f64> = s.previous.values.iter().zip(&self.incr).map(|(p, w)| p + two_dt * w).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { time });
        }
        let a = self.asselin;
        let cur = &mut s.current.values;
        let prev = &mut s.previous.values;
        for i in 0..next.len() {
            let filtered = if a > 0.0 { cur[i] + a * (next[i] - 2.0 * cur[i] + prev[i]) } else { cur[i] };
            prev[i] = filtered;
            cur[i] = next[i];
        }
        s.time = time;
        Ok(())
    }
}

/// `F[u]` evaluated with the centered stencils.
pub fn eval_rhs(u: &Field, coeffs: &CoefficientSet, scaling: &Scaling) -> Result<Field> {
    let cfg = RunConfig::new(*coeffs, *scaling, u.grid, 1.0, InitialProfile::Zero);
    let mut st = Stepper::new(&cfg)?;
    st.eval(&u.values);
    let out = Field { grid: u.grid, values: st.rhs };
    if !out.is_finite() {
        return Err(Error::Diverged { time: f64::NAN });
    }
    Ok(out)
}

pub fn first_step(state: &WaveState, config: &RunConfig) -> Result<WaveState> {
    if state.time != 0.0 {
        return Err(Error::InvalidParameter("first_step starts from t = 0".into()));
    }
    Stepper::new(config)?.first_step(state)
}

pub fn leapfrog_step(state: &WaveState, config: &RunConfig) -> Result<WaveState> {
    Stepper::new(config)?.leapfrog_step(state)
}

fn sample(field: &Field, time: f64) -> SlopeSample {
    let (max_slope, imax, min_slope, imin) = extremes(&field.values, field.grid.dx());
    let x = |i: usize| field.grid.x(i) + time;
    SlopeSample { time, max_slope, argmax: x(imax), min_slope, argmin: x(imin) }
}

/// Integrate to `t_end`, stopping early on non-finite values or slope overflow.
pub fn run(config: &RunConfig) -> Result<RunResult> {
    config.validate()?;
    let dt = config.dt;
    let steps = if config.t_end == 0.0 { 0 } else { (config.t_end / dt - 1e-9).ceil().max(1.0) as usize };
    let beta = config.coeffs.beta;
    let mu = config.scaling.mu;

    let mut wanted: Vec<(usize, f64)> = config
        .snapshot_times
        .iter()
        .map(|&t| (((t / dt).round() as usize).min(steps), t))
        .collect();
    wanted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut next_snap = 0;

    let u0 = config.initial_profile.sample(config.grid);
    let mut state = WaveState::initial(u0);
    let mut stepper = Stepper::new(config)?;
    let mut result = RunResult {
        snapshots: Vec::new(),
        slope_series: Vec::with_capacity(steps + 1),
        invariant_series: Vec::with_capacity(steps + 1),
        termination: Termination::Completed,
        final_field: state.lab_field(),
        dt,
        steps: 0,
    };

    let mut record = |state: &WaveState, step: usize, result: &mut RunResult| -> bool {
        let s = sample(&state.current, state.time);
        result.slope_series.push(s);
        result.invariant_series.push(quadratic_invariant_values(&state.current.values, state.current.grid.dx(), mu, beta));
        while next_snap < wanted.len() && wanted[next_snap].0 == step {
            result.snapshots.push(Snapshot { time: state.time, field: state.lab_field() });
            next_snap += 1;
        }
        s.max_slope.abs().max(s.min_slope.abs()) > config.stop_on_slope
    };

    if record(&state, 0, &mut result) {
        result.termination = Termination::SlopeStop { time: 0.0 };
        return Ok(result);
    }
    for step in 1..=steps {
        let time = step as f64 * dt;
        let advanced = if step == 1 {
            stepper.first_step(&state).map(|s| state = s)
        } else {
            stepper.leapfrog_in_place(&mut state, time)
        };
        if advanced.is_err() {
            result.termination = Termination::Diverged { time };
            break;
        }
        state.time = time;
        result.steps = step;
        if record(&state, step, &mut result) {
            result.termination = Termination::SlopeStop { time };
            break;
        }
    }
    result.final_field = state.lab_field();
    Ok(result)
}
