//! `wavelab` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Rational64;

use crate::config::{self, ExperimentSpec, ResidualStudySpec, SweepSpec};
use crate::error::Error;
use crate::experiment::{execute_residual_study, execute_run, execute_sweep, thread_count, AppError};
use crate::output::fmt_float;
use crate::params::{
    classify, coeffs_bbm, coeffs_surface_family, coeffs_velocity_family, coeffs_velocity_two_param,
    parse_rational, standard_form_params, Classification, ExactCoefficients, Scaling,
};

pub const DEFAULT_OUT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "wavelab", version, about = "Shallow-water model laboratory: runs, residual studies, sweeps")]
pub struct Cli {
    /// Output root; runs land in <out>/<name>.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps (falls back to WAVELAB_THREADS).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one configuration and write snapshots, series and reports.
    Run(ConfigArg),
    /// Print the coefficient table of a family member.
    CheckCoeffs(CheckCoeffs),
    /// Fit the residual order over a list of mu.
    ResidualStudy {
        #[command(flatten)]
        config: ConfigArg,
        /// Fit synthetic mu^2 residuals instead of computing them.
        #[arg(long)]
        synthetic: bool,
    },
    /// Run a parameter grid concurrently and write summary.csv.
    Sweep(ConfigArg),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Family {
    OneParam,
    TwoParam,
    Surface,
    Bbm,
}

#[derive(Debug, Args)]
pub struct CheckCoeffs {
    pub family: Family,
    /// Velocity family parameter (also the BBM parameter).
    #[arg(short = 'p', allow_hyphen_values = true, value_name = "P")]
    pub p: Option<String>,
    /// Square of the level-line parameter, in [0, 1].
    #[arg(long, allow_hyphen_values = true, value_name = "T")]
    pub theta2: Option<String>,
    /// Surface family parameter.
    #[arg(short = 'q', allow_hyphen_values = true, value_name = "Q")]
    pub q: Option<String>,
    /// Normalisation of the standard CH/DP form.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub kappa_hat: f64,
    /// mu used for the transform constants (eps = sqrt(mu)).
    #[arg(long, default_value_t = 0.2)]
    pub mu: f64,
}

fn rational_arg(name: &str, v: &Option<String>) -> Result<Rational64, AppError> {
    let text = v.as_deref().ok_or_else(|| AppError::Usage(format!("missing {name}")))?;
    parse_rational(text).map_err(|e| AppError::Usage(format!("{name}: {e}")))
}

/// The text printed by `check-coeffs`.
pub fn coeff_table(args: &CheckCoeffs) -> Result<String, AppError> {
    let (label, exact): (String, ExactCoefficients) = match args.family {
        Family::OneParam => {
            let p = rational_arg("-p", &args.p)?;
            (format!("one-param (p = {p})"), coeffs_velocity_family(p))
        }
        Family::TwoParam => {
            let p = rational_arg("-p", &args.p)?;
            let t = rational_arg("--theta2", &args.theta2)?;
            (format!("two-param (p = {p}, theta^2 = {t})"), coeffs_velocity_two_param(p, t)?)
        }
        Family::Surface => {
            let q = rational_arg("-q", &args.q)?;
            (format!("surface (q = {q})"), coeffs_surface_family(q))
        }
        Family::Bbm => {
            let p = rational_arg("-p", &args.p)?;
            (format!("bbm (p = {p})"), coeffs_bbm(p))
        }
    };
    let c = exact.to_f64();
    let mut out = format!("family          {label}\n");
    for (name, r, f) in [
        ("alpha", exact.alpha, c.alpha),
        ("beta", exact.beta, c.beta),
        ("gamma", exact.gamma, c.gamma),
        ("delta", exact.delta, c.delta),
        ("iota", exact.iota, c.iota),
        ("kappa", exact.kappa, c.kappa),
    ] {
        out += &format!("{name:<16}{:<12}{}\n", r.to_string(), fmt_float(f));
    }
    let class = exact.classify();
    debug_assert_eq!(class, classify(&c));
    out += &format!("classification  {class}\n");
    out += if c.beta < 0.0 {
        "solver          well-posed (beta < 0)\n"
    } else {
        "solver          Illposed-for-solver (beta < 0 required)\n"
    };
    if matches!(class, Classification::CamassaHolm | Classification::DegasperisProcesi) {
        let scaling = Scaling::new(args.mu.sqrt(), args.mu, 1.0, 1.0)?;
        let t = standard_form_params(&c, &scaling, args.kappa_hat)?;
        out += &format!(
            "transform       kappa_hat = {}, mu = {}: a = {}, b = {}, v = {}, c = {}\n",
            fmt_float(t.kappa_hat),
            fmt_float(args.mu),
            fmt_float(t.a),
            fmt_float(t.b),
            fmt_float(t.v),
            fmt_float(t.c)
        );
    }
    Ok(out)
}

fn out_root(cli: &Option<PathBuf>, from_config: Option<&str>) -> PathBuf {
    cli.clone().or_else(|| from_config.map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn with_path(path: &Path, e: AppError) -> AppError {
    match e {
        AppError::Model(err @ (Error::AtMu { .. } | Error::Diverged { .. })) => AppError::Model(err),
        AppError::Model(err) => AppError::Usage(format!("{}: {err}", path.display())),
        other => other,
    }
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match &cli.command {
        Command::Run(a) => {
            let spec: ExperimentSpec = config::load(&a.config)?;
            let root = out_root(&cli.out, spec.output_dir.as_deref());
            let o = execute_run(&spec, &root).map_err(|e| with_path(&a.config, e))?;
            let term = o.result.termination;
            let class = o.classification().map(|c| c.to_string()).unwrap_or_else(|| "-".into());
            println!(
                "{}: {} at t = {}, classification {}, wrote {}",
                o.resolved.effective.name,
                term.label(),
                fmt_float(o.result.slope_series.last().map_or(0.0, |s| s.time)),
                class,
                o.dir.display()
            );
        }
        Command::CheckCoeffs(args) => print!("{}", coeff_table(args)?),
        Command::ResidualStudy { config: a, synthetic } => {
            let spec: ResidualStudySpec = config::load(&a.config)?;
            let root = out_root(&cli.out, None);
            let (dir, order) = execute_residual_study(&spec, &root, *synthetic).map_err(|e| with_path(&a.config, e))?;
            println!("{}: exponent {}, wrote {}", spec.name, fmt_float(order.exponent), dir.display());
        }
        Command::Sweep(a) => {
            let spec: SweepSpec = config::load(&a.config)?;
            let threads = thread_count(cli.threads)?;
            let root = out_root(&cli.out, spec.base.output_dir.as_deref());
            let (dir, rows) = execute_sweep(&spec, &root, threads).map_err(|e| with_path(&a.config, e))?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            println!("{}: {} cells ({} failed), wrote {}", spec.name, rows.len(), failed, dir.join("summary.csv").display());
        }
    }
    Ok(())
}

/// Parse `args` and run; returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
