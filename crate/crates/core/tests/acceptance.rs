//! Acceptance checks; prints one PASS/FAIL line per criterion and exits nonzero on any FAIL.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use num_rational::Rational64;
use rustfft::num_complex::Complex64;

use wavelab::asymptotics::{consistency_order, round_trip_study, StudySetup, UFromZeta, STANDARD_MU_LIST};
use wavelab::breaking::{
    amplitude_for_criterion, blowup_criterion, classify_breaker, first_crossing, slope_ode_bounds_check,
    smooth_window_drift, Breaker, CriterionMode, SlopeSample,
};
use wavelab::config::{load, ExperimentSpec, ResidualStudySpec};
use wavelab::grid::{convolve_p, kernel_norms, Field, Grid};
use wavelab::params::{
    classify, coeffs_velocity_family, coeffs_velocity_two_param, Classification, ExactCoefficients, Preset, Scaling,
};
use wavelab::solver::{dispersion_speed, run, InitialProfile, RunConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn coefficient_identities() -> Outcome {
    let quad = |c: ExactCoefficients| [c.alpha, c.beta, c.gamma, c.delta];
    let p_m112 = coeffs_velocity_family(r(-1, 12));
    let p_16 = coeffs_velocity_family(r(1, 6));
    let p_m512 = coeffs_velocity_family(r(-5, 12));
    let ch = coeffs_velocity_two_param(r(-1, 3), r(1, 2)).unwrap();
    let dp = coeffs_velocity_two_param(r(-77, 216), r(23, 36)).unwrap();
    let sets = [
        ("p=-1/12", quad(p_m112) == [r(-1, 12), r(-1, 4), r(-1, 24), r(-7, 12)]),
        ("p=1/6", quad(p_16) == [r(1, 6), r(0, 1), r(-5, 12), r(-41, 24)]),
        ("p=-5/12", quad(p_m512) == [r(-5, 12), r(-7, 12), r(11, 24), r(11, 12)]),
        ("CH", quad(ch) == [r(-1, 4), r(-5, 12), r(5, 24), r(5, 12)]),
        ("DP", quad(dp) == [r(-11, 54), r(-10, 27), r(5, 36), r(5, 12)]),
    ];
    let classes = [
        ch.classify() == Classification::CamassaHolm && classify(&ch.to_f64()) == Classification::CamassaHolm,
        dp.classify() == Classification::DegasperisProcesi
            && classify(&dp.to_f64()) == Classification::DegasperisProcesi,
        p_m512.classify() == Classification::Generic && classify(&p_m512.to_f64()) == Classification::Generic,
    ];
    let bad: Vec<_> = sets.iter().filter(|s| !s.1).map(|s| s.0).collect();
    Outcome {
        pass: bad.is_empty() && classes.iter().all(|&c| c),
        detail: format!("5 rational sets, mismatches {bad:?}; classify CH/DP/Generic {classes:?}"),
    }
}

fn kernel() -> Outcome {
    let mu = 0.2;
    let k = kernel_norms(mu).unwrap();
    let q = 3.0 / mu;
    let expected = [
        (k.sup, q.sqrt()),
        (k.l1, 1.0),
        (k.l2, (q / 4.0).powf(0.25)),
        (k.sup_dx, 6.0 / mu),
        (k.l1_dx, 2.0 * q.sqrt()),
        (k.l2_dx, 2f64.sqrt() * q.powf(0.75)),
    ];
    let norm_err = expected.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let g = Grid::new(10.0, 65536).unwrap();
    let mut delta = Field::zeros(g);
    let i0 = g.n / 2;
    delta.values[i0] = 1.0 / g.dx();
    let w = convolve_p(&delta, mu).unwrap();
    let decay = 2.0 * q.sqrt();
    let mut rel: f64 = 0.0;
    for i in 0..g.n {
        let x = g.x(i) - g.x(i0);
        if x.abs() <= 2.0 {
            let p = q.sqrt() * (-decay * x.abs()).exp();
            rel = rel.max((w.values[i] - p).abs() / p);
        }
    }
    Outcome {
        pass: norm_err <= 1e-12 && rel <= 1e-6,
        detail: format!("norm error {norm_err:.1e} (tol 1e-12), delta response rel error {rel:.2e} on |x|<=2 (tol 1e-6)"),
    }
}

fn dispersion() -> Outcome {
    let coeffs = Preset::CamassaHolm.coefficients();
    let scaling = Scaling::camassa_holm(0.2).unwrap();
    let grid = Grid::with_origin(2.0 * PI, 256, 0.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for mode in 1..=3u32 {
        let k = mode as f64;
        let c = dispersion_speed(k, &coeffs, scaling.mu).unwrap();
        let period = grid.length / c.abs();
        let profile = InitialProfile::Sine { amplitude: 1e-6, mode };
        let mut cfg = RunConfig::new(coeffs, scaling, grid, period, profile);
        cfg.snapshot_times = (0..=16).map(|j| period * j as f64 / 16.0).collect();
        let res = run(&cfg).unwrap();
        let mut prev = 0.0;
        let mut unwrapped = Vec::new();
        for s in &res.snapshots {
            let a: Complex64 = (0..s.field.grid.n)
                .map(|i| s.field.values[i] * Complex64::from_polar(1.0, -k * s.field.grid.x(i)))
                .sum();
            let mut ph = a.arg();
            while ph - prev > PI {
                ph -= 2.0 * PI;
            }
            while ph - prev < -PI {
                ph += 2.0 * PI;
            }
            prev = ph;
            unwrapped.push((s.time, ph));
        }
        let n = unwrapped.len() as f64;
        let mt = unwrapped.iter().map(|p| p.0).sum::<f64>() / n;
        let mp = unwrapped.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = unwrapped.iter().map(|p| (p.0 - mt) * (p.1 - mp)).sum::<f64>()
            / unwrapped.iter().map(|p| (p.0 - mt).powi(2)).sum::<f64>();
        let measured = -slope / k;
        let err = (measured - c).abs() / c.abs();
        worst = worst.max(err);
        parts.push(format!("k={mode}: {measured:.6} vs {c:.6}"));
    }
    Outcome { pass: worst <= 0.01, detail: format!("{} ; worst rel error {worst:.2e} (tol 1e-2)", parts.join(", ")) }
}

fn conservation() -> Outcome {
    let scaling = Scaling::camassa_holm(0.2).unwrap();
    let grid = Grid::new(4.0, 16384).unwrap();
    let profile = InitialProfile::Gaussian { amplitude: 0.1, sharpness: 100.0, center: 0.0 };
    let mut cfg = RunConfig::new(Preset::SurfaceQ112.coefficients(), scaling, grid, 1.0, profile);
    cfg.stop_on_slope = 10.0;
    let res = run(&cfg).unwrap();
    let drift = smooth_window_drift(&res, 10.0);
    let samples = res.slope_series.len();
    Outcome {
        pass: drift < 1e-5 && samples > 1,
        detail: format!("relative drift {drift:.3e} over {samples} samples to t = {} (tol 1e-5)", res.slope_series[samples - 1].time),
    }
}

fn consistency() -> Outcome {
    let spec: ResidualStudySpec = load(&configs().join("residual_study.json")).unwrap();
    let setup = StudySetup {
        family: spec.family,
        grid: spec.grid.resolve().unwrap(),
        initial_profile: spec.initial_profile,
        t_probe: spec.t_probe,
        u_from_zeta: spec.u_from_zeta,
    };
    match consistency_order(&setup, &spec.mu_list) {
        Ok(study) => Outcome {
            pass: (1.7..=2.3).contains(&study.exponent),
            detail: format!("mu {:?}, fitted exponent {:.4} (want [1.7, 2.3])", spec.mu_list, study.exponent),
        },
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    }
}

fn dichotomy() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (file, want) in [("figplung.json", Breaker::Plunging), ("figsurg.json", Breaker::Surging)] {
        let spec: ExperimentSpec = load(&configs().join(file)).unwrap();
        for factor in [1, 2] {
            let mut s = spec.clone();
            s.grid.n *= factor;
            let resolved = s.resolve().unwrap();
            let res = run(&resolved.run).unwrap();
            let got = classify_breaker(&res, resolved.threshold);
            ok &= got == want;
            parts.push(format!("{} n={}: {got} at t={:.4}", resolved.effective.name, s.grid.n, res.termination.time().unwrap_or(f64::NAN)));
        }
    }
    Outcome { pass: ok, detail: parts.join("; ") }
}

/// Every rung of the amplitude ladder that satisfies the criterion must cross 1e5 before `t_upper`.
fn bracket() -> Outcome {
    let scaling = Scaling::camassa_holm(0.2).unwrap();
    let mode = CriterionMode::SupZeta0Prime;
    let grid = Grid::new(2.0, 8192).unwrap();
    let sharpness = 160000.0;
    let gaussian = |amplitude: f64| InitialProfile::Gaussian { amplitude, sharpness, center: 0.0 };
    let base = 0.1;
    let mut amplitude = base * amplitude_for_criterion(&gaussian(base).sample(grid), &scaling, mode).unwrap();
    let (mut rungs, mut crossed, mut early) = (0, 0, 0);
    let mut parts = Vec::new();
    loop {
        let profile = gaussian(amplitude);
        let crit = blowup_criterion(&profile.sample(grid), &scaling, mode).unwrap();
        if !crit.satisfied {
            break;
        }
        let mut cfg = RunConfig::new(Preset::SurfaceQ112.coefficients(), scaling, grid, crit.t_upper, profile);
        cfg.stop_on_slope = 1e5;
        let res = run(&cfg).unwrap();
        let hit = first_crossing(&res.slope_series, 1e5).filter(|&t| t < crit.t_upper);
        rungs += 1;
        if let Some(t) = hit {
            crossed += 1;
            if t < crit.t_lower {
                early += 1;
            }
        }
        let peak = res.slope_series.iter().map(|s| s.max_slope.max(-s.min_slope)).fold(0.0, f64::max);
        parts.push(format!("A={amplitude:.3}:{}", hit.map_or(format!("none(peak {peak:.0})"), |t| format!("{t:.4}<{:.4}", crit.t_upper))));
        amplitude *= 1.25;
    }
    Outcome {
        pass: rungs > 0 && crossed == rungs,
        detail: format!(
            "s={sharpness}, n={}: {crossed}/{rungs} satisfying amplitudes cross 1e5 before t_upper; t_lower violations (report only): {early}; {}",
            grid.n,
            parts.join(" ")
        ),
    }
}

fn riccati() -> Outcome {
    let scaling = Scaling::camassa_holm(0.2).unwrap();
    let (eps, m0) = (scaling.eps, 10.0);
    let t_star = 1.0 / (1.75 * eps * m0);
    let steps = 2000;
    let dt = 0.9 * t_star / steps as f64;
    let series: Vec<SlopeSample> = (0..=steps)
        .map(|i| {
            let t = i as f64 * dt;
            let m = m0 / (1.0 - 1.75 * eps * m0 * t);
            SlopeSample { time: t, max_slope: m, argmax: 0.0, min_slope: -m, argmin: 0.0 }
        })
        .collect();
    let check = slope_ode_bounds_check(&series, &scaling, 0.0);
    let failed = check.verdicts.iter().filter(|v| !v.ok()).count();
    Outcome {
        pass: check.all_ok() && !check.verdicts.is_empty(),
        detail: format!("{} interior steps, {failed} outside the band (abs tol 1e-9)", check.verdicts.len()),
    }
}

fn round_trip() -> Outcome {
    let u = InitialProfile::Gaussian { amplitude: 1.0, sharpness: 1.0, center: 0.0 }.sample(Grid::new(40.0, 1024).unwrap());
    let coeffs = coeffs_velocity_family(r(-1, 12)).to_f64();
    match round_trip_study(&u, &coeffs, &STANDARD_MU_LIST, UFromZeta::default()) {
        Ok(s) => Outcome { pass: s.exponent >= 1.7, detail: format!("fitted exponent {:.4} (want >= 1.7)", s.exponent) },
        Err(e) => Outcome { pass: false, detail: e.to_string() },
    }
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 9] = [
        ("coefficient identities", coefficient_identities),
        ("kernel norms and delta response", kernel),
        ("dispersion speeds", dispersion),
        ("conservation", conservation),
        ("consistency order", consistency),
        ("breaker dichotomy", dichotomy),
        ("breaking-time bracket", bracket),
        ("riccati bound self-test", riccati),
        ("round-trip reconstruction", round_trip),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let o = check();
        failures += usize::from(!o.pass);
        println!("{} {name}: {} [{:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, start.elapsed().as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
