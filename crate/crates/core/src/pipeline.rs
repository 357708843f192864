//! End-to-end stages behind the command-line subcommands. Each stage writes its
//! artifacts into an output directory and returns a summary plus a pass flag.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analyze::{
    extract_series, fit_rate, residual_row, verify_theorem, RateFit, RateModel, ResidualSeries, RunSummary,
    TheoremReport,
};
use crate::archive::{
    indexed_name, read_field, read_json, write_array, write_csv, write_family, write_field, write_json, ArrayMeta,
};
use crate::bloch::{critical_curve, default_xi_grid, fit_expansion, verify_stability, ExpansionFit, StabilityReport};
use crate::config::{output_times, GuessSpec, RunConfig};
use crate::error::{Error, Result};
use crate::evolve::{
    integrate, integrate_rd, make_initial_data, sample_gamma0, toy_integrate, toy_transform_check, InitialData,
};
use crate::model::{build_from_spec, RdSystem};
use crate::modulation::{burgers_solve, hj_direct, hj_solve, HjCoefficients, PhaseField};
use crate::spectral::{derivative, sup_norm, sup_norm_scalar, Field, PeriodicGrid};
use crate::wavetrain::{solve_profile, WaveTrain, WaveTrainFamily};
use crate::whitham::{compute_coefficients, CoefficientChecks, WhithamCoefficients};

/// Tolerance for the coefficient cross-checks.
pub const COEFFICIENT_TOL: f64 = 1e-6;
/// Agreement demanded between the Cole–Hopf and the direct phase solutions.
pub const PREDICT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub command: String,
    pub passed: bool,
    pub summary: Value,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn build_system(cfg: &RunConfig) -> Result<RdSystem> {
    build_from_spec(cfg.system_spec()?)
}

/// Seed for the profile Newton iteration.
pub fn initial_guess(system: &RdSystem, cfg: &RunConfig) -> Result<Vec<Vec<f64>>> {
    let w = cfg.wavetrain_config()?;
    let m = w.m;
    match &w.guess {
        GuessSpec::RotatingWave { amplitude } => {
            if system.n() != 2 {
                return Err(Error::Config("a rotating-wave guess needs two components".into()));
            }
            let q2 = (2.0 * PI * w.k0).powi(2);
            let r = match amplitude {
                Some(r) => *r,
                None if q2 < 1.0 => (1.0 - q2).sqrt(),
                None => return Err(Error::Config(format!("no rotating wave exists at k0 = {}", w.k0))),
            };
            Ok(vec![
                (0..m).map(|i| r * (2.0 * PI * i as f64 / m as f64).cos()).collect(),
                (0..m).map(|i| r * (2.0 * PI * i as f64 / m as f64).sin()).collect(),
            ])
        }
        GuessSpec::Relax {
            base,
            amplitude,
            t_final,
            dt,
        } => {
            if base.len() != system.n() {
                return Err(Error::Config("relaxation base state has the wrong length".into()));
            }
            let grid = PeriodicGrid::unit(m)?;
            let values: Vec<Vec<f64>> = base
                .iter()
                .map(|b| {
                    grid.points()
                        .iter()
                        .map(|z| b + amplitude * (2.0 * PI * z).cos())
                        .collect()
                })
                .collect();
            let u0 = Field::new(grid, values.clone(), 0.0)?;
            let out = integrate_rd(system, w.k0, w.omega_guess, &u0, &values, *t_final, *dt, &[*t_final])?;
            let last = out
                .snapshots
                .into_iter()
                .last()
                .ok_or_else(|| Error::Numerical("relaxation produced no state".into()))?;
            Ok(last.values)
        }
    }
}

pub fn solve_base(system: &RdSystem, cfg: &RunConfig) -> Result<WaveTrain> {
    let w = cfg.wavetrain_config()?;
    let guess = initial_guess(system, cfg)?;
    solve_profile(system, w.k0, &guess, w.omega_guess)
}

pub fn build_family(system: &RdSystem, cfg: &RunConfig) -> Result<WaveTrainFamily> {
    let w = cfg.wavetrain_config()?;
    let base = solve_base(system, cfg)?;
    WaveTrainFamily::build(system, &base, w.dk(), w.family_steps)
}

/// System, family and coefficients shared by the later stages.
#[derive(Debug, Clone)]
pub struct WaveContext {
    pub system: RdSystem,
    pub family: WaveTrainFamily,
    pub coefficients: WhithamCoefficients,
}

impl WaveContext {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let system = build_system(cfg)?;
        let family = build_family(&system, cfg)?;
        let coefficients = compute_coefficients(&system, &family)?;
        Ok(Self {
            system,
            family,
            coefficients,
        })
    }

    pub fn wave(&self) -> &WaveTrain {
        &self.family.base
    }
}

fn whitham_json(c: &WhithamCoefficients) -> Value {
    json!({
        "a": c.a,
        "d": c.d,
        "nu": c.nu,
        "a_fit": c.a_fit,
        "d_fit": c.d_fit,
        "nu_fp": c.nu_fp,
    })
}

fn wave_json(wt: &WaveTrain) -> Value {
    json!({
        "k": wt.k,
        "omega": wt.omega,
        "m": wt.m(),
        "residual": wt.residual_norm,
        "newton_steps": wt.newton_steps,
    })
}

// profile

pub fn profile(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    ensure_dir(out)?;
    let system = build_system(cfg)?;
    let family = build_family(&system, cfg)?;
    write_family(&out.join("family"), &family)?;
    write_json(&out.join("config.json"), cfg)?;
    let (lo, hi) = family.k_range();
    let summary = json!({
        "wavetrain": wave_json(&family.base),
        "k_range": [lo, hi],
        "table_size": family.k_table.len(),
        "omega_p": family.derivatives.as_ref().map(|d| d.omega_p),
        "omega_pp": family.derivatives.as_ref().map(|d| d.omega_pp),
        "failure": family.failure.as_ref().map(|f| f.message.clone()),
    });
    write_json(&out.join("meta.json"), &summary)?;
    Ok(Outcome {
        command: "profile".into(),
        passed: family.failure.is_none(),
        summary,
    })
}

// spectrum

pub fn stability(cfg: &RunConfig) -> Result<(WaveTrain, StabilityReport)> {
    let system = build_system(cfg)?;
    let wt = solve_base(&system, cfg)?;
    let b = cfg.bloch;
    let grid = default_xi_grid(b.xi_uniform, b.xi_finest);
    let report = verify_stability(&system, &wt, &grid, b.modes)?;
    Ok((wt, report))
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    ensure_dir(out)?;
    let (wt, report) = stability(cfg)?;
    write_json(&out.join("spectrum.json"), &report)?;
    let summary = json!({
        "wavetrain": wave_json(&wt),
        "d1_ok": report.d1_ok,
        "d2_ok": report.d2_ok,
        "d3_ok": report.d3_ok,
        "theta_hat": report.theta_hat,
        "zero_eigenvalue_gap": report.zero_eigenvalue_gap,
        "max_real": report.max_real.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    });
    Ok(Outcome {
        command: "spectrum".into(),
        passed: report.d1_ok && report.d2_ok && report.d3_ok,
        summary,
    })
}

// coeffs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub coefficients: WhithamCoefficients,
    pub checks: CoefficientChecks,
    pub fit: ExpansionFit,
    pub omega_p: f64,
    pub omega_pp: f64,
}

pub fn coefficient_report(cfg: &RunConfig) -> Result<(WaveContext, CoefficientReport)> {
    let mut ctx = WaveContext::build(cfg)?;
    let b = cfg.bloch;
    let curve = critical_curve(&ctx.system, ctx.wave(), b.critical_xi_max, b.critical_samples, b.modes)?;
    let fit = fit_expansion(&curve)?;
    ctx.coefficients.attach_fit(&fit);
    let der = ctx.family.derivatives()?;
    let report = CoefficientReport {
        checks: ctx.coefficients.checks(),
        coefficients: ctx.coefficients.clone(),
        fit,
        omega_p: der.omega_p,
        omega_pp: der.omega_pp,
    };
    Ok((ctx, report))
}

pub fn coeffs(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    ensure_dir(out)?;
    let (ctx, report) = coefficient_report(cfg)?;
    write_json(&out.join("config.json"), cfg)?;
    write_json(
        &out.join("meta.json"),
        &json!({ "wavetrain": wave_json(ctx.wave()), "whitham": whitham_json(&report.coefficients) }),
    )?;
    write_json(&out.join("coefficients.json"), &report)?;
    Ok(Outcome {
        command: "coeffs".into(),
        passed: report.checks.passes(COEFFICIENT_TOL),
        summary: serde_json::to_value(&report)?,
    })
}

// simulate

pub fn solver_grid(cfg: &RunConfig) -> Result<PeriodicGrid> {
    PeriodicGrid::new(cfg.solver.m(), cfg.solver.periods)
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub initial: InitialData,
    pub snapshots: Vec<Field>,
}

fn run_meta(ctx: &WaveContext, cfg: &RunConfig, initial: &InitialData, steps: usize, snapshots: usize) -> Value {
    json!({
        "wavetrain": wave_json(ctx.wave()),
        "whitham": whitham_json(&ctx.coefficients),
        "phi0_sup": sup_norm(&ctx.wave().profile),
        "initial": {
            "e0": initial.e0,
            "gamma0_prime_sup": initial.gamma0_prime_sup,
            "vring_sup": initial.vring_sup,
            "m_bound": initial.m_bound,
        },
        "solver": cfg.solver,
        "steps": steps,
        "snapshots": snapshots,
    })
}

pub fn simulate_in_memory(ctx: &WaveContext, cfg: &RunConfig) -> Result<(Simulation, Vec<(f64, f64, f64)>, usize)> {
    let grid = solver_grid(cfg)?;
    let initial = make_initial_data(ctx.wave(), &cfg.initial_spec()?, &grid)?;
    let s = cfg.solver;
    let out = integrate(&ctx.system, ctx.wave(), &initial.u0, s.t_final, s.dt, &s.output_times())?;
    let norms = out.history.iter().map(|r| (r.t, r.deviation, r.sup)).collect();
    Ok((
        Simulation {
            initial,
            snapshots: out.snapshots,
        },
        norms,
        out.steps,
    ))
}

fn write_simulation(
    ctx: &WaveContext,
    cfg: &RunConfig,
    out: &Path,
    sim: &Simulation,
    norms: &[(f64, f64, f64)],
    steps: usize,
) -> Result<()> {
    ensure_dir(out)?;
    write_json(&out.join("config.json"), cfg)?;
    write_json(
        &out.join("meta.json"),
        &run_meta(ctx, cfg, &sim.initial, steps, sim.snapshots.len()),
    )?;
    write_csv(
        &out.join("norms.csv"),
        &["t", "deviation", "sup"],
        norms.iter().map(|(t, d, s)| vec![*t, *d, *s]),
    )?;
    for (i, f) in sim.snapshots.iter().enumerate() {
        write_field(&out.join(indexed_name("state", i)), f)?;
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let ctx = WaveContext::build(cfg)?;
    let (sim, norms, steps) = simulate_in_memory(&ctx, cfg)?;
    write_simulation(&ctx, cfg, out, &sim, &norms, steps)?;
    Ok(Outcome {
        command: "simulate".into(),
        passed: true,
        summary: json!({
            "steps": steps,
            "snapshots": sim.snapshots.len(),
            "e0": sim.initial.e0,
            "final_deviation": norms.last().map(|n| n.1),
        }),
    })
}

// predict

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub coefficients: HjCoefficients,
    pub gamma: Vec<PhaseField>,
    pub k: Vec<PhaseField>,
    /// Sup difference to the direct integrations of the phase and Burgers
    /// equations, over all outputs.
    pub direct_diff: f64,
    pub burgers_diff: f64,
}

pub fn predict_in_memory(cfg: &RunConfig) -> Result<Prediction> {
    let p = &cfg.predict;
    let coefficients = match p.coefficients {
        Some(c) => HjCoefficients {
            a: c.a,
            d: c.d,
            nu: c.nu,
        },
        None => HjCoefficients::from(&WaveContext::build(cfg)?.coefficients),
    };
    let periods = p.periods.unwrap_or(cfg.solver.periods);
    let m = p.m.unwrap_or(cfg.solver.m());
    let grid = PeriodicGrid::new(m, periods)?;
    let spec = match &p.gamma0 {
        Some(g) => g.clone(),
        None => cfg.initial_spec()?.gamma0,
    };
    let gamma0 = PhaseField::new(grid, sample_gamma0(&spec, &grid), 0.0)?;
    let t_final = p.t_final.unwrap_or(cfg.solver.t_final);
    let every = p.output_every.unwrap_or(cfg.solver.output_every);
    let times = output_times(t_final, every);
    let gamma = hj_solve(&gamma0, coefficients, &times)?;
    let k = burgers_solve(&gamma0, coefficients, &times)?;
    let direct = hj_direct(&gamma0, coefficients, t_final, p.direct_dt, &times)?;
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let direct_diff = gamma
        .iter()
        .zip(&direct)
        .map(|(a, b)| diff(&a.gamma, &b.gamma))
        .fold(0.0, f64::max);
    let k0 = PhaseField::new(grid, gamma0.derivative(), 0.0)?;
    let kd = crate::modulation::burgers_direct(&k0, coefficients, t_final, p.direct_dt, &times)?;
    let burgers_diff = k
        .iter()
        .zip(&kd)
        .map(|(a, b)| diff(&a.gamma, &b.gamma))
        .fold(0.0, f64::max);
    Ok(Prediction {
        coefficients,
        gamma,
        k,
        direct_diff,
        burgers_diff,
    })
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    0.5 * (hi - lo)
}

pub fn predict(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    ensure_dir(out)?;
    let pred = predict_in_memory(cfg)?;
    write_json(&out.join("config.json"), cfg)?;
    for (i, g) in pred.gamma.iter().enumerate() {
        let data = vec![g.gamma.clone()];
        let mut meta = ArrayMeta::new(&data);
        meta.time = Some(g.time);
        meta.grid = Some(g.grid);
        write_array(&out.join(indexed_name("gamma", i)), &data, &meta)?;
    }
    write_csv(
        &out.join("norms.csv"),
        &["t", "gamma_sup", "gamma_spread", "k_sup"],
        pred.gamma.iter().zip(&pred.k).map(|(g, k)| {
            vec![
                g.time,
                sup_norm_scalar(&g.gamma),
                spread(&g.gamma),
                sup_norm_scalar(&k.gamma),
            ]
        }),
    )?;
    let k0 = pred.k.first().map_or(0.0, |k| sup_norm_scalar(&k.gamma));
    let k_final = pred.k.last().map_or(0.0, |k| sup_norm_scalar(&k.gamma));
    let summary = json!({
        "coefficients": pred.coefficients,
        "direct_diff": pred.direct_diff,
        "burgers_direct_diff": pred.burgers_diff,
        "k_sup_initial": k0,
        "k_sup_final": k_final,
        "k_ratio": if k0 > 0.0 { k_final / k0 } else { 0.0 },
        "gamma_spread_final": pred.gamma.last().map(|g| spread(&g.gamma)),
    });
    write_json(&out.join("meta.json"), &summary)?;
    Ok(Outcome {
        command: "predict".into(),
        passed: pred.direct_diff < PREDICT_TOL && pred.burgers_diff < PREDICT_TOL,
        summary,
    })
}

// analyze

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub series: ResidualSeries,
    pub report: TheoremReport,
}

/// Extraction, residuals and the theorem report for an in-memory run.
pub fn analyze_snapshots(
    ctx: &WaveContext,
    cfg: &RunConfig,
    initial: &InitialData,
    snapshots: &[Field],
) -> Result<AnalysisResult> {
    if snapshots.is_empty() {
        return Err(Error::Dependency("run has no snapshots".into()));
    }
    let wt = ctx.wave();
    let extraction = extract_series(snapshots, wt, &initial.gamma0, &cfg.analysis.extraction)?;
    let grid = snapshots[0].grid;
    let gamma0 = PhaseField::new(grid, initial.gamma0.clone(), 0.0)?;
    let times: Vec<f64> = snapshots.iter().map(|s| s.time).collect();
    let prediction = hj_solve(&gamma0, HjCoefficients::from(&ctx.coefficients), &times)?;
    let interp = ctx.family.interpolator();
    let rows = snapshots
        .iter()
        .zip(&extraction.gamma)
        .zip(&extraction.residual)
        .zip(&prediction)
        .map(|(((s, g), r), p)| {
            let misfit = r.iter().copied().fold(0.0, f64::max);
            residual_row(s, misfit, g, &p.gamma, wt, &interp)
        })
        .collect::<Result<Vec<_>>>()?;
    let series = ResidualSeries { rows };
    let run = RunSummary {
        t_final: cfg.solver.t_final,
        e0: initial.e0,
        phi0_sup: sup_norm(&wt.profile),
        gamma0_sup: initial.m_bound,
        blew_up: false,
    };
    let report = verify_theorem(&series, &run, &cfg.analysis.verify)?;
    Ok(AnalysisResult { series, report })
}

fn write_analysis(out: &Path, res: &AnalysisResult) -> Result<()> {
    write_csv(
        &out.join("residuals.csv"),
        &[
            "t",
            "w_ring",
            "y_ring",
            "v_inv",
            "gamma_diff_sup",
            "gamma_zeta_diff_sup",
        ],
        res.series.rows.iter().map(|r| {
            vec![
                r.t,
                r.w_ring,
                r.y_ring,
                r.v_inv,
                r.gamma_diff_sup,
                r.gamma_zeta_diff_sup,
            ]
        }),
    )?;
    write_csv(
        &out.join("modulation.csv"),
        &["t", "gamma_sup", "gamma_zeta_sup", "u_sup", "extraction_misfit"],
        res.series
            .rows
            .iter()
            .map(|r| vec![r.t, r.gamma_sup, r.gamma_zeta_sup, r.u_sup, r.extraction_misfit]),
    )?;
    write_json(&out.join("report.json"), &res.report)
}

fn report_outcome(command: &str, report: &TheoremReport) -> Result<Outcome> {
    Ok(Outcome {
        command: command.into(),
        passed: report.passed,
        summary: serde_json::to_value(report)?,
    })
}

/// Re-analyse a run directory from its `config.json` and snapshots.
pub fn analyze(run_dir: &Path, overrides: &[String]) -> Result<Outcome> {
    let cfg_path = run_dir.join("config.json");
    if !cfg_path.exists() {
        return Err(Error::Dependency(format!("{} is missing", cfg_path.display())));
    }
    let cfg = RunConfig::load(&cfg_path)?.with_overrides(overrides)?;
    let meta: Value = read_json(&run_dir.join("meta.json"))?;
    let count = meta["snapshots"]
        .as_u64()
        .ok_or_else(|| Error::Dependency("meta.json has no snapshot count".into()))? as usize;
    let snapshots = (0..count)
        .map(|i| read_field(&run_dir.join(indexed_name("state", i))))
        .collect::<Result<Vec<_>>>()?;
    let ctx = WaveContext::build(&cfg)?;
    let initial = make_initial_data(ctx.wave(), &cfg.initial_spec()?, &solver_grid(&cfg)?)?;
    let res = analyze_snapshots(&ctx, &cfg, &initial, &snapshots)?;
    write_analysis(run_dir, &res)?;
    report_outcome("analyze", &res.report)
}

// verify

pub fn verify(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let ctx = WaveContext::build(cfg)?;
    let (sim, norms, steps) = simulate_in_memory(&ctx, cfg)?;
    write_simulation(&ctx, cfg, out, &sim, &norms, steps)?;
    let res = analyze_snapshots(&ctx, cfg, &sim.initial, &sim.snapshots)?;
    write_analysis(out, &res)?;
    report_outcome("verify", &res.report)
}

// toy

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub w0_prime_sup: f64,
    pub w0_sup: f64,
    pub max_w_sup: f64,
    pub blew_up: bool,
    pub fit: Option<RateFit>,
    pub exponent_ok: bool,
    pub transform_discrepancy: f64,
    pub transform_ok: bool,
    pub passed: bool,
}

pub const TOY_EXPONENT: (f64, f64) = (-0.6, -0.4);
pub const TOY_TRANSFORM_TOL: f64 = 1e-6;

pub fn toy_report(cfg: &RunConfig) -> Result<(ToyReport, Vec<(f64, f64, f64)>)> {
    let toy = cfg
        .toy
        .as_ref()
        .ok_or_else(|| Error::Config("config has no toy section".into()))?;
    let times = output_times(toy.t_final, toy.output_every);
    let (series, blew_up) = match toy_integrate(&toy.model, toy.t_final, toy.dt, &times) {
        Ok(s) => (Some(s), false),
        Err(Error::BlowUp { .. }) => (None, true),
        Err(e) => return Err(e),
    };
    let rows: Vec<(f64, f64, f64)> = series
        .as_ref()
        .map(|s| {
            s.times
                .iter()
                .zip(&s.w_sup)
                .zip(&s.wz_sup)
                .map(|((t, w), z)| (*t, *w, *z))
                .collect()
        })
        .unwrap_or_default();
    let fit = match &series {
        Some(s) => Some(fit_rate(
            &s.times
                .iter()
                .copied()
                .zip(s.wz_sup.iter().copied())
                .collect::<Vec<_>>(),
            toy.window,
            RateModel::Power,
        )?),
        None => None,
    };
    let exponent_ok = fit
        .as_ref()
        .is_some_and(|f| f.exponent >= TOY_EXPONENT.0 && f.exponent <= TOY_EXPONENT.1);
    let ttimes = output_times(toy.transform_t_final, toy.transform_t_final / 20.0);
    let transform_discrepancy = toy_transform_check(&toy.transform, toy.transform_t_final, toy.transform_dt, &ttimes)?;
    let transform_ok = transform_discrepancy < TOY_TRANSFORM_TOL;
    let w0 = toy.model.initial()?;
    let l = toy.model.grid()?.length_f64();
    let report = ToyReport {
        w0_prime_sup: sup_norm_scalar(&derivative(&w0, l, 1)),
        w0_sup: sup_norm_scalar(&w0),
        max_w_sup: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        blew_up,
        fit,
        exponent_ok,
        transform_discrepancy,
        transform_ok,
        passed: !blew_up && exponent_ok && transform_ok,
    };
    Ok((report, rows))
}

pub fn toy(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    ensure_dir(out)?;
    let (report, rows) = toy_report(cfg)?;
    write_json(&out.join("config.json"), cfg)?;
    write_csv(
        &out.join("toy.csv"),
        &["t", "w_sup", "w_zeta_sup"],
        rows.iter().map(|r| vec![r.0, r.1, r.2]),
    )?;
    write_json(&out.join("report.json"), &report)?;
    Ok(Outcome {
        command: "toy".into(),
        passed: report.passed,
        summary: serde_json::to_value(&report)?,
    })
}

/// Default output directory for a command.
pub fn default_out(cfg: &RunConfig, command: &str) -> PathBuf {
    PathBuf::from("runs").join(format!("{}-{command}", cfg.name))
}
