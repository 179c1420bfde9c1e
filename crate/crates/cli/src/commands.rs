use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use kacfick::fixed_point::{IterationTrace, SolverOptions};
use kacfick::macroscopic::{auxiliary_field, boundary_derivatives_m0, current, solve_macroscopic};
use kacfick::shooting::{estimate_jacobian, shoot, ShootOutcome};
use kacfick::{
    build_kernel, fit_power_law, outer_solve, resolvent, theory_constants, CorrectionRule, Field,
    GainField, Grid, KernelWeights, ModelParams, PowerFit, ResolventMethod, SolverReport,
    TheoryConstants,
};

use crate::config::{Format, RunConfig};
use crate::output::{csv_field, profile_csv, real, write_json, write_text};
use crate::CliError;

/// Increments below this sup norm are treated as round-off when forming
/// contraction ratios.
const RATIO_FLOOR: f64 = 1e-13;

fn kernel_for(params: &ModelParams, npu: usize) -> Result<KernelWeights, CliError> {
    let grid = Grid::new(params.epsilon, npu).map_err(CliError::Solver)?;
    Ok(build_kernel(&grid))
}

fn resolvent_name(m: ResolventMethod) -> String {
    match m {
        ResolventMethod::DirectSolve => "direct".into(),
        ResolventMethod::NeumannSeries { truncation_tol } => {
            format!("series(truncation_tol={truncation_tol:e})")
        }
    }
}

#[derive(Serialize)]
struct ShootSummary {
    target: [f64; 2],
    input: [f64; 2],
    steps: usize,
    jacobian_refreshes: usize,
    residual_history: Vec<f64>,
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    command: &'a str,
    params: &'a ModelParams,
    nodes_per_unit: usize,
    n_nodes: usize,
    spacing: f64,
    resolvent: String,
    correction: CorrectionRule,
    j: f64,
    achieved_boundary: [f64; 2],
    boundary_drift: f64,
    residual_pbs: f64,
    residual_flux: f64,
    drift_sup: f64,
    drift_alpha: f64,
    outer_iterations: usize,
    inner_iterations: usize,
    alpha_ratios: Vec<f64>,
    min_ratio: Option<f64>,
    max_ratio: Option<f64>,
    lambda_history: Vec<f64>,
    trace: &'a IterationTrace,
    constants: &'a TheoryConstants,
    shoot: Option<ShootSummary>,
}

fn summarize<'a>(
    command: &'a str,
    config: &RunConfig,
    report: &'a SolverReport,
    reference: (f64, f64),
    shoot: Option<&ShootOutcome>,
) -> SolveSummary<'a> {
    let grid = report.m.grid();
    let (a, b) = report.achieved_boundary;
    let ratios = report.trace.alpha_ratios(RATIO_FLOOR);
    SolveSummary {
        command,
        params: &report.params,
        nodes_per_unit: grid.nodes_per_unit(),
        n_nodes: grid.n_nodes(),
        spacing: grid.spacing(),
        resolvent: resolvent_name(config.options.resolvent),
        correction: config.options.correction,
        j: report.j,
        achieved_boundary: [a, b],
        boundary_drift: (a - reference.0).abs().max((b - reference.1).abs()),
        residual_pbs: report.residual_pbs,
        residual_flux: report.residual_flux,
        drift_sup: report.drift_sup(),
        drift_alpha: report.drift_alpha(),
        outer_iterations: report.trace.outer_iterations(),
        inner_iterations: report.trace.inner_iterations(),
        min_ratio: ratios.iter().copied().reduce(f64::min),
        max_ratio: ratios.iter().copied().reduce(f64::max),
        alpha_ratios: ratios,
        lambda_history: report.trace.lambda_history(),
        trace: &report.trace,
        constants: &report.constants,
        shoot: shoot.map(|s| ShootSummary {
            target: [s.target.0, s.target.1],
            input: [s.input.0, s.input.1],
            steps: s.steps,
            jacobian_refreshes: s.jacobian_refreshes,
            residual_history: s.residual_history.clone(),
        }),
    }
}

fn log_time(out: &Path, lines: &[(String, f64)]) -> Result<(), CliError> {
    let mut s = String::new();
    for (label, secs) in lines {
        let _ = writeln!(s, "{label} wall_seconds={secs:.6}");
    }
    write_text(out, "timing.log", &s)?;
    Ok(())
}

pub fn run_solve(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let params = &config.params;
    let kernel = kernel_for(params, config.nodes_per_unit)?;
    let report = outer_solve(params, &kernel, &config.options)?;
    let secs = start.elapsed().as_secs_f64();
    write_text(out, "profile.csv", &profile_csv(&report))?;
    let summary = summarize(
        "solve",
        config,
        &report,
        (params.mu_minus, params.mu_plus),
        None,
    );
    write_json(out, "report.json", &summary)?;
    log_time(out, &[("solve".into(), secs)])?;
    println!(
        "solve: j = {}, residual_pbs = {:.3e}, outer iterations = {}, boundary = ({:.12}, {:.12})",
        report.j,
        report.residual_pbs,
        report.trace.outer_iterations(),
        report.achieved_boundary.0,
        report.achieved_boundary.1
    );
    Ok(())
}

pub fn run_shoot(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let params = &config.params;
    let kernel = kernel_for(params, config.nodes_per_unit)?;
    let target = (params.mu_minus, params.mu_plus);
    let outcome = shoot(params, &kernel, target, &config.options)?;
    let secs = start.elapsed().as_secs_f64();
    write_text(out, "profile.csv", &profile_csv(&outcome.report))?;
    let summary = summarize("shoot", config, &outcome.report, target, Some(&outcome));
    write_json(out, "report.json", &summary)?;
    log_time(out, &[("shoot".into(), secs)])?;
    println!(
        "shoot: input = ({:.12}, {:.12}) -> boundary = ({:.12}, {:.12}) in {} steps",
        outcome.input.0,
        outcome.input.1,
        outcome.report.achieved_boundary.0,
        outcome.report.achieved_boundary.1,
        outcome.steps
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub status: &'static str,
    pub drift_sup: Option<f64>,
    pub drift_alpha: Option<f64>,
    pub j: Option<f64>,
    pub boundary_drift: Option<f64>,
    pub outer_iterations: Option<usize>,
    pub jacobian_deviation: Option<f64>,
    pub error: Option<String>,
}

fn sweep_point(config: &RunConfig, eps: f64) -> (SweepRow, f64) {
    let start = Instant::now();
    let result = (|| -> kacfick::Result<SweepRow> {
        let params = config.params.clone().with_epsilon(eps)?;
        let kernel = build_kernel(&Grid::new(eps, config.nodes_per_unit)?);
        let report = outer_solve(&params, &kernel, &config.options)?;
        let jacobian_deviation = if config.jacobian {
            let pair = (params.mu_minus, params.mu_plus);
            Some(
                estimate_jacobian(
                    &params,
                    &kernel,
                    pair,
                    config.jacobian_step,
                    &config.options,
                )?
                .deviation,
            )
        } else {
            None
        };
        let (a, b) = report.achieved_boundary;
        Ok(SweepRow {
            epsilon: eps,
            status: "ok",
            drift_sup: Some(report.drift_sup()),
            drift_alpha: Some(report.drift_alpha()),
            j: Some(report.j),
            boundary_drift: Some((a - params.mu_minus).abs().max((b - params.mu_plus).abs())),
            outer_iterations: Some(report.trace.outer_iterations()),
            jacobian_deviation,
            error: None,
        })
    })();
    let row = result.unwrap_or_else(|e| SweepRow {
        epsilon: eps,
        status: "failed",
        drift_sup: None,
        drift_alpha: None,
        j: None,
        boundary_drift: None,
        outer_iterations: None,
        jacobian_deviation: None,
        error: Some(e.to_string()),
    });
    (row, start.elapsed().as_secs_f64())
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    rows: &'a [SweepRow],
    strictly_decreasing: bool,
    fit: Option<PowerFit>,
    jacobian_fit: Option<PowerFit>,
}

fn opt(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(
        "epsilon,status,drift_sup,drift_alpha,j,boundary_drift,outer_iterations,jacobian_deviation,error\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            real(r.epsilon),
            r.status,
            opt(r.drift_sup),
            opt(r.drift_alpha),
            opt(r.j),
            opt(r.boundary_drift),
            r.outer_iterations
                .map(|n| n.to_string())
                .unwrap_or_default(),
            opt(r.jacobian_deviation),
            csv_field(r.error.as_deref().unwrap_or(""))
        );
    }
    s
}

fn fit_rows(rows: &[SweepRow], pick: impl Fn(&SweepRow) -> Option<f64>) -> Option<PowerFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| pick(r).map(|v| (r.epsilon, v)))
        .unzip();
    fit_power_law(&x, &y).ok()
}

pub fn run_sweep(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    if config.sweep.len() < 3 {
        return Err(CliError::Config(format!(
            "sweep needs at least 3 epsilon values, got {}",
            config.sweep.len()
        )));
    }
    let start = Instant::now();
    let results: Vec<(SweepRow, f64)> = config
        .sweep
        .par_iter()
        .map(|&e| sweep_point(config, e))
        .collect();
    let total = start.elapsed().as_secs_f64();
    let rows: Vec<SweepRow> = results.iter().map(|(r, _)| r.clone()).collect();
    let drifts: Vec<f64> = rows.iter().filter_map(|r| r.drift_sup).collect();
    let summary = SweepSummary {
        rows: &rows,
        strictly_decreasing: drifts.len() == rows.len() && drifts.windows(2).all(|w| w[1] < w[0]),
        fit: fit_rows(&rows, |r| r.drift_sup),
        jacobian_fit: fit_rows(&rows, |r| r.jacobian_deviation),
    };
    match config.format {
        Format::Csv => {
            write_text(out, "sweep.csv", &sweep_csv(&rows))?;
            write_json(out, "sweep_fit.json", &summary)?;
        }
        Format::Json => write_json(out, "sweep.json", &summary)?,
    }
    let mut times: Vec<(String, f64)> = results
        .iter()
        .map(|(r, t)| (format!("sweep epsilon={}", real(r.epsilon)), *t))
        .collect();
    times.push(("sweep total".into(), total));
    log_time(out, &times)?;

    for r in &rows {
        match r.drift_sup {
            Some(d) => println!("epsilon = {:<10.6} ||m - m0|| = {d:.6e}", r.epsilon),
            None => println!(
                "epsilon = {:<10.6} failed: {}",
                r.epsilon,
                r.error.as_deref().unwrap_or("")
            ),
        }
    }
    match &summary.fit {
        Some(f) => println!(
            "slope = {:.6}, rms residual = {:.3e}",
            f.exponent, f.rms_residual
        ),
        None => println!("slope unavailable: fewer than two successful points"),
    }
    if drifts.is_empty() {
        let msg = rows
            .first()
            .and_then(|r| r.error.clone())
            .unwrap_or_default();
        return Err(CliError::Regime(format!(
            "every sweep point failed; first error: {msg}"
        )));
    }
    Ok(())
}

pub fn run_constants(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let c = theory_constants(&config.params)?;
    write_json(out, "constants.json", &c)?;
    println!(
        "m* = {:.6}, lambda = {:.10}, u = {:.10}, eps* = {:.10}, eps~ = {:.10}, epsilon = {} (below eps*: {}, below eps~: {})",
        c.m_star, c.lambda, c.u_bar, c.eps_star, c.eps_tilde, c.epsilon, c.below_eps_star, c.below_eps_tilde
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

fn check(name: &'static str, value: f64, threshold: f64) -> Check {
    Check {
        name,
        pass: value < threshold,
        value,
        threshold,
    }
}

pub fn validation_checks(config: &RunConfig) -> Result<Vec<Check>, CliError> {
    let params = &config.params;
    let mut kernel = kernel_for(params, config.nodes_per_unit)?;
    if config.corrupt_kernel {
        let mid = kernel.grid().n_nodes() / 2;
        kernel.scale_row_for_testing(mid, 1.01);
    }
    let grid = kernel.grid().clone();
    let mut checks = vec![check("kernel-mass", kernel.max_mass_defect(), 1e-12)];

    // Constant instance at the mean of the reservoir values.
    let mu = 0.5 * (params.mu_minus + params.mu_plus);
    let flat = params.with_boundary(mu, mu)?;
    let fixed = outer_solve(&flat, &kernel, &SolverOptions::default());
    let flat_err = match &fixed {
        Ok(r) if r.trace.outer_iterations() == 1 => {
            r.m.values()
                .iter()
                .map(|v| (v - mu).abs())
                .fold(0.0, f64::max)
        }
        _ => f64::INFINITY,
    };
    checks.push(check("constant-fixed-point", flat_err, 1e-13));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = grid.n_nodes();
    let mut worst = 0.0f64;
    for _ in 0..config.validate_samples {
        let cap: f64 = rng.gen_range(0.1..0.95);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..cap)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gain = GainField::from_profile(Field::new(grid.clone(), p)?);
        let g = Field::new(grid.clone(), g)?;
        let a = resolvent(
            &kernel,
            &gain,
            &g,
            ResolventMethod::NeumannSeries {
                truncation_tol: 1e-13,
            },
        )?;
        let b = resolvent(&kernel, &gain, &g, ResolventMethod::DirectSolve)?;
        worst = worst.max(a.sub(&b)?.sup_norm());
    }
    checks.push(check("resolvent-oracle", worst, 1e-10));

    let m0 = solve_macroscopic(params, &grid)?;
    let j = current(params.beta, params.mu_minus, params.mu_plus);
    let h0 = auxiliary_field(params, &m0, j)?;
    let h_err = h0
        .values()
        .iter()
        .zip(m0.values())
        .map(|(h, m)| (h - (m.atanh() / params.beta - m)).abs())
        .fold(0.0, f64::max);
    checks.push(check("h0-consistency", h_err, 1e-8));

    let (dm, dp) = boundary_derivatives_m0(params, &m0);
    let d = 1e-5;
    let profile = |a: f64, b: f64| -> Result<Field, CliError> {
        Ok(solve_macroscopic(&params.with_boundary(a, b)?, &grid)?)
    };
    let mut rel = 0.0f64;
    for (analytic, plus, minus) in [
        (
            &dm,
            profile(params.mu_minus + d, params.mu_plus)?,
            profile(params.mu_minus - d, params.mu_plus)?,
        ),
        (
            &dp,
            profile(params.mu_minus, params.mu_plus + d)?,
            profile(params.mu_minus, params.mu_plus - d)?,
        ),
    ] {
        let scale = analytic.sup_norm();
        for i in 0..n {
            let fd = (plus[i] - minus[i]) / (2.0 * d);
            rel = rel.max((analytic[i] - fd).abs() / scale);
        }
    }
    checks.push(check("boundary-derivative", rel, 1e-4));
    Ok(checks)
}

pub fn run_validate(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let checks = validation_checks(config)?;
    println!(
        "{:<22} {:<6} {:>12} {:>12}",
        "check", "result", "value", "threshold"
    );
    for c in &checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!(
            "{:<22} {:<6} {:>12.3e} {:>12.1e}",
            c.name, verdict, c.value, c.threshold
        );
    }
    write_json(out, "validate.json", &checks)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}
