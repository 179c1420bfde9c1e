//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::time::Instant;

use kacfick::fixed_point::{inner_solve, SolverOptions};
use kacfick::macroscopic::{auxiliary_field, boundary_derivatives_m0, current, solve_macroscopic};
use kacfick::shooting::{estimate_jacobian, shoot, DEFAULT_JACOBIAN_STEP};
use kacfick::{
    build_kernel, fit_power_law, outer_solve, resolvent, theory_constants, Field, GainField, Grid,
    KernelWeights, ModelParams, ResolventMethod, SolverReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BETA: f64 = 1.25;
const MU_MINUS: f64 = 0.8;
const MU_PLUS: f64 = 0.7;
const NPU: usize = 20;

fn reference(eps: f64) -> (ModelParams, KernelWeights) {
    let params = ModelParams::new(BETA, MU_MINUS, MU_PLUS, eps).unwrap();
    let kernel = build_kernel(&Grid::new(eps, NPU).unwrap());
    (params, kernel)
}

fn solve(eps: f64) -> SolverReport {
    let (params, kernel) = reference(eps);
    outer_solve(&params, &kernel, &SolverOptions::default()).unwrap()
}

fn sci(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn report(id: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} [PRIMARY] {name}: {verdict} ({detail})");
    assert!(pass, "criterion {id} failed: {detail}");
}

#[test]
fn criterion_01_fixed_point_residual() {
    let start = Instant::now();
    let r = solve(1.0 / 50.0);
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "fixed-point residual at eps = 1/50",
        r.residual_pbs < 1e-10 && secs < 10.0,
        format!(
            "residual_pbs = {:.3e}, outer = {}, inner = {}, {secs:.2} s",
            r.residual_pbs,
            r.trace.outer_iterations(),
            r.trace.inner_iterations()
        ),
    );
}

#[test]
fn criterion_02_fick_limit() {
    let start = Instant::now();
    let eps = [1.0 / 25.0, 1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0];
    let drifts: Vec<f64> = std::thread::scope(|s| {
        let handles: Vec<_> = eps
            .iter()
            .map(|&e| s.spawn(move || solve(e).drift_sup()))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let secs = start.elapsed().as_secs_f64();
    let decreasing = drifts.windows(2).all(|w| w[1] < w[0]);
    let fit = fit_power_law(&eps, &drifts).unwrap();
    report(
        2,
        "Fick's-law limit",
        decreasing && (0.8..=1.2).contains(&fit.exponent) && secs < 120.0,
        format!(
            "||m - m0|| = {}, slope = {:.4}, rms = {:.2e}, {secs:.1} s",
            sci(&drifts),
            fit.exponent,
            fit.rms_residual
        ),
    );
}

#[test]
fn criterion_03_outer_contraction() {
    let r = solve(1.0 / 200.0);
    let all: Vec<f64> = r
        .trace
        .steps
        .windows(2)
        .map(|w| w[1].dm_alpha / w[0].dm_alpha)
        .collect();
    // Increments below this are round-off and carry no contraction information.
    let ratios = r.trace.alpha_ratios(1e-13);
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    println!(
        "  alpha = {:.4}, full ratio history = {}",
        r.trace.alpha,
        sci(&all)
    );
    report(
        3,
        "outer contraction in the weighted norm at eps = 1/200",
        !ratios.is_empty() && max <= 0.9,
        format!(
            "{} ratios above the round-off floor, max = {max:.4}, min = {min:.4}, below 1/2: {}",
            ratios.len(),
            max <= 0.5
        ),
    );
}

#[test]
fn criterion_04_quadratic_inner_convergence() {
    let (params, kernel) = reference(1.0 / 50.0);
    let grid = kernel.grid().clone();
    let m0 = solve_macroscopic(&params, &grid).unwrap();
    let j = current(BETA, MU_MINUS, MU_PLUS);
    let h0 = auxiliary_field(&params, &m0, j).unwrap();
    let inner = inner_solve(&params, &kernel, &h0, &m0, &SolverOptions::default()).unwrap();
    let phi = &inner.corrections;
    // Pairs whose successor sits above the round-off floor.
    let (x, y): (Vec<f64>, Vec<f64>) = phi
        .windows(2)
        .filter(|w| w[1] > 1e-14)
        .map(|w| (w[0], w[1]))
        .unzip();
    let fit = fit_power_law(&x, &y);
    let q = fit.as_ref().map_or(f64::NAN, |f| f.exponent);
    report(
        4,
        "quadratic inner convergence at eps = 1/50",
        q >= 1.8,
        format!(
            "||phi_k|| = {}, q = {q:.3} over {} pairs",
            sci(phi),
            x.len()
        ),
    );
}

#[test]
fn criterion_05_boundary_map_jacobian() {
    let eps = [1.0 / 25.0, 1.0 / 50.0, 1.0 / 100.0];
    let jacs: Vec<_> = eps
        .iter()
        .map(|&e| {
            let (params, kernel) = reference(e);
            estimate_jacobian(
                &params,
                &kernel,
                (MU_MINUS, MU_PLUS),
                DEFAULT_JACOBIAN_STEP,
                &SolverOptions::default(),
            )
            .unwrap()
        })
        .collect();
    let dev: Vec<f64> = jacs.iter().map(|j| j.deviation).collect();
    let det: Vec<f64> = jacs.iter().map(|j| j.determinant).collect();
    let decreasing = dev.windows(2).all(|w| w[1] < w[0]);
    let fit = fit_power_law(&eps, &dev).unwrap();
    report(
        5,
        "boundary-map Jacobian tends to the identity",
        decreasing && fit.exponent >= 0.8 && det.iter().all(|&d| d > 0.0),
        format!(
            "max |J - I| = {}, exponent = {:.3}, det = {det:.6?}",
            sci(&dev),
            fit.exponent
        ),
    );
}

#[test]
fn criterion_06_shooting() {
    let (params, kernel) = reference(1.0 / 50.0);
    let out = shoot(
        &params,
        &kernel,
        (MU_MINUS, MU_PLUS),
        &SolverOptions::default(),
    )
    .unwrap();
    let (a, b) = out.report.achieved_boundary;
    let (ea, eb) = ((a - MU_MINUS).abs(), (b - MU_PLUS).abs());
    report(
        6,
        "shooting onto the reference boundary values at eps = 1/50",
        ea < 1e-8 && eb < 1e-8 && out.steps <= 5,
        format!(
            "errors = ({ea:.2e}, {eb:.2e}), steps = {}, refreshes = {}, input = ({:.10}, {:.10})",
            out.steps, out.jacobian_refreshes, out.input.0, out.input.1
        ),
    );
}

#[test]
fn criterion_07_series_matches_direct_solve() {
    let kernel = build_kernel(&Grid::new(1.0 / 25.0, NPU).unwrap());
    let grid = kernel.grid().clone();
    let n = grid.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let lambda_max: f64 = rng.gen_range(0.1..0.95);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..lambda_max)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gain = GainField::from_profile(Field::new(grid.clone(), p).unwrap());
        let g = Field::new(grid.clone(), g).unwrap();
        let series = resolvent(
            &kernel,
            &gain,
            &g,
            ResolventMethod::NeumannSeries {
                truncation_tol: 1e-13,
            },
        )
        .unwrap();
        let direct = resolvent(&kernel, &gain, &g, ResolventMethod::DirectSolve).unwrap();
        worst = worst.max(series.sub(&direct).unwrap().sup_norm());
    }
    report(
        7,
        "Neumann series agrees with the direct solve",
        worst < 1e-10,
        format!("max sup difference over 50 instances = {worst:.3e}"),
    );
}

#[test]
fn criterion_08_closed_forms() {
    let (params, kernel) = reference(1.0 / 50.0);
    let grid = kernel.grid().clone();
    let m0 = solve_macroscopic(&params, &grid).unwrap();
    let j = current(BETA, MU_MINUS, MU_PLUS);
    let h0 = auxiliary_field(&params, &m0, j).unwrap();
    let h_err = h0
        .values()
        .iter()
        .zip(m0.values())
        .map(|(h, m)| (h - (m.atanh() / BETA - m)).abs())
        .fold(0.0, f64::max);

    let (dm, dp) = boundary_derivatives_m0(&params, &m0);
    let d = 1e-5;
    let profile =
        |a: f64, b: f64| solve_macroscopic(&params.with_boundary(a, b).unwrap(), &grid).unwrap();
    let fd = |hi: Field, lo: Field| -> Vec<f64> {
        hi.values()
            .iter()
            .zip(lo.values())
            .map(|(a, b)| (a - b) / (2.0 * d))
            .collect()
    };
    let fd_minus = fd(
        profile(MU_MINUS + d, MU_PLUS),
        profile(MU_MINUS - d, MU_PLUS),
    );
    let fd_plus = fd(
        profile(MU_MINUS, MU_PLUS + d),
        profile(MU_MINUS, MU_PLUS - d),
    );
    let rel = |analytic: &Field, fd: &[f64]| {
        let scale = analytic.sup_norm();
        analytic
            .values()
            .iter()
            .zip(fd)
            .map(|(a, f)| (a - f).abs() / scale)
            .fold(0.0, f64::max)
    };
    let (r_minus, r_plus) = (rel(&dm, &fd_minus), rel(&dp, &fd_plus));
    report(
        8,
        "closed-form consistency of h0 and the profile sensitivities",
        h_err < 1e-8 && r_minus < 1e-4 && r_plus < 1e-4,
        format!(
            "h0 error = {h_err:.2e}, relative sensitivity errors = ({r_minus:.2e}, {r_plus:.2e})"
        ),
    );
}

#[test]
fn criterion_09_trivial_instance() {
    let mu = 0.75;
    let params = ModelParams::new(BETA, mu, mu, 1.0 / 50.0).unwrap();
    let kernel = build_kernel(&Grid::new(1.0 / 50.0, NPU).unwrap());
    let r = outer_solve(&params, &kernel, &SolverOptions::default()).unwrap();
    let constant =
        r.m.values()
            .iter()
            .all(|&v| (v - mu).abs() <= 4.0 * f64::EPSILON);
    let mut mass = 0.0f64;
    for (eps, npu) in [
        (1.0 / 50.0, NPU),
        (1.0 / 25.0, 8),
        (0.3, 13),
        (1.0 / 7.0, 31),
    ] {
        mass = mass.max(build_kernel(&Grid::new(eps, npu).unwrap()).max_mass_defect());
    }
    report(
        9,
        "trivial instance and kernel normalization",
        r.j == 0.0 && constant && r.trace.outer_iterations() == 1 && mass < 1e-12,
        format!(
            "j = {}, constant = {constant}, outer = {}, max mass defect = {mass:.2e}",
            r.j,
            r.trace.outer_iterations()
        ),
    );
}

#[test]
fn criterion_10_theory_constants() {
    let (params, _) = reference(1.0 / 50.0);
    let c = theory_constants(&params).unwrap();
    let pinned = [
        (c.lambda, 0.478_287_095_0),
        (c.eps_star, 0.054_539_722_1),
        (c.eps_tilde, 0.293_200_396_5),
    ];
    let pinned_ok = pinned.iter().all(|(a, b)| (a - b).abs() < 1e-9);
    let coarse = theory_constants(&params.clone().with_epsilon(0.2).unwrap()).unwrap();
    report(
        10,
        "constants of the convergence argument",
        c.lambda > 0.0
            && c.lambda < 1.0
            && c.eps_star > 0.0
            && c.eps_tilde > 0.0
            && pinned_ok
            && c.below_eps_star
            && c.below_eps_tilde
            && !coarse.below_eps_star
            && coarse.below_eps_tilde,
        format!(
            "lambda = {:.10}, u = {:.10}, eps* = {:.10}, eps~ = {:.10}, alpha = {:.10}, \
             1/50 below eps*: {}, 0.2 below eps*: {}",
            c.lambda,
            c.u_bar,
            c.eps_star,
            c.eps_tilde,
            c.alpha,
            c.below_eps_star,
            coarse.below_eps_star
        ),
    );
}
