//! Two-level scheme for the stationary system
//!
//! ```text
//! m = tanh(beta (J*m + h)),      chi(m) h' = -j epsilon,
//! ```
//!
//! Inner Newton corrections solve the first equation at frozen `h`; the
//! outer loop refreshes `h = T(m)` by quadrature.

use serde::Serialize;

use crate::constants::{theory_constants, TheoryConstants};
use crate::error::{Error, Result, Stage};
use crate::grid::Field;
use crate::kernel::{check_same, KernelWeights};
use crate::macroscopic::{auxiliary_field, current, solve_macroscopic, susceptibility};
use crate::norms::{alpha_norm, sup_distance, sup_norm};
use crate::operator::{gain_values, Resolvent, ResolventMethod};
use crate::params::ModelParams;

/// How an inner correction is obtained from the residual
/// `r = tanh(beta (J*m + h)) - m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum CorrectionRule {
    /// Exact Newton step `phi = (I - diag(p) J)^{-1} r`, evaluated as
    /// `r + p U(J r)` with `U = (I - J diag(p))^{-1}`.
    #[default]
    Newton,
    /// `phi = U r`. Converges to the same point, but only linearly.
    ResolventOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverOptions {
    pub resolvent: ResolventMethod,
    pub correction: CorrectionRule,
}

/// Result of one inner Newton solve.
#[derive(Debug, Clone)]
pub struct InnerSolve {
    pub m: Field,
    /// `||phi_k||_inf` for every correction applied.
    pub corrections: Vec<f64>,
    /// `sup p` at every linearization point.
    pub lambda_observed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OuterStep {
    pub dm_sup: f64,
    pub dm_alpha: f64,
    pub dh_sup: f64,
    pub dh_alpha: f64,
    pub drift: f64,
    pub inner_corrections: Vec<f64>,
    pub lambda_observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    /// Weight used for the alpha norms.
    pub alpha: f64,
    pub steps: Vec<OuterStep>,
}

impl IterationTrace {
    pub fn outer_iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn inner_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.inner_corrections.len()).sum()
    }

    pub fn lambda_history(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.lambda_observed).collect()
    }

    /// `||m_{n+1} - m_n||_alpha / ||m_n - m_{n-1}||_alpha` for `n >= 1`,
    /// restricted to steps whose previous increment exceeds `floor` in sup
    /// norm (below that the increments are round-off).
    pub fn alpha_ratios(&self, floor: f64) -> Vec<f64> {
        self.steps
            .windows(2)
            .take_while(|w| w[0].dm_sup > floor)
            .map(|w| w[1].dm_alpha / w[0].dm_alpha)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub params: ModelParams,
    pub m: Field,
    pub h: Field,
    pub m0: Field,
    /// Gain `p` at the converged point.
    pub p: Field,
    pub j: f64,
    /// `(m(0), m(1/epsilon))`.
    pub achieved_boundary: (f64, f64),
    pub residual_pbs: f64,
    pub residual_flux: f64,
    pub trace: IterationTrace,
    pub constants: TheoryConstants,
}

impl SolverReport {
    pub fn drift_sup(&self) -> f64 {
        sup_distance(self.m.values(), self.m0.values())
    }

    pub fn drift_alpha(&self) -> f64 {
        let d: Vec<f64> = self
            .m
            .values()
            .iter()
            .zip(self.m0.values())
            .map(|(a, b)| a - b)
            .collect();
        alpha_norm(self.m.grid(), &d, self.trace.alpha)
    }
}

fn check_window(params: &ModelParams, m: &[f64]) -> Result<()> {
    let (lower, upper) = params.window();
    match m.iter().position(|&v| !(v > lower && v < upper)) {
        None => Ok(()),
        Some(node) => Err(Error::LeftWindow {
            node,
            value: m[node],
            lower,
            upper,
        }),
    }
}

/// Newton iteration for `m = tanh(beta (J*m + h))` at frozen `h`, started
/// from `m_init`. The delta masses act on the iterate's own endpoints.
pub fn inner_solve(
    params: &ModelParams,
    kernel: &KernelWeights,
    h: &Field,
    m_init: &Field,
    options: &SolverOptions,
) -> Result<InnerSolve> {
    check_same(kernel, h)?;
    check_same(kernel, m_init)?;
    let beta = params.beta;
    let hv = h.values();
    let mut m = m_init.values().to_vec();
    let mut corrections = Vec::new();
    let mut lambdas = Vec::new();
    for _ in 0..params.max_inner {
        check_window(params, &m)?;
        let (t, p) = gain_values(beta, kernel, &m, hv, (m[0], m[m.len() - 1]));
        let r: Vec<f64> = t.iter().zip(&m).map(|(t, m)| t - m).collect();
        let resolvent = Resolvent::new(kernel, &p, options.resolvent)?;
        lambdas.push(sup_norm(&p));
        let phi = match options.correction {
            CorrectionRule::Newton => {
                let kr = kernel.convolve_folded(&r);
                let u = resolvent.apply_relative(&kr)?;
                r.iter()
                    .zip(&p)
                    .zip(&u)
                    .map(|((r, p), u)| r + p * u)
                    .collect::<Vec<_>>()
            }
            CorrectionRule::ResolventOnly => resolvent.apply_relative(&r)?,
        };
        let size = sup_norm(&phi);
        m.iter_mut().zip(&phi).for_each(|(m, f)| *m += f);
        corrections.push(size);
        if size < params.inner_tol {
            check_window(params, &m)?;
            return Ok(InnerSolve {
                m: Field::new(kernel.grid().clone(), m)?,
                corrections,
                lambda_observed: lambdas,
            });
        }
    }
    Err(Error::MaxIterations {
        stage: Stage::Inner,
        limit: params.max_inner,
        last_norm: corrections.last().copied().unwrap_or(f64::NAN),
        history: corrections,
    })
}

/// `(residual_pbs, residual_flux)` of a candidate pair `(m, h)`.
///
/// The flux residual evaluates `-m' + chi(m) (J*m)' - j epsilon` at interior
/// nodes, using `(J*m)' = int J m'` over the domain (the boundary terms
/// cancel when `m` is continued by its endpoint values).
pub fn residual(
    params: &ModelParams,
    kernel: &KernelWeights,
    m: &Field,
    h: &Field,
    boundary: (f64, f64),
) -> Result<(f64, f64)> {
    check_same(kernel, m)?;
    check_same(kernel, h)?;
    let grid = kernel.grid();
    let beta = params.beta;
    let j = current(beta, params.mu_minus, params.mu_plus);
    let mv = m.values();
    let (t, _) = gain_values(beta, kernel, mv, h.values(), boundary);
    let fixed = sup_distance(mv, &t);
    let t_of_m = auxiliary_field(params, m, j)?;
    let pbs = fixed + sup_distance(h.values(), t_of_m.values());

    let n = mv.len();
    let dx = grid.spacing();
    let mut dm = vec![0.0; n];
    dm[0] = (-3.0 * mv[0] + 4.0 * mv[1] - mv[2]) / (2.0 * dx);
    dm[n - 1] = (3.0 * mv[n - 1] - 4.0 * mv[n - 2] + mv[n - 3]) / (2.0 * dx);
    for i in 1..n - 1 {
        dm[i] = (mv[i + 1] - mv[i - 1]) / (2.0 * dx);
    }
    let conv = kernel.convolve_values(&dm, 0.0, 0.0);
    let je = j * grid.epsilon();
    let flux = (1..n - 1)
        .map(|i| (-dm[i] + susceptibility(beta, mv[i]) * conv[i] - je).abs())
        .fold(0.0, f64::max);
    Ok((pbs, flux))
}

/// Iterates `m_{n+1} = inner_solve(h_n, m_n)`, `h_{n+1} = T(m_{n+1})` from
/// the Fick profile until the increment and the residual both drop below
/// `outer_tol`.
pub fn outer_solve(
    params: &ModelParams,
    kernel: &KernelWeights,
    options: &SolverOptions,
) -> Result<SolverReport> {
    params.validate()?;
    let grid = kernel.grid().clone();
    if (grid.epsilon() - params.epsilon).abs() > 1e-15 * params.epsilon {
        return Err(Error::GridMismatch);
    }
    let constants = theory_constants(params)?;
    let alpha = constants.alpha;
    let allowed = params.delta() - params.delta_prime;
    let j = current(params.beta, params.mu_minus, params.mu_plus);

    let m0 = solve_macroscopic(params, &grid)?;
    check_window(params, m0.values())?;
    let mut m = m0.clone();
    let mut h = auxiliary_field(params, &m, j)?;
    let mut steps = Vec::new();
    for _ in 0..params.max_outer {
        let inner = inner_solve(params, kernel, &h, &m, options)?;
        let h_next = auxiliary_field(params, &inner.m, j)?;
        let dm = inner.m.sub(&m)?;
        let dh = h_next.sub(&h)?;
        let drift = sup_distance(inner.m.values(), m0.values());
        steps.push(OuterStep {
            dm_sup: dm.sup_norm(),
            dm_alpha: dm.alpha_norm(alpha),
            dh_sup: dh.sup_norm(),
            dh_alpha: dh.alpha_norm(alpha),
            drift,
            inner_corrections: inner.corrections,
            lambda_observed: inner.lambda_observed.iter().copied().fold(0.0, f64::max),
        });
        if !(drift < allowed) {
            return Err(Error::Drift { drift, allowed });
        }
        m = inner.m;
        h = h_next;
        let boundary = (m.first(), m.last());
        let (residual_pbs, residual_flux) = residual(params, kernel, &m, &h, boundary)?;
        let step = steps.last().map_or(f64::INFINITY, |s| s.dm_sup);
        if step < params.outer_tol && residual_pbs < params.outer_tol {
            let (_, p) = gain_values(params.beta, kernel, m.values(), h.values(), boundary);
            return Ok(SolverReport {
                params: params.clone(),
                p: Field::new(grid.clone(), p)?,
                j,
                achieved_boundary: boundary,
                residual_pbs,
                residual_flux,
                trace: IterationTrace { alpha, steps },
                constants,
                m,
                h,
                m0,
            });
        }
    }
    let history: Vec<f64> = steps.iter().map(|s| s.dm_sup).collect();
    Err(Error::MaxIterations {
        stage: Stage::Outer,
        limit: params.max_outer,
        last_norm: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernel::build_kernel;
    use crate::macroscopic::h_tilde;

    fn setup(mu_minus: f64, mu_plus: f64, eps: f64, npu: usize) -> (ModelParams, KernelWeights) {
        let params = ModelParams::new(1.25, mu_minus, mu_plus, eps).unwrap();
        let kernel = build_kernel(&Grid::new(eps, npu).unwrap());
        (params, kernel)
    }

    #[test]
    fn constant_fixed_point_needs_no_correction() {
        let (params, kernel) = setup(0.75, 0.75, 0.1, 10);
        let g = kernel.grid().clone();
        let h = Field::constant(g.clone(), h_tilde(1.25, 0.75).unwrap());
        let m = Field::constant(g, 0.75);
        let out = inner_solve(&params, &kernel, &h, &m, &SolverOptions::default()).unwrap();
        assert_eq!(out.corrections.len(), 1);
        assert!(out.corrections[0] < 1e-15);
        assert!(sup_distance(out.m.values(), m.values()) < 1e-15);
    }

    #[test]
    fn trivial_instance_converges_in_one_step() {
        let (params, kernel) = setup(0.75, 0.75, 0.1, 10);
        let report = outer_solve(&params, &kernel, &SolverOptions::default()).unwrap();
        assert_eq!(report.j, 0.0);
        assert_eq!(report.trace.outer_iterations(), 1);
        assert!(report.m.values().iter().all(|&v| (v - 0.75).abs() < 1e-15));
        let ht = h_tilde(1.25, 0.75).unwrap();
        assert!(report.h.values().iter().all(|&v| (v - ht).abs() < 1e-15));
        assert!(report.residual_pbs < 1e-14 && report.residual_flux < 1e-14);
    }

    #[test]
    fn inner_corrections_decay_quadratically() {
        let (params, kernel) = setup(0.8, 0.7, 0.02, 20);
        let c = theory_constants(&params).unwrap();
        let g = kernel.grid().clone();
        let m0 = solve_macroscopic(&params, &g).unwrap();
        let h0 = auxiliary_field(&params, &m0, c.current).unwrap();
        let out = inner_solve(&params, &kernel, &h0, &m0, &SolverOptions::default()).unwrap();
        let phi = &out.corrections;
        assert!(phi.len() >= 3, "{phi:?}");
        // First correction scale.
        assert!(
            phi[0] <= c.u_bar * c.a * params.epsilon,
            "{} vs {}",
            phi[0],
            c.u_bar * c.a * params.epsilon
        );
        for w in phi.windows(2).filter(|w| w[0] > 1e-7) {
            assert!(w[1] <= c.u_bar * c.c * w[0] * w[0], "{w:?}");
        }
    }

    #[test]
    fn resolvent_only_rule_reaches_the_same_point_linearly() {
        let (params, kernel) = setup(0.8, 0.7, 0.04, 10);
        let newton = outer_solve(&params, &kernel, &SolverOptions::default()).unwrap();
        let literal = SolverOptions {
            correction: CorrectionRule::ResolventOnly,
            ..Default::default()
        };
        let linear = outer_solve(
            &ModelParams {
                max_inner: 200,
                ..params.clone()
            },
            &kernel,
            &literal,
        )
        .unwrap();
        assert!(sup_distance(newton.m.values(), linear.m.values()) < 1e-9);
        let first = &linear.trace.steps[0].inner_corrections;
        assert!(first.len() > newton.trace.steps[0].inner_corrections.len());
        // Consecutive ratios stay bounded away from zero: linear, not quadratic.
        let ratios: Vec<f64> = first
            .windows(2)
            .filter(|w| w[0] > 1e-9)
            .map(|w| w[1] / w[0])
            .collect();
        assert!(
            ratios.iter().skip(1).all(|&r| r > 1e-3 && r < 1.0),
            "{ratios:?}"
        );
    }

    #[test]
    fn series_and_direct_resolvents_give_the_same_profile() {
        let (params, kernel) = setup(0.8, 0.7, 0.04, 10);
        let direct = outer_solve(&params, &kernel, &SolverOptions::default()).unwrap();
        let series = SolverOptions {
            resolvent: ResolventMethod::NeumannSeries {
                truncation_tol: 1e-14,
            },
            ..Default::default()
        };
        let series = outer_solve(&params, &kernel, &series).unwrap();
        assert!(sup_distance(direct.m.values(), series.m.values()) < 1e-10);
    }

    #[test]
    fn reference_solve_is_consistent() {
        let (params, kernel) = setup(0.8, 0.7, 0.02, 20);
        let report = outer_solve(&params, &kernel, &SolverOptions::default()).unwrap();
        assert!(report.residual_pbs < params.outer_tol);
        let m_star = params.m_star();
        assert!(report.m.values().iter().all(|&v| v > m_star && v < 1.0));
        // Drift bound at the reference constants.
        let c = &report.constants;
        let bound = 4.0 * (2.0 * c.alpha).exp() * c.u_bar * c.c * params.epsilon;
        assert!(report.drift_sup() <= bound);
        assert!(report.drift_alpha() <= report.drift_sup());
        for s in &report.trace.steps {
            assert!(s.dm_sup.is_finite() && s.dm_alpha >= 0.0 && s.dh_alpha >= 0.0);
        }
    }

    #[test]
    fn h_update_is_controlled_by_the_m_update() {
        // |1/chi(a) - 1/chi(b)| <= 2 |a - b| / (beta (delta'(2 - delta'))^2) in
        // the window, so ||dh||_alpha <= K ||dm||_alpha with
        // K = 2 j / (beta alpha (delta'(2 - delta'))^2).
        let (params, kernel) = setup(0.8, 0.7, 0.02, 20);
        let report = outer_solve(&params, &kernel, &SolverOptions::default()).unwrap();
        let c = &report.constants;
        let dp = params.delta_prime * (2.0 - params.delta_prime);
        let k = 2.0 * c.current / (params.beta * c.alpha * dp * dp);
        for s in report.trace.steps.iter().filter(|s| s.dm_sup > 1e-13) {
            assert!(s.dh_alpha <= k * s.dm_alpha * (1.0 + 1e-9), "{s:?}");
        }
    }

    #[test]
    fn outer_iteration_contracts_in_the_weighted_norm() {
        let (params, kernel) = setup(0.8, 0.7, 0.02, 20);
        let report = outer_solve(&params, &kernel, &SolverOptions::default()).unwrap();
        let ratios = report.trace.alpha_ratios(1e-12);
        assert!(!ratios.is_empty());
        assert!(ratios.iter().all(|&r| r <= 0.9), "{ratios:?}");
    }

    #[test]
    fn flux_residual_shrinks_under_refinement() {
        let eps = 0.1;
        let mut res = Vec::new();
        for npu in [8usize, 16, 32] {
            let (params, kernel) = setup(0.8, 0.7, eps, npu);
            let report = outer_solve(&params, &kernel, &SolverOptions::default()).unwrap();
            res.push((kernel.grid().spacing(), report.residual_flux));
        }
        for w in res.windows(2) {
            let order = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
            assert!(order >= 1.0, "{res:?}");
        }
    }

    #[test]
    fn residual_of_exact_constant_solution_vanishes() {
        let (params, kernel) = setup(0.75, 0.75, 0.1, 10);
        let g = kernel.grid().clone();
        let m = Field::constant(g.clone(), 0.75);
        let h = Field::constant(g, h_tilde(1.25, 0.75).unwrap());
        let (pbs, flux) = residual(&params, &kernel, &m, &h, (0.75, 0.75)).unwrap();
        assert!(pbs < 1e-15 && flux < 1e-15);
    }

    #[test]
    fn window_violation_is_reported() {
        let (params, kernel) = setup(0.8, 0.7, 0.1, 10);
        let g = kernel.grid().clone();
        let h = Field::constant(g.clone(), 0.0);
        let m = Field::constant(g, 0.95);
        assert!(matches!(
            inner_solve(&params, &kernel, &h, &m, &SolverOptions::default()),
            Err(Error::LeftWindow { node: 0, .. })
        ));
    }

    #[test]
    fn epsilon_must_match_the_grid() {
        let (params, kernel) = setup(0.8, 0.7, 0.1, 10);
        let params = params.with_epsilon(0.05).unwrap();
        assert_eq!(
            outer_solve(&params, &kernel, &SolverOptions::default()).unwrap_err(),
            Error::GridMismatch
        );
    }
}
