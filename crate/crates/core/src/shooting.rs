//! The boundary map `F: (mu-, mu+) -> (m(0), m(1/epsilon))` of the outer
//! solver, its Jacobian, and its inversion by quasi-Newton iteration.

use serde::Serialize;

use crate::error::{Error, Result, Stage};
use crate::fixed_point::{outer_solve, SolverOptions, SolverReport};
use crate::kernel::KernelWeights;
use crate::params::ModelParams;

pub const DEFAULT_JACOBIAN_STEP: f64 = 1e-4;
const MIN_JACOBIAN_STEP: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct BoundaryMapSample {
    pub input: (f64, f64),
    pub output: (f64, f64),
    pub report: SolverReport,
}

impl BoundaryMapSample {
    /// `||F(pair) - pair||_inf`.
    pub fn deviation(&self) -> f64 {
        (self.output.0 - self.input.0)
            .abs()
            .max((self.output.1 - self.input.1).abs())
    }
}

/// Central-difference Jacobian of the boundary map, `matrix[i][j] = d out_i / d in_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jacobian2 {
    pub matrix: [[f64; 2]; 2],
    /// `matrix - I`.
    pub delta: [[f64; 2]; 2],
    pub determinant: f64,
    pub delta_determinant: f64,
    /// `max |matrix - I|` entrywise.
    pub deviation: f64,
    /// Step actually used, after any halving.
    pub step: f64,
}

impl Jacobian2 {
    pub fn identity() -> Self {
        Self::from_matrix([[1.0, 0.0], [0.0, 1.0]], 0.0)
    }

    pub fn from_matrix(matrix: [[f64; 2]; 2], step: f64) -> Self {
        let delta = [
            [matrix[0][0] - 1.0, matrix[0][1]],
            [matrix[1][0], matrix[1][1] - 1.0],
        ];
        let deviation = delta.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
        Self {
            matrix,
            delta,
            determinant: det(&matrix),
            delta_determinant: det(&delta),
            deviation,
            step,
        }
    }
}

fn det(a: &[[f64; 2]; 2]) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

fn solve2(a: &[[f64; 2]; 2], b: [f64; 2]) -> Result<[f64; 2]> {
    let d = det(a);
    if d == 0.0 || !d.is_finite() {
        return Err(Error::Singular("shooting Jacobian"));
    }
    Ok([
        (b[0] * a[1][1] - b[1] * a[0][1]) / d,
        (a[0][0] * b[1] - a[1][0] * b[0]) / d,
    ])
}

/// Runs the outer solver with the reservoir values replaced by `pair`.
pub fn boundary_map(
    params: &ModelParams,
    kernel: &KernelWeights,
    pair: (f64, f64),
    options: &SolverOptions,
) -> Result<BoundaryMapSample> {
    let local = params.with_boundary(pair.0, pair.1)?;
    let report = outer_solve(&local, kernel, options)?;
    Ok(BoundaryMapSample {
        input: pair,
        output: report.achieved_boundary,
        report,
    })
}

/// Central differences of [`boundary_map`] around `pair`. The step is halved
/// until all four perturbed pairs are admissible.
pub fn estimate_jacobian(
    params: &ModelParams,
    kernel: &KernelWeights,
    pair: (f64, f64),
    step: f64,
    options: &SolverOptions,
) -> Result<Jacobian2> {
    let mut step = step;
    let points = loop {
        let pts = [
            (pair.0 + step, pair.1),
            (pair.0 - step, pair.1),
            (pair.0, pair.1 + step),
            (pair.0, pair.1 - step),
        ];
        if let Some(bad) = pts
            .iter()
            .find_map(|p| params.with_boundary(p.0, p.1).err())
        {
            step *= 0.5;
            if step < MIN_JACOBIAN_STEP {
                return Err(match bad {
                    Error::OutOfRange { mu_minus, mu_plus, reason } => Error::OutOfRange {
                        mu_minus,
                        mu_plus,
                        reason: format!("{reason}; no admissible finite-difference step above {MIN_JACOBIAN_STEP:e}"),
                    },
                    other => other,
                });
            }
            continue;
        }
        break pts;
    };
    let outputs: Vec<Result<(f64, f64)>> = std::thread::scope(|s| {
        let handles: Vec<_> = points
            .iter()
            .map(|&p| s.spawn(move || boundary_map(params, kernel, p, options).map(|b| b.output)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("boundary map worker panicked"))
            .collect()
    });
    let out = outputs.into_iter().collect::<Result<Vec<_>>>()?;
    let inv = 0.5 / step;
    let matrix = [
        [(out[0].0 - out[1].0) * inv, (out[2].0 - out[3].0) * inv],
        [(out[0].1 - out[1].1) * inv, (out[2].1 - out[3].1) * inv],
    ];
    Ok(Jacobian2::from_matrix(matrix, step))
}

#[derive(Debug, Clone)]
pub struct ShootOutcome {
    /// Reservoir values whose image under the boundary map is the target.
    pub input: (f64, f64),
    pub target: (f64, f64),
    /// Converged solve at `input`.
    pub report: SolverReport,
    /// Quasi-Newton steps taken after the initial evaluation.
    pub steps: usize,
    pub jacobian_refreshes: usize,
    /// `||F(pair) - target||_inf` after the initial evaluation and each step.
    pub residual_history: Vec<f64>,
}

/// Finds reservoir values that the solver maps onto `target`, by Broyden
/// updates of an identity initial Jacobian.
pub fn shoot(
    params: &ModelParams,
    kernel: &KernelWeights,
    target: (f64, f64),
    options: &SolverOptions,
) -> Result<ShootOutcome> {
    let tol = params.shoot_tol;
    let mut pair = target;
    let mut sample = boundary_map(params, kernel, pair, options)?;
    let mut g = [sample.output.0 - target.0, sample.output.1 - target.1];
    let norm = |g: &[f64; 2]| g[0].abs().max(g[1].abs());
    let mut history = vec![norm(&g)];
    let mut b = [[1.0, 0.0], [0.0, 1.0]];
    let mut refreshes = 0;
    let mut steps = 0;
    while norm(&g) >= tol {
        if steps == params.max_shoot {
            return Err(Error::MaxIterations {
                stage: Stage::Shoot,
                limit: params.max_shoot,
                last_norm: norm(&g),
                history,
            });
        }
        steps += 1;
        let s = solve2(&b, g)?;
        let s = [-s[0], -s[1]];
        let next = (pair.0 + s[0], pair.1 + s[1]);
        let trial = boundary_map(params, kernel, next, options)?;
        let g_next = [trial.output.0 - target.0, trial.output.1 - target.1];
        if norm(&g_next) < norm(&g) {
            let y = [g_next[0] - g[0], g_next[1] - g[1]];
            let bs = [
                b[0][0] * s[0] + b[0][1] * s[1],
                b[1][0] * s[0] + b[1][1] * s[1],
            ];
            let ss = s[0] * s[0] + s[1] * s[1];
            for i in 0..2 {
                for k in 0..2 {
                    b[i][k] += (y[i] - bs[i]) * s[k] / ss;
                }
            }
            pair = next;
            sample = trial;
            g = g_next;
        } else {
            b = estimate_jacobian(params, kernel, pair, DEFAULT_JACOBIAN_STEP, options)?.matrix;
            refreshes += 1;
        }
        history.push(norm(&g));
    }
    Ok(ShootOutcome {
        input: pair,
        target,
        report: sample.report,
        steps,
        jacobian_refreshes: refreshes,
        residual_history: history,
    })
}
