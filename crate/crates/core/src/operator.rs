//! The linearized nonlocal operator `L f(x) = int p(y) J(x, y) f(y) dy` and
//! its resolvent `U = (I - L)^{-1}`.
//!
//! Inside the fixed-point iteration the field `f` is continued by constants
//! outside the domain, so the boundary delta masses act on `f(0)` and `f(l)`.

use crate::banded::{BandedLu, BandedMatrix};
use crate::error::{Error, Result, Stage};
use crate::grid::Field;
use crate::kernel::{check_same, KernelWeights};
use crate::norms::sup_norm;

/// Derivative of `tanh(beta u)` along `u = J*m + h`, and its companion
/// `p' = p tanh(beta u)`.
#[derive(Debug, Clone)]
pub struct GainField {
    pub p: Field,
    pub p_prime: Field,
    pub lambda_observed: f64,
}

impl GainField {
    /// Wraps a prescribed gain profile; `p_prime` is set to zero.
    pub fn from_profile(p: Field) -> Self {
        let lambda_observed = sup_norm(p.values());
        let p_prime = Field::constant(p.grid().clone(), 0.0);
        Self {
            p,
            p_prime,
            lambda_observed,
        }
    }
}

/// Nodal `tanh(beta u)` and `p = beta (1 - tanh^2(beta u))` for
/// `u = J*m + h`.
pub(crate) fn gain_values(
    beta: f64,
    kernel: &KernelWeights,
    m: &[f64],
    h: &[f64],
    boundary: (f64, f64),
) -> (Vec<f64>, Vec<f64>) {
    let conv = kernel.convolve_values(m, boundary.0, boundary.1);
    let t: Vec<f64> = conv
        .iter()
        .zip(h)
        .map(|(c, hv)| (beta * (c + hv)).tanh())
        .collect();
    let p = t.iter().map(|t| beta * (1.0 - t * t)).collect();
    (t, p)
}

pub fn gain(
    beta: f64,
    kernel: &KernelWeights,
    m: &Field,
    h: &Field,
    boundary: (f64, f64),
) -> Result<GainField> {
    check_same(kernel, m)?;
    check_same(kernel, h)?;
    let (t, p) = gain_values(beta, kernel, m.values(), h.values(), boundary);
    let p_prime: Vec<f64> = p.iter().zip(&t).map(|(p, t)| p * t).collect();
    let grid = kernel.grid().clone();
    let lambda_observed = sup_norm(&p);
    Ok(GainField {
        p: Field::from_vec(grid.clone(), p),
        p_prime: Field::from_vec(grid, p_prime),
        lambda_observed,
    })
}

/// `L f = J * (p f)` with boundary values `p(0) f_left`, `p(l) f_right`.
pub fn apply_l(
    kernel: &KernelWeights,
    gain: &GainField,
    f: &Field,
    f_left: f64,
    f_right: f64,
) -> Result<Field> {
    check_same(kernel, f)?;
    check_same(kernel, &gain.p)?;
    let p = gain.p.values();
    let pf: Vec<f64> = p.iter().zip(f.values()).map(|(a, b)| a * b).collect();
    let values = kernel.convolve_values(&pf, p[0] * f_left, p[p.len() - 1] * f_right);
    Ok(Field::from_vec(kernel.grid().clone(), values))
}

fn apply_l_folded(kernel: &KernelWeights, p: &[f64], f: &[f64]) -> Vec<f64> {
    let pf: Vec<f64> = p.iter().zip(f).map(|(a, b)| a * b).collect();
    kernel.convolve_folded(&pf)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ResolventMethod {
    /// Partial sums of `sum_k L^k g`, stopped once a term drops below
    /// `truncation_tol * (1 - lambda_observed)` in sup norm.
    NeumannSeries { truncation_tol: f64 },
    /// Banded LU of `I - W diag(p)` with boundary masses folded onto the
    /// endpoint columns.
    #[default]
    DirectSolve,
}

/// `I - W diag(p)` with the delta-mass columns folded onto nodes 0 and n-1.
pub(crate) fn assemble(kernel: &KernelWeights, p: &[f64]) -> BandedMatrix {
    let n = p.len();
    let mut a = BandedMatrix::zeros(n, kernel.half_width());
    let a_minus = kernel.a_minus().values();
    let a_plus = kernel.a_plus().values();
    for i in 0..n {
        a.add(i, i, 1.0);
        let (start, w) = kernel.row(i);
        for (k, wij) in w.iter().enumerate() {
            let j = start + k;
            a.add(i, j, -wij * p[j]);
        }
        if a_minus[i] != 0.0 {
            a.add(i, 0, -a_minus[i] * p[0]);
        }
        if a_plus[i] != 0.0 {
            a.add(i, n - 1, -a_plus[i] * p[n - 1]);
        }
    }
    a
}

/// Resolvent prepared for one gain profile; the direct method factors once.
pub(crate) struct Resolvent<'a> {
    kernel: &'a KernelWeights,
    p: &'a [f64],
    lambda_observed: f64,
    method: ResolventMethod,
    lu: Option<BandedLu>,
}

impl<'a> Resolvent<'a> {
    pub(crate) fn new(
        kernel: &'a KernelWeights,
        p: &'a [f64],
        method: ResolventMethod,
    ) -> Result<Self> {
        let lambda_observed = sup_norm(p);
        if !(lambda_observed < 1.0) {
            return Err(Error::ContractionLost { lambda_observed });
        }
        let lu = match method {
            ResolventMethod::DirectSolve => Some(assemble(kernel, p).factor()?),
            ResolventMethod::NeumannSeries { truncation_tol } => {
                if !(truncation_tol > 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "truncation_tol = {truncation_tol} must be positive"
                    )));
                }
                None
            }
        };
        Ok(Self {
            kernel,
            p,
            lambda_observed,
            method,
            lu,
        })
    }

    pub(crate) fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        match (self.method, &self.lu) {
            (ResolventMethod::DirectSolve, Some(lu)) => Ok(lu.solve(g)),
            (ResolventMethod::NeumannSeries { truncation_tol }, _) => {
                self.series(g, truncation_tol)
            }
            (ResolventMethod::DirectSolve, None) => {
                unreachable!("direct resolvent without factorization")
            }
        }
    }

    /// Same as [`Resolvent::apply`], with the series truncation taken
    /// relative to `||g||_inf`.
    pub(crate) fn apply_relative(&self, g: &[f64]) -> Result<Vec<f64>> {
        match self.method {
            ResolventMethod::NeumannSeries { truncation_tol } => {
                let scale = sup_norm(g);
                if scale == 0.0 {
                    return Ok(g.to_vec());
                }
                self.series(g, truncation_tol * scale)
            }
            ResolventMethod::DirectSolve => self.apply(g),
        }
    }

    fn series(&self, g: &[f64], tol: f64) -> Result<Vec<f64>> {
        let lambda = self.lambda_observed;
        let threshold = tol * (1.0 - lambda);
        let g_norm = sup_norm(g);
        let mut sum = g.to_vec();
        if g_norm < threshold || lambda == 0.0 {
            return Ok(sum);
        }
        // sup ||L^k g|| <= lambda^k ||g||, so this many terms always suffice.
        let needed = ((threshold / g_norm).ln() / lambda.ln()).ceil().max(1.0) as usize;
        let limit = needed + 100;
        let mut term = g.to_vec();
        let mut history = Vec::new();
        for _ in 0..limit {
            term = apply_l_folded(self.kernel, self.p, &term);
            sum.iter_mut().zip(&term).for_each(|(s, t)| *s += t);
            let norm = sup_norm(&term);
            if norm < threshold {
                return Ok(sum);
            }
            if history.len() < 64 {
                history.push(norm);
            }
        }
        Err(Error::MaxIterations {
            stage: Stage::Series,
            limit,
            last_norm: sup_norm(&term),
            history,
        })
    }
}

/// Solves `(I - L) f = g`.
pub fn resolvent(
    kernel: &KernelWeights,
    gain: &GainField,
    g: &Field,
    method: ResolventMethod,
) -> Result<Field> {
    check_same(kernel, g)?;
    check_same(kernel, &gain.p)?;
    let r = Resolvent::new(kernel, gain.p.values(), method)?;
    Ok(Field::from_vec(kernel.grid().clone(), r.apply(g.values())?))
}
