//! Closed-form macroscopic objects: thermodynamic functions, the current,
//! the Fick profile `m0` and the auxiliary field obtained by quadrature.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::kernel::KernelWeights;
use crate::params::ModelParams;

/// Spinodal magnetization `sqrt(1 - 1/beta)`.
pub fn spinodal(beta: f64) -> Result<f64> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(Error::Subcritical(beta));
    }
    Ok((1.0 - 1.0 / beta).sqrt())
}

/// Positive root `m_beta` of `m = tanh(beta m)`, by bisection on `[m*, 1]`.
pub fn mean_field_magnetization(beta: f64) -> Result<f64> {
    let mut lo = spinodal(beta)?;
    let mut hi = 1.0;
    // g(m) = m - tanh(beta m) is negative at m* and positive at 1.
    let g = |m: f64| m - (beta * m).tanh();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Magnetic susceptibility (mobility) `chi(m) = beta (1 - m^2)`.
pub fn susceptibility(beta: f64, m: f64) -> f64 {
    beta * (1.0 - m * m)
}

/// Ising entropy `S(m)`, with the limits `S(+-1) = 0`.
pub fn entropy(m: f64) -> Result<f64> {
    if !(m.abs() <= 1.0) {
        return Err(Error::Domain {
            name: "magnetization",
            value: m,
            expected: "[-1, 1]",
        });
    }
    let xlogx = |p: f64| if p > 0.0 { p * p.ln() } else { 0.0 };
    Ok(-xlogx(0.5 * (1.0 + m)) - xlogx(0.5 * (1.0 - m)))
}

/// Double-well density `phi_beta(m) = -m^2/2 - S(m)/beta`.
pub fn free_energy_density(beta: f64, m: f64) -> Result<f64> {
    Ok(-0.5 * m * m - entropy(m)? / beta)
}

/// Stationary current for boundary magnetizations `mu_minus` (left) and
/// `mu_plus` (right).
pub fn current(beta: f64, mu_minus: f64, mu_plus: f64) -> f64 {
    (1.0 - beta) * (mu_minus - mu_plus) + beta / 3.0 * (mu_minus.powi(3) - mu_plus.powi(3))
}

/// Integration constant `(1/beta) artanh(mu_minus) - mu_minus`, i.e. the
/// field at which `mu_minus` is a mean-field fixed point.
pub fn h_tilde(beta: f64, mu_minus: f64) -> Result<f64> {
    if !(mu_minus.abs() < 1.0) {
        return Err(Error::Domain {
            name: "mu_minus",
            value: mu_minus,
            expected: "(-1, 1)",
        });
    }
    Ok(mu_minus.atanh() / beta - mu_minus)
}

/// `G(m) = (1-beta)(mu- - m) + (beta/3)(mu-^3 - m^3)`; the profile solves
/// `G(m0(x)) = j epsilon x`.
fn profile_potential(beta: f64, mu_minus: f64, m: f64) -> f64 {
    (1.0 - beta) * (mu_minus - m) + beta / 3.0 * (mu_minus.powi(3) - m.powi(3))
}

/// Root of `G(m) = target` on `[lo, hi]`, where `G` is strictly decreasing.
fn invert_potential(
    beta: f64,
    mu_minus: f64,
    target: f64,
    lo: f64,
    hi: f64,
    x: f64,
) -> Result<f64> {
    let f = |m: f64| profile_potential(beta, mu_minus, m) - target;
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    let slack = 1e-14 * (1.0 + target.abs());
    if fa.abs() <= slack {
        return Ok(a);
    }
    if fb.abs() <= slack {
        return Ok(b);
    }
    if fa < 0.0 || fb > 0.0 {
        return Err(Error::NotBracketed { x });
    }
    // Secant start, then Newton safeguarded by the shrinking bracket.
    let mut m = a + (b - a) * fa / (fa - fb);
    for _ in 0..100 {
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm > 0.0 {
            a = m;
        } else {
            b = m;
        }
        let slope = -(1.0 - susceptibility(beta, m));
        let mut next = m - fm / slope;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - m).abs() <= 1e-15 * m.abs().max(1.0) || b - a <= 1e-15 {
            return Ok(next);
        }
        m = next;
    }
    Ok(m)
}

/// Fick profile `m0` on the grid: the solution of the local diffusion problem
/// with the prescribed boundary values.
pub fn solve_macroscopic(params: &ModelParams, grid: &Arc<Grid>) -> Result<Field> {
    let ModelParams {
        beta,
        mu_minus,
        mu_plus,
        ..
    } = *params;
    if mu_minus == mu_plus {
        return Ok(Field::constant(grid.clone(), mu_minus));
    }
    let j = current(beta, mu_minus, mu_plus);
    let je = j * grid.epsilon();
    let (lo, hi) = (mu_minus.min(mu_plus), mu_minus.max(mu_plus));
    let values = grid
        .nodes()
        .map(|x| invert_potential(beta, mu_minus, je * x, lo, hi, x))
        .collect::<Result<Vec<_>>>()?;
    Field::new(grid.clone(), values)
}

/// `h(x) = h~ - j epsilon int_0^x dy / chi(m(y))`, cumulative trapezoid.
pub fn auxiliary_field(params: &ModelParams, m: &Field, j: f64) -> Result<Field> {
    let grid = m.grid();
    let inv_chi = m
        .values()
        .iter()
        .enumerate()
        .map(|(node, &v)| {
            let chi = susceptibility(params.beta, v);
            if chi > 0.0 {
                Ok(chi.recip())
            } else {
                Err(Error::NonPositiveSusceptibility { node, chi })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let h0 = h_tilde(params.beta, params.mu_minus)?;
    let je = j * grid.epsilon();
    let values = grid
        .cumulative_trapezoid(&inv_chi)
        .into_iter()
        .map(|c| h0 - je * c)
        .collect();
    Field::new(grid.clone(), values)
}

/// Analytic sensitivities `(d m0 / d mu-, d m0 / d mu+)` of the Fick profile.
pub fn boundary_derivatives_m0(params: &ModelParams, m0: &Field) -> (Field, Field) {
    let beta = params.beta;
    let eps = m0.grid().epsilon();
    let left = 1.0 - susceptibility(beta, params.mu_minus);
    let right = 1.0 - susceptibility(beta, params.mu_plus);
    let grid = m0.grid().clone();
    let mut d_minus = Vec::with_capacity(m0.len());
    let mut d_plus = Vec::with_capacity(m0.len());
    for (i, &m) in m0.values().iter().enumerate() {
        let s = eps * grid.x(i);
        let denom = 1.0 - susceptibility(beta, m);
        d_minus.push(left / denom * (1.0 - s));
        d_plus.push(right / denom * s);
    }
    (
        Field::from_vec(grid.clone(), d_minus),
        Field::from_vec(grid, d_plus),
    )
}

/// Discrete free energy of `m` given the exterior values `(left, right)`.
///
/// Bulk double-well term, the in-domain interaction
/// `1/4 int int J (m(x) - m(y))^2` and the exterior coupling
/// `1/2 int [a-(x)(m(x) - left)^2 + a+(x)(m(x) - right)^2]`; its
/// Euler-Lagrange equation is `m = tanh(beta J*m)`.
pub fn free_energy(
    params: &ModelParams,
    kernel: &KernelWeights,
    m: &Field,
    boundary: (f64, f64),
) -> Result<f64> {
    crate::kernel::check_same(kernel, m)?;
    let grid = kernel.grid();
    let v = m.values();
    let n = v.len();
    let (left, right) = boundary;
    let a_minus = kernel.a_minus().values();
    let a_plus = kernel.a_plus().values();
    let mut density = Vec::with_capacity(n);
    for i in 0..n {
        let bulk = free_energy_density(params.beta, v[i])?;
        let (start, w) = kernel.row(i);
        let pair: f64 = w
            .iter()
            .zip(&v[start..start + w.len()])
            .map(|(wij, vj)| wij * (v[i] - vj).powi(2))
            .sum();
        let exterior = a_minus[i] * (v[i] - left).powi(2) + a_plus[i] * (v[i] - right).powi(2);
        density.push(bulk + 0.25 * pair + 0.5 * exterior);
    }
    Ok(grid.integrate(&density))
}
