//! Sufficient constants of the convergence argument, evaluated for a given
//! parameter set. They are diagnostics: the solver runs whether or not the
//! requested `epsilon` sits inside the proven regime.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::macroscopic::{current, susceptibility};
use crate::params::ModelParams;

/// Factor applied to the lower bound `8 |j| u / (delta' (2 - delta'))` when
/// choosing `alpha`.
pub const ALPHA_MARGIN: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryConstants {
    pub m_star: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub current: f64,
    /// Bound on `|J*m + h|` over the working window.
    pub zeta: f64,
    /// `beta / cosh^2(beta zeta)`.
    pub lambda: f64,
    /// `1 / (1 - lambda)`.
    pub u_bar: f64,
    /// First-correction constant `beta |j| / (1 - chi(min mu))`.
    pub a: f64,
    /// Bound on `sup p'`; taken equal to `lambda` since `|tanh| <= 1`.
    pub b: f64,
    pub c: f64,
    pub eps_star: f64,
    pub alpha_lower_bound: f64,
    pub alpha: f64,
    pub eps_tilde: f64,
    pub epsilon: f64,
    pub below_eps_star: bool,
    pub below_eps_tilde: bool,
}

pub fn theory_constants(params: &ModelParams) -> Result<TheoryConstants> {
    params.validate()?;
    let beta = params.beta;
    let dp = params.delta_prime;
    let m_star = params.m_star();
    let delta = params.delta();
    let j = current(beta, params.mu_minus, params.mu_plus).abs();

    let low = m_star + dp;
    let high = 1.0 - dp;
    let zeta = (high - j / susceptibility(beta, low))
        .abs()
        .max((low - j / susceptibility(beta, high)).abs());
    let lambda = beta / (beta * zeta).cosh().powi(2);
    if !(lambda < 1.0) {
        return Err(Error::DegenerateConstants { lambda });
    }
    let u_bar = 1.0 / (1.0 - lambda);

    let mu_low = params.mu_minus.min(params.mu_plus);
    let a = beta * j / (1.0 - susceptibility(beta, mu_low));
    let b = lambda;
    let c = a.max(b);
    let eps_star = (1.0 / (2.0 * u_bar * u_bar * c * c)).min((delta - dp) / (2.0 * u_bar * c));

    let alpha_lower_bound = 8.0 * j * u_bar / (dp * (2.0 - dp));
    let alpha = ALPHA_MARGIN * alpha_lower_bound;
    let second = 0.5 * (2.0 * alpha).exp() * eps_star;
    let eps_tilde = if alpha > 0.0 {
        (((1.0 + lambda) / lambda).ln() / alpha).min(second)
    } else {
        second
    };

    Ok(TheoryConstants {
        m_star,
        delta,
        delta_prime: dp,
        current: j,
        zeta,
        lambda,
        u_bar,
        a,
        b,
        c,
        eps_star,
        alpha_lower_bound,
        alpha,
        eps_tilde,
        epsilon: params.epsilon,
        below_eps_star: params.epsilon < eps_star,
        below_eps_tilde: params.epsilon < eps_tilde,
    })
}
