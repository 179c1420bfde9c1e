use serde::Serialize;

use crate::error::{Error, Result};
use crate::macroscopic::spinodal;

/// Physical and algorithmic parameters of one stationary problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    pub beta: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub epsilon: f64,
    /// Safety margin `0 < delta' < delta` that defines the working window
    /// `(m* + delta', 1 - delta')`.
    pub delta_prime: f64,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub shoot_tol: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub max_shoot: usize,
}

impl ModelParams {
    pub const DEFAULT_INNER_TOL: f64 = 1e-12;
    pub const DEFAULT_OUTER_TOL: f64 = 1e-10;
    pub const DEFAULT_SHOOT_TOL: f64 = 1e-8;

    /// Validated parameters with `delta' = delta / 2` and default tolerances.
    pub fn new(beta: f64, mu_minus: f64, mu_plus: f64, epsilon: f64) -> Result<Self> {
        let m_star = spinodal(beta)?;
        let delta = margin(m_star, mu_minus, mu_plus);
        let params = Self {
            beta,
            mu_minus,
            mu_plus,
            epsilon,
            delta_prime: 0.5 * delta,
            inner_tol: Self::DEFAULT_INNER_TOL,
            outer_tol: Self::DEFAULT_OUTER_TOL,
            shoot_tol: Self::DEFAULT_SHOOT_TOL,
            max_inner: 50,
            max_outer: 500,
            max_shoot: 20,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_delta_prime(mut self, delta_prime: f64) -> Result<Self> {
        self.delta_prime = delta_prime;
        self.validate()?;
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    /// Same model with different boundary magnetizations. `delta'` is kept
    /// unless it no longer fits under the new `delta`.
    pub fn with_boundary(&self, mu_minus: f64, mu_plus: f64) -> Result<Self> {
        let mut next = self.clone();
        next.mu_minus = mu_minus;
        next.mu_plus = mu_plus;
        next.validate().map_err(|e| Error::OutOfRange {
            mu_minus,
            mu_plus,
            reason: e.to_string(),
        })?;
        Ok(next)
    }

    pub fn m_star(&self) -> f64 {
        (1.0 - 1.0 / self.beta).sqrt()
    }

    /// `min(min(mu) - m*, 1 - max(mu))`: distance of the boundary data from
    /// the edges of the metastable window `(m*, 1)`.
    pub fn delta(&self) -> f64 {
        margin(self.m_star(), self.mu_minus, self.mu_plus)
    }

    /// Working window `(m* + delta', 1 - delta')`.
    pub fn window(&self) -> (f64, f64) {
        (self.m_star() + self.delta_prime, 1.0 - self.delta_prime)
    }

    pub fn validate(&self) -> Result<()> {
        let m_star = spinodal(self.beta)?;
        for (name, mu) in [("mu_minus", self.mu_minus), ("mu_plus", self.mu_plus)] {
            if !(mu > m_star && mu < 1.0) {
                return Err(Error::Domain {
                    name,
                    value: mu,
                    expected: "the metastable window (m*(beta), 1)",
                });
            }
        }
        let delta = margin(m_star, self.mu_minus, self.mu_plus);
        if !(self.delta_prime > 0.0 && self.delta_prime < delta) {
            return Err(Error::InvalidParams(format!(
                "delta_prime = {} must lie in (0, delta = {delta})",
                self.delta_prime
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon = {} must lie in (0, 1]",
                self.epsilon
            )));
        }
        for (name, tol) in [
            ("inner_tol", self.inner_tol),
            ("outer_tol", self.outer_tol),
            ("shoot_tol", self.shoot_tol),
        ] {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name} = {tol} must be positive"
                )));
            }
        }
        if self.max_inner == 0 || self.max_outer == 0 || self.max_shoot == 0 {
            return Err(Error::InvalidParams(
                "iteration caps must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn margin(m_star: f64, mu_minus: f64, mu_plus: f64) -> f64 {
    (mu_minus.min(mu_plus) - m_star).min(1.0 - mu_minus.max(mu_plus))
}
