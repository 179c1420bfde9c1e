//! Sup norm and the exponentially weighted alpha-norm.

use crate::grid::Grid;

pub fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// `max_i exp(-alpha * epsilon * x_i) |f(x_i)|`.
///
/// The weight runs from 1 at the left endpoint down to `exp(-alpha)` at the
/// right one, so `||f||_alpha <= ||f||_inf <= exp(alpha) ||f||_alpha`.
pub fn alpha_norm(grid: &Grid, values: &[f64], alpha: f64) -> f64 {
    let rate = alpha * grid.epsilon();
    values.iter().enumerate().fold(0.0, |acc: f64, (i, v)| {
        acc.max((-rate * grid.x(i)).exp() * v.abs())
    })
}

/// Sup norm of the difference of two equally long slices.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc: f64, (x, y)| acc.max((x - y).abs()))
}
