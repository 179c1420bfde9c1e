//! Tent-kernel quadrature with the boundary delta masses.
//!
//! The interaction kernel on `[0, l]` (`l = 1/epsilon`) is the tent
//! `(1 - |y - x|)^+` restricted to the domain, plus point masses `a-(x)` at
//! `y = 0` and `a+(x)` at `y = l` that carry the part of the tent sticking
//! out of the interval. Every row therefore integrates to one.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Mass tolerance used by [`KernelWeights::max_mass_defect`] consumers.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// `(1 - |y - x|)` on `|y - x| <= 1`, zero outside.
pub fn tent_kernel(x: f64, y: f64) -> f64 {
    let d = (y - x).abs();
    if d <= 1.0 {
        1.0 - d
    } else {
        0.0
    }
}

/// Left boundary mass `int_{-1}^{0} J(x, y) dy` in closed form.
pub fn left_mass(x: f64) -> f64 {
    if (0.0..1.0).contains(&x) {
        0.5 * (1.0 - x) * (1.0 - x)
    } else {
        0.0
    }
}

/// Right boundary mass `int_{l}^{l+1} J(x, y) dy` in closed form.
pub fn right_mass(x: f64, length: f64) -> f64 {
    left_mass(length - x)
}

/// Nodal boundary masses `(a-, a+)`.
pub fn boundary_weights(grid: &Arc<Grid>) -> (Field, Field) {
    let length = grid.length();
    let a_minus = Field::from_fn(grid.clone(), left_mass);
    let a_plus = Field::from_fn(grid.clone(), |x| right_mass(x, length));
    (a_minus, a_plus)
}

/// Banded quadrature rows for `int_0^l J(x_i, y) f(y) dy` plus boundary masses.
#[derive(Debug, Clone)]
pub struct KernelWeights {
    grid: Arc<Grid>,
    half_width: usize,
    /// First column of each row.
    starts: Vec<usize>,
    /// Row `i` occupies `weights[offsets[i]..offsets[i + 1]]`.
    offsets: Vec<usize>,
    weights: Vec<f64>,
    a_minus: Field,
    a_plus: Field,
}

/// Trapezoidal weights, then each row is rescaled to its exact interior mass
/// `1 - a-(x_i) - a+(x_i)`, so constants are reproduced to rounding.
pub fn build_kernel(grid: &Arc<Grid>) -> KernelWeights {
    let n = grid.n_nodes();
    let h = grid.spacing();
    let half_width = (1.0 / h + 1e-9).floor() as usize;
    let (a_minus, a_plus) = boundary_weights(grid);

    let mut starts = Vec::with_capacity(n);
    let mut offsets = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n * (2 * half_width + 1));
    offsets.push(0);
    for i in 0..n {
        let lo = i.saturating_sub(half_width);
        let hi = (i + half_width).min(n - 1);
        let xi = grid.x(i);
        let row_start = weights.len();
        for j in lo..=hi {
            let mut w = h * tent_kernel(xi, grid.x(j));
            if j == 0 || j == n - 1 {
                w *= 0.5;
            }
            weights.push(w);
        }
        let row = &mut weights[row_start..];
        let approx: f64 = row.iter().sum();
        let exact = 1.0 - a_minus[i] - a_plus[i];
        let scale = exact / approx;
        row.iter_mut().for_each(|w| *w *= scale);
        starts.push(lo);
        offsets.push(weights.len());
    }

    KernelWeights {
        grid: grid.clone(),
        half_width,
        starts,
        offsets,
        weights,
        a_minus,
        a_plus,
    }
}

impl KernelWeights {
    pub fn new(grid: &Arc<Grid>) -> Self {
        build_kernel(grid)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn a_minus(&self) -> &Field {
        &self.a_minus
    }

    pub fn a_plus(&self) -> &Field {
        &self.a_plus
    }

    /// `(first column, weights)` of row `i`.
    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        (
            self.starts[i],
            &self.weights[self.offsets[i]..self.offsets[i + 1]],
        )
    }

    /// Number of stored band entries in row `i`.
    pub fn band_entries(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Banded row sum plus both boundary masses.
    pub fn row_mass(&self, i: usize) -> f64 {
        let (_, w) = self.row(i);
        w.iter().sum::<f64>() + self.a_minus[i] + self.a_plus[i]
    }

    pub fn max_mass_defect(&self) -> f64 {
        (0..self.grid.n_nodes())
            .map(|i| (self.row_mass(i) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Row `i` applied to `f`, with the delta masses picking up
    /// `f_left`/`f_right`.
    #[inline]
    pub(crate) fn apply_row(&self, i: usize, f: &[f64], f_left: f64, f_right: f64) -> f64 {
        let (start, w) = self.row(i);
        let banded: f64 = w
            .iter()
            .zip(&f[start..start + w.len()])
            .map(|(a, b)| a * b)
            .sum();
        banded + self.a_minus[i] * f_left + self.a_plus[i] * f_right
    }

    pub(crate) fn convolve_values(&self, f: &[f64], f_left: f64, f_right: f64) -> Vec<f64> {
        (0..f.len())
            .map(|i| self.apply_row(i, f, f_left, f_right))
            .collect()
    }

    /// Convolution where the delta masses act on the endpoint values of `f`
    /// itself, i.e. `f` is continued by constants outside the domain.
    pub(crate) fn convolve_folded(&self, f: &[f64]) -> Vec<f64> {
        let n = f.len();
        self.convolve_values(f, f[0], f[n - 1])
    }

    /// `(J * f)(x_i) = sum_j w_ij f_j + a-(x_i) f_left + a+(x_i) f_right`.
    pub fn convolve(&self, f: &Field, f_left: f64, f_right: f64) -> Result<Field> {
        f.check_grid(&self.grid)?;
        Ok(Field::from_vec(
            self.grid.clone(),
            self.convolve_values(f.values(), f_left, f_right),
        ))
    }

    /// Scales the banded part of one row, breaking its normalization.
    ///
    /// Exists so validation suites can run a negative control.
    #[doc(hidden)]
    pub fn scale_row_for_testing(&mut self, i: usize, factor: f64) {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        self.weights[a..b].iter_mut().for_each(|w| *w *= factor);
    }
}

/// Free-function form of [`KernelWeights::convolve`].
pub fn convolve(kernel: &KernelWeights, f: &Field, f_left: f64, f_right: f64) -> Result<Field> {
    kernel.convolve(f, f_left, f_right)
}

pub(crate) fn check_same(kernel: &KernelWeights, f: &Field) -> Result<()> {
    if **kernel.grid() == **f.grid() {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}
