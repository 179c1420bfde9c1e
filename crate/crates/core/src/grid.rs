//! Uniform discretization of the mesoscopic interval `[0, 1/epsilon]` and
//! real-valued fields living on it.

use std::ops::Index;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform grid on `[0, 1/epsilon]`.
///
/// Nodes sit at `x_i = i * spacing`; the last node is the right endpoint
/// exactly. The kernel has unit range, so at least [`Grid::MIN_NODES_PER_UNIT`]
/// nodes per unit length are required.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    epsilon: f64,
    nodes_per_unit: usize,
    n_nodes: usize,
    spacing: f64,
    length: f64,
}

impl Grid {
    pub const MIN_NODES_PER_UNIT: usize = 8;

    pub fn new(epsilon: f64, nodes_per_unit: usize) -> Result<Arc<Self>> {
        if !(epsilon > 0.0 && epsilon <= 1.0) || !epsilon.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "epsilon = {epsilon} must lie in (0, 1]"
            )));
        }
        let length = epsilon.recip();
        // Boundary masses a- and a+ would overlap below this length.
        if length < 2.0 {
            return Err(Error::InvalidGrid(format!(
                "domain length 1/epsilon = {length} is below 2"
            )));
        }
        if nodes_per_unit < Self::MIN_NODES_PER_UNIT {
            return Err(Error::InvalidGrid(format!(
                "nodes_per_unit = {nodes_per_unit} is below the minimum {}",
                Self::MIN_NODES_PER_UNIT
            )));
        }
        let n_nodes = (length * nodes_per_unit as f64).round() as usize + 1;
        let spacing = length / (n_nodes - 1) as f64;
        Ok(Arc::new(Self {
            epsilon,
            nodes_per_unit,
            n_nodes,
            spacing,
            length,
        }))
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn nodes_per_unit(&self) -> usize {
        self.nodes_per_unit
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Right endpoint `1/epsilon`.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n_nodes {
            self.length
        } else {
            i as f64 * self.spacing
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes).map(|i| self.x(i))
    }

    /// Composite trapezoidal rule over the whole interval.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_nodes);
        let n = values.len();
        let inner: f64 = values[1..n - 1].iter().sum();
        self.spacing * (inner + 0.5 * (values[0] + values[n - 1]))
    }

    /// Running trapezoidal integral `x_i -> int_0^{x_i} f`.
    pub fn cumulative_trapezoid(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.n_nodes);
        let half = 0.5 * self.spacing;
        let mut out = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        out.push(acc);
        for w in values.windows(2) {
            acc += half * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }
}

/// Nodal values of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::GridMismatch);
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                name: "field value",
                value: *bad,
                expected: "finite",
            });
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without checking finiteness; the length must still match.
    pub(crate) fn from_vec(grid: Arc<Grid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n_nodes());
        Self { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, value: f64) -> Self {
        let n = grid.n_nodes();
        Self::from_vec(grid, vec![value; n])
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self::from_vec(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub(crate) fn check_grid(&self, grid: &Grid) -> Result<()> {
        if *self.grid == *grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `self - other`, nodewise.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field::from_vec(self.grid.clone(), values))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_vec(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn sup_norm(&self) -> f64 {
        crate::norms::sup_norm(&self.values)
    }

    pub fn alpha_norm(&self, alpha: f64) -> f64 {
        crate::norms::alpha_norm(&self.grid, &self.values, alpha)
    }
}

impl Index<usize> for Field {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}
