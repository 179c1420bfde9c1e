//! Stationary magnetization profiles of a one-dimensional Ising system with
//! a Kac interaction, driven by boundary reservoirs, and their convergence to
//! the Fick's-law profile as the scale ratio `epsilon` goes to zero.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod constants;
pub mod error;
pub mod fit;
pub mod fixed_point;
pub mod grid;
pub mod kernel;
pub mod macroscopic;
pub mod norms;
pub mod operator;
pub mod params;
pub mod shooting;

pub use constants::{theory_constants, TheoryConstants};
pub use error::{Error, Result, Stage};
pub use fit::{fit_power_law, PowerFit};
pub use fixed_point::{
    inner_solve, outer_solve, residual, CorrectionRule, InnerSolve, IterationTrace, OuterStep,
    SolverOptions, SolverReport,
};
pub use grid::{Field, Grid};
pub use kernel::{build_kernel, convolve, KernelWeights};
pub use operator::{apply_l, gain, resolvent, GainField, ResolventMethod};
pub use params::ModelParams;
pub use shooting::{
    boundary_map, estimate_jacobian, shoot, BoundaryMapSample, Jacobian2, ShootOutcome,
};
