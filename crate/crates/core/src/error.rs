use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which iteration ran out of budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Inner,
    Outer,
    Shoot,
    Series,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Inner => "inner Newton",
            Stage::Outer => "outer fixed-point",
            Stage::Shoot => "shooting",
            Stage::Series => "Neumann series",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("subcritical temperature: beta = {0} must exceed the critical value 1")]
    Subcritical(f64),

    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on incompatible discretizations")]
    GridMismatch,

    #[error("root of the macroscopic profile equation not bracketed at x = {x}")]
    NotBracketed { x: f64 },

    #[error("profile left the admissible window: chi = {chi} at node {node}")]
    NonPositiveSusceptibility { node: usize, chi: f64 },

    #[error("contraction regime lost: sup p = {lambda_observed} >= 1")]
    ContractionLost { lambda_observed: f64 },

    #[error("left admissible region: m = {value} at node {node} outside ({lower}, {upper})")]
    LeftWindow {
        node: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("iterate drifted {drift} from the macroscopic profile (allowed {allowed})")]
    Drift { drift: f64, allowed: f64 },

    #[error("{stage} iteration exceeded {limit} steps (last norm {last_norm:e})")]
    MaxIterations {
        stage: Stage,
        limit: usize,
        last_norm: f64,
        history: Vec<f64>,
    },

    #[error("theory constants degenerate: lambda = {lambda} is not below 1")]
    DegenerateConstants { lambda: f64 },

    #[error("boundary pair ({mu_minus}, {mu_plus}) outside the admissible square: {reason}")]
    OutOfRange {
        mu_minus: f64,
        mu_plus: f64,
        reason: String,
    },

    #[error("singular {0}")]
    Singular(&'static str),

    #[error("fit needs at least {needed} positive points, got {got}")]
    Fit { needed: usize, got: usize },
}

impl Error {
    /// True for errors caused by the input configuration rather than by the
    /// solver leaving its working regime.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Subcritical(_)
                | Error::Domain { .. }
                | Error::InvalidParams(_)
                | Error::InvalidGrid(_)
        )
    }
}
