use thiserror::Error;

/// Errors produced by problem validation, the solver and the metric/theory helpers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("task {task} has {found} features, expected {expected}")]
    DimensionMismatch {
        task: usize,
        expected: usize,
        found: usize,
    },

    #[error("task {task} contains a non-finite value")]
    NonFiniteData { task: usize },

    #[error("task {task} row {row}: classification target {value} is not 0 or 1")]
    BadLabels { task: usize, row: usize, value: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("loss {loss} cannot be used with a {kind} problem")]
    LossKindMismatch {
        loss: &'static str,
        kind: &'static str,
    },

    #[error("inner solver for task {task} increased its objective for {steps} consecutive steps")]
    StepDiverged { task: usize, steps: usize },

    #[error("ADMM did not converge in {iterations} iterations (primal {primal:.3e}, dual {dual:.3e})")]
    NotConverged {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("the maximal column L1 norm is attained by more than one (task, feature) pair")]
    NonUniqueMaximizer,

    #[error("unknown synthetic preset '{0}'")]
    UnknownPreset(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("ground-truth range is zero")]
    DegenerateRange,

    #[error("metric undefined: labels contain a single class")]
    SingleClass,

    #[error("empty input")]
    Empty,

    #[error("invalid bound inputs: {0}")]
    InvalidBoundInputs(String),
}

pub type Result<T> = std::result::Result<T, Error>;
