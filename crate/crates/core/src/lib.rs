//! Sign-regularized multi-task learning.
//!
//! `T` linear models are fitted jointly while a slack penalty
//! `c * sum_t sum_j max(0, -w_{t,j} w_{t+1,j})` encourages consecutive tasks to
//! agree on the sign of every feature weight. The problem is split with an
//! auxiliary copy `u` of the weights and solved by ADMM: per-task weight updates
//! by (proximal) gradient descent, closed-form scalar updates for `u`, and dual
//! ascent on the consensus constraint `w = u`.
//!
//! ```
//! use srml_core::{fit, generate, preset, LossKind, SolverConfig, WSolver};
//!
//! let mut spec = preset("synth1").unwrap();
//! spec.num_tasks = 3;
//! let (problem, _truth) = generate(&spec).unwrap();
//! let cfg = SolverConfig { w_solver: WSolver::ClosedForm, ..Default::default() };
//! let result = fit(&problem, LossKind::Squared, &cfg, None).unwrap();
//! assert_eq!(result.weights.shape(), (25, 3));
//! ```

pub mod baselines;
pub mod config;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod problem;
pub mod report;
pub mod solver;
pub mod subproblems;
pub mod synth;
pub mod theory;

pub use baselines::{fit_independent, fit_ssml, BaselineKind, IndependentKind, SsmlFit, DEFAULT_C_STRICT};
pub use config::{RegKind, RhoPolicy, SolverConfig, StepSize, WSolver};
pub use error::{Error, Result};
pub use losses::{lipschitz_h, LossKind};
pub use problem::{
    sign_pattern, validate_problem, MultiTaskProblem, ProblemKind, SignPattern, TaskData,
    WeightMatrix,
};
pub use report::{BoundValues, RunReport};
pub use solver::{fit, fit_observed, FitResult, IterationView, SolverState, TraceRow};
pub use synth::{generate, preset, GroundTruth, SynthSpec};
