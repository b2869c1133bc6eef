use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{lipschitz_h, LossKind};
use crate::problem::MultiTaskProblem;

/// Penalty applied to each task's weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegKind {
    /// `lambda * ||w||_1`, handled by proximal gradient steps.
    L1,
    /// `lambda * ||w||_2^2`.
    L2,
}

impl RegKind {
    pub fn penalty(self, w: impl IntoIterator<Item = f64>) -> f64 {
        match self {
            RegKind::L1 => w.into_iter().map(f64::abs).sum(),
            RegKind::L2 => w.into_iter().map(|v| v * v).sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    Auto,
    Fixed(f64),
}

/// How the ADMM penalty is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoPolicy {
    /// Use [`SolverConfig::rho`] as given.
    Fixed,
    /// `rho = margin * 2H`, with `H` the loss-gradient Lipschitz constant of the data.
    /// Any `margin > 1` satisfies the global convergence condition `rho > 2H`.
    FromLipschitz { margin: f64 },
}

/// How each per-task weight subproblem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WSolver {
    /// (Proximal) gradient descent, warm-started from the previous iterate.
    GradientDescent,
    /// Direct normal-equation solve; only valid for squared loss with L2 penalty.
    ClosedForm,
}

/// Hyperparameters of the sign-regularized ADMM solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    /// Weight of the sign-violation slack.
    pub c: f64,
    pub rho: f64,
    pub reg_kind: RegKind,
    pub primal_tol: f64,
    pub dual_tol: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    /// Inner loop stops once the step-to-step change drops to this value.
    pub inner_tol: f64,
    pub inner_step_size: StepSize,
    pub rho_policy: RhoPolicy,
    pub w_solver: WSolver,
    /// Solve the per-task weight subproblems on the rayon pool.
    pub parallel_tasks: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            c: 0.1,
            rho: 1.0,
            reg_kind: RegKind::L2,
            primal_tol: 1e-4,
            dual_tol: 1e-4,
            max_outer_iters: 2000,
            max_inner_iters: 1000,
            inner_tol: 1e-8,
            inner_step_size: StepSize::Auto,
            rho_policy: RhoPolicy::Fixed,
            w_solver: WSolver::GradientDescent,
            parallel_tasks: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return bad(format!("c must be finite and >= 0, got {}", self.c));
        }
        if self.rho_policy == RhoPolicy::Fixed && !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be finite and > 0, got {}", self.rho));
        }
        if let RhoPolicy::FromLipschitz { margin } = self.rho_policy {
            if !(margin > 1.0 && margin.is_finite()) {
                return bad(format!("rho margin must exceed 1, got {margin}"));
            }
        }
        if !(self.primal_tol > 0.0 && self.dual_tol > 0.0) {
            return bad("residual tolerances must be positive".into());
        }
        if self.inner_tol < 0.0 {
            return bad("inner tolerance must be nonnegative".into());
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 {
            return bad("iteration limits must be positive".into());
        }
        if let StepSize::Fixed(s) = self.inner_step_size {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("inner step size must be positive, got {s}"));
            }
        }
        Ok(())
    }

    /// The penalty actually used for `problem` under the configured policy.
    pub fn effective_rho(&self, problem: &MultiTaskProblem) -> f64 {
        match self.rho_policy {
            RhoPolicy::Fixed => self.rho,
            RhoPolicy::FromLipschitz { margin } => margin * 2.0 * lipschitz_h(problem),
        }
    }

    /// Copy with the policy resolved to a fixed `rho`.
    pub fn resolved(&self, problem: &MultiTaskProblem) -> SolverConfig {
        SolverConfig {
            rho: self.effective_rho(problem),
            rho_policy: RhoPolicy::Fixed,
            ..self.clone()
        }
    }

    pub fn check_solver_compat(&self, loss: LossKind) -> Result<()> {
        if self.w_solver == WSolver::ClosedForm
            && !(loss == LossKind::Squared && self.reg_kind == RegKind::L2)
        {
            return Err(Error::InvalidConfig(
                "closed-form weight update requires squared loss with L2 penalty".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert!(SolverConfig::default().validate().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let cfg = SolverConfig {
            rho: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig {
            rho_policy: RhoPolicy::FromLipschitz { margin: 1.0 },
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig {
            primal_tol: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn penalty_kinds() {
        assert_eq!(RegKind::L1.penalty([1.0, -2.0]), 3.0);
        assert_eq!(RegKind::L2.penalty([1.0, -2.0]), 5.0);
    }
}
