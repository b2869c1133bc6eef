//! Comparison models: the strict-sign model and independent per-task fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{RegKind, SolverConfig};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::problem::{validate_problem, MultiTaskProblem, TaskData, WeightMatrix};
use crate::solver::{fit, sign_violation_mass, FitResult};
use crate::subproblems::soft_threshold;

/// Slack weight standing in for the hard sign constraint.
pub const DEFAULT_C_STRICT: f64 = 1e6;

const INDEPENDENT_MAX_ITERS: usize = 200_000;
const INDEPENDENT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Ssml,
    IndependentRidge,
    IndependentLasso,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsmlFit {
    pub fit: FitResult,
    /// `sum_t sum_j max(0, -u_{t,j} u_{t+1,j})` of the final mirror variables.
    pub violation_mass: f64,
}

/// Strict-sign baseline: the slacked model with `c` overridden to `c_strict`.
pub fn fit_ssml(
    p: &MultiTaskProblem,
    loss: LossKind,
    cfg: &SolverConfig,
    c_strict: f64,
) -> Result<SsmlFit> {
    let strict = SolverConfig {
        c: c_strict,
        ..cfg.clone()
    };
    let fit = fit(p, loss, &strict, None)?;
    let violation_mass = sign_violation_mass(&fit.mirror);
    Ok(SsmlFit {
        fit,
        violation_mass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndependentKind {
    Ridge,
    Lasso,
}

/// Fits every task on its own with `loss + lambda * penalty`.
///
/// Squared-loss ridge uses the normal equations; everything else runs
/// (proximal) gradient descent until the step change is at most 1e-8.
pub fn fit_independent(
    p: &MultiTaskProblem,
    loss: LossKind,
    kind: IndependentKind,
    lambda: f64,
) -> Result<WeightMatrix> {
    validate_problem(p)?;
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
    }
    let columns = p
        .tasks
        .iter()
        .map(|task| match (loss, kind) {
            (LossKind::Squared, IndependentKind::Ridge) => Ok(ridge_normal_equations(task, lambda)),
            (_, IndependentKind::Ridge) => Ok(penalized_descent(task, loss, RegKind::L2, lambda)),
            (_, IndependentKind::Lasso) => Ok(penalized_descent(task, loss, RegKind::L1, lambda)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightMatrix::from_columns(&columns))
}

/// Solves `(X^T X + lambda I) w = X^T y`, falling back to a least-squares
/// solve when the system is singular.
fn ridge_normal_equations(task: &TaskData, lambda: f64) -> DVector<f64> {
    let d = task.d();
    let mut a = task.x.tr_mul(&task.x);
    a += DMatrix::identity(d, d) * lambda;
    let b = task.x.tr_mul(&task.y);
    if let Some(chol) = a.clone().cholesky() {
        return chol.solve(&b);
    }
    a.svd(true, true)
        .solve(&b, 1e-12)
        .expect("SVD computed with both factors")
}

fn penalized_descent(task: &TaskData, loss: LossKind, reg: RegKind, lambda: f64) -> DVector<f64> {
    let smooth_lambda = if reg == RegKind::L2 { lambda } else { 0.0 };
    let step = 1.0 / (loss.task_lipschitz(task) + 2.0 * smooth_lambda).max(f64::MIN_POSITIVE);
    let mut w = DVector::zeros(task.d());
    for _ in 0..INDEPENDENT_MAX_ITERS {
        let mut grad = loss.gradient(task, &w);
        if reg == RegKind::L2 {
            grad.axpy(2.0 * lambda, &w, 1.0);
        }
        let mut next = &w - grad * step;
        if reg == RegKind::L1 {
            next.apply(|v| *v = soft_threshold(*v, lambda * step));
        }
        let change = (&next - &w).norm();
        w = next;
        if change <= INDEPENDENT_TOL {
            break;
        }
    }
    w
}
