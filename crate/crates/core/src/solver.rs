//! The outer ADMM loop: weight sweep, Gauss-Seidel mirror sweep, dual ascent.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::problem::{validate_problem, MultiTaskProblem, WeightMatrix};
use crate::subproblems::{solve_u_block, WStep};

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub vk: f64,
}

/// Iterate of the ADMM loop together with the previous iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub w: WeightMatrix,
    pub u: WeightMatrix,
    pub y: WeightMatrix,
    pub w_prev: WeightMatrix,
    pub u_prev: WeightMatrix,
    pub rho: f64,
    pub iter: usize,
    pub primal_residual_norm: f64,
    pub dual_residual_norm: f64,
    pub objective: f64,
    /// Running minimum of successive squared iterate changes; nonincreasing.
    pub vk_history: Vec<f64>,
    pub converged: bool,
}

impl SolverState {
    /// State with `w = u = init` (or zeros) and `y = 0`.
    pub fn new(d: usize, t: usize, rho: f64, init: Option<&WeightMatrix>) -> Self {
        let w = init.cloned().unwrap_or_else(|| WeightMatrix::zeros(d, t));
        Self {
            u: w.clone(),
            y: WeightMatrix::zeros(d, t),
            w_prev: w.clone(),
            u_prev: w.clone(),
            w,
            rho,
            iter: 0,
            primal_residual_norm: 0.0,
            dual_residual_norm: 0.0,
            objective: f64::NAN,
            vk_history: Vec::new(),
            converged: false,
        }
    }
}

/// Borrowed view of one completed iteration, handed to fit observers.
#[derive(Debug, Clone, Copy)]
pub struct IterationView<'a> {
    pub iter: usize,
    pub state: &'a SolverState,
    pub y_prev: &'a WeightMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub weights: WeightMatrix,
    pub mirror: WeightMatrix,
    pub dual: WeightMatrix,
    pub trace: Vec<TraceRow>,
    pub vk_history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Penalty actually used after resolving the rho policy.
    pub rho: f64,
}

impl FitResult {
    pub fn final_residuals(&self) -> (f64, f64) {
        self.trace
            .last()
            .map_or((f64::NAN, f64::NAN), |r| (r.primal_res, r.dual_res))
    }

    /// Turns a run that hit the iteration cap into [`Error::NotConverged`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            let (primal, dual) = self.final_residuals();
            Err(Error::NotConverged {
                iterations: self.iterations,
                primal,
                dual,
            })
        }
    }
}

/// `sum_t sum_j max(0, -u_{t,j} u_{t+1,j})`.
pub fn sign_violation_mass(u: &WeightMatrix) -> f64 {
    let m = u.as_matrix();
    (1..m.ncols())
        .map(|t| {
            m.column(t - 1)
                .iter()
                .zip(m.column(t).iter())
                .map(|(a, b)| (-a * b).max(0.0))
                .sum::<f64>()
        })
        .sum()
}

/// Split-variable objective:
/// `sum_t [L_t(w_t) + lambda Omega(w_t)] + c sum_{t<T} sum_j max(0, -u_{t,j} u_{t+1,j})`.
pub fn objective(
    p: &MultiTaskProblem,
    loss: LossKind,
    cfg: &SolverConfig,
    w: &WeightMatrix,
    u: &WeightMatrix,
) -> f64 {
    let fit: f64 = p
        .tasks
        .iter()
        .enumerate()
        .map(|(t, task)| {
            let col = w.column(t);
            loss.value(task, &col) + cfg.lambda * cfg.reg_kind.penalty(col.iter().copied())
        })
        .sum();
    fit + cfg.c * sign_violation_mass(u)
}

/// `(||w - u||_2, rho ||u - u_prev||_2)` over the stacked variables.
pub fn residuals(state: &SolverState) -> (f64, f64) {
    let primal = (state.w.as_matrix() - state.u.as_matrix()).norm();
    let dual = state.rho * (state.u.as_matrix() - state.u_prev.as_matrix()).norm();
    (primal, dual)
}

/// Appends `min(v_prev, ||w - w_prev||^2 + ||u - u_prev||^2)` to the history.
pub fn update_vk(state: &mut SolverState) -> f64 {
    let raw = (state.w.as_matrix() - state.w_prev.as_matrix()).norm_squared()
        + (state.u.as_matrix() - state.u_prev.as_matrix()).norm_squared();
    let v = state.vk_history.last().map_or(raw, |&prev| prev.min(raw));
    state.vk_history.push(v);
    v
}

/// Fits the sign-regularized model. See [`fit_observed`].
pub fn fit(
    p: &MultiTaskProblem,
    loss: LossKind,
    cfg: &SolverConfig,
    init: Option<&WeightMatrix>,
) -> Result<FitResult> {
    fit_observed(p, loss, cfg, init, |_| {})
}

/// Runs ADMM until both residuals are within tolerance or the iteration cap is hit.
///
/// Hitting the cap is not an error: the last iterate is returned with
/// `converged == false`. `observer` sees every completed iteration.
pub fn fit_observed<F>(
    p: &MultiTaskProblem,
    loss: LossKind,
    cfg: &SolverConfig,
    init: Option<&WeightMatrix>,
    mut observer: F,
) -> Result<FitResult>
where
    F: FnMut(&IterationView<'_>),
{
    validate_problem(p)?;
    cfg.validate()?;
    if loss.problem_kind() != p.kind {
        return Err(Error::LossKindMismatch {
            loss: loss.name(),
            kind: p.kind.name(),
        });
    }
    let (d, num_tasks) = (p.num_features(), p.num_tasks());
    if let Some(w0) = init {
        if w0.shape() != (d, num_tasks) {
            return Err(Error::ShapeMismatch {
                left: w0.shape(),
                right: (d, num_tasks),
            });
        }
        if !w0.is_finite() {
            return Err(Error::InvalidConfig("initial weights must be finite".into()));
        }
    }

    let cfg = cfg.resolved(p);
    let rho = cfg.rho;
    let steps = p
        .tasks
        .iter()
        .map(|task| WStep::new(task, loss, &cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut state = SolverState::new(d, num_tasks, rho, init);
    let mut trace = Vec::new();

    for k in 1..=cfg.max_outer_iters {
        state.w_prev = state.w.clone();
        state.u_prev = state.u.clone();

        let solve_task = |t: usize| -> Result<DVector<f64>> {
            steps[t]
                .solve(
                    &p.tasks[t],
                    &state.u.column(t),
                    &state.y.column(t),
                    &state.w.column(t),
                )
                .map_err(|e| match e {
                    Error::StepDiverged { steps, .. } => Error::StepDiverged { task: t, steps },
                    other => other,
                })
        };
        let new_w = if cfg.parallel_tasks {
            (0..num_tasks).into_par_iter().map(solve_task).collect::<Result<Vec<_>>>()?
        } else {
            (0..num_tasks).map(solve_task).collect::<Result<Vec<_>>>()?
        };
        state.w = WeightMatrix::from_columns(&new_w);

        // Gauss-Seidel: task t sees u_{t-1} from this sweep and u_{t+1} from the last.
        for t in 0..num_tasks {
            let col = solve_u_block(t, &state.w, &state.u, &state.y, rho, cfg.c);
            state.u.set_column(t, &col);
        }

        let y_prev = state.y.clone();
        state.y = WeightMatrix(y_prev.as_matrix() + (state.w.as_matrix() - state.u.as_matrix()) * rho);

        state.iter = k;
        let (primal, dual) = residuals(&state);
        state.primal_residual_norm = primal;
        state.dual_residual_norm = dual;
        state.objective = objective(p, loss, &cfg, &state.w, &state.u);
        let vk = update_vk(&mut state);
        trace.push(TraceRow {
            iter: k,
            objective: state.objective,
            primal_res: primal,
            dual_res: dual,
            vk,
        });
        observer(&IterationView {
            iter: k,
            state: &state,
            y_prev: &y_prev,
        });

        if !(primal.is_finite() && dual.is_finite() && state.objective.is_finite()) {
            return Err(Error::StepDiverged { task: 0, steps: k });
        }
        if primal <= cfg.primal_tol && dual <= cfg.dual_tol {
            state.converged = true;
            break;
        }
    }

    Ok(FitResult {
        iterations: state.iter,
        converged: state.converged,
        weights: state.w,
        mirror: state.u,
        dual: state.y,
        trace,
        vk_history: state.vk_history,
        rho,
    })
}
