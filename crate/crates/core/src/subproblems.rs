//! The two block updates of each ADMM iteration.
//!
//! The weight block of task `t` minimizes
//! `L_t(w) + lambda * Omega(w) + (rho/2) ||w - u_t + y_t/rho||^2`
//! by gradient descent (L2) or proximal gradient descent (L1), or by a direct
//! solve for squared loss with L2 penalty.
//!
//! The mirror block separates into `d` scalar problems
//! `f(u) = c * sum_n max(0, -u * a_n) - y * u + (rho/2) (w - u)^2`
//! where `a_n` are the (fixed) values of the neighbouring tasks. Every max term
//! has its kink at `u = 0`, so `f` is a quadratic on each half-line and the
//! global minimizer is the better of the two clamped half-line vertices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::config::{RegKind, SolverConfig, StepSize, WSolver};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::problem::{TaskData, WeightMatrix};

const DIVERGENCE_STREAK: usize = 10;

/// One scalar mirror-variable problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UScalarInstance {
    pub w_target: f64,
    pub y_dual: f64,
    pub rho: f64,
    pub c: f64,
    /// Already-updated value of the previous task, if there is one.
    pub prev: Option<f64>,
    /// Not-yet-updated value of the next task, if there is one.
    pub next: Option<f64>,
}

impl UScalarInstance {
    pub fn neighbors(&self) -> impl Iterator<Item = f64> {
        self.prev.into_iter().chain(self.next)
    }

    /// `f(u)` for this instance.
    pub fn objective(&self, u: f64) -> f64 {
        let slack: f64 = self.neighbors().map(|a| (-u * a).max(0.0)).sum();
        let diff = self.w_target - u;
        self.c * slack - self.y_dual * u + 0.5 * self.rho * diff * diff
    }
}

/// Global minimizer of the scalar mirror problem.
///
/// On `u >= 0` only negative neighbours are penalized, with slope `c * sum |a_n|`;
/// on `u <= 0` only positive ones are. Each piece's vertex is clamped into its
/// half-line and the lower objective wins; equal objectives go to the smaller `|u|`.
pub fn solve_u_scalar(inst: &UScalarInstance) -> f64 {
    let (neg_mass, pos_mass) = inst.neighbors().fold((0.0, 0.0), |(neg, pos), a| {
        if a < 0.0 {
            (neg - a, pos)
        } else {
            (neg, pos + a)
        }
    });
    let center = inst.w_target + inst.y_dual / inst.rho;
    let upper = (center - inst.c * neg_mass / inst.rho).max(0.0);
    let lower = (center + inst.c * pos_mass / inst.rho).min(0.0);

    let f_upper = inst.objective(upper);
    let f_lower = inst.objective(lower);
    if f_upper < f_lower {
        upper
    } else if f_lower < f_upper {
        lower
    } else if upper.abs() <= lower.abs() {
        upper
    } else {
        lower
    }
}

/// Updates the mirror column of task `t`.
///
/// `u` must already hold this sweep's values for tasks before `t` and the
/// previous sweep's values for tasks after it.
pub fn solve_u_block(
    t: usize,
    w: &WeightMatrix,
    u: &WeightMatrix,
    y: &WeightMatrix,
    rho: f64,
    c: f64,
) -> DVector<f64> {
    let num_tasks = u.num_tasks();
    DVector::from_fn(u.num_features(), |j, _| {
        let inst = UScalarInstance {
            w_target: w.get(j, t),
            y_dual: y.get(j, t),
            rho,
            c,
            prev: (t > 0).then(|| u.get(j, t - 1)),
            next: (t + 1 < num_tasks).then(|| u.get(j, t + 1)),
        };
        solve_u_scalar(&inst)
    })
}

/// `1 / (H_t + 2 lambda + rho)` with `H_t` the task's gradient Lipschitz constant.
pub fn auto_step_size(task: &TaskData, loss: LossKind, lambda: f64, rho: f64) -> f64 {
    1.0 / (loss.task_lipschitz(task) + 2.0 * lambda + rho)
}

pub fn soft_threshold(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

/// The weight subproblem of one task, prepared once per fit. Step sizes and
/// factorizations are reused across outer iterations.
#[derive(Debug, Clone)]
pub struct WStep {
    loss: LossKind,
    reg_kind: RegKind,
    lambda: f64,
    rho: f64,
    step: f64,
    max_iters: usize,
    tol: f64,
    direct: Option<DirectSolve>,
}

#[derive(Debug, Clone)]
struct DirectSolve {
    factor: Cholesky<f64, Dyn>,
    xty2: DVector<f64>,
}

impl WStep {
    /// `cfg.rho` is used as-is; resolve the rho policy before calling.
    pub fn new(task: &TaskData, loss: LossKind, cfg: &SolverConfig) -> Result<Self> {
        cfg.check_solver_compat(loss)?;
        let direct = match cfg.w_solver {
            WSolver::ClosedForm => {
                let d = task.d();
                let mut a = task.x.tr_mul(&task.x) * 2.0;
                a += DMatrix::identity(d, d) * (2.0 * cfg.lambda + cfg.rho);
                let factor = Cholesky::new(a).ok_or_else(|| {
                    Error::InvalidConfig("normal-equation matrix is not positive definite".into())
                })?;
                Some(DirectSolve {
                    factor,
                    xty2: task.x.tr_mul(&task.y) * 2.0,
                })
            }
            WSolver::GradientDescent => None,
        };
        let step = match (direct.is_some(), cfg.inner_step_size) {
            (true, _) => 0.0,
            (false, StepSize::Fixed(s)) => s,
            (false, StepSize::Auto) => auto_step_size(task, loss, cfg.lambda, cfg.rho),
        };
        Ok(Self {
            loss,
            reg_kind: cfg.reg_kind,
            lambda: cfg.lambda,
            rho: cfg.rho,
            step,
            max_iters: cfg.max_inner_iters,
            tol: cfg.inner_tol,
            direct,
        })
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    /// Subproblem objective at `w`.
    pub fn objective(
        &self,
        task: &TaskData,
        w: &DVector<f64>,
        u_t: &DVector<f64>,
        y_t: &DVector<f64>,
    ) -> f64 {
        let prox = w - u_t + y_t / self.rho;
        self.loss.value(task, w)
            + self.lambda * self.reg_kind.penalty(w.iter().copied())
            + 0.5 * self.rho * prox.norm_squared()
    }

    /// Gradient of the differentiable part of the objective (everything except
    /// an L1 penalty).
    pub fn smooth_gradient(
        &self,
        task: &TaskData,
        w: &DVector<f64>,
        u_t: &DVector<f64>,
        y_t: &DVector<f64>,
    ) -> DVector<f64> {
        self.value_and_smooth_gradient(task, w, u_t, y_t).1
    }

    fn value_and_smooth_gradient(
        &self,
        task: &TaskData,
        w: &DVector<f64>,
        u_t: &DVector<f64>,
        y_t: &DVector<f64>,
    ) -> (f64, DVector<f64>) {
        let (loss, mut grad) = self.loss.value_and_gradient(task, w);
        let prox = w - u_t + y_t / self.rho;
        grad.axpy(self.rho, &prox, 1.0);
        let mut value = loss + 0.5 * self.rho * prox.norm_squared();
        match self.reg_kind {
            RegKind::L2 => {
                grad.axpy(2.0 * self.lambda, w, 1.0);
                value += self.lambda * w.norm_squared();
            }
            RegKind::L1 => value += self.lambda * w.lp_norm(1),
        }
        (value, grad)
    }

    /// Minimizes the subproblem starting from `start`.
    pub fn solve(
        &self,
        task: &TaskData,
        u_t: &DVector<f64>,
        y_t: &DVector<f64>,
        start: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        if let Some(direct) = &self.direct {
            let rhs = &direct.xty2 + u_t * self.rho - y_t;
            return Ok(direct.factor.solve(&rhs));
        }

        let mut w = start.clone();
        let mut prev_value = f64::INFINITY;
        let mut rising = 0;
        for _ in 0..self.max_iters {
            let (value, grad) = self.value_and_smooth_gradient(task, &w, u_t, y_t);
            if value > prev_value * (1.0 + 1e-12) + 1e-300 {
                rising += 1;
                if rising >= DIVERGENCE_STREAK {
                    return Err(Error::StepDiverged {
                        task: 0,
                        steps: rising,
                    });
                }
            } else {
                rising = 0;
            }
            prev_value = value;

            let mut next = &w - grad * self.step;
            if self.reg_kind == RegKind::L1 {
                let kappa = self.lambda * self.step;
                next.apply(|v| *v = soft_threshold(*v, kappa));
            }
            let change = (&next - &w).norm();
            w = next;
            if !change.is_finite() {
                return Err(Error::StepDiverged {
                    task: 0,
                    steps: rising,
                });
            }
            if change <= self.tol {
                break;
            }
        }
        Ok(w)
    }
}

/// Solves one weight subproblem from the proximal center `u_t - y_t / rho`.
pub fn solve_w_subproblem(
    task: &TaskData,
    loss: LossKind,
    u_t: &DVector<f64>,
    y_t: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    let step = WStep::new(task, loss, cfg)?;
    let start = u_t - y_t / cfg.rho;
    step.solve(task, u_t, y_t, &start)
}
