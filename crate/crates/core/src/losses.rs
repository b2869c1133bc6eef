//! Per-task losses, their gradients, and the gradient Lipschitz constants that
//! govern the `rho > 2H` convergence condition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::problem::{MultiTaskProblem, ProblemKind, TaskData};

const SIGMOID_CLAMP: f64 = 30.0;
const LOG_FLOOR: f64 = 1e-12;

const POWER_MAX_ITERS: usize = 1000;
const POWER_TOL: f64 = 1e-9;
const DENSE_FALLBACK_MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Unnormalized `||y - Xw||^2`.
    Squared,
    /// Mean negative log-likelihood of a sigmoid model.
    Logistic,
}

impl LossKind {
    pub fn for_problem(kind: ProblemKind) -> Self {
        match kind {
            ProblemKind::Regression => LossKind::Squared,
            ProblemKind::Classification => LossKind::Logistic,
        }
    }

    pub fn problem_kind(self) -> ProblemKind {
        match self {
            LossKind::Squared => ProblemKind::Regression,
            LossKind::Logistic => ProblemKind::Classification,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Squared => "squared",
            LossKind::Logistic => "logistic",
        }
    }

    pub fn value(self, task: &TaskData, w: &DVector<f64>) -> f64 {
        match self {
            LossKind::Squared => squared_loss(task, w),
            LossKind::Logistic => logistic_loss(task, w),
        }
    }

    pub fn gradient(self, task: &TaskData, w: &DVector<f64>) -> DVector<f64> {
        match self {
            LossKind::Squared => squared_loss_grad(task, w),
            LossKind::Logistic => logistic_loss_grad(task, w),
        }
    }

    /// Loss value and gradient from a single pass over `Xw`.
    pub fn value_and_gradient(self, task: &TaskData, w: &DVector<f64>) -> (f64, DVector<f64>) {
        let z = &task.x * w;
        match self {
            LossKind::Squared => {
                let residual = z - &task.y;
                (residual.norm_squared(), task.x.tr_mul(&residual) * 2.0)
            }
            LossKind::Logistic => {
                let m = task.m() as f64;
                let mut total = 0.0;
                let coef = DVector::from_iterator(
                    z.len(),
                    z.iter().zip(task.y.iter()).map(|(&zi, &yi)| {
                        let p = sigmoid(zi);
                        total += -yi * p.max(LOG_FLOOR).ln()
                            - (1.0 - yi) * sigmoid(-zi).max(LOG_FLOOR).ln();
                        p - yi
                    }),
                );
                (total / m, task.x.tr_mul(&coef) / m)
            }
        }
    }

    /// Lipschitz constant of this loss's gradient on one task.
    pub fn task_lipschitz(self, task: &TaskData) -> f64 {
        match self {
            LossKind::Squared => 2.0 * gram_spectral_norm(&task.x),
            LossKind::Logistic => mean_squared_row_norm(&task.x),
        }
    }
}

/// Logistic function with its argument clamped to `[-30, 30]`.
pub fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-z).exp())
}

pub fn squared_loss(task: &TaskData, w: &DVector<f64>) -> f64 {
    (&task.y - &task.x * w).norm_squared()
}

/// `2 X^T (Xw - y)`.
pub fn squared_loss_grad(task: &TaskData, w: &DVector<f64>) -> DVector<f64> {
    let residual = &task.x * w - &task.y;
    task.x.tr_mul(&residual) * 2.0
}

pub fn logistic_loss(task: &TaskData, w: &DVector<f64>) -> f64 {
    let z = &task.x * w;
    let total: f64 = z
        .iter()
        .zip(task.y.iter())
        .map(|(&zi, &yi)| {
            let p = sigmoid(zi).max(LOG_FLOOR);
            let q = sigmoid(-zi).max(LOG_FLOOR);
            -yi * p.ln() - (1.0 - yi) * q.ln()
        })
        .sum();
    total / task.m() as f64
}

/// `(1/m) sum_i (sigmoid(x_i . w) - y_i) x_i`.
pub fn logistic_loss_grad(task: &TaskData, w: &DVector<f64>) -> DVector<f64> {
    let z = &task.x * w;
    let coef = DVector::from_iterator(
        z.len(),
        z.iter().zip(task.y.iter()).map(|(&zi, &yi)| sigmoid(zi) - yi),
    );
    task.x.tr_mul(&coef) / task.m() as f64
}

/// `(1/m) sum_i ||x_i||^2`.
pub fn mean_squared_row_norm(x: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    x.norm_squared() / x.nrows() as f64
}

/// Largest eigenvalue of `X^T X` (the spectral norm of the Gram matrix).
///
/// Power iteration on `v -> X^T X v` without forming the Gram matrix; if it has
/// not settled after the iteration budget and `d` is small, the Gram matrix is
/// decomposed densely instead.
pub fn gram_spectral_norm(x: &DMatrix<f64>) -> f64 {
    let d = x.ncols();
    if d == 0 || x.nrows() == 0 {
        return 0.0;
    }
    // Deterministic start vector with no special alignment to coordinate axes.
    let mut v = DVector::from_fn(d, |i, _| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_75).fract());
    v.normalize_mut();
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let xv = x * &v;
        let next = xv.norm_squared();
        let mut w = x.tr_mul(&xv);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        w /= norm;
        let settled = (next - estimate).abs() <= POWER_TOL * next;
        estimate = next;
        v = w;
        if settled {
            return estimate.max((x * &v).norm_squared());
        }
    }
    if d <= DENSE_FALLBACK_MAX_DIM {
        let gram = x.tr_mul(x);
        return SymmetricEigen::new(gram).eigenvalues.max();
    }
    estimate
}

/// `H` for the problem: `max_t 2 ||X_t^T X_t||` for regression and
/// `max_t (1/m_t) sum_i ||x_{t,i}||^2` for classification.
pub fn lipschitz_h(p: &MultiTaskProblem) -> f64 {
    let loss = LossKind::for_problem(p.kind);
    p.tasks
        .iter()
        .map(|t| loss.task_lipschitz(t))
        .fold(0.0, f64::max)
}
