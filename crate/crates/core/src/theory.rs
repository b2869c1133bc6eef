//! Generalization-bound calculators and the Rademacher term comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::lipschitz_h;
use crate::problem::MultiTaskProblem;

/// Inputs of the generalization bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Lipschitz constant of the loss in its first argument.
    pub lipschitz: f64,
    /// L1 budget `sum_t ||w_t||_1 <= alpha`.
    pub alpha: f64,
    /// Failure probability, in (0, 1).
    pub epsilon: f64,
    /// Samples per task.
    pub m: usize,
    pub num_tasks: usize,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidBoundInputs(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.m == 0 || self.num_tasks == 0 {
            return Err(Error::InvalidBoundInputs("m and T must be at least 1".into()));
        }
        if !(self.lipschitz > 0.0) || !(self.alpha >= 0.0) {
            return Err(Error::InvalidBoundInputs(
                "L must be positive and alpha nonnegative".into(),
            ));
        }
        Ok(())
    }

    fn sample_count(&self) -> f64 {
        (self.m * self.num_tasks) as f64
    }

    fn complexity_term(&self, x_norm: f64) -> f64 {
        2.0 * self.lipschitz * self.alpha / self.sample_count() * x_norm
    }
}

/// Which confidence term accompanies the data-dependent complexity term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundForm {
    /// Excess risk of the empirical minimizer: `2 sqrt(2 ln(2/eps) / (mT))`.
    ExcessRisk,
    /// Uniform deviation between expected and empirical risk:
    /// `sqrt(9 ln(2/eps) / (2mT))`.
    UniformDeviation,
}

/// Per-column L1 norms `sum_i |X_t[i, j]|` for every `(t, j)`, task-major.
fn column_l1_norms(p: &MultiTaskProblem) -> Vec<((usize, usize), f64)> {
    p.tasks
        .iter()
        .enumerate()
        .flat_map(|(t, task)| {
            task.x
                .column_iter()
                .enumerate()
                .map(move |(j, col)| ((t, j), col.iter().map(|v| v.abs()).sum::<f64>()))
        })
        .collect()
}

/// `max_t ||X_t||_{1,inf}`: the largest column L1 norm over all tasks.
pub fn l1_inf_norm(p: &MultiTaskProblem) -> f64 {
    column_l1_norms(p)
        .into_iter()
        .map(|(_, n)| n)
        .fold(0.0, f64::max)
}

/// Right-hand side of the excess-risk bound:
/// `2 L alpha / (mT) * x_norm + 2 sqrt(2 ln(2/eps) / (mT))`.
pub fn generalization_bound(b: &BoundInputs, x_norm: f64) -> Result<f64> {
    bound_with_form(b, x_norm, BoundForm::ExcessRisk)
}

pub fn bound_with_form(b: &BoundInputs, x_norm: f64, form: BoundForm) -> Result<f64> {
    b.validate()?;
    let n = b.sample_count();
    let log_term = (2.0 / b.epsilon).ln();
    let confidence = match form {
        BoundForm::ExcessRisk => 2.0 * (2.0 * log_term / n).sqrt(),
        BoundForm::UniformDeviation => (9.0 * log_term / (2.0 * n)).sqrt(),
    };
    Ok(b.complexity_term(x_norm) + confidence)
}

/// The two upper bounds on the expected Rademacher supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherTerms {
    /// `alpha * max column L1 norm`.
    pub tight: f64,
    /// `alpha * sqrt(sum_t sum_i ||x_ti||^2)`.
    pub loose: f64,
}

pub fn rademacher_bound_terms(p: &MultiTaskProblem, alpha: f64) -> RademacherTerms {
    let frob: f64 = p.tasks.iter().map(|t| t.x.norm_squared()).sum();
    RademacherTerms {
        tight: alpha * l1_inf_norm(p),
        loose: alpha * frob.sqrt(),
    }
}

/// Evaluates the condition under which the column-L1 bound is strictly tighter:
/// with `(t*, j*)` the unique column of largest L1 norm,
/// `sum_{(t,j) != (t*,j*)} sum_i x_tij^2 > 2 sum_{k<l} |x_{t*kj*} x_{t*lj*}|`.
pub fn tight_bound_condition(p: &MultiTaskProblem) -> Result<bool> {
    let norms = column_l1_norms(p);
    let best = norms.iter().map(|(_, n)| *n).fold(f64::NEG_INFINITY, f64::max);
    let tie_tol = 1e-12 * best.abs();
    let mut winners = norms.iter().filter(|(_, n)| best - n <= tie_tol);
    let (t_star, j_star) = winners.next().ok_or(Error::Empty)?.0;
    if winners.next().is_some() {
        return Err(Error::NonUniqueMaximizer);
    }

    let lhs: f64 = p
        .tasks
        .iter()
        .enumerate()
        .flat_map(|(t, task)| {
            task.x
                .column_iter()
                .enumerate()
                .filter(move |(j, _)| (t, *j) != (t_star, j_star))
                .map(|(_, col)| col.norm_squared())
        })
        .sum();

    let col = p.tasks[t_star].x.column(j_star);
    let mut cross = 0.0;
    for k in 0..col.len() {
        for l in (k + 1)..col.len() {
            cross += (col[k] * col[l]).abs();
        }
    }
    Ok(lhs > 2.0 * cross)
}

/// Smallest `rho` that meets the convergence condition `rho > 2H`; any larger value works.
pub fn rho_threshold(p: &MultiTaskProblem) -> f64 {
    2.0 * lipschitz_h(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ProblemKind, TaskData};

    fn single(rows: &[Vec<f64>]) -> MultiTaskProblem {
        let y = vec![0.0; rows.len()];
        MultiTaskProblem::new(vec![TaskData::from_rows(rows, &y)], ProblemKind::Regression).unwrap()
    }

    fn inputs(alpha: f64, m: usize, t: usize) -> BoundInputs {
        BoundInputs {
            lipschitz: 1.0,
            alpha,
            epsilon: 0.05,
            m,
            num_tasks: t,
        }
    }

    #[test]
    fn column_norm_cases() {
        assert_eq!(l1_inf_norm(&single(&[vec![1.0, -2.0], vec![3.0, 0.0]])), 4.0);
        assert_eq!(l1_inf_norm(&single(&[vec![0.0, 0.0]])), 0.0);
    }

    #[test]
    fn bound_without_alpha_is_confidence_term() {
        let b = inputs(0.0, 100, 20);
        let expected = 2.0 * (2.0 * (2.0f64 / 0.05).ln() / 2000.0).sqrt();
        assert!((generalization_bound(&b, 4.0).unwrap() - expected).abs() < 1e-15);

        let quad = inputs(0.0, 400, 20);
        let ratio = generalization_bound(&b, 4.0).unwrap() / generalization_bound(&quad, 4.0).unwrap();
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bound_rejects_bad_epsilon() {
        let mut b = inputs(1.0, 10, 2);
        b.epsilon = 1.0;
        assert!(generalization_bound(&b, 1.0).is_err());
    }

    #[test]
    fn uniform_deviation_form() {
        let b = inputs(0.0, 10, 3);
        let v = bound_with_form(&b, 0.0, BoundForm::UniformDeviation).unwrap();
        assert!((v - (9.0 * (40f64).ln() / 60.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rademacher_terms_small_cases() {
        let p = single(&[vec![1.0]]);
        assert_eq!(rademacher_bound_terms(&p, 0.0), RademacherTerms { tight: 0.0, loose: 0.0 });
        let r = rademacher_bound_terms(&p, 2.5);
        assert_eq!((r.tight, r.loose), (2.5, 2.5));
    }

    #[test]
    fn tight_bound_condition_cases() {
        assert_eq!(tight_bound_condition(&single(&[vec![1.0, 0.0], vec![0.0, 2.0]])), Ok(true));
        assert_eq!(
            tight_bound_condition(&single(&[vec![1.0, 1.0]])),
            Err(Error::NonUniqueMaximizer)
        );
        assert_eq!(tight_bound_condition(&single(&[vec![1.0], vec![1.0]])), Ok(false));
    }
}
