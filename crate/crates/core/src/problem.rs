//! Shared domain types: tasks, problems, weight matrices and sign patterns.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether targets are real-valued or binary labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Regression,
    Classification,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Regression => "regression",
            ProblemKind::Classification => "classification",
        }
    }
}

/// One task: an `m_t x d` design matrix and its `m_t` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl TaskData {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Self {
        Self { x, y }
    }

    /// Builds a task from row slices. Panics if rows have different lengths.
    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Self {
        let m = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == d), "ragged rows");
        let x = DMatrix::from_fn(m, d, |i, j| rows[i][j]);
        Self {
            x,
            y: DVector::from_column_slice(y),
        }
    }

    pub fn m(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> TaskData {
        TaskData {
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i])),
        }
    }
}

/// `T` ordered tasks over a shared `d`-dimensional feature space.
///
/// Task order matters: the sign coupling links task `t` with task `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskProblem {
    pub tasks: Vec<TaskData>,
    pub kind: ProblemKind,
}

impl MultiTaskProblem {
    /// Validating constructor.
    pub fn new(tasks: Vec<TaskData>, kind: ProblemKind) -> Result<Self> {
        let p = Self { tasks, kind };
        validate_problem(&p)?;
        Ok(p)
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn num_features(&self) -> usize {
        self.tasks.first().map_or(0, TaskData::d)
    }

    pub fn total_samples(&self) -> usize {
        self.tasks.iter().map(TaskData::m).sum()
    }
}

/// Checks every structural invariant of a [`MultiTaskProblem`].
pub fn validate_problem(p: &MultiTaskProblem) -> Result<()> {
    let first = p
        .tasks
        .first()
        .ok_or_else(|| Error::InvalidProblem("problem has no tasks".into()))?;
    let d = first.d();
    if d == 0 {
        return Err(Error::InvalidProblem("feature count must be at least 1".into()));
    }
    for (t, task) in p.tasks.iter().enumerate() {
        if task.d() != d {
            return Err(Error::DimensionMismatch {
                task: t,
                expected: d,
                found: task.d(),
            });
        }
        if task.m() == 0 {
            return Err(Error::InvalidProblem(format!("task {t} has no samples")));
        }
        if task.y.len() != task.m() {
            return Err(Error::InvalidProblem(format!(
                "task {t} has {} rows but {} targets",
                task.m(),
                task.y.len()
            )));
        }
        if task.x.iter().chain(task.y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData { task: t });
        }
        if p.kind == ProblemKind::Classification {
            if let Some((row, &value)) = task
                .y
                .iter()
                .enumerate()
                .find(|(_, &v)| v != 0.0 && v != 1.0)
            {
                return Err(Error::BadLabels { task: t, row, value });
            }
        }
    }
    Ok(())
}

/// A dense `d x T` matrix whose column `t` holds the parameters of task `t`.
///
/// Used for the primal weights, their auxiliary copy and the dual variables alike.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(pub DMatrix<f64>);

impl WeightMatrix {
    pub fn zeros(d: usize, t: usize) -> Self {
        Self(DMatrix::zeros(d, t))
    }

    pub fn from_columns(columns: &[DVector<f64>]) -> Self {
        Self(DMatrix::from_columns(columns))
    }

    pub fn num_features(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_tasks(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn column(&self, t: usize) -> DVector<f64> {
        self.0.column(t).into_owned()
    }

    pub fn set_column(&mut self, t: usize, v: &DVector<f64>) {
        self.0.set_column(t, v);
    }

    pub fn get(&self, j: usize, t: usize) -> f64 {
        self.0[(j, t)]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `sum_t ||w_t||_1`, the L1 budget the model attains.
    pub fn l1_mass(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Three-valued signs `{-1, 0, +1}` of a weight matrix, same shape as the source.
pub type SignPattern = DMatrix<i8>;

/// Sign of `v` with everything in `[-zero_tol, zero_tol]` mapped to 0.
pub fn sign_of(v: f64, zero_tol: f64) -> i8 {
    if v.abs() <= zero_tol {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

/// Entrywise signs of `w`; entries with magnitude at most `zero_tol` become 0.
pub fn sign_pattern(w: &WeightMatrix, zero_tol: f64) -> SignPattern {
    debug_assert!(zero_tol >= 0.0);
    w.0.map(|v| sign_of(v, zero_tol))
}
