//! Cross-validated selection of `(lambda, c)`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use srml_core::metrics::evaluate_model;
use srml_core::{LossKind, MultiTaskProblem, ProblemKind, SolverConfig, WeightMatrix};

use crate::error::{HarnessError, Result};
use crate::split::{cv_folds, subset, Fold};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub lambda: f64,
    pub c: f64,
    /// Mean validation metric over folds; `None` if any fold failed.
    pub score: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub metric: String,
    pub best_lambda: f64,
    pub best_c: f64,
    pub best_score: f64,
    pub table: Vec<CvCell>,
}

/// `mse` for regression (lower is better), `acc` for classification (higher is better).
pub fn selection_metric(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Regression => "mse",
        ProblemKind::Classification => "acc",
    }
}

fn score_on(p: &MultiTaskProblem, w: &WeightMatrix, metric: &str) -> Result<f64> {
    evaluate_model(p, w)
        .get(metric)
        .copied()
        .ok_or_else(|| HarnessError::InvalidConfig(format!("metric {metric} undefined on this split")))
}

/// Orders cells from best to worst: failed cells last, then by score, then
/// toward larger `lambda` and larger `c`.
fn rank(kind: ProblemKind, a: &CvCell, b: &CvCell) -> Ordering {
    let by_score = match (a.score, b.score) {
        (Some(x), Some(y)) => match kind {
            ProblemKind::Regression => x.total_cmp(&y),
            ProblemKind::Classification => y.total_cmp(&x),
        },
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    by_score
        .then(b.lambda.total_cmp(&a.lambda))
        .then(b.c.total_cmp(&a.c))
}

/// Scores every `(lambda, c)` pair with `fit` on `k` per-task-stratified folds.
///
/// Cells run in parallel; the table keeps grid order (lambda-major).
pub fn cv_search_with<F>(
    train: &MultiTaskProblem,
    grid_lambda: &[f64],
    grid_c: &[f64],
    k: usize,
    seed: u64,
    fit: F,
) -> Result<GridSearchResult>
where
    F: Fn(&MultiTaskProblem, f64, f64) -> Result<WeightMatrix> + Sync,
{
    if grid_lambda.is_empty() || grid_c.is_empty() {
        return Err(HarnessError::InvalidConfig("hyperparameter grid must be nonempty".into()));
    }
    let metric = selection_metric(train.kind);
    let folds = cv_folds(train, k, seed)?;
    let split_folds: Vec<(MultiTaskProblem, MultiTaskProblem)> = folds
        .iter()
        .map(|Fold { train: tr, validation: va }| (subset(train, tr), subset(train, va)))
        .collect();

    let cells: Vec<(f64, f64)> = grid_lambda
        .iter()
        .flat_map(|&l| grid_c.iter().map(move |&c| (l, c)))
        .collect();
    let table: Vec<CvCell> = cells
        .par_iter()
        .map(|&(lambda, c)| {
            let scores: Result<Vec<f64>> = split_folds
                .iter()
                .map(|(tr, va)| score_on(va, &fit(tr, lambda, c)?, metric))
                .collect();
            match scores {
                Ok(s) => CvCell {
                    lambda,
                    c,
                    score: Some(s.iter().sum::<f64>() / s.len() as f64),
                    error: None,
                },
                Err(e) => CvCell {
                    lambda,
                    c,
                    score: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let best = table
        .iter()
        .min_by(|a, b| rank(train.kind, a, b))
        .expect("grid is nonempty");
    let best_score = best.score.ok_or_else(|| {
        HarnessError::InvalidConfig(format!(
            "every grid cell failed; first error: {}",
            best.error.as_deref().unwrap_or("unknown")
        ))
    })?;
    Ok(GridSearchResult {
        metric: metric.to_string(),
        best_lambda: best.lambda,
        best_c: best.c,
        best_score,
        table,
    })
}

/// Grid search for the sign-regularized model.
pub fn cv_grid_search(
    train: &MultiTaskProblem,
    loss: LossKind,
    solver: &SolverConfig,
    grid_lambda: &[f64],
    grid_c: &[f64],
    k: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    cv_search_with(train, grid_lambda, grid_c, k, seed, |p, lambda, c| {
        let cfg = SolverConfig {
            lambda,
            c,
            ..solver.clone()
        };
        Ok(srml_core::fit(p, loss, &cfg, None)?.weights)
    })
}
