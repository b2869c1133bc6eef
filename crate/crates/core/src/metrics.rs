//! Regression and classification metrics, plus the sign-match comparison.
//!
//! Classification scores are reported on a 0-100 scale.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::losses::sigmoid;
use crate::problem::{sign_pattern, MultiTaskProblem, ProblemKind, WeightMatrix};

const MSLE_FLOOR: f64 = -1.0 + 1e-9;

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty);
    }
    Ok(())
}

fn mean_of(pred: &[f64], truth: &[f64], f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    check_lengths(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(&p, &t)| f(p, t)).sum();
    Ok(total / pred.len() as f64)
}

pub fn mse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    mean_of(pred, truth, |p, t| (p - t) * (p - t))
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    mean_of(pred, truth, |p, t| (p - t).abs())
}

/// Mean of `(ln(1 + pred) - ln(1 + truth))^2`; predictions below -1 are clamped.
pub fn msle(pred: &[f64], truth: &[f64]) -> Result<f64> {
    mean_of(pred, truth, |p, t| {
        let diff = p.max(MSLE_FLOOR).ln_1p() - t.ln_1p();
        diff * diff
    })
}

fn truth_range(truth: &[f64]) -> Result<f64> {
    let (lo, hi) = truth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi > lo {
        Ok(hi - lo)
    } else {
        Err(Error::DegenerateRange)
    }
}

/// MAE divided by the range of `truth`.
pub fn nmae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    let m = mae(pred, truth)?;
    Ok(m / truth_range(truth)?)
}

/// MSE divided by the range of `truth`.
pub fn nmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    let m = mse(pred, truth)?;
    Ok(m / truth_range(truth)?)
}

/// Percentage of matching labels.
pub fn accuracy(pred_labels: &[f64], truth_labels: &[f64]) -> Result<f64> {
    Ok(100.0 * mean_of(pred_labels, truth_labels, |p, t| f64::from(u8::from(p == t)))?)
}

fn class_counts(labels: &[f64]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l == 1.0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Rank-based ROC AUC (Mann-Whitney U), ties counted as one half.
pub fn auc(scores: &[f64], truth_labels: &[f64]) -> Result<f64> {
    check_lengths(scores, truth_labels)?;
    let (pos, neg) = class_counts(truth_labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // average ranks over tied groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += order[i..=j]
            .iter()
            .filter(|&&k| truth_labels[k] == 1.0)
            .count() as f64
            * avg_rank;
        i = j + 1;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(100.0 * u / (pos * neg) as f64)
}

/// Average precision of the ranking by descending score (precision at each hit,
/// averaged over positives). Tied scores keep their input order.
pub fn average_precision(scores: &[f64], truth_labels: &[f64]) -> Result<f64> {
    check_lengths(scores, truth_labels)?;
    let (pos, _) = class_counts(truth_labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        if truth_labels[k] == 1.0 {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(100.0 * total / pos as f64)
}

/// Unweighted mean of a per-task metric.
pub fn task_mean<I>(per_task: I) -> Result<f64>
where
    I: IntoIterator<Item = Result<f64>>,
{
    let values = per_task.into_iter().collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Empty);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Per-(feature, task) comparison of learned against true signs.
///
/// 0 where the three-valued signs agree; otherwise the learned sign, so
/// `+1` marks a learned positive where the truth is not positive, `-1` a learned
/// negative where the truth is not negative. A learned zero against a nonzero
/// truth is stored as the negated true sign.
#[derive(Debug, Clone, PartialEq)]
pub struct SignMatch {
    pub values: DMatrix<i8>,
    pub truth: DMatrix<i8>,
    pub learned: DMatrix<i8>,
    pub match_rate: f64,
}

pub fn sign_match(learned: &WeightMatrix, truth: &WeightMatrix, zero_tol: f64) -> Result<SignMatch> {
    if learned.shape() != truth.shape() {
        return Err(Error::ShapeMismatch {
            left: learned.shape(),
            right: truth.shape(),
        });
    }
    let ls = sign_pattern(learned, zero_tol);
    let ts = sign_pattern(truth, zero_tol);
    let values = ls.zip_map(&ts, |l, t| match (l == t, l) {
        (true, _) => 0,
        (false, 0) => -t,
        (false, l) => l,
    });
    let total = values.len();
    let matches = values.iter().filter(|&&v| v == 0).count();
    let match_rate = if total == 0 {
        1.0
    } else {
        matches as f64 / total as f64
    };
    Ok(SignMatch {
        values,
        truth: ts,
        learned: ls,
        match_rate,
    })
}

/// Per-task linear scores `X_t w_t`.
pub fn predict_scores(p: &MultiTaskProblem, w: &WeightMatrix) -> Vec<Vec<f64>> {
    p.tasks
        .iter()
        .enumerate()
        .map(|(t, task)| (&task.x * w.column(t)).iter().copied().collect())
        .collect()
}

/// Standard metric set for a fitted model on `p`.
///
/// Regression: `mse`, `mae`, `nmse`, `nmae` pooled over all rows, plus `msle`
/// when every target exceeds -1. Classification: `acc`, `auc`, `map` as
/// unweighted means over tasks; tasks with a single class are left out of
/// `auc` and `map`. Undefined metrics are omitted.
pub fn evaluate_model(p: &MultiTaskProblem, w: &WeightMatrix) -> BTreeMap<String, f64> {
    let scores = predict_scores(p, w);
    let mut out = BTreeMap::new();
    let mut put = |name: &str, value: Result<f64>| {
        if let Ok(v) = value {
            if v.is_finite() {
                out.insert(name.to_string(), v);
            }
        }
    };
    match p.kind {
        ProblemKind::Regression => {
            let pred: Vec<f64> = scores.concat();
            let truth: Vec<f64> = p.tasks.iter().flat_map(|t| t.y.iter().copied()).collect();
            put("mse", mse(&pred, &truth));
            put("mae", mae(&pred, &truth));
            put("nmse", nmse(&pred, &truth));
            put("nmae", nmae(&pred, &truth));
            if truth.iter().all(|&v| v > -1.0) {
                put("msle", msle(&pred, &truth));
            }
        }
        ProblemKind::Classification => {
            let truths: Vec<Vec<f64>> = p
                .tasks
                .iter()
                .map(|t| t.y.iter().copied().collect())
                .collect();
            let defined = |f: fn(&[f64], &[f64]) -> Result<f64>| {
                let vals: Vec<f64> = scores
                    .iter()
                    .zip(&truths)
                    .filter_map(|(s, y)| f(s, y).ok())
                    .collect();
                task_mean(vals.into_iter().map(Ok))
            };
            put(
                "acc",
                task_mean(scores.iter().zip(&truths).map(|(s, y)| {
                    let labels: Vec<f64> = s
                        .iter()
                        .map(|&z| if sigmoid(z) >= 0.5 { 1.0 } else { 0.0 })
                        .collect();
                    accuracy(&labels, y)
                })),
            );
            put("auc", defined(auc));
            put("map", defined(average_precision));
        }
    }
    out
}
