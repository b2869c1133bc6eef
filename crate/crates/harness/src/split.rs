//! Per-task train/test splits and cross-validation folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srml_core::MultiTaskProblem;

use crate::error::{HarnessError, Result};

/// Row indices of each task that went to each side of a split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
}

fn shuffled(m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(rng);
    idx
}

/// Shuffles each task's rows and sends the first `floor(fraction * m_t)` to training.
pub fn split_indices(p: &MultiTaskProblem, fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HarnessError::InvalidConfig(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(p.num_tasks());
    let mut test = Vec::with_capacity(p.num_tasks());
    for (t, task) in p.tasks.iter().enumerate() {
        let m = task.m();
        let n_train = (fraction * m as f64).floor() as usize;
        if m < 2 || n_train == 0 || n_train == m {
            return Err(HarnessError::TooFewSamples { task: t, m, needed: 2 });
        }
        let mut idx = shuffled(m, &mut rng);
        let rest = idx.split_off(n_train);
        train.push(idx);
        test.push(rest);
    }
    Ok(SplitIndices { train, test })
}

/// Restricts every task of `p` to the given rows.
pub fn subset(p: &MultiTaskProblem, rows: &[Vec<usize>]) -> MultiTaskProblem {
    MultiTaskProblem {
        tasks: p
            .tasks
            .iter()
            .zip(rows)
            .map(|(task, r)| task.select_rows(r))
            .collect(),
        kind: p.kind,
    }
}

pub fn split(p: &MultiTaskProblem, fraction: f64, seed: u64) -> Result<(MultiTaskProblem, MultiTaskProblem)> {
    let idx = split_indices(p, fraction, seed)?;
    Ok((subset(p, &idx.train), subset(p, &idx.test)))
}

/// One cross-validation fold: per-task training and validation rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<Vec<usize>>,
    pub validation: Vec<Vec<usize>>,
}

/// `k` folds stratified by task: each task's rows are shuffled and dealt
/// round-robin, so every fold holds out roughly `m_t / k` rows of every task.
pub fn cv_folds(p: &MultiTaskProblem, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(HarnessError::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignments: Vec<Vec<usize>> = p
        .tasks
        .iter()
        .enumerate()
        .map(|(t, task)| {
            if task.m() < k {
                return Err(HarnessError::TooFewSamples { task: t, m: task.m(), needed: k });
            }
            Ok(shuffled(task.m(), &mut rng))
        })
        .collect::<Result<_>>()?;

    Ok((0..k)
        .map(|f| {
            let mut train = Vec::with_capacity(assignments.len());
            let mut validation = Vec::with_capacity(assignments.len());
            for order in &assignments {
                let (mut tr, mut va) = (Vec::new(), Vec::new());
                for (pos, &row) in order.iter().enumerate() {
                    if pos % k == f {
                        va.push(row);
                    } else {
                        tr.push(row);
                    }
                }
                tr.sort_unstable();
                va.sort_unstable();
                train.push(tr);
                validation.push(va);
            }
            Fold { train, validation }
        })
        .collect())
}
