use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use srml_core::{
    BaselineKind, LossKind, ProblemKind, RhoPolicy, SolverConfig, SynthSpec, DEFAULT_C_STRICT,
};

use crate::data::{load_csv, Dataset};
use crate::error::{HarnessError, Result};

/// Where an experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, kind: ProblemKind },
    Preset { name: String, seed: u64 },
    Spec(SynthSpec),
}

/// Data plus the generating weights when they are known.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub truth: Option<srml_core::WeightMatrix>,
}

impl DataSource {
    pub fn kind(&self) -> Result<ProblemKind> {
        Ok(match self {
            DataSource::Csv { kind, .. } => *kind,
            DataSource::Preset { name, .. } => srml_core::preset(name)?.kind,
            DataSource::Spec(spec) => spec.kind,
        })
    }

    pub fn load(&self) -> Result<LoadedData> {
        let synth = |spec: &SynthSpec| -> Result<LoadedData> {
            let (problem, truth) = srml_core::generate(spec)?;
            let task_ids = (0..problem.num_tasks()).map(|t| t.to_string()).collect();
            Ok(LoadedData {
                dataset: Dataset { problem, task_ids },
                truth: Some(truth.weights),
            })
        };
        match self {
            DataSource::Csv { path, kind } => Ok(LoadedData {
                dataset: load_csv(path, *kind)?,
                truth: None,
            }),
            DataSource::Preset { name, seed } => synth(&srml_core::preset(name)?.with_seed(*seed)),
            DataSource::Spec(spec) => synth(spec),
        }
    }
}

impl LoadedData {
    /// Puts task `order[i]` in position `i`.
    pub fn reorder(self, order: &[usize]) -> Result<LoadedData> {
        let t = self.dataset.problem.num_tasks();
        let mut seen = vec![false; t];
        for &i in order {
            if i >= t || std::mem::replace(&mut seen[i], true) {
                return Err(HarnessError::InvalidConfig(format!(
                    "task order {order:?} is not a permutation of 0..{t}"
                )));
            }
        }
        if order.len() != t {
            return Err(HarnessError::InvalidConfig(format!(
                "task order has {} entries for {t} tasks",
                order.len()
            )));
        }
        let Dataset { problem, task_ids } = self.dataset;
        let problem = srml_core::MultiTaskProblem::new(
            order.iter().map(|&i| problem.tasks[i].clone()).collect(),
            problem.kind,
        )?;
        let task_ids = order.iter().map(|&i| task_ids[i].clone()).collect();
        let truth = self.truth.map(|w| {
            let cols: Vec<_> = order.iter().map(|&i| w.column(i)).collect();
            srml_core::WeightMatrix::from_columns(&cols)
        });
        Ok(LoadedData {
            dataset: Dataset { problem, task_ids },
            truth,
        })
    }
}

/// `n` points spaced evenly in log10 between `10^lo` and `10^hi`.
pub fn log_grid(lo: i32, hi: i32, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![10f64.powi(lo)];
    }
    let step = f64::from(hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| 10f64.powf(f64::from(lo) + step * i as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub loss: LossKind,
    /// `lambda` and `c` here are overridden by the grid search.
    pub solver: SolverConfig,
    pub grid_lambda: Vec<f64>,
    pub grid_c: Vec<f64>,
    pub split_fraction: f64,
    pub cv_folds: usize,
    pub repeats: usize,
    /// Master seed for splits and folds.
    pub seed: u64,
    pub baselines: Vec<BaselineKind>,
    pub c_strict: f64,
    /// Optional permutation of the loaded tasks; dataset order otherwise.
    #[serde(default)]
    pub task_order: Option<Vec<usize>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Preset {
                name: "synth1".into(),
                seed: 0,
            },
            loss: LossKind::Squared,
            solver: SolverConfig {
                rho_policy: RhoPolicy::FromLipschitz { margin: 1.25 },
                ..Default::default()
            },
            grid_lambda: log_grid(-3, 3, 7),
            grid_c: log_grid(-3, 3, 7),
            split_fraction: 0.6,
            cv_folds: 5,
            repeats: 10,
            seed: 0,
            baselines: vec![BaselineKind::Ssml, BaselineKind::IndependentRidge],
            c_strict: DEFAULT_C_STRICT,
            task_order: None,
        }
    }
}

impl ExperimentConfig {
    /// Loads the source and applies `task_order`.
    pub fn load_data(&self) -> Result<LoadedData> {
        let data = self.source.load()?;
        match &self.task_order {
            Some(order) => data.reorder(order),
            None => Ok(data),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.grid_lambda.is_empty() || self.grid_c.is_empty() {
            return bad("hyperparameter grid must be nonempty".into());
        }
        if self
            .grid_lambda
            .iter()
            .chain(&self.grid_c)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return bad("grid values must be finite and nonnegative".into());
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split fraction {} outside (0, 1)", self.split_fraction));
        }
        if self.cv_folds < 2 {
            return bad(format!("need at least 2 folds, got {}", self.cv_folds));
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.loss.problem_kind() != self.source.kind()? {
            return bad(format!("{} loss does not fit this data", self.loss.name()));
        }
        self.solver.validate()?;
        Ok(())
    }
}
