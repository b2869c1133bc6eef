//! The split -> cross-validate -> fit -> evaluate pipeline and its artifacts.
//!
//! Every repeat draws a split seed and a fold seed from the master seed, so
//! both the train/test split and the CV folds are re-randomized per repeat.
//! `trace.csv`, `signmatch.csv` and `model.json` come from the first repeat.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use srml_core::metrics::{evaluate_model, sign_match, SignMatch};
use srml_core::theory::{
    tight_bound_condition, generalization_bound, l1_inf_norm, rademacher_bound_terms, BoundInputs,
};
use srml_core::{
    fit, fit_independent, fit_ssml, BaselineKind, BoundValues, Error as CoreError, FitResult,
    IndependentKind, LossKind, MultiTaskProblem, ProblemKind, RunReport, SolverConfig,
    WeightMatrix,
};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::gridsearch::{cv_grid_search, cv_search_with, GridSearchResult};
use crate::model::{save_model, ModelFile};
use crate::split::{split_indices, subset};

pub const REPORT_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const SIGNMATCH_FILE: &str = "signmatch.csv";
pub const MODEL_FILE: &str = "model.json";
pub const FAILURE_MARKER: &str = "FAILED";

const BOUND_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub values: Vec<f64>,
}

pub fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MetricSummary {
        mean,
        std,
        values: values.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub lambda: f64,
    pub metrics: BTreeMap<String, f64>,
    pub sign_match_rate: Option<f64>,
    /// Sign-violation mass of the mirror variables (strict baseline only).
    pub violation_mass: Option<f64>,
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub split_seed: u64,
    pub fold_seed: u64,
    pub selection: GridSearchResult,
    /// Test metrics and resolved hyperparameters; the trace is in `trace.csv`.
    pub report: RunReport,
    pub converged: bool,
    pub iterations: usize,
    pub final_primal_residual: f64,
    pub final_dual_residual: f64,
    pub sign_match_rate: Option<f64>,
    /// Test metrics of the generating weights, when known.
    pub oracle_metrics: Option<BTreeMap<String, f64>>,
    pub baselines: BTreeMap<String, BaselineRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: u32,
    pub status: RunStatus,
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub metrics: BTreeMap<String, MetricSummary>,
    pub baseline_metrics: BTreeMap<String, BTreeMap<String, MetricSummary>>,
    pub sign_match_rate: Option<MetricSummary>,
    pub repeats: Vec<RepeatRecord>,
    pub wall_time_seconds: f64,
}

pub fn baseline_name(kind: BaselineKind) -> &'static str {
    match kind {
        BaselineKind::Ssml => "ssml",
        BaselineKind::IndependentRidge => "independent_ridge",
        BaselineKind::IndependentLasso => "independent_lasso",
    }
}

/// `(split_seed, fold_seed)` for each repeat.
pub fn derive_seeds(master: u64, repeats: usize) -> Vec<(u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..repeats).map(|_| (rng.next_u64(), rng.next_u64())).collect()
}

/// Theory quantities for a fitted model.
///
/// `alpha` is the model's total L1 mass and `m` the smallest task size. Returns
/// `None` for squared loss, which has no global Lipschitz constant.
pub fn bound_values(p: &MultiTaskProblem, w: &WeightMatrix, loss: LossKind) -> Result<Option<BoundValues>> {
    if loss != LossKind::Logistic {
        return Ok(None);
    }
    bound_values_with(p, w.l1_mass(), 1.0, BOUND_EPSILON).map(Some)
}

pub fn bound_values_with(p: &MultiTaskProblem, alpha: f64, lipschitz: f64, epsilon: f64) -> Result<BoundValues> {
    let m = p.tasks.iter().map(|t| t.m()).min().unwrap_or(0);
    let inputs = BoundInputs {
        lipschitz,
        alpha,
        epsilon,
        m,
        num_tasks: p.num_tasks(),
    };
    let x_norm = l1_inf_norm(p);
    let terms = rademacher_bound_terms(p, alpha);
    let tight_bound_condition = match tight_bound_condition(p) {
        Ok(v) => Some(v),
        Err(CoreError::NonUniqueMaximizer) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(BoundValues {
        alpha,
        lipschitz,
        epsilon,
        x_norm,
        generalization_bound: generalization_bound(&inputs, x_norm)?,
        rademacher_tight: terms.tight,
        rademacher_loose: terms.loose,
        tight_bound_condition,
    })
}

struct Artifacts {
    fit: FitResult,
    sign: Option<SignMatch>,
    model: ModelFile,
}

struct RepeatContext<'a> {
    cfg: &'a ExperimentConfig,
    problem: &'a MultiTaskProblem,
    truth: Option<&'a WeightMatrix>,
    task_ids: &'a [String],
}

fn run_baseline(
    kind: BaselineKind,
    ctx: &RepeatContext<'_>,
    train: &MultiTaskProblem,
    test: &MultiTaskProblem,
    fold_seed: u64,
) -> Result<BaselineRecord> {
    let cfg = ctx.cfg;
    let (solver, loss, c_strict) = (&cfg.solver, cfg.loss, cfg.c_strict);
    let fit_baseline = |p: &MultiTaskProblem, lambda: f64| -> Result<(WeightMatrix, Option<f64>, Option<bool>)> {
        let independent = |k| Ok((fit_independent(p, loss, k, lambda)?, None, None));
        match kind {
            BaselineKind::Ssml => {
                let strict_cfg = SolverConfig {
                    lambda,
                    ..solver.clone()
                };
                let s = fit_ssml(p, loss, &strict_cfg, c_strict)?;
                Ok((s.fit.weights, Some(s.violation_mass), Some(s.fit.converged)))
            }
            BaselineKind::IndependentRidge => independent(IndependentKind::Ridge),
            BaselineKind::IndependentLasso => independent(IndependentKind::Lasso),
        }
    };
    let c_axis = [if kind == BaselineKind::Ssml { c_strict } else { 0.0 }];
    let sel = cv_search_with(train, &cfg.grid_lambda, &c_axis, cfg.cv_folds, fold_seed, |p, l, _| {
        Ok(fit_baseline(p, l)?.0)
    })?;
    let (w, violation_mass, converged) = fit_baseline(train, sel.best_lambda)?;
    let sign_match_rate = match ctx.truth {
        Some(t) => Some(sign_match(&w, t, 0.0)?.match_rate),
        None => None,
    };
    Ok(BaselineRecord {
        lambda: sel.best_lambda,
        metrics: evaluate_model(test, &w),
        sign_match_rate,
        violation_mass,
        converged,
    })
}

fn run_repeat(
    ctx: &RepeatContext<'_>,
    repeat: usize,
    (split_seed, fold_seed): (u64, u64),
) -> Result<(RepeatRecord, Artifacts)> {
    let start = Instant::now();
    let cfg = ctx.cfg;
    let idx = split_indices(ctx.problem, cfg.split_fraction, split_seed)?;
    let train = subset(ctx.problem, &idx.train);
    let test = subset(ctx.problem, &idx.test);

    let selection = cv_grid_search(
        &train,
        cfg.loss,
        &cfg.solver,
        &cfg.grid_lambda,
        &cfg.grid_c,
        cfg.cv_folds,
        fold_seed,
    )?;
    let chosen = SolverConfig {
        lambda: selection.best_lambda,
        c: selection.best_c,
        ..cfg.solver.clone()
    }
    .resolved(&train);
    let result = fit(&train, cfg.loss, &chosen, None)?;
    let metrics = evaluate_model(&test, &result.weights);
    let sign = match ctx.truth {
        Some(t) => Some(sign_match(&result.weights, t, 0.0)?),
        None => None,
    };
    let oracle_metrics = ctx.truth.map(|t| evaluate_model(&test, t));

    let mut baselines = BTreeMap::new();
    for &kind in &cfg.baselines {
        baselines.insert(
            baseline_name(kind).to_string(),
            run_baseline(kind, ctx, &train, &test, fold_seed)?,
        );
    }

    let (primal, dual) = result.final_residuals();
    let record = RepeatRecord {
        repeat,
        split_seed,
        fold_seed,
        selection,
        report: RunReport {
            metrics,
            convergence_trace: Vec::new(),
            hyperparams: chosen.clone(),
            bound_values: bound_values(&train, &result.weights, cfg.loss)?,
            wall_time_seconds: start.elapsed().as_secs_f64(),
            seed: split_seed,
        },
        converged: result.converged,
        iterations: result.iterations,
        final_primal_residual: primal,
        final_dual_residual: dual,
        sign_match_rate: sign.as_ref().map(|s| s.match_rate),
        oracle_metrics,
        baselines,
    };
    let model = ModelFile::new(&result.weights, cfg.loss, ctx.task_ids.to_vec(), chosen);
    Ok((
        record,
        Artifacts {
            fit: result,
            sign,
            model,
        },
    ))
}

type Summaries = BTreeMap<String, MetricSummary>;

fn aggregate(repeats: &[RepeatRecord]) -> (Summaries, BTreeMap<String, Summaries>, Option<MetricSummary>) {
    let collect = |get: &dyn Fn(&RepeatRecord) -> Option<&BTreeMap<String, f64>>| {
        let mut by_name: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in repeats {
            if let Some(m) = get(r) {
                for (k, v) in m {
                    by_name.entry(k.clone()).or_default().push(*v);
                }
            }
        }
        by_name
            .into_iter()
            .map(|(k, v)| (k, summarize(&v)))
            .collect::<BTreeMap<_, _>>()
    };
    let metrics = collect(&|r| Some(&r.report.metrics));
    let names: Vec<String> = repeats
        .first()
        .map(|r| r.baselines.keys().cloned().collect())
        .unwrap_or_default();
    let mut baseline_metrics: BTreeMap<String, BTreeMap<String, MetricSummary>> = names
        .into_iter()
        .map(|name| {
            let s = collect(&|r| r.baselines.get(&name).map(|b| &b.metrics));
            (name, s)
        })
        .collect();
    let oracle = collect(&|r| r.oracle_metrics.as_ref());
    if !oracle.is_empty() {
        baseline_metrics.insert("oracle".into(), oracle);
    }
    let rates: Vec<f64> = repeats.iter().filter_map(|r| r.sign_match_rate).collect();
    let sign = (!rates.is_empty()).then(|| summarize(&rates));
    (metrics, baseline_metrics, sign)
}

fn write_json(path: &Path, report: &ExperimentReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|e| HarnessError::io(path, e))?;
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn write_trace_csv(path: &Path, fit: &FitResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    for row in &fit.trace {
        w.serialize(row).map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn write_signmatch_csv(path: &Path, sm: &SignMatch) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    let io = |e| HarnessError::io(path, e);
    w.write_record(["task", "feature", "truth_sign", "learned_sign", "match"])
        .map_err(io)?;
    for t in 0..sm.values.ncols() {
        for j in 0..sm.values.nrows() {
            w.write_record([
                t.to_string(),
                j.to_string(),
                sm.truth[(j, t)].to_string(),
                sm.learned[(j, t)].to_string(),
                sm.values[(j, t)].to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Runs the full protocol and writes its artifacts into `out_dir`.
///
/// On failure the partial report is written with `status: failed` next to a
/// `FAILED` marker file, and the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    let start = Instant::now();
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let marker = out_dir.join(FAILURE_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| HarnessError::io(&marker, e))?;
    }

    let mut repeats = Vec::new();
    let mut first: Option<Artifacts> = None;
    let outcome = (|| -> Result<()> {
        cfg.validate()?;
        let data = cfg.load_data()?;
        let ctx = RepeatContext {
            cfg,
            problem: &data.dataset.problem,
            truth: data.truth.as_ref(),
            task_ids: &data.dataset.task_ids,
        };
        for (r, seeds) in derive_seeds(cfg.seed, cfg.repeats).into_iter().enumerate() {
            let (record, artifacts) = run_repeat(&ctx, r, seeds)?;
            repeats.push(record);
            first.get_or_insert(artifacts);
        }
        Ok(())
    })();

    let (metrics, baseline_metrics, sign_match_rate) = aggregate(&repeats);
    let mut report = ExperimentReport {
        version: REPORT_VERSION,
        status: RunStatus::Complete,
        error: None,
        config: cfg.clone(),
        metrics,
        baseline_metrics,
        sign_match_rate,
        repeats,
        wall_time_seconds: 0.0,
    };

    if let Err(e) = outcome {
        report.status = RunStatus::Failed;
        report.error = Some(e.to_string());
        report.wall_time_seconds = start.elapsed().as_secs_f64();
        write_json(&out_dir.join(REPORT_FILE), &report)?;
        fs::write(&marker, e.to_string()).map_err(|io| HarnessError::io(&marker, io))?;
        return Err(e);
    }

    let art = first.expect("at least one repeat ran");
    write_trace_csv(&out_dir.join(TRACE_FILE), &art.fit)?;
    if let Some(sm) = &art.sign {
        write_signmatch_csv(&out_dir.join(SIGNMATCH_FILE), sm)?;
    }
    save_model(&out_dir.join(MODEL_FILE), &art.model)?;
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    write_json(&out_dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// Test metric used by sweeps: `mse` for regression, `acc` for classification.
pub fn headline_metric(kind: ProblemKind) -> &'static str {
    crate::gridsearch::selection_metric(kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let s = summarize(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        assert_eq!(summarize(&[5.0]).std, 0.0);
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let a = derive_seeds(7, 4);
        assert_eq!(a, derive_seeds(7, 4));
        assert_ne!(a, derive_seeds(8, 4));
        assert_eq!(a.len(), 4);
        assert_ne!(a[0], a[1]);
    }
}
