//! Runtime scaling and hyperparameter sensitivity sweeps.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use srml_core::metrics::evaluate_model;
use srml_core::{fit, generate, LossKind, RhoPolicy, SolverConfig, SynthSpec};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{derive_seeds, headline_metric, summarize};
use crate::split::split;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleAxis {
    M,
    T,
    D,
}

impl ScaleAxis {
    fn apply(self, spec: &mut SynthSpec, value: usize) {
        match self {
            ScaleAxis::M => spec.m = value,
            ScaleAxis::T => spec.num_tasks = value,
            ScaleAxis::D => spec.d = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub value: usize,
    pub seconds_mean: f64,
    pub seconds_std: f64,
}

/// Runtime growth between consecutive sweep values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub from: usize,
    pub to: usize,
    pub time_ratio: f64,
    /// Time grew more than 1.5x faster than the axis value (ratio > 3 on a doubling).
    pub anomalous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub axis: ScaleAxis,
    pub rows: Vec<ScaleRow>,
    pub ratios: Vec<RatioRecord>,
    /// Least-squares slope of log(seconds) against log(value); needs two rows.
    pub loglog_slope: Option<f64>,
}

pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Times `fit` on freshly generated data for each axis value, `regenerations`
/// datasets per value (seeds `base.seed, base.seed + 1, ...`).
pub fn scale_sweep(
    axis: ScaleAxis,
    values: &[usize],
    base: &SynthSpec,
    solver: &SolverConfig,
    regenerations: usize,
) -> Result<ScaleReport> {
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::InvalidConfig("scale values must be strictly ascending".into()));
    }
    if regenerations == 0 {
        return Err(HarnessError::InvalidConfig("need at least one regeneration".into()));
    }
    let loss = LossKind::for_problem(base.kind);
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut spec = base.clone();
        axis.apply(&mut spec, value);
        let mut times = Vec::with_capacity(regenerations);
        for r in 0..regenerations {
            let (p, _) = generate(&spec.clone().with_seed(base.seed.wrapping_add(r as u64)))?;
            let start = Instant::now();
            fit(&p, loss, solver, None)?;
            times.push(start.elapsed().as_secs_f64());
        }
        let s = summarize(&times);
        rows.push(ScaleRow {
            value,
            seconds_mean: s.mean,
            seconds_std: s.std,
        });
    }
    let ratios = rows
        .windows(2)
        .map(|w| {
            let time_ratio = w[1].seconds_mean / w[0].seconds_mean;
            let value_ratio = w[1].value as f64 / w[0].value as f64;
            RatioRecord {
                from: w[0].value,
                to: w[1].value,
                time_ratio,
                anomalous: time_ratio > 1.5 * value_ratio,
            }
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.value as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.seconds_mean).collect();
    Ok(ScaleReport {
        axis,
        loglog_slope: loglog_slope(&xs, &ys),
        rows,
        ratios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Rho,
    Lambda,
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub value: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

/// Varies one hyperparameter with the others held at `cfg.solver`, scoring the
/// test metric over `cfg.repeats` splits. No cross-validation is involved.
pub fn sensitivity_sweep(param: SweepParam, values: &[f64], cfg: &ExperimentConfig) -> Result<Vec<SensitivityRow>> {
    if values.is_empty() {
        return Err(HarnessError::InvalidConfig("sweep needs at least one value".into()));
    }
    cfg.validate()?;
    let data = cfg.load_data()?;
    let p = &data.dataset.problem;
    let metric = headline_metric(p.kind);
    let seeds = derive_seeds(cfg.seed, cfg.repeats);
    let splits = seeds
        .iter()
        .map(|&(s, _)| split(p, cfg.split_fraction, s))
        .collect::<Result<Vec<_>>>()?;

    values
        .iter()
        .map(|&value| {
            let mut solver = cfg.solver.clone();
            match param {
                SweepParam::Rho => {
                    solver.rho = value;
                    solver.rho_policy = RhoPolicy::Fixed;
                }
                SweepParam::Lambda => solver.lambda = value,
                SweepParam::C => solver.c = value,
            }
            let scores = splits
                .iter()
                .map(|(train, test)| {
                    let r = fit(train, cfg.loss, &solver, None)?;
                    evaluate_model(test, &r.weights).get(metric).copied().ok_or_else(|| {
                        HarnessError::InvalidConfig(format!("metric {metric} undefined on the test split"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let s = summarize(&scores);
            Ok(SensitivityRow {
                value,
                metric: metric.to_string(),
                mean: s.mean,
                std: s.std,
            })
        })
        .collect()
}

pub fn write_rows_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}
