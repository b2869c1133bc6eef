use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::SolverConfig;
use crate::solver::TraceRow;

/// Theory outputs attached to a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValues {
    pub alpha: f64,
    pub lipschitz: f64,
    pub epsilon: f64,
    pub x_norm: f64,
    pub generalization_bound: f64,
    pub rademacher_tight: f64,
    pub rademacher_loose: f64,
    /// `None` when the column-L1 maximizer is not unique.
    pub tight_bound_condition: Option<bool>,
}

/// Outcome of one fit-and-evaluate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub metrics: BTreeMap<String, f64>,
    pub convergence_trace: Vec<TraceRow>,
    pub hyperparams: SolverConfig,
    pub bound_values: Option<BoundValues>,
    pub wall_time_seconds: f64,
    pub seed: u64,
}
