//! Experiment harness around `srml-core`: CSV data, train/test splits,
//! cross-validated hyperparameter search, repeated runs with JSON/CSV
//! artifacts, runtime and sensitivity sweeps, and model files.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gridsearch;
pub mod model;
pub mod split;
pub mod sweeps;

pub use config::{log_grid, DataSource, ExperimentConfig, LoadedData};
pub use data::{load_csv, read_csv, write_csv, Dataset};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, ExperimentReport, MetricSummary, RepeatRecord, RunStatus};
pub use gridsearch::{cv_grid_search, cv_search_with, CvCell, GridSearchResult};
pub use model::{load_model, save_model, ModelFile, MODEL_VERSION};
pub use split::{cv_folds, split, split_indices, Fold, SplitIndices};
pub use sweeps::{scale_sweep, sensitivity_sweep, ScaleAxis, ScaleReport, SensitivityRow, SweepParam};
