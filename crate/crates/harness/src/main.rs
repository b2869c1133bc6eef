use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use srml_core::metrics::evaluate_model;
use srml_core::{LossKind, ProblemKind, RegKind, RhoPolicy, WSolver};
use srml_harness::config::{DataSource, ExperimentConfig};
use srml_harness::experiment::{bound_values_with, run_experiment};
use srml_harness::gridsearch::cv_grid_search;
use srml_harness::split::split;
use srml_harness::sweeps::{scale_sweep, sensitivity_sweep, write_rows_csv, ScaleAxis, SweepParam};
use srml_harness::{load_csv, load_model, write_csv, HarnessError, Result};

#[derive(Parser)]
#[command(name = "srml", version, about = "Sign-regularized multi-task learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the split / cross-validate / fit / evaluate protocol and write artifacts.
    Fit(RunArgs),
    /// Score a saved model on a CSV dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Export a synthetic preset as CSV.
    Synth {
        #[arg(long, default_value = "synth1")]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate the grid on one training split and print the table.
    Gridsearch(RunArgs),
    /// Vary one hyperparameter and report the test metric.
    Sweep {
        #[arg(long, value_enum)]
        param: ParamArg,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Time the solver as one dimension of the synthetic data grows.
    Scale {
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long, value_delimiter = ',', default_value = "100,200,400,800")]
        values: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        regenerations: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print generalization-bound quantities for a dataset and optional model.
    Bounds {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        /// L1 budget used when no model is given.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        lipschitz: f64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Squared,
    Logistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegArg {
    L1,
    L2,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Gd,
    Closed,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Rho,
    Lambda,
    C,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    M,
    T,
    D,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// CSV with header `task_id,target,x1,...`.
    #[arg(long, conflicts_with = "preset")]
    data: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, value_enum, default_value = "l2")]
    reg: RegArg,
    /// Fixes lambda instead of searching the grid.
    #[arg(long)]
    lambda: Option<f64>,
    /// Fixes c instead of searching the grid.
    #[arg(long)]
    c: Option<f64>,
    /// `auto` for 1.25 * 2H, or a fixed value.
    #[arg(long, default_value = "auto")]
    rho: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long, default_value = "srml-out")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    grid_lambda: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    grid_c: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "gd")]
    w_solver: SolverArg,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Comma-separated task permutation, e.g. `2,0,1`.
    #[arg(long, value_delimiter = ',')]
    task_order: Option<Vec<usize>>,
}

impl RunArgs {
    fn source(&self) -> Result<DataSource> {
        match (&self.data, &self.preset) {
            (Some(path), None) => {
                let kind = match self.loss {
                    Some(LossArg::Logistic) => ProblemKind::Classification,
                    _ => ProblemKind::Regression,
                };
                Ok(DataSource::Csv { path: path.clone(), kind })
            }
            (None, Some(name)) => Ok(DataSource::Preset {
                name: name.clone(),
                seed: self.seed,
            }),
            (None, None) => Ok(DataSource::Preset {
                name: "synth1".into(),
                seed: self.seed,
            }),
            (Some(_), Some(_)) => Err(HarnessError::InvalidConfig("--data and --preset are exclusive".into())),
        }
    }

    fn config(&self) -> Result<ExperimentConfig> {
        let source = self.source()?;
        let kind = source.kind()?;
        let loss = match self.loss {
            Some(LossArg::Squared) => LossKind::Squared,
            Some(LossArg::Logistic) => LossKind::Logistic,
            None => LossKind::for_problem(kind),
        };
        let mut cfg = ExperimentConfig {
            source,
            loss,
            seed: self.seed,
            ..Default::default()
        };
        cfg.solver.reg_kind = match self.reg {
            RegArg::L1 => RegKind::L1,
            RegArg::L2 => RegKind::L2,
        };
        cfg.solver.w_solver = match self.w_solver {
            SolverArg::Gd => WSolver::GradientDescent,
            SolverArg::Closed => WSolver::ClosedForm,
        };
        if self.rho != "auto" {
            let rho: f64 = self
                .rho
                .parse()
                .map_err(|_| HarnessError::InvalidConfig(format!("--rho expects auto or a number, got {}", self.rho)))?;
            cfg.solver.rho = rho;
            cfg.solver.rho_policy = RhoPolicy::Fixed;
        }
        cfg.task_order = self.task_order.clone();
        if let Some(n) = self.max_iters {
            cfg.solver.max_outer_iters = n;
        }
        if let Some(r) = self.repeats {
            cfg.repeats = r;
        }
        if let Some(g) = &self.grid_lambda {
            cfg.grid_lambda = g.clone();
        }
        if let Some(g) = &self.grid_c {
            cfg.grid_c = g.clone();
        }
        if let Some(l) = self.lambda {
            cfg.grid_lambda = vec![l];
            cfg.solver.lambda = l;
        }
        if let Some(c) = self.c {
            cfg.grid_c = vec![c];
            cfg.solver.c = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => {
            let cfg = args.config()?;
            let report = run_experiment(&cfg, &args.out)?;
            print_json(&report.metrics);
            eprintln!("artifacts written to {}", args.out.display());
        }
        Command::Eval { model, data } => {
            let model = load_model(&model)?;
            let ds = load_csv(&data, model.kind)?;
            print_json(&evaluate_model(&ds.problem, &model.weight_matrix()?));
        }
        Command::Synth { preset, seed, out } => {
            let (p, _) = srml_core::generate(&srml_core::preset(&preset)?.with_seed(seed))?;
            let file = File::create(&out).map_err(|e| HarnessError::Io {
                path: out.clone(),
                message: e.to_string(),
            })?;
            write_csv(file, &p, None)?;
        }
        Command::Gridsearch(args) => {
            let cfg = args.config()?;
            let data = cfg.load_data()?;
            let (train, _) = split(&data.dataset.problem, cfg.split_fraction, cfg.seed)?;
            let res = cv_grid_search(
                &train,
                cfg.loss,
                &cfg.solver,
                &cfg.grid_lambda,
                &cfg.grid_c,
                cfg.cv_folds,
                cfg.seed,
            )?;
            ensure_dir(&args.out)?;
            write_rows_csv(&args.out.join("cv.csv"), &res.table)?;
            print_json(&res);
        }
        Command::Sweep { param, values, run } => {
            let cfg = run.config()?;
            let param = match param {
                ParamArg::Rho => SweepParam::Rho,
                ParamArg::Lambda => SweepParam::Lambda,
                ParamArg::C => SweepParam::C,
            };
            let rows = sensitivity_sweep(param, &values, &cfg)?;
            ensure_dir(&run.out)?;
            write_rows_csv(&run.out.join("sweep.csv"), &rows)?;
            print_json(&rows);
        }
        Command::Scale { axis, values, regenerations, run } => {
            let cfg = run.config()?;
            let spec = match &cfg.source {
                DataSource::Preset { name, seed } => srml_core::preset(name)?.with_seed(*seed),
                DataSource::Spec(s) => s.clone(),
                DataSource::Csv { .. } => {
                    return Err(HarnessError::InvalidConfig("scale sweeps need a synthetic preset".into()))
                }
            };
            let axis = match axis {
                AxisArg::M => ScaleAxis::M,
                AxisArg::T => ScaleAxis::T,
                AxisArg::D => ScaleAxis::D,
            };
            let report = scale_sweep(axis, &values, &spec, &cfg.solver, regenerations)?;
            ensure_dir(&run.out)?;
            write_rows_csv(&run.out.join("scale.csv"), &report.rows)?;
            print_json(&report);
        }
        Command::Bounds { run, model, alpha, lipschitz, epsilon } => {
            let cfg = run.config()?;
            let data = cfg.load_data()?;
            let alpha = match model {
                Some(path) => load_model(&path)?.weight_matrix()?.l1_mass(),
                None => alpha,
            };
            print_json(&bound_values_with(&data.dataset.problem, alpha, lipschitz, epsilon)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
