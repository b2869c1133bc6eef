//! Synthetic multi-task benchmarks with a known shared sign vector.
//!
//! For each task: features are `N(0, I)` plus a per-task bias vector drawn from
//! `U(bias_low, bias_high)`; weights are `P * |N(0, I)|` with a fixed count of
//! sign flips; targets are `Xw + eps` (regression) or `1[sigmoid(Xw + eps) >= 0.5]`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::sigmoid;
use crate::problem::{MultiTaskProblem, ProblemKind, TaskData, WeightMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_tasks: usize,
    pub m: usize,
    pub d: usize,
    pub kind: ProblemKind,
    /// Fraction of weights per task whose sign is flipped away from the shared pattern.
    pub flip_fraction: f64,
    /// Standard deviation of the target noise.
    pub noise_sigma: f64,
    pub bias_low: f64,
    pub bias_high: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(num_tasks: usize, m: usize, d: usize, kind: ProblemKind) -> Self {
        Self {
            num_tasks,
            m,
            d,
            kind,
            flip_fraction: 0.1,
            noise_sigma: 0.1,
            bias_low: 0.0,
            bias_high: 10.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Number of flipped entries per task: `floor(flip_fraction * d)`.
    pub fn flips_per_task(&self) -> usize {
        (self.flip_fraction * self.d as f64).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_tasks == 0 || self.m == 0 || self.d == 0 {
            return Err(Error::InvalidSpec("T, m and d must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.flip_fraction) {
            return Err(Error::InvalidSpec(format!(
                "flip fraction {} outside [0, 1]",
                self.flip_fraction
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidSpec("noise sigma must be finite and >= 0".into()));
        }
        if !(self.bias_low <= self.bias_high && self.bias_low.is_finite() && self.bias_high.is_finite()) {
            return Err(Error::InvalidSpec("bias range must be finite with low <= high".into()));
        }
        Ok(())
    }
}

/// Known generating parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Shared sign vector, entries in `{-1, +1}`.
    pub signs: Vec<i8>,
    /// Final `d x T` weights, after flips.
    pub weights: WeightMatrix,
    /// Flipped feature indices per task, sorted.
    pub flipped: Vec<Vec<usize>>,
}

pub fn preset(name: &str) -> Result<SynthSpec> {
    match name {
        "synth1" => Ok(SynthSpec::new(20, 100, 25, ProblemKind::Regression)),
        "synth2" => Ok(SynthSpec::new(100, 100, 1000, ProblemKind::Regression)),
        "synth3" => Ok(SynthSpec::new(5, 100, 25, ProblemKind::Classification)),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

pub const PRESET_NAMES: [&str; 3] = ["synth1", "synth2", "synth3"];

pub fn generate(spec: &SynthSpec) -> Result<(MultiTaskProblem, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::<f64>::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, spec.noise_sigma).expect("finite sigma");
    let bias = Uniform::new_inclusive(spec.bias_low, spec.bias_high)
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let (d, m) = (spec.d, spec.m);

    let signs: Vec<i8> = (0..d)
        .map(|_| if std_normal.sample(&mut rng) < 0.0 { -1 } else { 1 })
        .collect();

    let flips = spec.flips_per_task();
    let mut tasks = Vec::with_capacity(spec.num_tasks);
    let mut columns = Vec::with_capacity(spec.num_tasks);
    let mut flipped = Vec::with_capacity(spec.num_tasks);
    for _ in 0..spec.num_tasks {
        let mut w = DVector::from_fn(d, |j, _| f64::from(signs[j]) * std_normal.sample(&mut rng).abs());
        let mut chosen = index::sample(&mut rng, d, flips).into_vec();
        chosen.sort_unstable();
        for &j in &chosen {
            w[j] = -w[j];
        }

        let shift: Vec<f64> = (0..d).map(|_| bias.sample(&mut rng)).collect();
        let mut x = DMatrix::zeros(m, d);
        for i in 0..m {
            for j in 0..d {
                x[(i, j)] = std_normal.sample(&mut rng) + shift[j];
            }
        }
        let clean = &x * &w;
        let y = DVector::from_fn(m, |i, _| {
            let z = clean[i] + noise.sample(&mut rng);
            match spec.kind {
                ProblemKind::Regression => z,
                ProblemKind::Classification => {
                    if sigmoid(z) >= 0.5 {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        });
        tasks.push(TaskData::new(x, y));
        columns.push(w);
        flipped.push(chosen);
    }

    let problem = MultiTaskProblem::new(tasks, spec.kind)?;
    Ok((
        problem,
        GroundTruth {
            signs,
            weights: WeightMatrix::from_columns(&columns),
            flipped,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let s = preset("synth1").unwrap();
        assert_eq!((s.num_tasks, s.m, s.d, s.kind), (20, 100, 25, ProblemKind::Regression));
        let s = preset("synth2").unwrap();
        assert_eq!((s.num_tasks, s.m, s.d, s.kind), (100, 100, 1000, ProblemKind::Regression));
        let s = preset("synth3").unwrap();
        assert_eq!((s.num_tasks, s.m, s.d, s.kind), (5, 100, 25, ProblemKind::Classification));
        assert_eq!(preset("synth9"), Err(Error::UnknownPreset("synth9".into())));
    }

    #[test]
    fn flip_count_is_floored() {
        let s = SynthSpec::new(3, 10, 25, ProblemKind::Regression);
        assert_eq!(s.flips_per_task(), 2);
        let (_, truth) = generate(&s).unwrap();
        assert!(truth.flipped.iter().all(|f| f.len() == 2));
    }

    #[test]
    fn noiseless_regression_is_exactly_linear() {
        let mut s = SynthSpec::new(3, 12, 4, ProblemKind::Regression);
        s.noise_sigma = 0.0;
        s.flip_fraction = 0.0;
        let (p, truth) = generate(&s).unwrap();
        for (t, task) in p.tasks.iter().enumerate() {
            assert_eq!(&task.x * truth.weights.column(t), task.y);
        }
    }

    #[test]
    fn rejects_invalid_spec() {
        let mut s = SynthSpec::new(3, 12, 4, ProblemKind::Regression);
        s.flip_fraction = 1.5;
        assert!(generate(&s).is_err());
    }
}
