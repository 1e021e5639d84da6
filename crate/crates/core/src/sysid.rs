//! Black-box identification of an FIR plant.
//!
//! The same input drives the unknown plant and the adaptive filter; the
//! plant output (plus optional measurement noise) is the desired signal and
//! the a-priori error feeds the update rule. Weights start at zero.
//!
//! Run `r` of an experiment draws its input from ChaCha8 stream 0 and its
//! measurement noise from stream 1 of seed `base_seed ^ r`, so runs are
//! independent of each other and of the order in which they execute.

use rayon::prelude::*;

use crate::algorithms::{AdaptiveFilter, AlgorithmConfig, DataMatrix, WeightVector};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::signal::{gaussian_sequence, generate_noise, NoiseSpec, TapDelayLine};

/// Mean squared errors below this are clamped before conversion to dB.
pub const MSE_FLOOR: f64 = 1e-30;

const MEASUREMENT_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub h: WeightVector,
    pub measurement_noise_sigma: f64,
}

impl PlantModel {
    pub fn noiseless(h: Vec<f64>) -> Self {
        Self {
            h: h.into(),
            measurement_noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub plant: PlantModel,
    pub algorithm: AlgorithmConfig,
    /// Excitation; its `seed` is replaced per run.
    pub noise: NoiseSpec,
    pub iterations: usize,
    pub ensemble_runs: usize,
    pub base_seed: u64,
}

impl ExperimentConfig {
    /// Checks every field and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.plant.h.is_empty() {
            return Err(Error::invalid("plant", "needs at least one coefficient"));
        }
        if self.plant.h.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("plant", "coefficients must be finite"));
        }
        let sigma = self.plant.measurement_noise_sigma;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(
                "measurement_noise_sigma",
                format!("must be >= 0, got {sigma}"),
            ));
        }
        self.algorithm.validate()?;
        self.noise.validate()?;
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", "must be positive"));
        }
        if self.ensemble_runs == 0 {
            return Err(Error::invalid("ensemble_runs", "must be positive"));
        }
        let mut warnings = Vec::new();
        if self.algorithm.filter_length < self.plant.h.len() {
            warnings.push(format!(
                "filter_length {} is shorter than the {}-tap plant; the plant is under-modeled",
                self.algorithm.filter_length,
                self.plant.h.len()
            ));
        }
        Ok(warnings)
    }

    pub fn run_seed(&self, run_index: usize) -> u64 {
        self.base_seed ^ run_index as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Squared a-priori error per iteration, linear scale.
    pub mse_trace: Vec<f64>,
    pub final_weights: WeightVector,
    pub total_multiplies: u64,
}

/// Runs one realization of the identification experiment.
pub fn run_single(config: &ExperimentConfig, run_index: usize) -> Result<RunResult> {
    let seed = config.run_seed(run_index);
    let samples = config.iterations;
    let input = generate_noise(&config.noise.with_seed(seed), samples)?;
    let sigma = config.plant.measurement_noise_sigma;
    let measurement = if sigma > 0.0 {
        gaussian_sequence(seed, MEASUREMENT_STREAM, sigma, samples)
    } else {
        vec![0.0; samples]
    };

    let plant = &config.plant.h;
    let length = config.algorithm.filter_length;
    let order = config.algorithm.projection_order;
    let mut history = TapDelayLine::new((length + order - 1).max(plant.len()))?;
    let mut desired = TapDelayLine::new(order)?;
    let mut filter = AdaptiveFilter::new(config.algorithm.clone())?;

    let mut mse_trace = Vec::with_capacity(samples);
    let mut total_multiplies = 0u64;
    for n in 0..samples {
        history.push(input[n]);
        desired.push(dot(plant, &history.taps()[..plant.len()]) + measurement[n]);
        // Rows that would consist only of pre-start zeros are left out.
        let rows = order.min(n + 1);
        let regressors = DataMatrix::from_history(history.taps(), rows, length)?;
        let outcome = filter
            .adapt(&regressors, &desired.taps()[..rows])
            .map_err(|e| Error::RunFailed {
                run: run_index,
                iteration: n,
                source: Box::new(e),
            })?;
        mse_trace.push(outcome.error_e * outcome.error_e);
        total_multiplies += outcome.multiplies;
    }

    Ok(RunResult {
        mse_trace,
        final_weights: filter.into_weights(),
        total_multiplies,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    /// Ensemble-mean squared error, linear scale.
    pub mse_linear: Vec<f64>,
    pub mse_db: Vec<f64>,
    pub runs: Vec<RunResult>,
}

impl EnsembleResult {
    /// Mean of the final weight vectors, summed in run order.
    pub fn mean_final_weights(&self) -> WeightVector {
        let len = self.runs[0].final_weights.len();
        let mut mean = vec![0.0; len];
        for run in &self.runs {
            for (m, w) in mean.iter_mut().zip(run.final_weights.iter()) {
                *m += w;
            }
        }
        let count = self.runs.len() as f64;
        mean.iter_mut().for_each(|m| *m /= count);
        mean.into()
    }
}

pub fn mse_to_db(linear: f64) -> f64 {
    10.0 * linear.max(MSE_FLOOR).log10()
}

/// Averages per-run traces in run order.
pub fn ensemble_from_runs(runs: Vec<RunResult>) -> Result<EnsembleResult> {
    let first = runs
        .first()
        .ok_or_else(|| Error::invalid("ensemble_runs", "must be positive"))?;
    let len = first.mse_trace.len();
    if runs.iter().any(|r| r.mse_trace.len() != len) {
        return Err(Error::invalid("runs", "traces differ in length"));
    }
    let mut mse_linear = vec![0.0; len];
    for run in &runs {
        for (acc, e2) in mse_linear.iter_mut().zip(&run.mse_trace) {
            *acc += e2;
        }
    }
    let count = runs.len() as f64;
    mse_linear.iter_mut().for_each(|m| *m /= count);
    let mse_db = mse_linear.iter().map(|&m| mse_to_db(m)).collect();
    Ok(EnsembleResult {
        mse_linear,
        mse_db,
        runs,
    })
}

/// Runs all `ensemble_runs` realizations on `threads` worker threads
/// (1 runs them on the calling thread). The result does not depend on
/// `threads`.
pub fn run_ensemble(config: &ExperimentConfig, threads: usize) -> Result<EnsembleResult> {
    config.validate()?;
    let outcomes: Vec<Result<RunResult>> = if threads <= 1 {
        (0..config.ensemble_runs)
            .map(|r| run_single(config, r))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?;
        pool.install(|| {
            (0..config.ensemble_runs)
                .into_par_iter()
                .map(|r| run_single(config, r))
                .collect()
        })
    };
    // The lowest failing run is reported regardless of scheduling.
    let runs = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    ensemble_from_runs(runs)
}
