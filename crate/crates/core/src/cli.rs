//! Command implementations behind the `apfamily` binary.
//!
//! `run` writes, for every variant `<name>` of an experiment file:
//!
//! * `<name>_mse.csv`: `iteration,mse_db,smoothed_mse_db`
//! * `<name>_weights.csv`: `tap,adaptive_weight,plant_weight`
//! * `<name>_freqresp.csv`: `omega_over_pi,magnitude_db,plant_magnitude_db`
//!
//! plus one `summary.csv` with a row per variant. Reals are written with 17
//! significant digits so files round-trip exactly and are byte-stable.
//! Adaptive weights are the ensemble mean of the final weights.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::algorithms::WeightVector;
use crate::config::{Experiment, ExperimentFile, Variant};
use crate::error::Error;
use crate::metrics::{compute_tm, misalignment_db, smooth, MseTrace, TmReport};
use crate::selftest::{run_selftest, SelftestOptions, SelftestReport};
use crate::signal::{design_highpass_fir, frequency_response};
use crate::sysid::{run_ensemble, EnsembleResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const SUMMARY_HEADER: &str = "algorithm,final_smoothed_mse_db,t_m,misalignment_db,\
total_multiplies_paper_literal,total_multiplies_corrected";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(Error),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

/// Everything reported for one variant.
#[derive(Debug, Clone)]
pub struct VariantReport {
    pub name: String,
    pub variant: Variant,
    pub ensemble: EnsembleResult,
    pub smoothed: MseTrace,
    pub tm: TmReport,
    pub mean_weights: WeightVector,
    /// `None` when the plant is identically zero.
    pub misalignment_db: Option<f64>,
    pub total_multiplies_literal: u64,
    pub total_multiplies_corrected: u64,
}

impl VariantReport {
    pub fn final_smoothed_mse_db(&self) -> f64 {
        self.smoothed.last().unwrap_or(f64::NAN)
    }
}

/// Runs every variant of `experiment`. Nothing is written to disk.
pub fn run_experiment(
    experiment: &Experiment,
    threads: usize,
) -> Result<Vec<VariantReport>, CliError> {
    let analysis = experiment.analysis;
    experiment
        .variants
        .iter()
        .map(|variant| {
            let ensemble = run_ensemble(&variant.config, threads)
                .map_err(|e| CliError::Runtime(format!("variant {}: {e}", variant.name)))?;
            let raw = MseTrace::raw(ensemble.mse_db.clone());
            let smoothed = smooth(&raw, analysis.smoothing_window).map_err(CliError::Validation)?;
            let tm = compute_tm(&raw, analysis.tm_window, analysis.tm_slack_db)
                .map_err(CliError::Validation)?;
            let mean_weights = ensemble.mean_final_weights();
            let misalignment = misalignment_db(&mean_weights, &variant.config.plant.h).ok();
            let iterations = variant.config.iterations as u64;
            let algorithm = &variant.config.algorithm;
            Ok(VariantReport {
                name: variant.name.clone(),
                variant: variant.clone(),
                tm,
                smoothed,
                mean_weights,
                misalignment_db: misalignment,
                total_multiplies_literal: iterations
                    * algorithm.step_multiplies_literal(),
                total_multiplies_corrected: ensemble.runs[0].total_multiplies,
                ensemble,
            })
        })
        .collect()
}

pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn mse_csv(report: &VariantReport) -> String {
    let mut out = String::from("iteration,mse_db,smoothed_mse_db\n");
    for (n, (raw, smoothed)) in report
        .ensemble
        .mse_db
        .iter()
        .zip(&report.smoothed.values_db)
        .enumerate()
    {
        let _ = writeln!(out, "{n},{},{}", format_real(*raw), format_real(*smoothed));
    }
    out
}

fn weights_csv(report: &VariantReport) -> String {
    let w = &report.mean_weights;
    let h = &report.variant.config.plant.h;
    let mut out = String::from("tap,adaptive_weight,plant_weight\n");
    for k in 0..w.len().max(h.len()) {
        let wk = w.get(k).copied().unwrap_or(0.0);
        let hk = h.get(k).copied().unwrap_or(0.0);
        let _ = writeln!(out, "{k},{},{}", format_real(wk), format_real(hk));
    }
    out
}

fn freqresp_csv(report: &VariantReport, points: usize) -> Result<String, Error> {
    let adaptive = frequency_response(&report.mean_weights, points)?;
    let plant = frequency_response(&report.variant.config.plant.h, points)?;
    let mut out = String::from("omega_over_pi,magnitude_db,plant_magnitude_db\n");
    for j in 0..points {
        let _ = writeln!(
            out,
            "{},{},{}",
            format_real(j as f64 / (points - 1) as f64),
            format_real(adaptive.magnitude_db[j]),
            format_real(plant.magnitude_db[j])
        );
    }
    Ok(out)
}

pub fn summary_csv(reports: &[VariantReport]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in reports {
        let misalignment = r.misalignment_db.map(format_real).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.name,
            format_real(r.final_smoothed_mse_db()),
            r.tm.t_m,
            misalignment,
            r.total_multiplies_literal,
            r.total_multiplies_corrected
        );
    }
    out
}

/// Renders every output file as `(file name, contents)`.
pub fn render_outputs(
    experiment: &Experiment,
    reports: &[VariantReport],
) -> Result<Vec<(String, String)>, Error> {
    let mut files = Vec::with_capacity(3 * reports.len() + 1);
    for r in reports {
        files.push((format!("{}_mse.csv", r.name), mse_csv(r)));
        files.push((format!("{}_weights.csv", r.name), weights_csv(r)));
        files.push((
            format!("{}_freqresp.csv", r.name),
            freqresp_csv(r, experiment.analysis.freq_points)?,
        ));
    }
    files.push(("summary.csv".to_string(), summary_csv(reports)));
    Ok(files)
}

/// Outcome of a successful `run`.
#[derive(Debug)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub reports: Vec<VariantReport>,
    pub warnings: Vec<String>,
}

/// Loads, validates and runs an experiment file, then writes its CSVs.
///
/// All variants are validated and computed before the output directory is
/// touched, so a failing configuration leaves no files behind.
pub fn cmd_run(
    config_path: &Path,
    out: Option<&Path>,
    threads: usize,
) -> Result<RunOutput, CliError> {
    let file = ExperimentFile::load(config_path).map_err(CliError::Validation)?;
    let experiment = file.resolve().map_err(CliError::Validation)?;
    if threads == 0 {
        return Err(CliError::Validation(Error::InvalidParameter {
            field: "threads",
            reason: "must be at least 1".into(),
        }));
    }
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| experiment.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&experiment.name));

    let reports = run_experiment(&experiment, threads)?;
    let files = render_outputs(&experiment, &reports).map_err(CliError::Validation)?;

    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", out_dir.display())))?;
    for (name, contents) in files {
        let path = out_dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(RunOutput {
        out_dir,
        reports,
        warnings: experiment.warnings,
    })
}

/// Coefficients of the designed high-pass filter, one per line.
pub fn cmd_design(num_taps: usize, cutoff_fn: f64) -> Result<String, CliError> {
    let h = design_highpass_fir(num_taps, cutoff_fn).map_err(CliError::Validation)?;
    Ok(h.iter().map(|c| format_real(*c) + "\n").collect())
}

pub fn cmd_selftest() -> SelftestReport {
    run_selftest(&SelftestOptions::default())
}
