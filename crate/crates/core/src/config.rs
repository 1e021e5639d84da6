//! JSON experiment files.
//!
//! An experiment file describes one plant, one excitation and a list of
//! algorithm variants that are all run on the same noise realizations.
//! Unknown keys are rejected. Example:
//!
//! ```json
//! {
//!   "name": "white",
//!   "plant": { "design": { "num_taps": 13, "cutoff_fn": 0.4 } },
//!   "noise": { "kind": "white", "sigma": 1.0 },
//!   "filter_length": 13,
//!   "iterations": 500,
//!   "ensemble_runs": 100,
//!   "base_seed": 2024,
//!   "algorithms": [
//!     { "name": "lms", "kind": "lms", "mu": 0.05 },
//!     { "name": "bndr_lms", "kind": "bndr_lms" },
//!     { "name": "r_ap", "kind": "r_ap", "projection_order": 4 }
//!   ]
//! }
//! ```
//!
//! Variant defaults: BNDR-LMS and R-AP use `auto_normalized` step sizes,
//! R-AP has order 4 and `delta = 1e-6 * L * var(x)` where `var(x)` is the
//! stationary variance of the configured excitation. LMS needs an explicit
//! `mu`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmConfig, AlgorithmKind, MuMode};
use crate::error::{Error, Result};
use crate::metrics::{DEFAULT_TM_SLACK_DB, DEFAULT_TM_WINDOW};
use crate::signal::{design_highpass_fir, NoiseKind, NoiseSpec};
use crate::sysid::{ExperimentConfig, PlantModel};

pub const DEFAULT_PROJECTION_ORDER: usize = 4;
pub const DELTA_SCALE: f64 = 1e-6;
pub const DEFAULT_FREQ_POINTS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub name: String,
    pub plant: PlantSection,
    pub noise: NoiseSection,
    pub filter_length: usize,
    pub iterations: usize,
    pub ensemble_runs: usize,
    pub base_seed: u64,
    pub algorithms: Vec<VariantSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    /// Output directory, relative to the working directory. `--out` wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

/// Exactly one of `h` and `design` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSection>,
    #[serde(default)]
    pub measurement_noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub num_taps: usize,
    pub cutoff_fn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    pub sigma: f64,
    #[serde(default)]
    pub ar_coefficient: f64,
    #[serde(default)]
    pub fir_coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSection {
    pub name: String,
    pub kind: AlgorithmKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_mode: Option<MuMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub smoothing_window: usize,
    pub tm_window: usize,
    pub tm_slack_db: f64,
    pub freq_points: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            smoothing_window: DEFAULT_TM_WINDOW,
            tm_window: DEFAULT_TM_WINDOW,
            tm_slack_db: DEFAULT_TM_SLACK_DB,
            freq_points: DEFAULT_FREQ_POINTS,
        }
    }
}

/// A validated experiment: one [`ExperimentConfig`] per variant, all sharing
/// plant, noise and seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub variants: Vec<Variant>,
    pub analysis: AnalysisSection,
    pub out_dir: Option<PathBuf>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub config: ExperimentConfig,
}

impl ExperimentFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Validates every field and resolves defaults.
    pub fn resolve(&self) -> Result<Experiment> {
        if !is_safe_name(&self.name) {
            return Err(Error::invalid(
                "name",
                format!("{:?} is not a valid name", self.name),
            ));
        }
        let h = match (&self.plant.h, &self.plant.design) {
            (Some(h), None) => h.clone(),
            (None, Some(d)) => design_highpass_fir(d.num_taps, d.cutoff_fn)?,
            _ => {
                return Err(Error::invalid(
                    "plant",
                    "give exactly one of \"h\" and \"design\"",
                ))
            }
        };
        let plant = PlantModel {
            h: h.into(),
            measurement_noise_sigma: self.plant.measurement_noise_sigma,
        };
        let noise = NoiseSpec {
            kind: self.noise.kind,
            sigma: self.noise.sigma,
            ar_coefficient: self.noise.ar_coefficient,
            fir_coefficients: self.noise.fir_coefficients.clone(),
            seed: self.base_seed,
        };
        noise.validate()?;

        let a = &self.analysis;
        if a.smoothing_window == 0 || a.smoothing_window > self.iterations.max(1) {
            return Err(Error::invalid(
                "smoothing_window",
                "must lie between 1 and the iteration count",
            ));
        }
        if a.tm_window == 0 || a.tm_window > self.iterations.max(1) {
            return Err(Error::invalid(
                "tm_window",
                "must lie between 1 and the iteration count",
            ));
        }
        if !(a.tm_slack_db.is_finite() && a.tm_slack_db >= 0.0) {
            return Err(Error::invalid("tm_slack_db", "must be >= 0"));
        }
        if a.freq_points < 2 {
            return Err(Error::invalid("freq_points", "must be at least 2"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("algorithms", "list at least one variant"));
        }

        let mut seen = HashSet::new();
        let mut variants = Vec::with_capacity(self.algorithms.len());
        let mut warnings = Vec::new();
        for section in &self.algorithms {
            if !is_safe_name(&section.name) {
                return Err(Error::invalid(
                    "algorithms.name",
                    format!("{:?} is not a valid file name stem", section.name),
                ));
            }
            if !seen.insert(section.name.as_str()) || section.name == "summary" {
                return Err(Error::invalid(
                    "algorithms.name",
                    format!("{:?} is duplicated or reserved", section.name),
                ));
            }
            let algorithm = self.algorithm_config(section, &noise)?;
            let config = ExperimentConfig {
                plant: plant.clone(),
                algorithm,
                noise: noise.clone(),
                iterations: self.iterations,
                ensemble_runs: self.ensemble_runs,
                base_seed: self.base_seed,
            };
            for w in config.validate()? {
                warnings.push(format!("{}: {w}", section.name));
            }
            variants.push(Variant {
                name: section.name.clone(),
                config,
            });
        }
        Ok(Experiment {
            name: self.name.clone(),
            variants,
            analysis: *a,
            out_dir: self.out_dir.clone(),
            warnings,
        })
    }

    fn algorithm_config(&self, s: &VariantSection, noise: &NoiseSpec) -> Result<AlgorithmConfig> {
        let length = self.filter_length;
        let fixed_mu = || {
            s.mu.ok_or_else(|| {
                Error::invalid(
                    "algorithms.mu",
                    format!("{}: fixed step size needs \"mu\"", s.name),
                )
            })
        };
        let mu_mode = s.mu_mode.unwrap_or(match s.kind {
            AlgorithmKind::Lms => MuMode::Fixed,
            _ => MuMode::AutoNormalized,
        });
        let mu = match mu_mode {
            MuMode::Fixed => fixed_mu()?,
            MuMode::AutoNormalized => s.mu.unwrap_or(1.0),
        };
        let config = match s.kind {
            AlgorithmKind::Lms => AlgorithmConfig {
                mu_mode,
                projection_order: s.projection_order.unwrap_or(1),
                delta: s.delta.unwrap_or(0.0),
                ..AlgorithmConfig::lms(length, mu)
            },
            AlgorithmKind::BndrLms => AlgorithmConfig {
                projection_order: s.projection_order.unwrap_or(2),
                delta: s.delta.unwrap_or(0.0),
                ..AlgorithmConfig::bndr_lms(length, mu_mode, mu)
            },
            AlgorithmKind::RAp => AlgorithmConfig::r_ap(
                length,
                s.projection_order.unwrap_or(DEFAULT_PROJECTION_ORDER),
                s.delta
                    .unwrap_or_else(|| default_delta(length, noise.stationary_variance())),
                mu_mode,
                mu,
            ),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Regularization default: `1e-6 * L * var(x)`.
pub fn default_delta(filter_length: usize, input_variance: f64) -> f64 {
    DELTA_SCALE * filter_length as f64 * input_variance
}

fn is_safe_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

#[cfg(test)]
mod tests {
    use super::*;

    const WHITE: &str = r#"{
        "name": "white",
        "plant": { "design": { "num_taps": 13, "cutoff_fn": 0.4 } },
        "noise": { "kind": "white", "sigma": 1.0 },
        "filter_length": 13,
        "iterations": 50,
        "ensemble_runs": 2,
        "base_seed": 1,
        "algorithms": [
            { "name": "lms", "kind": "lms", "mu": 0.05 },
            { "name": "bndr", "kind": "bndr_lms" },
            { "name": "rap", "kind": "r_ap" }
        ]
    }"#;

    #[test]
    fn resolves_defaults() {
        let exp = ExperimentFile::from_json(WHITE).unwrap().resolve().unwrap();
        assert_eq!(exp.variants.len(), 3);
        let rap = &exp.variants[2].config.algorithm;
        assert_eq!(rap.projection_order, 4);
        assert_eq!(rap.mu_mode, MuMode::AutoNormalized);
        assert!((rap.delta - 1.3e-5).abs() < 1e-18);
        let bndr = &exp.variants[1].config.algorithm;
        assert_eq!((bndr.projection_order, bndr.delta), (2, 0.0));
        assert_eq!(exp.analysis, AnalysisSection::default());
        assert!(exp.warnings.is_empty());
    }

    #[test]
    fn colored_delta_uses_process_variance() {
        let text = WHITE.replace(
            r#""kind": "white", "sigma": 1.0"#,
            r#""kind": "ar1_colored", "sigma": 1.0, "ar_coefficient": 0.9"#,
        );
        let exp = ExperimentFile::from_json(&text).unwrap().resolve().unwrap();
        let expected = 1e-6 * 13.0 / (1.0 - 0.81);
        assert!((exp.variants[2].config.algorithm.delta - expected).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = WHITE.replace(r#""base_seed": 1,"#, r#""base_seed": 1, "colour": 3,"#);
        assert!(ExperimentFile::from_json(&text).is_err());
    }

    #[test]
    fn zero_runs_rejected() {
        let text = WHITE.replace(r#""ensemble_runs": 2"#, r#""ensemble_runs": 0"#);
        let err = ExperimentFile::from_json(&text)
            .unwrap()
            .resolve()
            .unwrap_err();
        assert!(err.to_string().contains("ensemble_runs"), "{err}");
    }

    #[test]
    fn lms_needs_mu() {
        let text = WHITE.replace(r#""kind": "lms", "mu": 0.05"#, r#""kind": "lms""#);
        assert!(ExperimentFile::from_json(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn lms_rejects_auto_mode() {
        let text = WHITE.replace(
            r#""kind": "lms", "mu": 0.05"#,
            r#""kind": "lms", "mu": 0.05, "mu_mode": "auto_normalized""#,
        );
        assert!(ExperimentFile::from_json(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn duplicate_and_unsafe_names_rejected() {
        let dup = WHITE.replace(r#""name": "bndr""#, r#""name": "lms""#);
        assert!(ExperimentFile::from_json(&dup).unwrap().resolve().is_err());
        let unsafe_name = WHITE.replace(r#""name": "bndr""#, r#""name": "../x""#);
        assert!(ExperimentFile::from_json(&unsafe_name)
            .unwrap()
            .resolve()
            .is_err());
    }

    #[test]
    fn plant_needs_exactly_one_source() {
        let both = WHITE.replace(
            r#""plant": { "design""#,
            r#""plant": { "h": [1.0], "design""#,
        );
        assert!(ExperimentFile::from_json(&both).unwrap().resolve().is_err());
    }

    #[test]
    fn under_modeling_warns() {
        let text = WHITE.replace(r#""filter_length": 13"#, r#""filter_length": 9"#);
        let exp = ExperimentFile::from_json(&text).unwrap().resolve().unwrap();
        assert_eq!(exp.warnings.len(), 3);
    }
}
