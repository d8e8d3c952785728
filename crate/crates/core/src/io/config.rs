//! Run configuration: a TOML file of one-level sections. Every key has a
//! default, so an empty file is valid; unknown keys are rejected by name.

use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentWeights;
use crate::detector::DetectorConfig;
use crate::editor::{EditConfig, EditWeights, SmoothnessForm};
use crate::error::{Error, Result};
use crate::residual::SampleConfig;
use crate::sim::episode::{ControlConfig, DemoConfig, FailureConfig};
use crate::sim::{BenchmarkConfig, EpisodeConfig, PolicyConfig, SceneConfig};

/// `EditConfig` with its weights flattened into the section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EditSection {
    pub n_points: usize,
    pub lambda_s: f64,
    pub lambda_e: f64,
    pub lambda_qf: f64,
    pub lambda_qs: f64,
    pub lambda_qe: f64,
    pub hard_endpoint: bool,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub smoothness: SmoothnessForm,
}

impl From<EditConfig> for EditSection {
    fn from(c: EditConfig) -> Self {
        let w = c.weights;
        EditSection {
            n_points: c.n_points,
            lambda_s: w.lambda_s,
            lambda_e: w.lambda_e,
            lambda_qf: w.lambda_qf,
            lambda_qs: w.lambda_qs,
            lambda_qe: w.lambda_qe,
            hard_endpoint: c.hard_endpoint,
            max_iters: c.max_iters,
            grad_tol: c.grad_tol,
            smoothness: c.smoothness,
        }
    }
}

impl From<EditSection> for EditConfig {
    fn from(s: EditSection) -> Self {
        EditConfig {
            n_points: s.n_points,
            weights: EditWeights {
                lambda_s: s.lambda_s,
                lambda_e: s.lambda_e,
                lambda_qf: s.lambda_qf,
                lambda_qs: s.lambda_qs,
                lambda_qe: s.lambda_qe,
            },
            hard_endpoint: s.hard_endpoint,
            max_iters: s.max_iters,
            grad_tol: s.grad_tol,
            smoothness: s.smoothness,
        }
    }
}

impl Default for EditSection {
    fn default() -> Self {
        EditConfig::default().into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: String,
    pub scene: SceneConfig,
    pub policy: PolicyConfig,
    pub detector: DetectorConfig,
    pub alignment: AlignmentWeights,
    pub edit: EditSection,
    pub samples: SampleConfig,
    /// Gains, body inertia and control periods.
    pub impedance: ControlConfig,
    pub failure: FailureConfig,
    pub demo: DemoConfig,
    pub benchmark: BenchmarkConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_episode_config(&EpisodeConfig::default())
    }
}

impl RunConfig {
    pub fn from_episode_config(c: &EpisodeConfig) -> Self {
        RunConfig {
            seed: 0,
            output_dir: "out".to_string(),
            scene: c.scene,
            policy: c.policy,
            detector: c.detector,
            alignment: c.alignment,
            edit: c.edit.into(),
            samples: c.samples,
            impedance: c.control,
            failure: c.failure,
            demo: c.demo,
            benchmark: BenchmarkConfig::default(),
        }
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            scene: self.scene,
            policy: self.policy,
            detector: self.detector,
            alignment: self.alignment,
            edit: self.edit.into(),
            samples: self.samples,
            control: self.impedance,
            failure: self.failure,
            demo: self.demo,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.episode_config().validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key with its resolved value.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are plain TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
        let c = RunConfig::default();
        assert_eq!(c.episode_config(), EpisodeConfig::default());
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut c = RunConfig::default();
        c.seed = 7;
        c.edit.n_points = 30;
        c.edit.smoothness = SmoothnessForm::Absolute;
        c.detector.threshold_c = 4.25;
        c.benchmark.n_grid = vec![10, 40];
        let text = c.to_toml();
        assert!(text.contains("[impedance]"));
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_toml("[edit]\nlambda_x = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("lambda_x"), "{err}");
        let err = RunConfig::from_toml("colour = 1\n").unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        assert!(RunConfig::from_toml("[edit]\nn_points = 1\n").is_err());
    }
}
