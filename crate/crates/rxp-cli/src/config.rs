//! Run configuration: one JSON document drives generation, training, and
//! benchmarking. Every stochastic component's seed derives from the single
//! top-level `seed` via `derive_seed(seed, component_name)` with the
//! component names listed on [`RunConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rxp_core::detector::DetectorConfig;
use rxp_core::eval::ProtocolConfig;
use rxp_core::rxp::ZScoreMode;
use rxp_core::synth::DatasetSpec;

use crate::errors::{CliError, Result};

/// Residual-explainer knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RxpSettings {
    pub zscore_mode: ZScoreMode,
    pub epsilon: f64,
}

impl Default for RxpSettings {
    fn default() -> Self {
        Self {
            zscore_mode: ZScoreMode::default(),
            epsilon: rxp_core::rxp::DEFAULT_EPSILON,
        }
    }
}

/// Top-level run configuration.
///
/// Seed splitting (component names hashed against `seed`):
/// `"dataset"` for synthetic generation, `"split"` for the train/test
/// partition, `"train"` for network initialization + epoch shuffling, and
/// `"protocol"` for the resampling rounds and explainer seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Path to an existing dataset CSV; mutually exclusive with
    /// `dataset_spec`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Inline synthetic-dataset description, used when no CSV is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_spec: Option<DatasetSpec>,
    /// Fraction of rows used for training (the rest is the test split).
    pub train_fraction: f64,
    pub detector: DetectorConfig,
    pub rxp: RxpSettings,
    pub protocol: ProtocolConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            dataset_spec: None,
            train_fraction: 0.7,
            detector: DetectorConfig::default(),
            rxp: RxpSettings::default(),
            protocol: ProtocolConfig::default(),
            seed: 42,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading {}: {}", path.display(), e)))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("parsing {}: {}", path.display(), e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.is_some() && self.dataset_spec.is_some() {
            return Err(CliError::config(
                "config sets both `dataset` and `dataset_spec`; pick one",
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::config(format!(
                "train_fraction must be in (0,1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// The dataset description to generate from when no CSV is configured.
    pub fn spec_or_default(&self) -> DatasetSpec {
        self.dataset_spec.clone().unwrap_or_default()
    }
}
