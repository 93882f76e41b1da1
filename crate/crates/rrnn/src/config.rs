//! Run configuration files (TOML). Every section is optional and unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use rrnn_core::search::LambdaSearchConfig;
use rrnn_core::train::{TrainConfig, DEFAULT_EPSILON};
use serde::{Deserialize, Serialize};

use crate::dataset::DEFAULT_MIN_TOKENS;
use crate::error::{Error, Result};
use crate::synth::SynthConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub train: TrainConfig,
    pub penalty: PenaltySection,
    pub search: LambdaSearchConfig,
    /// Search over `search.max_restarts` sampled hyperparameter draws
    /// instead of `train` alone.
    pub random_search: bool,
    pub synth: SynthConfig,
    pub model: ModelSection,
    pub data: DataSection,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            train: TrainConfig::default(),
            penalty: PenaltySection::default(),
            search: LambdaSearchConfig::default(),
            random_search: false,
            synth: SynthConfig::default(),
            model: ModelSection::default(),
            data: DataSection::default(),
            paths: PathsSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltySection {
    /// Regularization strength; when absent the loss/penalty balance at
    /// initialization is used.
    pub lambda: Option<f64>,
    pub epsilon: f64,
}

impl Default for PenaltySection {
    fn default() -> Self {
        PenaltySection {
            lambda: None,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub num_wfsas: usize,
    /// Main transitions per WFSA.
    pub states: usize,
    /// Per-WFSA lengths; overrides `num_wfsas` and `states` when set.
    pub wfsa_lengths: Option<Vec<usize>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            num_wfsas: 8,
            states: 4,
            wfsa_lengths: None,
        }
    }
}

impl ModelSection {
    pub fn lengths(&self) -> Vec<usize> {
        self.wfsa_lengths
            .clone()
            .unwrap_or_else(|| vec![self.states; self.num_wfsas])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub min_tokens: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            min_tokens: DEFAULT_MIN_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub data: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|source| Error::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.train.validate()?;
        self.search.validate()?;
        self.synth.validate()?;
        if let Some(lambda) = self.penalty.lambda {
            rrnn_core::PenaltyConfig::new(lambda)?;
        }
        if !(self.penalty.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon {} must be nonnegative", self.penalty.epsilon)));
        }
        let lengths = self.model.lengths();
        if lengths.is_empty() || lengths.contains(&0) {
            return Err(Error::Config("every WFSA needs at least one transition".into()));
        }
        Ok(())
    }
}
