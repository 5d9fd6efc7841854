use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::base::BaseConfig;
use crate::bench::ShiftConfig;
use crate::embed::EmbeddingConfig;
use crate::error::{Error, Result};
use crate::seeds;
use crate::select::ThresholdRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Stablemil,
    BaseOnly,
    AllInstanceEmbedding,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Stablemil, Method::BaseOnly, Method::AllInstanceEmbedding];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Stablemil => "stablemil",
            Method::BaseOnly => "base_only",
            Method::AllInstanceEmbedding => "all_instance_embedding",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    #[default]
    Mifv,
    /// Labels bags from instance truths; needs fully annotated data.
    Oracle,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Selection-variable split with `a` drawn from `shift.a_range`.
    #[default]
    Biased,
    /// Every bag enters training with probability 1/2, independent of background.
    Iid,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub rule: ThresholdRule,
    /// Skip the threshold procedure and use this value.
    pub fixed_tau: Option<f64>,
    /// Score candidates against at most this many negative bags.
    pub subsample_negatives: Option<usize>,
}

/// Everything an experiment depends on besides the root seed's substreams.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub repetitions: usize,
    pub seed: u64,
    pub base_classifier: BaseKind,
    pub split: SplitMode,
    /// Fixed train/test files; when both are set the generator is not used.
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub shift: ShiftConfig,
    pub base: BaseConfig,
    pub embedding: EmbeddingConfig,
    pub selection: SelectionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            repetitions: 30,
            seed: 0,
            base_classifier: BaseKind::Mifv,
            split: SplitMode::Biased,
            train_path: None,
            test_path: None,
            shift: ShiftConfig::setting1(),
            base: BaseConfig::default(),
            embedding: EmbeddingConfig::default(),
            selection: SelectionConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_setting(setting: u32, seed: u64) -> Result<Self> {
        Ok(Self { seed, shift: ShiftConfig::setting(setting)?, ..Self::default() })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("at least one method is required".into()));
        }
        if self.train_path.is_some() != self.test_path.is_some() {
            return Err(Error::InvalidConfig("train_path and test_path must be given together".into()));
        }
        if self.embedding.k == 0 {
            return Err(Error::InvalidConfig("embedding.k must be positive".into()));
        }
        if self.base.gmm.components == 0 {
            return Err(Error::InvalidConfig("base.gmm.components must be positive".into()));
        }
        if !(self.base.svm.c > 0.0) || self.embedding.grid.c_values.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::InvalidConfig("SVM C values must be positive".into()));
        }
        if self.embedding.grid.folds < 2 || self.embedding.grid.c_values.is_empty() || self.embedding.grid.gamma_exponents.is_empty() {
            return Err(Error::InvalidConfig("embedding grid needs >= 2 folds and nonempty C/gamma lists".into()));
        }
        if self.train_path.is_none() {
            self.shift.validate()?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON rendering.
    pub fn hash(&self) -> String {
        seeds::sha256_hex(crate::fmt::to_canonical_json(self).expect("config serializes").as_bytes())
    }
}
