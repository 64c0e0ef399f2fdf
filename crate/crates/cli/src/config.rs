//! Experiment configuration files.
//!
//! ```toml
//! folds = 4
//! output_dir = "runs/desk"
//!
//! [data]
//! source = "synthetic"
//! n = 2000
//! d = 20
//! class_count = 2
//! class_separation = 2.0
//! noise_rate = 0.2
//! seed = 0
//!
//! [train]
//! epochs = 60
//! ```
//!
//! Every `[train]` key is optional and defaults to the reported
//! hyperparameters (see [`TrainConfig::default`]).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pspd::{Ablation, LabelColumn, SplitSpec, SyntheticSpec, TrainConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    /// Column name, or a 0-based index written as a number.
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default)]
    pub class_count: Option<usize>,
}

fn default_label_column() -> String {
    pspd::data::LABEL_COLUMN.to_string()
}

impl CsvSource {
    pub fn label_column(&self) -> LabelColumn {
        self.label_column.parse().unwrap_or_else(|never| match never {})
    }
}

/// Which labels the validation and test metrics are computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluateOn {
    /// Ground-truth labels when the data carries them, observed labels otherwise.
    #[default]
    Clean,
    Observed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    pub fn spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            train_frac: self.train,
            val_frac: self.val,
            test_frac: self.test,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Independent stratified resamples; fold `f` uses seed `train.seed + f`.
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub evaluate_on: EvaluateOn,
    #[serde(default)]
    pub split: SplitFractions,
    /// Also run the four hard/soft combinations of the two curricula in `ablate`.
    #[serde(default)]
    pub sweep_kinds: bool,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_folds() -> usize {
    4
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// Command-line overrides of config keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub ablation: Option<Ablation>,
    pub gamma: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            config.train.seed = seed;
        }
        if let Some(epochs) = self.epochs {
            config.train.epochs = epochs;
        }
        if let Some(ablation) = self.ablation {
            config.train.ablation = ablation;
        }
        if let Some(gamma) = self.gamma {
            config.train.gamma = gamma;
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
    }
}

/// A validated configuration and where it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub path: PathBuf,
    /// Hex SHA-256 of the effective configuration, see [`config_hash`].
    pub hash: String,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, (Option<usize>, String)> {
        toml::from_str(text).map_err(|e: toml::de::Error| {
            let line = e.span().map(|s| line_of_offset(text, s.start));
            (line, e.message().to_string())
        })
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.folds == 0 {
            return Err(("folds", "folds must be at least 1".to_string()));
        }
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate().map_err(|e| ("data", e.to_string()))?;
        }
        self.split.spec(0).validate().map_err(|e| ("split", e.to_string()))?;
        self.train.validate().map_err(|e| (train_key(&e.to_string()), e.to_string()))?;
        Ok(())
    }

    /// CSV paths resolved against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let DataSource::Csv(csv) = &mut self.data {
            if csv.path.is_relative() {
                csv.path = base.join(&csv.path);
            }
        }
    }
}

/// SHA-256 over the canonical JSON form of everything that affects results
/// (the output directory is left out).
pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut value = serde_json::to_value(config).expect("configs serialize");
    if let Some(map) = value.as_object_mut() {
        map.remove("output_dir");
    }
    let canonical = serde_json::to_string(&value).expect("json values serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Reads, overrides, validates and hashes a config file.
pub fn load_config(path: &Path, overrides: &Overrides) -> CliResult<LoadedConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        path: Some(path.to_path_buf()),
        line: None,
        message: format!("cannot read config: {e}"),
    })?;
    let anchored = |line: Option<usize>, message: String| CliError::Config {
        path: Some(path.to_path_buf()),
        line,
        message,
    };
    let mut config = ExperimentConfig::from_toml(&text).map_err(|(line, msg)| anchored(line, msg))?;
    overrides.apply(&mut config);
    config
        .validate()
        .map_err(|(key, msg)| anchored(find_key_line(&text, key), msg))?;
    let hash = config_hash(&config);
    let base = path.parent().unwrap_or(Path::new("."));
    config.resolve_paths(base);
    Ok(LoadedConfig {
        config,
        path: path.to_path_buf(),
        hash,
    })
}

const TRAIN_KEYS: [&str; 14] = [
    "epochs",
    "batch_size",
    "gamma",
    "pcl_kind",
    "pcd_kind",
    "pcl_schedule",
    "pcd_schedule",
    "lr_schedule",
    "adam",
    "hidden_layers",
    "seed",
    "ablation",
    "ece_bins",
    "frozen",
];

/// Best guess at the `[train]` key a validation message is about.
fn train_key(message: &str) -> &'static str {
    let nested = [
        ("lambda", "lambda0"),
        ("alpha", "alpha"),
        ("lr_", "lr_init"),
        ("warmup", "warmup_epochs"),
        ("beta", "beta1"),
        ("epsilon", "epsilon"),
    ];
    TRAIN_KEYS
        .iter()
        .copied()
        .find(|k| mentions(message, k))
        .or_else(|| nested.iter().find(|(m, _)| message.contains(m)).map(|&(_, k)| k))
        .unwrap_or("train")
}

/// Whether `message` names `key` as a whole word, with `_` or spaces.
pub(crate) fn mentions(message: &str, key: &str) -> bool {
    let spaced = key.replace('_', " ");
    [key, spaced.as_str()].iter().any(|k| {
        message.match_indices(k).any(|(i, _)| {
            let word = |c: char| c.is_alphanumeric() || c == '_';
            let before = message[..i].chars().next_back().is_none_or(|c| !word(c));
            let after = message[i + k.len()..].chars().next().is_none_or(|c| !word(c));
            before && after
        })
    })
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line of the first `key = ...` assignment or `[key]` /
/// `[parent.key]` table header, ignoring comments.
pub fn find_key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|raw| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            return header.trim().rsplit('.').next() == Some(key);
        }
        line.split('=').next().map(str::trim) == Some(key) && line.contains('=')
    })
    .map(|i| i + 1)
}
