use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::DEFAULT_ECE_BINS;
use crate::model::AdamSettings;
use crate::regularizer::RegularizerKind;
use crate::schedule::{LearningRateSchedule, PaceSchedule};

/// Which curriculum channels are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// Plain cross-entropy: every `w = 1`, no distillation.
    Baseline,
    /// Self-paced sample weights, no distillation.
    PclOnly,
    /// Every `w = 1`, self-paced distillation.
    PcdOnly,
    Full,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Baseline,
        Ablation::PclOnly,
        Ablation::PcdOnly,
        Ablation::Full,
    ];

    pub fn uses_pcl(self) -> bool {
        matches!(self, Ablation::PclOnly | Ablation::Full)
    }

    pub fn uses_pcd(self) -> bool {
        matches!(self, Ablation::PcdOnly | Ablation::Full)
    }

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Baseline => "baseline",
            Ablation::PclOnly => "pcl_only",
            Ablation::PcdOnly => "pcd_only",
            Ablation::Full => "full",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown ablation `{s}` (expected baseline, pcl_only, pcd_only or full)"
                ))
            })
    }
}

/// Every hyperparameter of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the distillation term.
    pub gamma: f64,
    pub pcl_kind: RegularizerKind,
    pub pcd_kind: RegularizerKind,
    pub pcl_schedule: PaceSchedule,
    pub pcd_schedule: PaceSchedule,
    pub lr_schedule: LearningRateSchedule,
    pub adam: AdamSettings,
    pub hidden_layers: Vec<usize>,
    pub seed: u64,
    pub ablation: Ablation,
    /// Confidence bins for the validation ECE.
    pub ece_bins: usize,
    /// Diagnostic mode: run the curriculum but never update parameters.
    pub frozen: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 180,
            batch_size: 32,
            gamma: 1.0,
            pcl_kind: RegularizerKind::Hard,
            pcd_kind: RegularizerKind::Soft,
            pcl_schedule: PaceSchedule::PCL_DEFAULT,
            pcd_schedule: PaceSchedule::PCD_DEFAULT,
            lr_schedule: LearningRateSchedule::default(),
            adam: AdamSettings::default(),
            hidden_layers: vec![32, 32],
            seed: 0,
            ablation: Ablation::Full,
            ece_bins: DEFAULT_ECE_BINS,
            frozen: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".to_string()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".to_string()));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!(
                "gamma must be non-negative and finite, got {}",
                self.gamma
            )));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".to_string()));
        }
        if self.ece_bins == 0 {
            return Err(Error::Config("ece_bins must be at least 1".to_string()));
        }
        self.pcl_schedule.validate()?;
        self.pcd_schedule.validate()?;
        self.lr_schedule.validate()?;
        self.adam.validate()
    }

    /// `[inputs, hidden.., classes]`
    pub fn layer_sizes(&self, inputs: usize, classes: usize) -> Vec<usize> {
        std::iter::once(inputs)
            .chain(self.hidden_layers.iter().copied())
            .chain(std::iter::once(classes))
            .collect()
    }

    /// Distillation weight actually applied under the current ablation.
    pub fn effective_gamma(&self) -> f64 {
        if self.ablation.uses_pcd() {
            self.gamma
        } else {
            0.0
        }
    }
}
