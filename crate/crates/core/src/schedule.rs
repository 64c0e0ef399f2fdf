//! Pace and learning-rate schedules, both indexed by 0-based epoch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear pace `λ(t) = lambda0 + alpha·t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaceSchedule {
    pub lambda0: f64,
    pub alpha: f64,
}

impl PaceSchedule {
    /// Default pace for the current-state (student) curriculum.
    pub const PCL_DEFAULT: PaceSchedule = PaceSchedule {
        lambda0: 0.6,
        alpha: 0.006,
    };

    /// Default pace for the past-state (teacher) curriculum.
    pub const PCD_DEFAULT: PaceSchedule = PaceSchedule {
        lambda0: 0.8,
        alpha: 0.003,
    };

    pub fn new(lambda0: f64, alpha: f64) -> Result<Self> {
        let schedule = Self { lambda0, alpha };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0) || !self.lambda0.is_finite() {
            return Err(Error::Config(format!(
                "pace lambda0 must be positive, got {}",
                self.lambda0
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!(
                "pace alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Pace at 0-based epoch `epoch`.
    #[inline]
    pub fn pace_at(&self, epoch: usize) -> f64 {
        self.lambda0 + self.alpha * epoch as f64
    }
}

/// Linear warmup from `lr_init` to `lr_peak`, constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRateSchedule {
    pub lr_init: f64,
    pub lr_peak: f64,
    pub warmup_epochs: usize,
}

impl Default for LearningRateSchedule {
    fn default() -> Self {
        Self {
            lr_init: 1e-6,
            lr_peak: 1e-4,
            warmup_epochs: 10,
        }
    }
}

impl LearningRateSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_init > 0.0) || !(self.lr_peak > 0.0) {
            return Err(Error::Config(
                "learning rates must be positive".to_string(),
            ));
        }
        if self.lr_init > self.lr_peak {
            return Err(Error::Config(format!(
                "lr_init {} exceeds lr_peak {}",
                self.lr_init, self.lr_peak
            )));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch >= self.warmup_epochs {
            return self.lr_peak;
        }
        let progress = epoch as f64 / self.warmup_epochs as f64;
        self.lr_init + progress * (self.lr_peak - self.lr_init)
    }
}
