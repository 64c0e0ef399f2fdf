//! Self-paced regularizers and their closed-form minimizers.
//!
//! For a per-sample loss `l` and pace `λ`, the sample weight is the
//! minimizer over `w ∈ [0, 1]` of `w·l + R_λ(w)`:
//!
//! | kind | `R_λ(w)`          | minimizer (`l < λ`) | minimizer (`l ≥ λ`) |
//! |------|-------------------|---------------------|---------------------|
//! | Hard | `-λw`             | `1`                 | `0`                 |
//! | Soft | `λ(w²/2 - w)`     | `1 - l/λ`           | `0`                 |
//!
//! [`oracle_weight`] minimizes the same objective by exhaustive grid search
//! and exists to cross-check the closed forms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Grid size used by [`oracle_weight`] callers that have no reason to pick another.
pub const DEFAULT_ORACLE_STEPS: usize = 100_000;

/// Minimum grid size accepted by [`oracle_weight`].
pub const MIN_ORACLE_STEPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularizerKind {
    /// Binary selection: keep a sample iff its loss is below the pace.
    Hard,
    /// Linear down-weighting of samples as their loss approaches the pace.
    Soft,
}

impl RegularizerKind {
    pub const ALL: [RegularizerKind; 2] = [RegularizerKind::Hard, RegularizerKind::Soft];
}

impl fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegularizerKind::Hard => "hard",
            RegularizerKind::Soft => "soft",
        })
    }
}

impl FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hard" => Ok(RegularizerKind::Hard),
            "soft" => Ok(RegularizerKind::Soft),
            other => Err(Error::invalid(format!("unknown regularizer kind `{other}`"))),
        }
    }
}

/// A minimizing weight together with the objective value `w·l + R_λ(w)` it attains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSolution<T> {
    pub weight: T,
    pub objective_value: T,
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "pace must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

fn check_loss<T: Scalar>(loss: T) -> Result<()> {
    if !(loss >= T::zero()) || !loss.is_finite() {
        return Err(Error::invalid(format!(
            "loss must be non-negative and finite, got {loss}"
        )));
    }
    Ok(())
}

#[inline]
fn value_unchecked<T: Scalar>(kind: RegularizerKind, w: T, lambda: T) -> T {
    match kind {
        RegularizerKind::Hard => -lambda * w,
        RegularizerKind::Soft => lambda * (w * w * T::lit(0.5) - w),
    }
}

/// `R_λ(w)`: `-λw` for Hard, `λ(w²/2 - w)` for Soft.
pub fn regularizer_value<T: Scalar>(kind: RegularizerKind, w: T, lambda: T) -> Result<T> {
    if !(w >= T::zero() && w <= T::one()) {
        return Err(Error::invalid(format!("weight {w} outside [0, 1]")));
    }
    check_lambda(lambda)?;
    Ok(value_unchecked(kind, w, lambda))
}

/// Exact minimizer of `w·loss + R_λ(w)` over `[0, 1]`.
///
/// The boundary `loss == λ` maps to weight 0 for both kinds.
pub fn closed_form_weight<T: Scalar>(
    kind: RegularizerKind,
    loss: T,
    lambda: T,
) -> Result<WeightSolution<T>> {
    check_loss(loss)?;
    check_lambda(lambda)?;
    let weight = if loss < lambda {
        match kind {
            RegularizerKind::Hard => T::one(),
            RegularizerKind::Soft => T::one() - loss / lambda,
        }
    } else {
        T::zero()
    };
    Ok(WeightSolution {
        weight,
        objective_value: weight * loss + value_unchecked(kind, weight, lambda),
    })
}

/// Minimizes `w·loss + R_λ(w)` by evaluating it at `grid_steps + 1`
/// equispaced points of `[0, 1]`. The first minimizing point wins.
pub fn oracle_weight<T: Scalar>(
    kind: RegularizerKind,
    loss: T,
    lambda: T,
    grid_steps: usize,
) -> Result<WeightSolution<T>> {
    check_loss(loss)?;
    check_lambda(lambda)?;
    if grid_steps < MIN_ORACLE_STEPS {
        return Err(Error::invalid(format!(
            "oracle grid needs at least {MIN_ORACLE_STEPS} steps, got {grid_steps}"
        )));
    }
    let steps = T::from_count(grid_steps);
    let mut best = WeightSolution {
        weight: T::zero(),
        objective_value: value_unchecked(kind, T::zero(), lambda),
    };
    for k in 1..=grid_steps {
        let w = T::from_count(k) / steps;
        let value = w * loss + value_unchecked(kind, w, lambda);
        if value < best.objective_value {
            best = WeightSolution {
                weight: w,
                objective_value: value,
            };
        }
    }
    Ok(best)
}
