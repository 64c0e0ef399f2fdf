use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::ModelParameters;

/// Adaptive-moment hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamSettings {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| (0.0..1.0).contains(&b);
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::Config(format!(
                "adam betas must lie in [0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("adam epsilon must be positive".to_string()));
        }
        Ok(())
    }
}

/// Moment estimates mirroring the shape of the parameters they update.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    first_moment: ModelParameters<T>,
    second_moment: ModelParameters<T>,
    step_count: u64,
    beta1: T,
    beta2: T,
    epsilon: T,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ModelParameters<T>, settings: AdamSettings) -> Self {
        let zeros = ModelParameters::zeros(&params.layer_sizes())
            .expect("layer sizes of an existing model are valid");
        Self {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
            beta1: T::lit(settings.beta1),
            beta2: T::lit(settings.beta2),
            epsilon: T::lit(settings.epsilon),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &ModelParameters<T> {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &ModelParameters<T> {
        &self.second_moment
    }
}

/// One bias-corrected adaptive-moment update of `params` in place.
pub fn optimizer_step<T: Scalar>(
    params: &mut ModelParameters<T>,
    state: &mut OptimizerState<T>,
    gradient: &ModelParameters<T>,
    lr: T,
) -> Result<()> {
    if !params.same_shape(gradient) || !params.same_shape(&state.first_moment) {
        return Err(Error::invalid(
            "gradient or optimizer state shape differs from the parameters",
        ));
    }
    state.step_count += 1;
    let t = i32::try_from(state.step_count).unwrap_or(i32::MAX);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let one = T::one();
    let correction1 = one - b1.powi(t);
    let correction2 = one - b2.powi(t);

    let moments = state
        .first_moment
        .values_mut()
        .zip(state.second_moment.values_mut());
    for ((theta, &g), (m, v)) in params.values_mut().zip(gradient.values()).zip(moments) {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *theta -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
