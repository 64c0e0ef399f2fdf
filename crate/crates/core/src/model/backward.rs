use crate::error::{Error, Result};
use crate::numerics::{cross_entropy, kl_divergence, softmax_unchecked, DenseMatrix, ProbabilityVector};
use crate::scalar::Scalar;

use super::{ForwardScratch, ModelParameters};

/// Teacher term of the objective: `γ·φ_i·KL(p_teacher_i || p_student_i)`.
#[derive(Debug, Clone, Copy)]
pub struct Distillation<'a, T> {
    pub teacher_probs: &'a [ProbabilityVector<T>],
    pub weights: &'a [T],
    pub gamma: T,
}

/// Per-sample weighted objective over one batch:
///
/// `(1/N) Σ_i [ w_i·CE(p_i, y_i) + γ·φ_i·KL(t_i || p_i) ]`
///
/// where the distillation part is present only when a teacher is.
#[derive(Debug, Clone, Copy)]
pub struct WeightedObjective<'a, T> {
    pub labels: &'a [usize],
    pub sample_weights: &'a [T],
    pub distillation: Option<Distillation<'a, T>>,
}

impl<'a, T: Scalar> WeightedObjective<'a, T> {
    fn validate(&self, params: &ModelParameters<T>, batch: &DenseMatrix<T>) -> Result<()> {
        let n = batch.rows();
        if batch.cols() != params.input_size() {
            return Err(Error::invalid(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                params.input_size()
            )));
        }
        if self.labels.len() != n || self.sample_weights.len() != n {
            return Err(Error::invalid(format!(
                "batch has {n} rows but {} labels and {} sample weights",
                self.labels.len(),
                self.sample_weights.len()
            )));
        }
        let classes = params.output_size();
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        if let Some(d) = &self.distillation {
            if d.teacher_probs.len() != n || d.weights.len() != n {
                return Err(Error::invalid(format!(
                    "batch has {n} rows but {} teacher distributions and {} distillation weights",
                    d.teacher_probs.len(),
                    d.weights.len()
                )));
            }
            if d.teacher_probs.iter().any(|t| t.len() != classes) {
                return Err(Error::invalid("teacher distribution width differs from model output"));
            }
        }
        Ok(())
    }

    /// Distillation coefficient `γ·φ_i`, or `None` when the term vanishes.
    #[inline]
    fn distill_coefficient(&self, i: usize) -> Option<(T, &'a ProbabilityVector<T>)> {
        let d = self.distillation.as_ref()?;
        let c = d.gamma * d.weights[i];
        (c != T::zero()).then(|| (c, &d.teacher_probs[i]))
    }
}

/// Gradient of a [`WeightedObjective`] together with its value.
#[derive(Debug, Clone)]
pub struct GradientResult<T> {
    pub gradient: ModelParameters<T>,
    pub loss: T,
    /// Number of per-sample KL terms evaluated.
    pub kl_evaluations: usize,
}

/// Value of the objective without the gradient.
pub fn evaluate_objective<T: Scalar>(
    params: &ModelParameters<T>,
    batch: &DenseMatrix<T>,
    objective: &WeightedObjective<'_, T>,
) -> Result<T> {
    objective.validate(params, batch)?;
    let n = batch.rows();
    if n == 0 {
        return Ok(T::zero());
    }
    let mut scratch = ForwardScratch::default();
    let mut total = T::zero();
    for (i, x) in batch.iter_rows().enumerate() {
        params.forward_sample(x, &mut scratch);
        let p = softmax_unchecked(scratch.logits());
        total += sample_loss(objective, i, &p)?;
    }
    Ok(total / T::from_count(n))
}

fn sample_loss<T: Scalar>(
    objective: &WeightedObjective<'_, T>,
    i: usize,
    p: &ProbabilityVector<T>,
) -> Result<T> {
    let w = objective.sample_weights[i];
    let mut loss = if w != T::zero() {
        w * cross_entropy(p, objective.labels[i])?
    } else {
        T::zero()
    };
    if let Some((c, teacher)) = objective.distill_coefficient(i) {
        loss += c * kl_divergence(teacher, p)?;
    }
    Ok(loss)
}

/// Exact gradient of the objective with the sample and distillation
/// weights held constant.
///
/// Samples are accumulated in row order so the result is bitwise
/// reproducible.
pub fn backward<T: Scalar>(
    params: &ModelParameters<T>,
    batch: &DenseMatrix<T>,
    objective: &WeightedObjective<'_, T>,
) -> Result<GradientResult<T>> {
    objective.validate(params, batch)?;
    let mut gradient = ModelParameters::zeros(&params.layer_sizes())?;
    let n = batch.rows();
    if n == 0 {
        return Ok(GradientResult {
            gradient,
            loss: T::zero(),
            kl_evaluations: 0,
        });
    }
    let scale = T::one() / T::from_count(n);
    let layers = params.layers();
    let depth = layers.len();
    let mut scratch = ForwardScratch::default();
    let mut deltas: Vec<Vec<T>> = layers.iter().map(|l| vec![T::zero(); l.outputs()]).collect();
    let mut total = T::zero();
    let mut kl_evaluations = 0;

    for (i, x) in batch.iter_rows().enumerate() {
        params.forward_sample(x, &mut scratch);
        let p = softmax_unchecked(scratch.logits());
        total += sample_loss(objective, i, &p)?;

        // d/dz of w·CE is w·(p − onehot(y)); of c·KL(t||p) it is c·(p·Σt − t).
        let w = objective.sample_weights[i];
        let y = objective.labels[i];
        let out = &mut deltas[depth - 1];
        for (j, d) in out.iter_mut().enumerate() {
            let indicator = if j == y { T::one() } else { T::zero() };
            *d = w * (p[j] - indicator);
        }
        if let Some((c, teacher)) = objective.distill_coefficient(i) {
            kl_evaluations += 1;
            let mass: T = teacher.as_slice().iter().copied().sum();
            for (j, d) in out.iter_mut().enumerate() {
                *d += c * (p[j] * mass - teacher[j]);
            }
        }
        for d in out.iter_mut() {
            *d *= scale;
        }

        for k in (0..depth).rev() {
            if k + 1 < depth {
                // Propagate through layer k+1 and the ReLU of layer k.
                let (lower, upper) = deltas.split_at_mut(k + 1);
                let next = &upper[0];
                let cur = &mut lower[k];
                let next_weight = &layers[k + 1].weight;
                let activation = &scratch.activations[k + 1];
                for (u, d) in cur.iter_mut().enumerate() {
                    if activation[u] > T::zero() {
                        let mut acc = T::zero();
                        for (v, &dn) in next.iter().enumerate() {
                            acc += next_weight.get(v, u) * dn;
                        }
                        *d = acc;
                    } else {
                        *d = T::zero();
                    }
                }
            }
            let input: &[T] = if k == 0 { x } else { &scratch.activations[k] };
            let grad_layer = &mut gradient.layers[k];
            for (u, &d) in deltas[k].iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                for (g, &a) in grad_layer.weight.row_mut(u).iter_mut().zip(input) {
                    *g += d * a;
                }
                grad_layer.bias[u] += d;
            }
        }
    }

    Ok(GradientResult {
        gradient,
        loss: total * scale,
        kl_evaluations,
    })
}
