//! Fully connected ReLU classifier with hand-written gradients.

mod adam;
mod backward;
mod io;

pub use adam::{optimizer_step, AdamSettings, OptimizerState};
pub use backward::{backward, evaluate_objective, Distillation, GradientResult, WeightedObjective};
pub use io::{load_parameters, read_parameters, save_parameters, write_parameters, PARAMS_FORMAT};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

/// One affine layer. `weight` is `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weight: DenseMatrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: DenseMatrix::zeros(outputs, inputs),
            bias: vec![T::zero(); outputs],
        }
    }

    #[inline]
    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    /// `out = W·x + b`
    #[inline]
    fn affine(&self, x: &[T], out: &mut [T]) {
        for (o, (row, &b)) in out
            .iter_mut()
            .zip(self.weight.iter_rows().zip(&self.bias))
        {
            let mut acc = b;
            for (&w, &xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *o = acc;
        }
    }
}

/// Parameters of the classifier: affine layers with ReLU between them and
/// identity on the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters<T> {
    layers: Vec<DenseLayer<T>>,
}

impl<T: Scalar> ModelParameters<T> {
    /// Validates that layer dimensions chain and every value is finite.
    pub fn new(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a model needs at least one layer"));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.outputs() {
                return Err(Error::invalid(format!(
                    "layer {k}: bias has {} entries for {} outputs",
                    layer.bias.len(),
                    layer.outputs()
                )));
            }
            if k > 0 && layer.inputs() != layers[k - 1].outputs() {
                return Err(Error::invalid(format!(
                    "layer {k} expects {} inputs but layer {} produces {}",
                    layer.inputs(),
                    k - 1,
                    layers[k - 1].outputs()
                )));
            }
        }
        let params = Self { layers };
        if !params.is_finite() {
            return Err(Error::invalid("model parameters contain non-finite values"));
        }
        Ok(params)
    }

    /// All-zero parameters for `sizes = [inputs, hidden.., outputs]`.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(Self {
            layers: sizes
                .windows(2)
                .map(|w| DenseLayer::zeros(w[0], w[1]))
                .collect(),
        })
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights and zero biases.
    pub fn glorot_uniform(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut params = Self::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut params.layers {
            let limit = (6.0 / (layer.inputs() + layer.outputs()) as f64).sqrt();
            for w in layer.weight.as_mut_slice() {
                *w = T::lit(rng.random_range(-limit..=limit));
            }
        }
        Ok(params)
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    /// `[inputs, hidden.., outputs]`
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs())
            .chain(self.layers.iter().map(DenseLayer::outputs))
            .collect()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weight.shape() == b.weight.shape())
    }

    /// Every value in canonical order: per layer, weights row-major then bias.
    pub fn values(&self) -> impl Iterator<Item = &T> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weight.as_slice().iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.as_mut_slice().iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.values().copied().collect()
    }

    /// Rebuilds parameters of the given shape from [`Self::to_flat`] output.
    pub fn from_flat(sizes: &[usize], flat: &[T]) -> Result<Self> {
        let mut params = Self::zeros(sizes)?;
        let expected = params.parameter_count();
        if flat.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} parameter values, got {}",
                flat.len()
            )));
        }
        for (dst, &src) in params.values_mut().zip(flat) {
            *dst = src;
        }
        if !params.is_finite() {
            return Err(Error::invalid("model parameters contain non-finite values"));
        }
        Ok(params)
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    /// Bitwise equality of every parameter (distinguishes `0.0` from `-0.0`).
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.same_shape(other)
            && self
                .values()
                .zip(other.values())
                .all(|(a, b)| a.as_f64().to_bits() == b.as_f64().to_bits())
    }

    /// Logits for one sample; `scratch` is reused between calls.
    pub(crate) fn forward_sample(&self, x: &[T], scratch: &mut ForwardScratch<T>) {
        let last = self.layers.len() - 1;
        scratch.ensure(self);
        for (k, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = scratch.activations.split_at_mut(k + 1);
            let input: &[T] = if k == 0 { x } else { &prev[k] };
            let out = &mut rest[0];
            layer.affine(input, out);
            if k < last {
                for v in out.iter_mut() {
                    *v = v.max(T::zero());
                }
            }
        }
    }

    /// Logits for every row of `batch`.
    pub fn forward(&self, batch: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if batch.cols() != self.input_size() {
            return Err(Error::invalid(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.input_size()
            )));
        }
        let mut scratch = ForwardScratch::default();
        let mut logits = DenseMatrix::zeros(batch.rows(), self.output_size());
        for (i, x) in batch.iter_rows().enumerate() {
            self.forward_sample(x, &mut scratch);
            logits.row_mut(i).copy_from_slice(scratch.logits());
        }
        Ok(logits)
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::invalid(
            "layer sizes need at least an input and an output size",
        ));
    }
    if sizes.contains(&0) {
        return Err(Error::invalid("layer sizes must be positive"));
    }
    Ok(())
}

/// Per-layer outputs of the most recent forward pass. `activations[0]` is
/// unused; `activations[k + 1]` holds the output of layer `k` (post-ReLU for
/// hidden layers, raw logits for the last).
#[derive(Debug, Default)]
pub(crate) struct ForwardScratch<T> {
    pub(crate) activations: Vec<Vec<T>>,
}

impl<T: Scalar> ForwardScratch<T> {
    fn ensure(&mut self, params: &ModelParameters<T>) {
        if self.activations.len() != params.layers.len() + 1 {
            self.activations = std::iter::once(Vec::new())
                .chain(params.layers.iter().map(|l| vec![T::zero(); l.outputs()]))
                .collect();
        }
    }

    pub(crate) fn logits(&self) -> &[T] {
        &self.activations[self.activations.len() - 1]
    }
}

/// Frozen copy of the student taken at the end of an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherSnapshot<T> {
    params: ModelParameters<T>,
    source_epoch: usize,
}

impl<T: Scalar> TeacherSnapshot<T> {
    pub fn params(&self) -> &ModelParameters<T> {
        &self.params
    }

    /// Epoch at whose end the copy was taken.
    pub fn source_epoch(&self) -> usize {
        self.source_epoch
    }
}

/// Deep-copies the student parameters into a teacher.
pub fn snapshot<T: Scalar>(params: &ModelParameters<T>, epoch: usize) -> TeacherSnapshot<T> {
    TeacherSnapshot {
        params: params.clone(),
        source_epoch: epoch,
    }
}
