use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

use super::Dataset;

/// Gaussian class clusters with injected label noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub class_count: usize,
    /// Distance between any two class means (unit-variance clusters).
    pub class_separation: f64,
    /// Fraction of labels flipped to a different class.
    pub noise_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::invalid("synthetic data needs at least 2 classes"));
        }
        if self.n < self.class_count {
            return Err(Error::invalid(format!(
                "n = {} is smaller than the class count {}",
                self.n, self.class_count
            )));
        }
        if self.d == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if !(self.class_separation > 0.0) || !self.class_separation.is_finite() {
            return Err(Error::invalid("class separation must be positive"));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::invalid(format!(
                "noise rate {} outside [0, 1)",
                self.noise_rate
            )));
        }
        Ok(())
    }

    /// Number of flipped labels: `floor(noise_rate · n)`.
    pub fn flipped_count(&self) -> usize {
        (self.noise_rate * self.n as f64).floor() as usize
    }
}

/// Class means pairwise `separation` apart: scaled basis vectors when the
/// dimension allows it, otherwise a regular polygon in the first two
/// coordinates (or evenly spaced points on a line when `d = 1`).
fn class_means(spec: &SyntheticSpec) -> Vec<Vec<f64>> {
    let (k, d, s) = (spec.class_count, spec.d, spec.class_separation);
    (0..k)
        .map(|c| {
            let mut mean = vec![0.0; d];
            if d >= k {
                mean[c] = s / std::f64::consts::SQRT_2;
            } else if d >= 2 {
                let radius = s / (2.0 * (std::f64::consts::PI / k as f64).sin());
                let angle = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
                mean[0] = radius * angle.cos();
                mean[1] = radius * angle.sin();
            } else {
                mean[0] = s * c as f64;
            }
            mean
        })
        .collect()
}

/// Samples a noisy dataset. Sample `i` belongs to class `i mod K`; exactly
/// `floor(noise_rate · n)` randomly chosen labels are moved to a uniformly
/// drawn different class. Clean labels are attached to the result.
pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<Dataset<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means = class_means(spec);
    let clean: Vec<usize> = (0..spec.n).map(|i| i % spec.class_count).collect();

    let mut data = Vec::with_capacity(spec.n * spec.d);
    for &y in &clean {
        for &m in &means[y] {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(T::lit(m + z));
        }
    }

    let mut order: Vec<usize> = (0..spec.n).collect();
    order.shuffle(&mut rng);
    let mut labels = clean.clone();
    for &i in &order[..spec.flipped_count()] {
        let shift = 1 + rng.random_range(0..spec.class_count - 1);
        labels[i] = (clean[i] + shift) % spec.class_count;
    }

    let features = DenseMatrix::new(spec.n, spec.d, data)?;
    Dataset::new(features, labels, spec.class_count)?.with_clean_labels(clean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(noise_rate: f64) -> SyntheticSpec {
        SyntheticSpec {
            n: 1000,
            d: 5,
            class_count: 2,
            class_separation: 2.0,
            noise_rate,
            seed: 17,
        }
    }

    #[test]
    fn noiseless_labels_are_clean() {
        let d: Dataset<f64> = generate_synthetic(&spec(0.0)).unwrap();
        assert_eq!(d.labels(), d.clean_labels().unwrap());
    }

    #[test]
    fn flips_exactly_floor_of_rate() {
        let d: Dataset<f64> = generate_synthetic(&spec(0.2)).unwrap();
        assert_eq!(d.noisy_indices().len(), 200);
        let s = SyntheticSpec { n: 999, ..spec(0.2) };
        let d: Dataset<f64> = generate_synthetic(&s).unwrap();
        assert_eq!(d.noisy_indices().len(), 199);
    }

    #[test]
    fn multi_class_flips_move_to_other_classes() {
        let s = SyntheticSpec {
            class_count: 4,
            d: 2,
            ..spec(0.3)
        };
        let d: Dataset<f64> = generate_synthetic(&s).unwrap();
        assert_eq!(d.noisy_indices().len(), 300);
        assert_eq!(d.class_count(), 4);
    }

    #[test]
    fn same_seed_same_data() {
        let a: Dataset<f64> = generate_synthetic(&spec(0.2)).unwrap();
        let b: Dataset<f64> = generate_synthetic(&spec(0.2)).unwrap();
        assert_eq!(a, b);
        let c: Dataset<f64> = generate_synthetic(&SyntheticSpec { seed: 18, ..spec(0.2) }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn means_are_separated() {
        for (d, k) in [(5, 3), (2, 5), (1, 3)] {
            let s = SyntheticSpec {
                d,
                class_count: k,
                class_separation: 1.7,
                ..spec(0.0)
            };
            let means = class_means(&s);
            let dist = |a: &[f64], b: &[f64]| {
                a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
            };
            assert!((dist(&means[0], &means[1]) - 1.7).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(generate_synthetic::<f64>(&spec(1.0)).is_err());
        assert!(generate_synthetic::<f64>(&spec(-0.1)).is_err());
        assert!(generate_synthetic::<f64>(&SyntheticSpec { n: 1, ..spec(0.0) }).is_err());
        assert!(generate_synthetic::<f64>(&SyntheticSpec { class_separation: 0.0, ..spec(0.0) }).is_err());
    }
}
