use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

use super::Dataset;

/// Train/validation/test fractions and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            train_frac,
            val_frac,
            test_frac,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 70 / 15 / 15.
    pub fn standard(seed: u64) -> Self {
        Self {
            train_frac: 0.7,
            val_frac: 0.15,
            test_frac: 0.15,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = self.fractions();
        if fracs.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::invalid("split fractions must all be positive"));
        }
        let total: f64 = fracs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split fractions sum to {total}, expected 1")));
        }
        Ok(())
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train_frac, self.val_frac, self.test_frac]
    }
}

/// Row indices of each part, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits<T> {
    pub train: Dataset<T>,
    pub val: Dataset<T>,
    pub test: Dataset<T>,
    pub indices: SplitIndices,
}

/// Stratified three-way split.
///
/// Classes are allocated in index order. Each class gives every part the
/// floor or ceiling of `size·fraction`; the leftover units go to the parts
/// furthest behind their running target `fraction·(samples seen)`. Every
/// class count and every part size therefore stays within one sample of
/// its ideal.
pub fn split<T: Scalar>(dataset: &Dataset<T>, spec: &SplitSpec) -> Result<Splits<T>> {
    spec.validate()?;
    let counts = dataset.class_counts();
    if let Some((class, &n)) = counts.iter().enumerate().find(|(_, &n)| n > 0 && n < 3) {
        return Err(Error::invalid(format!(
            "class {class} has {n} samples; stratified splitting needs at least 3"
        )));
    }

    let n = dataset.len();
    let fracs = spec.fractions();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.class_count()];
    for (i, &y) in dataset.labels().iter().enumerate() {
        by_class[y].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    let mut seen = 0usize;
    for mut members in by_class {
        let size = members.len();
        if size == 0 {
            continue;
        }
        members.shuffle(&mut rng);
        seen += size;
        let quotas = fracs.map(|f| f * size as f64);
        let mut alloc = quotas.map(|q| q.floor() as usize);
        // Shortfall against the running target if only the floors were taken.
        let behind: [f64; 3] =
            std::array::from_fn(|k| (parts[k].len() + alloc[k]) as f64 - fracs[k] * seen as f64);
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| behind[a].total_cmp(&behind[b]).then(a.cmp(&b)));
        let extra = size - alloc.iter().sum::<usize>();
        for &k in order.iter().take(extra) {
            alloc[k] += 1;
        }
        let mut start = 0;
        for (k, &count) in alloc.iter().enumerate() {
            parts[k].extend_from_slice(&members[start..start + count]);
            start += count;
        }
    }
    if parts.iter().any(Vec::is_empty) {
        return Err(Error::invalid(format!(
            "{n} samples are too few for a non-empty {fracs:?} split"
        )));
    }

    for part in &mut parts {
        part.sort_unstable();
    }
    let [train, val, test] = parts;
    Ok(Splits {
        train: dataset.subset(&train),
        val: dataset.subset(&val),
        test: dataset.subset(&test),
        indices: SplitIndices { train, val, test },
    })
}

/// Per-column affine standardization fitted on one matrix and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    means: Vec<T>,
    /// `None` marks a column whose variance is below the clamp; it maps to 0.
    scales: Vec<Option<T>>,
}

impl<T: Scalar> Standardizer<T> {
    const VARIANCE_FLOOR: f64 = 1e-12;

    /// Population mean and variance of every column.
    pub fn fit(features: &DenseMatrix<T>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::invalid("cannot fit standardization on zero rows"));
        }
        let n = T::from_count(features.rows());
        let cols = features.cols();
        let mut means = vec![T::zero(); cols];
        for row in features.iter_rows() {
            for (m, &v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![T::zero(); cols];
        for row in features.iter_rows() {
            for ((s, &v), &m) in vars.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let scales = vars
            .into_iter()
            .map(|s| {
                let var = s / n;
                (var >= T::lit(Self::VARIANCE_FLOOR)).then(|| var.sqrt())
            })
            .collect();
        Ok(Self { means, scales })
    }

    pub fn transform(&self, features: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if features.cols() != self.means.len() {
            return Err(Error::invalid(format!(
                "standardizer fitted on {} columns, got {}",
                self.means.len(),
                features.cols()
            )));
        }
        let mut out = features.clone();
        for r in 0..out.rows() {
            for ((v, &m), scale) in out.row_mut(r).iter_mut().zip(&self.means).zip(&self.scales) {
                *v = match scale {
                    Some(s) => (*v - m) / *s,
                    None => T::zero(),
                };
            }
        }
        Ok(out)
    }

    pub fn apply(&self, dataset: &Dataset<T>) -> Result<Dataset<T>> {
        dataset.with_features(self.transform(dataset.features())?)
    }

    /// Fits on the training part and applies the same transform to all three.
    pub fn standardize_splits(splits: &Splits<T>) -> Result<Splits<T>> {
        let s = Self::fit(splits.train.features())?;
        Ok(Splits {
            train: s.apply(&splits.train)?,
            val: s.apply(&splits.val)?,
            test: s.apply(&splits.test)?,
            indices: splits.indices.clone(),
        })
    }
}
