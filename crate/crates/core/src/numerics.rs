//! Dense matrices and numerically stable probability primitives.

use std::ops::Index;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower clamp applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite matrix entry at row {}, column {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("rows have differing lengths"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Gathers the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<T: Scalar> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;

    fn index(&self, (row, col): (usize, usize)) -> &T {
        &self.data[row * self.cols + col]
    }
}

/// Categorical distribution over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector<T> {
    probs: Vec<T>,
}

fn sum_tolerance<T: Scalar>(len: usize) -> T {
    T::lit(1e-9).max(T::epsilon() * T::from_count(4 * len.max(1)))
}

impl<T: Scalar> ProbabilityVector<T> {
    /// Validates that entries lie in [0, 1] and sum to one.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("probability vector is empty"));
        }
        if probs
            .iter()
            .any(|&p| !p.is_finite() || p < T::zero() || p > T::one())
        {
            return Err(Error::invalid("probability entries must lie in [0, 1]"));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > sum_tolerance(probs.len()) {
            return Err(Error::invalid(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// One-hot distribution on `class`.
    pub fn one_hot(classes: usize, class: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::invalid(format!(
                "class {class} out of range for {classes} classes"
            )));
        }
        let mut probs = vec![T::zero(); classes];
        probs[class] = T::one();
        Ok(Self { probs })
    }

    pub(crate) fn from_softmax_unchecked(probs: Vec<T>) -> Self {
        Self { probs }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<T> {
        self.probs
    }

    /// Index of the largest probability; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Largest probability (the prediction confidence).
    pub fn max(&self) -> T {
        self.probs[self.argmax()]
    }
}

impl<T> Index<usize> for ProbabilityVector<T> {
    type Output = T;

    fn index(&self, class: usize) -> &T {
        &self.probs[class]
    }
}

fn check_logits<T: Scalar>(logits: &[T]) -> Result<()> {
    if logits.is_empty() {
        return Err(Error::invalid("logits are empty"));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::invalid("logits contain non-finite values"));
    }
    Ok(())
}

/// `ln Σ exp(z)`, computed with the maximum factored out.
pub fn log_sum_exp<T: Scalar>(logits: &[T]) -> Result<T> {
    check_logits(logits)?;
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&z| (z - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Max-subtracted softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Result<ProbabilityVector<T>> {
    check_logits(logits)?;
    Ok(softmax_unchecked(logits))
}

/// Softmax for logits already known to be finite and non-empty.
pub(crate) fn softmax_unchecked<T: Scalar>(logits: &[T]) -> ProbabilityVector<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut probs: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = probs.iter().copied().sum();
    for p in &mut probs {
        *p /= sum;
    }
    ProbabilityVector::from_softmax_unchecked(probs)
}

#[inline]
fn clamped_ln<T: Scalar>(p: T) -> T {
    p.max(T::lit(PROB_FLOOR)).ln()
}

/// `-ln p[label]` with the probability clamped to at least [`PROB_FLOOR`].
pub fn cross_entropy<T: Scalar>(p: &ProbabilityVector<T>, label: usize) -> Result<T> {
    if label >= p.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            p.len()
        )));
    }
    Ok(-clamped_ln(p[label]))
}

/// `KL(teacher || student) = Σ_c t_c ln(t_c / s_c)`, both operands clamped.
pub fn kl_divergence<T: Scalar>(
    teacher: &ProbabilityVector<T>,
    student: &ProbabilityVector<T>,
) -> Result<T> {
    if teacher.len() != student.len() {
        return Err(Error::invalid(format!(
            "KL operands have {} and {} classes",
            teacher.len(),
            student.len()
        )));
    }
    Ok(teacher
        .as_slice()
        .iter()
        .zip(student.as_slice())
        .map(|(&t, &s)| t * (clamped_ln(t) - clamped_ln(s)))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ProbabilityVector<f64> {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(softmax(&[1000.0, 1000.0]).unwrap().as_slice(), &[0.5, 0.5]);
        let p = softmax(&[1f64.ln(), 3f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15);
        assert!((p[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(softmax::<f64>(&[]).is_err());
        assert!(softmax(&[1.0, f64::NAN]).is_err());
        assert!(softmax(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&pv(&[1.0, 0.0]), 0).unwrap(), 0.0);
        let ce = cross_entropy(&pv(&[0.5, 0.5]), 1).unwrap();
        assert!((ce - 2f64.ln()).abs() < 1e-15);
        let ce = cross_entropy(&pv(&[1e-20, 1.0]), 0).unwrap();
        assert_eq!(ce, -(1e-12f64).ln());
        assert!(cross_entropy(&pv(&[0.5, 0.5]), 2).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&pv(&[0.3, 0.7]), &pv(&[0.3, 0.7])).unwrap(), 0.0);
        let kl = kl_divergence(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap();
        assert!((kl - 2f64.ln()).abs() < 1e-15);
        let kl = kl_divergence(&pv(&[0.5, 0.5]), &pv(&[0.25, 0.75])).unwrap();
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl - expected).abs() < 1e-15);
        assert!((kl - 0.1438).abs() < 1e-4);
        assert!(kl_divergence(&pv(&[1.0]), &pv(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn probability_vector_validation() {
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbabilityVector::<f64>::new(vec![]).is_err());
        assert_eq!(pv(&[0.4, 0.4, 0.2]).argmax(), 0);
    }

    #[test]
    fn matrix_validation() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m[(1, 0)], 3.0);
        assert_eq!(m.select_rows(&[1]).as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn works_in_single_precision() {
        let p = softmax(&[0.0f32, 0.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.5f32, 0.5]);
        let ce = cross_entropy(&p, 0).unwrap();
        assert!((ce - std::f32::consts::LN_2).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(z in prop::collection::vec(-1e6f64..1e6, 1..8)) {
            let p = softmax(&z).unwrap();
            let total: f64 = p.as_slice().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(p.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!(ProbabilityVector::new(p.into_vec()).is_ok());
        }

        #[test]
        fn cross_entropy_matches_log_sum_exp(
            z in prop::collection::vec(-20f64..20.0, 2..6),
            pick in 0usize..6,
        ) {
            let label = pick % z.len();
            let ce = cross_entropy(&softmax(&z).unwrap(), label).unwrap();
            // Probabilities are floored before the log, which caps the loss.
            let reference = (log_sum_exp(&z).unwrap() - z[label]).min(-PROB_FLOOR.ln());
            prop_assert!((ce - reference).abs() <= 1e-9, "{} vs {}", ce, reference);
        }

        #[test]
        fn kl_is_non_negative(
            a in prop::collection::vec(-10f64..10.0, 3),
            b in prop::collection::vec(-10f64..10.0, 3),
        ) {
            let p = softmax(&a).unwrap();
            let q = softmax(&b).unwrap();
            prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-9);
            prop_assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        }
    }
}
