//! Datasets: synthetic generation, CSV ingestion and stratified splits.

mod csv_io;
mod split;
mod synthetic;

pub use csv_io::{load_csv, write_csv, LabelColumn, CLEAN_LABEL_COLUMN, LABEL_COLUMN};
pub use split::{split, SplitIndices, SplitSpec, Splits, Standardizer};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

/// Labelled feature matrix.
///
/// `clean_labels`, when present, holds the labels before any injected
/// label noise and is used only for diagnostics and clean evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    features: DenseMatrix<T>,
    labels: Vec<usize>,
    class_count: usize,
    clean_labels: Option<Vec<usize>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: DenseMatrix<T>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::invalid("dataset is empty"));
        }
        if labels.len() != features.rows() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if !features.is_finite() {
            return Err(Error::invalid("features contain non-finite values"));
        }
        Ok(Self {
            features,
            labels,
            class_count,
            clean_labels: None,
        })
    }

    pub fn with_clean_labels(mut self, clean: Vec<usize>) -> Result<Self> {
        if clean.len() != self.labels.len() {
            return Err(Error::invalid("clean label count differs from label count"));
        }
        if clean.iter().any(|&y| y >= self.class_count) {
            return Err(Error::invalid("clean label out of range"));
        }
        self.clean_labels = Some(clean);
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &DenseMatrix<T> {
        &self.features
    }

    pub fn feature_count(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn clean_labels(&self) -> Option<&[usize]> {
        self.clean_labels.as_deref()
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Indices whose observed label differs from the clean one.
    pub fn noisy_indices(&self) -> Vec<usize> {
        match &self.clean_labels {
            Some(clean) => (0..self.len()).filter(|&i| clean[i] != self.labels[i]).collect(),
            None => Vec::new(),
        }
    }

    /// Rows `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
            clean_labels: self
                .clean_labels
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Same rows with features replaced (used after standardization).
    pub fn with_features(&self, features: DenseMatrix<T>) -> Result<Self> {
        if features.rows() != self.len() {
            return Err(Error::invalid("replacement features have a different row count"));
        }
        Ok(Self {
            features,
            labels: self.labels.clone(),
            class_count: self.class_count,
            clean_labels: self.clean_labels.clone(),
        })
    }

    /// Copy whose observed labels are replaced by the clean ones, if any.
    pub fn with_clean_as_observed(&self) -> Self {
        let mut out = self.clone();
        if let Some(clean) = &self.clean_labels {
            out.labels = clean.clone();
        }
        out
    }
}
