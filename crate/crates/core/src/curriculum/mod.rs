//! Progressive self-paced distillation.
//!
//! Each epoch alternates two steps. With the parameters fixed, every
//! training sample gets a closed-form weight from its current loss:
//! `w_i` from the student's cross-entropy (the learning curriculum) and
//! `φ_i` from the previous-epoch teacher's cross-entropy (the distillation
//! curriculum). With the weights fixed, the student is trained on
//!
//! `(1/N) Σ_i [ w_i·CE(p_student_i, y_i) + γ·φ_i·KL(p_teacher_i || p_student_i) ]`
//!
//! and the teacher is then replaced by a copy of the student.

mod config;
mod trace;
mod trainer;

pub use config::{Ablation, TrainConfig};
pub use trace::{EpochRecord, TrainingTrace, TRACE_COLUMNS};
pub use trainer::{train, train_with_observer, BatchSchedule, NoopObserver, TrainObserver, TrainOutcome};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{evaluate_objective, Distillation, ModelParameters, TeacherSnapshot, WeightedObjective};
use crate::numerics::{cross_entropy, softmax_unchecked, DenseMatrix, ProbabilityVector};
use crate::regularizer::{closed_form_weight, regularizer_value, RegularizerKind};
use crate::scalar::Scalar;

/// Per-sample losses of one model over a dataset and the self-paced
/// weights derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumPass<T> {
    pub weights: Vec<T>,
    pub losses: Vec<T>,
    /// The model's predicted distributions, reused as distillation targets.
    pub probs: Vec<ProbabilityVector<T>>,
}

/// Weights in force for one epoch.
///
/// `pcd_*` are `None` when no distillation happens that epoch (the first
/// epoch, or an ablation without the distillation channel). When an
/// ablation disables the learning curriculum, `pcl_weights` are all 1 and
/// `pcl_losses` still hold the student's losses.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWeighting<T> {
    pub epoch: usize,
    pub pcl_weights: Vec<T>,
    pub pcl_losses: Vec<T>,
    pub pcd_weights: Option<Vec<T>>,
    pub pcd_losses: Option<Vec<T>>,
    pub lambda_w: f64,
    pub lambda_phi: f64,
}

impl<T: Scalar> SampleWeighting<T> {
    pub fn len(&self) -> usize {
        self.pcl_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pcl_weights.is_empty()
    }

    pub fn fraction_w_nonzero(&self) -> f64 {
        fraction_nonzero(&self.pcl_weights)
    }

    pub fn fraction_phi_nonzero(&self) -> f64 {
        self.pcd_weights.as_deref().map_or(0.0, fraction_nonzero)
    }

    pub fn mean_w(&self) -> f64 {
        mean(&self.pcl_weights)
    }

    pub fn mean_phi(&self) -> f64 {
        self.pcd_weights.as_deref().map_or(0.0, mean)
    }
}

fn fraction_nonzero<T: Scalar>(v: &[T]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().filter(|&&x| x != T::zero()).count() as f64 / v.len() as f64
}

fn mean<T: Scalar>(v: &[T]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().map(|x| x.as_f64()).sum::<f64>() / v.len() as f64
}

/// Forward pass over the whole dataset (no gradient), per-sample
/// cross-entropy, and closed-form weights at pace `lambda`.
fn curriculum_pass<T: Scalar>(
    params: &ModelParameters<T>,
    dataset: &Dataset<T>,
    lambda: f64,
    kind: RegularizerKind,
) -> Result<CurriculumPass<T>> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot determine a curriculum on an empty dataset"));
    }
    let logits = params.forward(dataset.features())?;
    let lambda = T::lit(lambda);
    let n = dataset.len();
    let mut weights = Vec::with_capacity(n);
    let mut losses = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    for (z, &y) in logits.iter_rows().zip(dataset.labels()) {
        let p = softmax_unchecked(z);
        let loss = cross_entropy(&p, y)?;
        weights.push(closed_form_weight(kind, loss, lambda)?.weight);
        losses.push(loss);
        probs.push(p);
    }
    Ok(CurriculumPass {
        weights,
        losses,
        probs,
    })
}

/// Learning curriculum: `w_i` from the student's own cross-entropy.
pub fn determine_pcl_curriculum<T: Scalar>(
    student: &ModelParameters<T>,
    dataset: &Dataset<T>,
    lambda_w: f64,
    kind: RegularizerKind,
) -> Result<CurriculumPass<T>> {
    curriculum_pass(student, dataset, lambda_w, kind)
}

/// Distillation curriculum: `φ_i` from the teacher's cross-entropy against
/// the ground truth. Samples the teacher gets badly wrong (`loss ≥ λ_φ`)
/// receive `φ_i = 0` and are learned from the labels alone.
pub fn determine_pcd_curriculum<T: Scalar>(
    teacher: Option<&TeacherSnapshot<T>>,
    dataset: &Dataset<T>,
    lambda_phi: f64,
    kind: RegularizerKind,
) -> Result<CurriculumPass<T>> {
    let teacher = teacher.ok_or_else(|| {
        Error::State("distillation curriculum requested before a teacher exists".to_string())
    })?;
    curriculum_pass(teacher.params(), dataset, lambda_phi, kind)
}

/// Weights aligned with one batch, plus what is needed to evaluate the
/// regularizer terms.
#[derive(Debug, Clone, Copy)]
pub struct WeightingSlice<'a, T> {
    pub pcl_weights: &'a [T],
    pub pcl_kind: RegularizerKind,
    pub lambda_w: f64,
    /// `(φ, kind, λ_φ)` when distillation is active.
    pub pcd: Option<(&'a [T], RegularizerKind, f64)>,
}

/// Objective value split into the part that depends on the parameters
/// and the regularizer part that is constant once weights are fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBreakdown<T> {
    /// `(1/N) Σ [w_i·CE_i + γ·φ_i·KL_i]`
    pub data_term: T,
    /// `(1/N) Σ [R_λw(w_i) + R_λφ(φ_i)]`
    pub regularizer_term: T,
}

impl<T: Scalar> ObjectiveBreakdown<T> {
    pub fn total(&self) -> T {
        self.data_term + self.regularizer_term
    }
}

/// Combined objective on one batch with weights held fixed.
pub fn epoch_loss<T: Scalar>(
    student: &ModelParameters<T>,
    teacher: Option<&TeacherSnapshot<T>>,
    batch: &DenseMatrix<T>,
    labels: &[usize],
    weighting: &WeightingSlice<'_, T>,
    gamma: f64,
) -> Result<ObjectiveBreakdown<T>> {
    let n = batch.rows();
    if weighting.pcl_weights.len() != n || labels.len() != n {
        return Err(Error::invalid(format!(
            "batch has {n} rows but {} labels and {} weights",
            labels.len(),
            weighting.pcl_weights.len()
        )));
    }
    let teacher_probs: Option<Vec<ProbabilityVector<T>>> = match (weighting.pcd, teacher) {
        (Some((phi, _, _)), Some(t)) => {
            if phi.len() != n {
                return Err(Error::invalid("distillation weights misaligned with batch"));
            }
            let logits = t.params().forward(batch)?;
            Some(logits.iter_rows().map(softmax_unchecked).collect())
        }
        (Some(_), None) => {
            return Err(Error::State(
                "distillation weights given without a teacher".to_string(),
            ))
        }
        (None, _) => None,
    };
    let objective = WeightedObjective {
        labels,
        sample_weights: weighting.pcl_weights,
        distillation: match (&teacher_probs, weighting.pcd) {
            (Some(tp), Some((phi, _, _))) => Some(Distillation {
                teacher_probs: tp,
                weights: phi,
                gamma: T::lit(gamma),
            }),
            _ => None,
        },
    };
    let data_term = evaluate_objective(student, batch, &objective)?;

    let lambda_w = T::lit(weighting.lambda_w);
    let mut reg = T::zero();
    for &w in weighting.pcl_weights {
        reg += regularizer_value(weighting.pcl_kind, w, lambda_w)?;
    }
    if let Some((phi, kind, lambda)) = weighting.pcd {
        let lambda = T::lit(lambda);
        for &f in phi {
            reg += regularizer_value(kind, f, lambda)?;
        }
    }
    let regularizer_term = if n == 0 { T::zero() } else { reg / T::from_count(n) };
    Ok(ObjectiveBreakdown {
        data_term,
        regularizer_term,
    })
}
