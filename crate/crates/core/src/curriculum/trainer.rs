use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::evaluate_model;
use crate::model::{
    backward, optimizer_step, snapshot, Distillation, ModelParameters, OptimizerState, TeacherSnapshot,
    WeightedObjective,
};
use crate::scalar::Scalar;

use super::trace::{EpochRecord, TrainingTrace};
use super::{determine_pcd_curriculum, determine_pcl_curriculum, CurriculumPass, SampleWeighting, TrainConfig};

/// Seeded per-epoch permutation of sample indices.
///
/// Uses stream 1 of the run seed so it never overlaps the parameter
/// initialization, which uses stream 0.
#[derive(Debug, Clone)]
pub struct BatchSchedule {
    rng: ChaCha8Rng,
}

impl BatchSchedule {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Self { rng }
    }

    /// Fresh permutation of `0..n`.
    pub fn next_epoch(&mut self, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        order
    }
}

/// Hooks into the epoch loop, for diagnostics and tests.
pub trait TrainObserver<T> {
    /// Called after the epoch's weights are determined and before any
    /// parameter update.
    fn epoch_start(
        &mut self,
        _epoch: usize,
        _student: &ModelParameters<T>,
        _teacher: Option<&TeacherSnapshot<T>>,
        _weighting: &SampleWeighting<T>,
    ) {
    }

    /// Called after the epoch's last parameter update.
    fn epoch_end(&mut self, _epoch: usize, _student: &ModelParameters<T>) {}
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NoopObserver;

impl<T> TrainObserver<T> for NoopObserver {}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: ModelParameters<T>,
    pub trace: TrainingTrace,
}

pub fn train<T: Scalar>(
    config: &TrainConfig,
    train_set: &Dataset<T>,
    val_set: Option<&Dataset<T>>,
) -> Result<TrainOutcome<T>> {
    train_with_observer(config, train_set, val_set, &mut NoopObserver)
}

/// Runs the alternating optimization for `config.epochs` epochs.
///
/// For epoch `e = 1..=T` (pace index `t = e − 1`):
/// 1. set `λ_w(t)`, `λ_φ(t)`;
/// 2. compute `w` from the current student over the full training set;
/// 3. from epoch 2 on, compute `φ` and the distillation targets from the teacher;
/// 4. run one pass of shuffled mini-batch updates with `w`, `φ` fixed;
/// 5. snapshot the student as the next epoch's teacher.
///
/// Ablations force `w = 1` and/or drop the distillation term.
pub fn train_with_observer<T: Scalar, O: TrainObserver<T>>(
    config: &TrainConfig,
    train_set: &Dataset<T>,
    val_set: Option<&Dataset<T>>,
    observer: &mut O,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if train_set.class_count() < 2 {
        return Err(Error::invalid("training needs at least two classes"));
    }
    if let Some(v) = val_set {
        if v.feature_count() != train_set.feature_count() || v.class_count() != train_set.class_count() {
            return Err(Error::invalid("validation set shape differs from the training set"));
        }
    }

    let sizes = config.layer_sizes(train_set.feature_count(), train_set.class_count());
    let mut student = ModelParameters::glorot_uniform(&sizes, config.seed)?;
    let mut optimizer = OptimizerState::new(&student, config.adam);
    let mut batches = BatchSchedule::new(config.seed);
    let mut teacher: Option<TeacherSnapshot<T>> = None;
    let mut trace = TrainingTrace::default();
    let n = train_set.len();
    let gamma = T::lit(config.effective_gamma());
    let ablation = config.ablation;

    for epoch in 1..=config.epochs {
        let t = epoch - 1;
        let lambda_w = config.pcl_schedule.pace_at(t);
        let lambda_phi = config.pcd_schedule.pace_at(t);

        let pcl = determine_pcl_curriculum(&student, train_set, lambda_w, config.pcl_kind)?;
        let pcl_weights = if ablation.uses_pcl() {
            pcl.weights
        } else {
            vec![T::one(); n]
        };
        let pcd: Option<CurriculumPass<T>> = match (&teacher, ablation.uses_pcd()) {
            (Some(_), true) => Some(determine_pcd_curriculum(
                teacher.as_ref(),
                train_set,
                lambda_phi,
                config.pcd_kind,
            )?),
            _ => None,
        };
        let weighting = SampleWeighting {
            epoch,
            pcl_weights,
            pcl_losses: pcl.losses,
            pcd_weights: pcd.as_ref().map(|p| p.weights.clone()),
            pcd_losses: pcd.as_ref().map(|p| p.losses.clone()),
            lambda_w,
            lambda_phi,
        };
        observer.epoch_start(epoch, &student, teacher.as_ref(), &weighting);

        let lr = T::lit(config.lr_schedule.lr_at(t));
        let order = batches.next_epoch(n);
        let mut loss_sum = T::zero();
        let mut kl_evaluations = 0;
        for chunk in order.chunks(config.batch_size) {
            let features = train_set.features().select_rows(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| train_set.labels()[i]).collect();
            let w: Vec<T> = chunk.iter().map(|&i| weighting.pcl_weights[i]).collect();
            let distill_parts = pcd.as_ref().map(|p| {
                let phi: Vec<T> = chunk.iter().map(|&i| p.weights[i]).collect();
                let targets: Vec<_> = chunk.iter().map(|&i| p.probs[i].clone()).collect();
                (phi, targets)
            });
            let objective = WeightedObjective {
                labels: &labels,
                sample_weights: &w,
                distillation: distill_parts.as_ref().map(|(phi, targets)| Distillation {
                    teacher_probs: targets,
                    weights: phi,
                    gamma,
                }),
            };
            let result = backward(&student, &features, &objective)?;
            if !result.loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: format!("non-finite batch loss {}", result.loss),
                });
            }
            loss_sum += result.loss * T::from_count(chunk.len());
            kl_evaluations += result.kl_evaluations;
            if !config.frozen {
                optimizer_step(&mut student, &mut optimizer, &result.gradient, lr)?;
            }
        }
        if !student.is_finite() {
            return Err(Error::Divergence {
                epoch,
                message: "parameters became non-finite".to_string(),
            });
        }
        observer.epoch_end(epoch, &student);

        let teacher_epoch = pcd.as_ref().and(teacher.as_ref()).map(TeacherSnapshot::source_epoch);
        if ablation.uses_pcd() && epoch < config.epochs {
            teacher = Some(snapshot(&student, epoch));
        }

        let val = match val_set {
            Some(v) => Some(evaluate_model(&student, v, config.ece_bins)?),
            None => None,
        };
        trace.records.push(EpochRecord {
            epoch,
            lambda_w,
            lambda_phi,
            frac_w_nonzero: weighting.fraction_w_nonzero(),
            frac_phi_nonzero: weighting.fraction_phi_nonzero(),
            mean_w: weighting.mean_w(),
            mean_phi: weighting.mean_phi(),
            train_loss: (loss_sum / T::from_count(n)).as_f64(),
            val,
            kl_evaluations,
            teacher_epoch,
        });
    }

    Ok(TrainOutcome {
        params: student,
        trace,
    })
}
