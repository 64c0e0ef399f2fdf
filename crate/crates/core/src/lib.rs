//! Progressive self-paced distillation (PSPD).
//!
//! A classifier is trained with two self-paced curricula that are
//! recomputed once per epoch in closed form:
//!
//! * a learning curriculum that weights each sample's cross-entropy by how
//!   easy the current model finds it, and
//! * a distillation curriculum that weights a KL term towards the previous
//!   epoch's model by how confident that model was on the sample.
//!
//! Both paces grow linearly, admitting harder samples as training proceeds.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, which is what training and
//! every stated tolerance assume.
//!
//! ```
//! use pspd::{generate_synthetic, split, train, SplitSpec, SyntheticSpec, TrainConfig};
//!
//! let data: pspd::Dataset = generate_synthetic(&SyntheticSpec {
//!     n: 200, d: 4, class_count: 2, class_separation: 2.0, noise_rate: 0.1, seed: 1,
//! })?;
//! let parts = split(&data, &SplitSpec::standard(1))?;
//! let config = TrainConfig { epochs: 3, hidden_layers: vec![8], ..TrainConfig::default() };
//! let outcome = train(&config, &parts.train, Some(&parts.val))?;
//! assert_eq!(outcome.trace.records.len(), 3);
//! # Ok::<(), pspd::Error>(())
//! ```

pub mod curriculum;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod regularizer;
pub mod scalar;
pub mod schedule;

pub use curriculum::{
    determine_pcd_curriculum, determine_pcl_curriculum, epoch_loss, train, train_with_observer, Ablation,
    BatchSchedule, EpochRecord, ObjectiveBreakdown, TrainConfig, TrainObserver, TrainingTrace, WeightingSlice,
};
pub use data::{generate_synthetic, load_csv, split, write_csv, LabelColumn, SplitSpec, Standardizer, SyntheticSpec};
pub use error::{Error, Result};
pub use metrics::{auc, ece, evaluate, evaluate_model, nll, MetricsReport};
pub use model::{backward, optimizer_step, snapshot, AdamSettings};
pub use numerics::{cross_entropy, kl_divergence, softmax};
pub use regularizer::{closed_form_weight, oracle_weight, regularizer_value, RegularizerKind};
pub use scalar::Scalar;
pub use schedule::{LearningRateSchedule, PaceSchedule};

/// Double-precision instantiations.
pub type Real = f64;
pub type DenseMatrix = numerics::DenseMatrix<Real>;
pub type ProbabilityVector = numerics::ProbabilityVector<Real>;
pub type ModelParameters = model::ModelParameters<Real>;
pub type TeacherSnapshot = model::TeacherSnapshot<Real>;
pub type OptimizerState = model::OptimizerState<Real>;
pub type Dataset = data::Dataset<Real>;
pub type Splits = data::Splits<Real>;
pub type SampleWeighting = curriculum::SampleWeighting<Real>;
pub type CurriculumPass = curriculum::CurriculumPass<Real>;
pub type TrainOutcome = curriculum::TrainOutcome<Real>;
pub type WeightSolution = regularizer::WeightSolution<Real>;
