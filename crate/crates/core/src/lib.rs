//! TUG score prediction from gait characteristics.
//!
//! * [`copent`]: copula entropy and mutual information estimation.
//! * [`gaitfeat`]: gait characteristics from 3D pose series.
//! * [`models`]: linear and support vector regression.
//! * [`pipeline`]: association ranking and repeated-split evaluation.
//! * [`synthgait`]: seeded synthetic walkers and cohorts.
//! * [`formats`]: pose, manifest and feature CSV files.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod copent;
pub mod formats;
pub mod gaitfeat;
pub mod models;
pub mod pipeline;
pub mod seed;
pub mod synthgait;

pub use copent::{copula_entropy, mutual_information, CopentError, EntropyEstimate, SampleMatrix};
pub use gaitfeat::{extract_features, ExtractionConfig, FeatureVector, GaitError, PoseFrame, PoseSeries};
pub use models::{FittedModel, KernelSpec, ModelError, SvrGrid, SvrParams};
pub use pipeline::{
    evaluate, rank_features, rank_features_with, select_features, Dataset, DependenceReport, EvaluationConfig,
    EvaluationReport, GaitSample, ModelKind, PipelineError, TieHandling,
};
pub use seed::derive_seed;
pub use synthgait::{generate_cohort, generate_walker, CohortParams, SynthError, WalkerParams};
