//! Batch greedy sparse linear discriminant analysis over weak-learner responses.

mod greedy;
mod model;
mod scatter;

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::ogslda::ThresholdError;

pub use greedy::{greedy_select, GreedyConfig, GreedySelector, Selection};
pub use model::{fisher_threshold, fisher_threshold_with_priors, LinearModel};
pub use scatter::{
    between_class, candidate_score, default_ridge, fisher_criterion, lda_direction, scatter_from_data,
    scatter_from_data_with_ridge, scatter_from_samples, CandidateScore, CandidateStats, ScatterState, DEPENDENCE_TOL,
    RIDGE_FACTOR,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GsldaError {
    #[error("a class has no samples")]
    EmptyClass,
    #[error("within-class scatter is singular")]
    SingularScatter,
    #[error("Fisher criterion denominator is zero")]
    ZeroDenominator,
    #[error("candidate is linearly dependent on the selected learners")]
    DegenerateCandidate,
    #[error("only {available} linearly independent learners available, {requested} requested")]
    InsufficientRank { requested: usize, available: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
