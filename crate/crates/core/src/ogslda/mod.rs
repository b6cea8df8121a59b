//! Online updates of a trained sparse LDA model and offset selection criteria.

mod online;
mod threshold;

use thiserror::Error;

use crate::gslda::GsldaError;
use crate::linalg::LinalgError;

pub use online::{
    covariance_update_vectors, online_insert, project_sample, recompute_weights, update_means, update_sb,
    update_sw_inverse, MeanStep, OnlineClassifier, RankTwo, DEFAULT_REFRESH_INTERVAL,
};
pub use threshold::{
    compute_threshold, equal_density_root, project_classes, threshold_equal_density, threshold_negative_mean,
    threshold_target_detection, Projection, ThresholdCriterion, ThresholdError, DEFAULT_MISS_RATE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OgsldaError {
    #[error("sample has {found} responses, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("update produced non-finite values")]
    NonFinite,
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
    #[error(transparent)]
    Gslda(#[from] GsldaError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
