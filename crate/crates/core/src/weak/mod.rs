//! Weak learners: decision stumps over raw feature values or Haar-like
//! rectangle features, and the binary response tables they produce.

mod haar;
mod integral;
mod stump;
mod table;

use thiserror::Error;

pub use haar::{
    enumerate_haar_features, haar_value, HaarFeature, HaarKind, HaarWindow, PoolConfig, Window, BASE_WINDOW,
};
pub use integral::IntegralImage;
pub use stump::{balanced_weights, train_stump, Polarity, Stump, StumpFit};
pub use table::{build_feature_table, train_feature_table, FeatureTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeakError {
    #[error("all values of feature {feature_id} are identical")]
    DegenerateInput { feature_id: usize, fallback: StumpFit<f64> },
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Anything a stump can read a feature value from.
pub trait FeatureSource<T> {
    fn feature(&self, id: usize) -> T;
}

impl<T: Copy> FeatureSource<T> for [T] {
    #[inline]
    fn feature(&self, id: usize) -> T {
        self[id]
    }
}

impl<T: Copy> FeatureSource<T> for Vec<T> {
    #[inline]
    fn feature(&self, id: usize) -> T {
        self[id]
    }
}
