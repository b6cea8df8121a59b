use crate::label::Label;
use crate::linalg::dot;
use crate::ogslda::{compute_threshold, ThresholdCriterion};
use crate::scalar::Real;
use crate::weak::{FeatureSource, FeatureTable, Stump};

use super::greedy::{greedy_select, GreedyConfig, Selection};
use super::scatter::{lda_direction, ScatterState};
use super::GsldaError;

/// Fisher offset with empirical priors: midpoint of the projected class
/// means plus `ln(P(neg) / P(pos))`, the latter measured in units of the
/// pooled covariance `Sw / (N - 2)`.
pub fn fisher_threshold<T: Real>(state: &ScatterState<T>, w: &[T]) -> T {
    fisher_threshold_with_priors(state, w, state.n1 as f64, state.n2 as f64)
}

/// Fisher offset with explicit (unnormalized, positive) class priors.
///
/// `w` comes from the unnormalized scatter and so is `N - 2` times shorter
/// than the direction from the pooled covariance; the log-prior term is
/// rescaled to match, which keeps this the shared-covariance Bayes rule.
pub fn fisher_threshold_with_priors<T: Real>(state: &ScatterState<T>, w: &[T], prior_pos: f64, prior_neg: f64) -> T {
    let mid = T::lit(0.5) * (dot(w, &state.m1) + dot(w, &state.m2));
    let dof = (state.n() as f64 - 2.0).max(1.0);
    mid + T::lit((prior_neg / prior_pos).ln() / dof)
}

/// Sparse linear classifier over binary weak-learner responses:
/// positive iff `wᵀx > w0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    pub learners: Vec<Stump<T>>,
    pub weights: Vec<T>,
    pub threshold: T,
    pub criterion: ThresholdCriterion,
}

impl<T: Real> LinearModel<T> {
    /// Discriminant direction and offset from the class statistics of `learners`.
    pub fn fit(
        learners: Vec<Stump<T>>,
        state: &ScatterState<T>,
        criterion: ThresholdCriterion,
    ) -> Result<Self, GsldaError> {
        if learners.len() != state.dim() {
            return Err(GsldaError::DimensionMismatch { expected: state.dim(), found: learners.len() });
        }
        let weights = lda_direction(state);
        let threshold = compute_threshold(criterion, state, &weights)?;
        Ok(Self { learners, weights, threshold, criterion })
    }

    /// Greedy selection of `t` learners from a response table whose row `i`
    /// was produced by `stumps[i]`, followed by [`fit`](Self::fit).
    pub fn train(
        stumps: &[Stump<T>],
        table: &FeatureTable,
        t: usize,
        config: GreedyConfig,
        criterion: ThresholdCriterion,
    ) -> Result<(Self, Selection<T>), GsldaError> {
        assert_eq!(stumps.len(), table.n_features());
        let sel = greedy_select(table, t, config)?;
        let learners = sel.selected.iter().map(|&i| stumps[i]).collect();
        Ok((Self::fit(learners, &sel.state, criterion)?, sel))
    }

    pub fn dim(&self) -> usize {
        self.learners.len()
    }

    /// Binary response vector of the selected learners.
    pub fn project<S: FeatureSource<T> + ?Sized>(&self, sample: &S) -> Vec<T> {
        self.learners.iter().map(|s| if s.respond(sample) { T::one() } else { T::zero() }).collect()
    }

    /// `wᵀx − w0` for an already projected sample.
    pub fn margin_projected(&self, x: &[T]) -> T {
        dot(&self.weights, x) - self.threshold
    }

    /// `wᵀx`, summed in the same order as [`margin_projected`](Self::margin_projected).
    pub fn score<S: FeatureSource<T> + ?Sized>(&self, sample: &S) -> T {
        let mut s = T::zero();
        for (l, &w) in self.learners.iter().zip(&self.weights) {
            if l.respond(sample) {
                s += w;
            }
        }
        s
    }

    /// `wᵀx − w0`.
    pub fn margin<S: FeatureSource<T> + ?Sized>(&self, sample: &S) -> T {
        self.score(sample) - self.threshold
    }

    pub fn classify<S: FeatureSource<T> + ?Sized>(&self, sample: &S) -> Label {
        if self.margin(sample) > T::zero() {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn classify_projected(&self, x: &[T]) -> Label {
        if self.margin_projected(x) > T::zero() {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// Model refit on the first `k` learners of `state`.
    pub fn truncated(&self, state: &ScatterState<T>, k: usize) -> Result<(Self, ScatterState<T>), GsldaError> {
        let s = state.prefix(k)?;
        let m = Self::fit(self.learners[..k].to_vec(), &s, self.criterion)?;
        Ok((m, s))
    }
}
