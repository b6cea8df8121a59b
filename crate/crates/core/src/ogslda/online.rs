use crate::gslda::{between_class, lda_direction, LinearModel, ScatterState};
use crate::label::Label;
use crate::linalg::{rank_two_inverse_update_or_direct, sub, UpdatePath};
use crate::scalar::Real;
use crate::weak::FeatureSource;

use super::threshold::compute_threshold;
use super::OgsldaError;

/// Rank-two updates between direct re-inversions of the within-class scatter.
pub const DEFAULT_REFRESH_INTERVAL: u64 = 10_000;

/// A trained model that keeps learning from labeled samples one at a time.
///
/// The selected weak learners and their stump parameters are fixed; only the
/// class statistics, the weights and the offset change.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineClassifier<T> {
    pub model: LinearModel<T>,
    pub state: ScatterState<T>,
    pub insert_count: u64,
    /// Added to the criterion's offset after every update.
    pub threshold_offset: T,
    pub refresh_interval: u64,
    pub updates_since_refresh: u64,
    /// Inserts whose inverse update had to fall back to a direct inverse.
    pub fallback_count: u64,
}

impl<T: Real> OnlineClassifier<T> {
    pub fn new(model: LinearModel<T>, state: ScatterState<T>) -> Result<Self, OgsldaError> {
        if model.dim() != state.dim() {
            return Err(OgsldaError::DimensionMismatch { expected: state.dim(), found: model.dim() });
        }
        Ok(Self {
            model,
            state,
            insert_count: 0,
            threshold_offset: T::zero(),
            refresh_interval: DEFAULT_REFRESH_INTERVAL,
            updates_since_refresh: 0,
            fallback_count: 0,
        })
    }

    /// Shifts the current offset by `delta` and keeps the shift through later updates.
    pub fn shift_threshold(&mut self, delta: T) {
        self.threshold_offset += delta;
        self.model.threshold += delta;
    }

    pub fn classify<S: FeatureSource<T> + ?Sized>(&self, sample: &S) -> Label {
        self.model.classify(sample)
    }

    /// Inserts an already projected sample. See [`online_insert`].
    pub fn insert_projected(&mut self, x: &[T], label: Label) -> Result<UpdatePath, OgsldaError> {
        let k = self.state.dim();
        if x.len() != k {
            return Err(OgsldaError::DimensionMismatch { expected: k, found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(OgsldaError::NonFinite);
        }
        let mut state = self.state.clone();
        let step = update_means(&mut state, x, label);
        update_sb(&mut state);
        let vectors = covariance_update_vectors(x, &step);
        let mut path = update_sw_inverse(&mut state, label, &vectors)?;
        let mut since = self.updates_since_refresh + 1;
        if since >= self.refresh_interval {
            state.refresh_inverse()?;
            since = 0;
            path = UpdatePath::DirectFallback;
        }
        let weights = recompute_weights(&state);
        let threshold = compute_threshold(self.model.criterion, &state, &weights)? + self.threshold_offset;
        if weights.iter().any(|w| !w.is_finite()) || !threshold.is_finite() || !state.sw_inv.is_finite() {
            return Err(OgsldaError::NonFinite);
        }

        self.state = state;
        self.model.weights = weights;
        self.model.threshold = threshold;
        self.insert_count += 1;
        self.updates_since_refresh = since;
        if path == UpdatePath::DirectFallback && since != 0 {
            self.fallback_count += 1;
        }
        Ok(path)
    }
}

/// Binary responses of the model's learners on a raw sample.
pub fn project_sample<T: Real, S: FeatureSource<T> + ?Sized>(model: &LinearModel<T>, sample: &S) -> Vec<T> {
    model.project(sample)
}

/// Class mean before and after an insert.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanStep<T> {
    pub old: Vec<T>,
    pub new: Vec<T>,
    /// Class count before the insert.
    pub count_before: u64,
}

/// `m ← m + (x − m) / (N_c + 1)` for the labeled class and `N_c ← N_c + 1`.
pub fn update_means<T: Real>(state: &mut ScatterState<T>, x: &[T], label: Label) -> MeanStep<T> {
    let (m, n) = if label.is_positive() { (&mut state.m1, &mut state.n1) } else { (&mut state.m2, &mut state.n2) };
    let old = m.clone();
    let denom = T::lit((*n + 1) as f64);
    for (mi, &xi) in m.iter_mut().zip(x) {
        *mi += (xi - *mi) / denom;
    }
    let count_before = *n;
    *n += 1;
    MeanStep { old, new: m.clone(), count_before }
}

/// Recomputes the between-class matrix from the current means and counts.
pub fn update_sb<T: Real>(state: &mut ScatterState<T>) {
    state.sb = between_class(state.n1, state.n2, &state.m1, &state.m2);
}

/// Perturbation `Σ̃ = Σ + p1 q1ᵀ + p2 q2ᵀ` of one class scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTwo<T> {
    pub p1: Vec<T>,
    pub q1: Vec<T>,
    pub p2: Vec<T>,
    pub q2: Vec<T>,
}

/// `p1 = q1 = x − m̃`, `p2 = N_c (m̃ − m)`, `q2 = m̃ − m`.
pub fn covariance_update_vectors<T: Real>(x: &[T], step: &MeanStep<T>) -> RankTwo<T> {
    let p1 = sub(x, &step.new);
    let q2 = sub(&step.new, &step.old);
    let nc = T::lit(step.count_before as f64);
    let p2 = q2.iter().map(|&v| nc * v).collect();
    RankTwo { q1: p1.clone(), p1, p2, q2 }
}

/// Applies the perturbation to the labeled class scatter and updates the
/// inverse within-class scatter, inverting directly if the low-rank update
/// degenerates.
pub fn update_sw_inverse<T: Real>(
    state: &mut ScatterState<T>,
    label: Label,
    v: &RankTwo<T>,
) -> Result<UpdatePath, OgsldaError> {
    let sw0 = state.sw();
    let (inv, path) = rank_two_inverse_update_or_direct(&state.sw_inv, &sw0, &v.p1, &v.q1, &v.p2, &v.q2)?;
    let sigma = if label.is_positive() { &mut state.sigma1 } else { &mut state.sigma2 };
    sigma.add_outer(T::one(), &v.p1, &v.q1);
    sigma.add_outer(T::one(), &v.p2, &v.q2);
    sigma.symmetrize();
    state.sw_inv = inv;
    Ok(path)
}

/// Discriminant direction of the current statistics.
pub fn recompute_weights<T: Real>(state: &ScatterState<T>) -> Vec<T> {
    lda_direction(state)
}

/// Projects `sample`, updates means, between-class scatter, class scatter
/// and its inverse, then the weights and the offset. O(k²) regardless of how
/// many samples have been seen. On error the classifier is left untouched.
pub fn online_insert<T: Real, S: FeatureSource<T> + ?Sized>(
    clf: &mut OnlineClassifier<T>,
    sample: &S,
    label: Label,
) -> Result<UpdatePath, OgsldaError> {
    let x = project_sample(&clf.model, sample);
    clf.insert_projected(&x, label)
}
