use std::cmp::Ordering;

use crate::label::Label;
use crate::scalar::Real;

use super::{FeatureSource, WeakError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> i8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn from_sign(s: i64) -> Option<Self> {
        match s {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }
}

/// Decision stump: responds 1 iff `polarity · (value − threshold) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump<T> {
    pub feature_id: usize,
    pub threshold: T,
    pub polarity: Polarity,
}

impl<T: Real> Stump<T> {
    pub fn new(feature_id: usize, threshold: T, polarity: Polarity) -> Self {
        Self { feature_id, threshold, polarity }
    }

    #[inline]
    pub fn respond_value(&self, value: T) -> bool {
        match self.polarity {
            Polarity::Positive => value > self.threshold,
            Polarity::Negative => value < self.threshold,
        }
    }

    #[inline]
    pub fn respond<S: FeatureSource<T> + ?Sized>(&self, sample: &S) -> bool {
        self.respond_value(sample.feature(self.feature_id))
    }
}

/// A trained stump together with its weighted training error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StumpFit<T> {
    pub stump: Stump<T>,
    pub error: T,
}

fn below<T: Real>(min: T) -> T {
    min - T::one().max(min.abs())
}

fn above<T: Real>(max: T) -> T {
    max + T::one().max(max.abs())
}

/// Minimum weighted-error stump over every midpoint cut and both polarities.
///
/// Cut `k` puts the `k` smallest values at or below the threshold. Ties in
/// error go to the smallest threshold, then to positive polarity. When all
/// values coincide the best constant predictor is returned inside
/// [`WeakError::DegenerateInput`].
pub fn train_stump<T: Real>(
    feature_id: usize,
    values: &[T],
    labels: &[Label],
    weights: &[T],
) -> Result<StumpFit<T>, WeakError> {
    let n = values.len();
    if n < 2 {
        return Err(WeakError::InvalidInput(format!("need at least 2 samples, got {n}")));
    }
    if labels.len() != n || weights.len() != n {
        return Err(WeakError::InvalidInput(format!(
            "length mismatch: {n} values, {} labels, {} weights",
            labels.len(),
            weights.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(WeakError::InvalidInput("non-finite feature value".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
        return Err(WeakError::InvalidInput("weights must be finite and nonnegative".into()));
    }
    let (mut pos_total, mut neg_total) = (T::zero(), T::zero());
    for (l, &w) in labels.iter().zip(weights) {
        if l.is_positive() {
            pos_total += w;
        } else {
            neg_total += w;
        }
    }
    if !(pos_total + neg_total > T::zero()) {
        return Err(WeakError::InvalidInput("weights sum to zero".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let min = values[order[0]];
    let max = values[order[n - 1]];

    if min == max {
        let polarity = if pos_total >= neg_total { Polarity::Positive } else { Polarity::Negative };
        let error = pos_total.min(neg_total);
        return Err(WeakError::DegenerateInput {
            feature_id,
            fallback: StumpFit { stump: Stump::new(feature_id, below(min), polarity), error }.map(|t| t.as_f64()),
        });
    }

    let mut best = StumpFit { stump: Stump::new(feature_id, below(min), Polarity::Positive), error: neg_total };
    if pos_total < best.error {
        best = StumpFit { stump: Stump::new(feature_id, below(min), Polarity::Negative), error: pos_total };
    }

    let (mut pos_below, mut neg_below) = (T::zero(), T::zero());
    let mut k = 0;
    while k < n {
        // Absorb the whole run of equal values so cuts only fall between distinct values.
        let v = values[order[k]];
        while k < n && values[order[k]] == v {
            let i = order[k];
            if labels[i].is_positive() {
                pos_below += weights[i];
            } else {
                neg_below += weights[i];
            }
            k += 1;
        }
        let threshold = if k < n {
            let next = values[order[k]];
            let mid = v + (next - v) * T::lit(0.5);
            // Guard against the midpoint rounding onto an endpoint.
            if mid > v && mid < next {
                mid
            } else {
                v
            }
        } else {
            above(max)
        };
        let err_plus = pos_below + (neg_total - neg_below);
        let err_minus = neg_below + (pos_total - pos_below);
        if err_plus < best.error {
            best = StumpFit { stump: Stump::new(feature_id, threshold, Polarity::Positive), error: err_plus };
        }
        if err_minus < best.error {
            best = StumpFit { stump: Stump::new(feature_id, threshold, Polarity::Negative), error: err_minus };
        }
    }
    Ok(best)
}

impl<T: Real> StumpFit<T> {
    fn map(self, f: impl Fn(T) -> f64) -> StumpFit<f64> {
        StumpFit {
            stump: Stump::new(self.stump.feature_id, f(self.stump.threshold), self.stump.polarity),
            error: f(self.error),
        }
    }

    pub(crate) fn from_f64(fit: &StumpFit<f64>) -> Self {
        StumpFit {
            stump: Stump::new(fit.stump.feature_id, T::lit(fit.stump.threshold), fit.stump.polarity),
            error: T::lit(fit.error),
        }
    }
}

/// Per-sample weights giving each class half of the total mass.
pub fn balanced_weights<T: Real>(labels: &[Label]) -> Vec<T> {
    let pos = labels.iter().filter(|l| l.is_positive()).count();
    let neg = labels.len() - pos;
    labels
        .iter()
        .map(|l| {
            let n = if l.is_positive() { pos } else { neg };
            T::lit(0.5 / n as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use Label::{Negative as N, Positive as P};

    /// Error of every cut position and polarity by direct counting.
    fn brute_force_min(values: &[f64], labels: &[Label], weights: &[f64]) -> f64 {
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted.dedup();
        let mut thresholds = vec![sorted[0] - 1.0];
        thresholds.extend(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        thresholds.push(sorted[sorted.len() - 1] + 1.0);
        let mut best = f64::INFINITY;
        for &t in &thresholds {
            for sign in [1.0, -1.0] {
                let err: f64 = (0..values.len())
                    .filter(|&i| (sign * (values[i] - t) > 0.0) != labels[i].is_positive())
                    .map(|i| weights[i])
                    .sum();
                best = best.min(err);
            }
        }
        best
    }

    #[test]
    fn separable_four_point_example() {
        let fit = train_stump(0, &[1.0, 2.0, 3.0, 4.0], &[N, N, P, P], &[0.25; 4]).unwrap();
        assert_eq!(fit.stump.threshold, 2.5);
        assert_eq!(fit.stump.polarity, Polarity::Positive);
        assert_eq!(fit.error, 0.0);
    }

    #[test]
    fn single_class_gives_zero_error() {
        let fit = train_stump(3, &[5.0, 1.0, 2.0], &[P, P, P], &[1.0; 3]).unwrap();
        assert_eq!(fit.error, 0.0);
        for v in [1.0, 2.0, 5.0] {
            assert!(fit.stump.respond_value(v));
        }
        assert_eq!(fit.stump.feature_id, 3);
    }

    #[test]
    fn reversed_classes_pick_negative_polarity() {
        let fit = train_stump(0, &[1.0, 2.0, 3.0, 4.0], &[P, P, N, N], &[1.0; 4]).unwrap();
        assert_eq!(fit.stump.polarity, Polarity::Negative);
        assert_eq!(fit.stump.threshold, 2.5);
        assert_eq!(fit.error, 0.0);
    }

    #[test]
    fn identical_values_are_degenerate_with_constant_fallback() {
        let err = train_stump(0, &[2.0, 2.0, 2.0], &[P, N, N], &[1.0; 3]).unwrap_err();
        match err {
            WeakError::DegenerateInput { fallback, .. } => {
                assert!(fallback.stump.threshold < 2.0);
                assert_eq!(fallback.stump.polarity, Polarity::Negative);
                assert_eq!(fallback.error, 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(train_stump(0, &[1.0], &[P], &[1.0]), Err(WeakError::InvalidInput(_))));
        assert!(matches!(train_stump(0, &[1.0, 2.0], &[P, N], &[0.0, 0.0]), Err(WeakError::InvalidInput(_))));
        assert!(matches!(train_stump(0, &[1.0, 2.0], &[P], &[1.0, 1.0]), Err(WeakError::InvalidInput(_))));
    }

    #[test]
    fn random_instance_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let values: Vec<f64> = (0..50).map(|_| (rng.gen_range(0..20) as f64) * 0.5).collect();
            let labels: Vec<Label> = (0..50).map(|_| if rng.gen_bool(0.4) { P } else { N }).collect();
            let weights: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
            let fit = train_stump(0, &values, &labels, &weights).unwrap();
            let brute = brute_force_min(&values, &labels, &weights);
            assert!((fit.error - brute).abs() < 1e-12, "{} vs {}", fit.error, brute);
            let direct: f64 = (0..50)
                .filter(|&i| fit.stump.respond_value(values[i]) != labels[i].is_positive())
                .map(|i| weights[i])
                .sum();
            assert!((direct - fit.error).abs() < 1e-12);
        }
    }

    #[test]
    fn balanced_weights_split_mass() {
        let w: Vec<f64> = balanced_weights(&[P, N, N, N]);
        assert_eq!(w, vec![0.5, 0.5 / 3.0, 0.5 / 3.0, 0.5 / 3.0]);
    }

    proptest! {
        #[test]
        fn never_worse_than_constant(values in proptest::collection::vec(-100.0f64..100.0, 2..40), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let labels: Vec<Label> = values.iter().map(|_| if rng.gen_bool(0.5) { P } else { N }).collect();
            let weights: Vec<f64> = values.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
            let pos: f64 = labels.iter().zip(&weights).filter(|(l, _)| l.is_positive()).map(|(_, w)| w).sum();
            let neg: f64 = weights.iter().sum::<f64>() - pos;
            let err = match train_stump(0, &values, &labels, &weights) {
                Ok(fit) => fit.error,
                Err(WeakError::DegenerateInput { fallback, .. }) => fallback.error,
                Err(e) => panic!("{e}"),
            };
            prop_assert!(err <= pos.min(neg) + 1e-12);
        }

        #[test]
        fn responses_invariant_under_monotone_transform(values in proptest::collection::vec(-5.0f64..5.0, 2..40), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let labels: Vec<Label> = values.iter().map(|_| if rng.gen_bool(0.5) { P } else { N }).collect();
            let weights = vec![1.0; values.len()];
            let transformed: Vec<f64> = values.iter().map(|v| (v * 0.7).exp() * 3.0 - 1.0).collect();
            let a = train_stump(0, &values, &labels, &weights);
            let b = train_stump(0, &transformed, &labels, &weights);
            if let (Ok(a), Ok(b)) = (a, b) {
                for (v, t) in values.iter().zip(&transformed) {
                    prop_assert_eq!(a.stump.respond_value(*v), b.stump.respond_value(*t));
                }
            }
        }
    }
}
