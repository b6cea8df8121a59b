use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::gslda::{fisher_threshold, ScatterState};
use crate::linalg::{dot, inverse_normal_cdf, quadratic_form};
use crate::scalar::Real;

/// Default allowed miss rate for the detection-oriented criteria.
pub const DEFAULT_MISS_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error("class densities do not cross between the projected means (midpoint {midpoint})")]
    NoRootBetweenMeans { midpoint: f64 },
    #[error("a class has no samples")]
    EmptyClass,
    #[error("miss rate {0} outside (0, 1)")]
    Domain(f64),
    #[error("unknown threshold criterion {0:?}")]
    Unknown(String),
}

/// How the offset `w0` is placed along the discriminant direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ThresholdCriterion {
    /// Midpoint of the projected means plus the log prior ratio.
    #[default]
    Fisher,
    /// Crossing point of the two fitted projected normal densities.
    EqualDensity,
    /// Positive-class quantile keeping the expected miss rate at `miss_rate`.
    TargetDetection { miss_rate: f64 },
    /// Projected negative mean.
    NegativeMean,
    /// Smaller of the target-detection and negative-mean offsets.
    AsymmetricMin { miss_rate: f64 },
}

impl fmt::Display for ThresholdCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fisher => write!(f, "fisher"),
            Self::EqualDensity => write!(f, "equal-density"),
            Self::TargetDetection { miss_rate } => write!(f, "target-detect:{miss_rate}"),
            Self::NegativeMean => write!(f, "neg-mean"),
            Self::AsymmetricMin { miss_rate } => write!(f, "asym-min:{miss_rate}"),
        }
    }
}

impl FromStr for ThresholdCriterion {
    type Err = ThresholdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let rate = || -> Result<f64, ThresholdError> {
            let p = match arg {
                Some(a) => a.parse::<f64>().map_err(|_| ThresholdError::Unknown(s.to_string()))?,
                None => DEFAULT_MISS_RATE,
            };
            if p > 0.0 && p < 1.0 {
                Ok(p)
            } else {
                Err(ThresholdError::Domain(p))
            }
        };
        let no_arg = |c: Self| if arg.is_none() { Ok(c) } else { Err(ThresholdError::Unknown(s.to_string())) };
        match name.trim().to_ascii_lowercase().as_str() {
            "fisher" => no_arg(Self::Fisher),
            "equal-density" => no_arg(Self::EqualDensity),
            "neg-mean" | "negative-mean" => no_arg(Self::NegativeMean),
            "target-detect" | "target-detection" => Ok(Self::TargetDetection { miss_rate: rate()? }),
            "asym-min" | "asymmetric-min" => Ok(Self::AsymmetricMin { miss_rate: rate()? }),
            _ => Err(ThresholdError::Unknown(s.to_string())),
        }
    }
}

/// Projected class statistics: means `wᵀm_c` and standard deviations
/// `sqrt(wᵀΣ_c w / (N_c − 1))` (zero for a class with fewer than two samples).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection<T> {
    pub mu1: T,
    pub mu2: T,
    pub sigma1: T,
    pub sigma2: T,
}

pub fn project_classes<T: Real>(state: &ScatterState<T>, w: &[T]) -> Projection<T> {
    let sd = |n: u64, scatter| {
        if n < 2 {
            return T::zero();
        }
        let v = quadratic_form(w, scatter).unwrap_or_else(|_| T::zero());
        (v.max(T::zero()) / T::lit((n - 1) as f64)).sqrt()
    };
    Projection {
        mu1: dot(w, &state.m1),
        mu2: dot(w, &state.m2),
        sigma1: sd(state.n1, &state.sigma1),
        sigma2: sd(state.n2, &state.sigma2),
    }
}

/// Point strictly between `mu1` and `mu2` where the normal densities
/// `N(mu1, s1²)` and `N(mu2, s2²)` are equal.
pub fn equal_density_root(mu1: f64, s1: f64, mu2: f64, s2: f64) -> Result<f64, ThresholdError> {
    let midpoint = 0.5 * (mu1 + mu2);
    let none = Err(ThresholdError::NoRootBetweenMeans { midpoint });
    if !(s1 > 0.0 && s2 > 0.0) || mu1 == mu2 {
        return none;
    }
    let (v1, v2) = (s1 * s1, s2 * s2);
    // a x² + b x + c = 0 from equating the log densities.
    let a = 0.5 / v2 - 0.5 / v1;
    let b = mu1 / v1 - mu2 / v2;
    let c = mu2 * mu2 / (2.0 * v2) - mu1 * mu1 / (2.0 * v1) + s2.ln() - s1.ln();
    let (lo, hi) = (mu1.min(mu2), mu1.max(mu2));
    let between = |x: f64| x > lo && x < hi;
    if a.abs() <= 1e-12 * (0.5 / v1 + 0.5 / v2) {
        let x = -c / b;
        return if between(x) { Ok(x) } else { none };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return none;
    }
    let qq = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = vec![];
    if qq != 0.0 {
        roots.push(qq / a);
        roots.push(c / qq);
    } else {
        roots.push(0.0);
    }
    roots.into_iter().find(|&x| between(x)).map_or(none, Ok)
}

/// Equal-density offset for direction `w`.
pub fn threshold_equal_density<T: Real>(state: &ScatterState<T>, w: &[T]) -> Result<T, ThresholdError> {
    let p = project_classes(state, w);
    equal_density_root(p.mu1.as_f64(), p.sigma1.as_f64(), p.mu2.as_f64(), p.sigma2.as_f64()).map(T::lit)
}

/// `w0 = μ1 + Φ⁻¹(miss_rate) σ1`.
pub fn threshold_target_detection<T: Real>(
    state: &ScatterState<T>,
    w: &[T],
    miss_rate: f64,
) -> Result<T, ThresholdError> {
    if state.n1 == 0 {
        return Err(ThresholdError::EmptyClass);
    }
    let z = inverse_normal_cdf(miss_rate).map_err(|_| ThresholdError::Domain(miss_rate))?;
    let p = project_classes(state, w);
    Ok(p.mu1 + T::lit(z) * p.sigma1)
}

/// `w0 = wᵀ m2`.
pub fn threshold_negative_mean<T: Real>(state: &ScatterState<T>, w: &[T]) -> Result<T, ThresholdError> {
    if state.n2 == 0 {
        return Err(ThresholdError::EmptyClass);
    }
    Ok(dot(w, &state.m2))
}

/// Offset for `criterion`. An equal-density search without a root between
/// the means falls back to the midpoint of the projected means.
pub fn compute_threshold<T: Real>(
    criterion: ThresholdCriterion,
    state: &ScatterState<T>,
    w: &[T],
) -> Result<T, ThresholdError> {
    if state.n1 == 0 || state.n2 == 0 {
        return Err(ThresholdError::EmptyClass);
    }
    match criterion {
        ThresholdCriterion::Fisher => Ok(fisher_threshold(state, w)),
        ThresholdCriterion::EqualDensity => match threshold_equal_density(state, w) {
            Err(ThresholdError::NoRootBetweenMeans { midpoint }) => {
                log::warn!("equal-density threshold has no root between the means, using midpoint {midpoint}");
                Ok(T::lit(midpoint))
            }
            r => r,
        },
        ThresholdCriterion::TargetDetection { miss_rate } => threshold_target_detection(state, w, miss_rate),
        ThresholdCriterion::NegativeMean => threshold_negative_mean(state, w),
        ThresholdCriterion::AsymmetricMin { miss_rate } => {
            let t = threshold_target_detection(state, w, miss_rate)?;
            let n = threshold_negative_mean(state, w)?;
            Ok(t.min(n))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{normal_pdf, SymMat};

    fn density(x: f64, mu: f64, s: f64) -> f64 {
        normal_pdf((x - mu) / s) / s
    }

    #[test]
    fn equal_variances_give_midpoint() {
        let r = equal_density_root(0.0, 1.0, 2.0, 1.0).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unequal_variances_equate_densities() {
        for (mu1, s1, mu2, s2) in [(3.0, 0.5, 0.0, 2.0), (-1.0, 1.3, 4.0, 0.2), (0.1, 0.05, 0.0, 0.07)] {
            let r = equal_density_root(mu1, s1, mu2, s2).unwrap();
            assert!(r > f64::min(mu1, mu2) && r < f64::max(mu1, mu2));
            let (p, q) = (density(r, mu1, s1), density(r, mu2, s2));
            assert!((p - q).abs() <= 1e-9 * p.max(q), "{p} {q}");
            // Class order does not matter.
            let swapped = equal_density_root(mu2, s2, mu1, s1).unwrap();
            assert!((r - swapped).abs() < 1e-12 * r.abs().max(1.0));
        }
    }

    #[test]
    fn no_root_between_means_reports_midpoint() {
        // A very wide negative density dominates everywhere between the means.
        match equal_density_root(0.0, 0.01, 0.001, 10.0) {
            Err(ThresholdError::NoRootBetweenMeans { midpoint }) => assert_eq!(midpoint, 0.0005),
            other => panic!("{other:?}"),
        }
        assert!(equal_density_root(1.0, 0.0, 0.0, 1.0).is_err());
    }

    fn state(mu1: f64, var1: f64, n1: u64, mu2: f64, var2: f64, n2: u64) -> ScatterState<f64> {
        ScatterState {
            n1,
            n2,
            m1: vec![mu1],
            m2: vec![mu2],
            sigma1: SymMat::from_diag(&[var1 * (n1 - 1) as f64]),
            sigma2: SymMat::from_diag(&[var2 * (n2 - 1) as f64]),
            sb: SymMat::zeros(1),
            ridge: vec![0.0],
            sw_inv: SymMat::identity(1),
        }
    }

    #[test]
    fn target_detection_quantile() {
        let s = state(2.0, 0.25, 11, 0.0, 1.0, 11);
        let w0 = threshold_target_detection(&s, &[1.0], 0.5).unwrap();
        assert!((w0 - 2.0).abs() < 1e-14);
        let w0 = threshold_target_detection(&s, &[1.0], 0.01).unwrap();
        assert!((w0 - (2.0 - 2.326347874040841 * 0.5)).abs() < 1e-9);
        assert_eq!(threshold_target_detection(&s, &[1.0], 1.0).unwrap_err(), ThresholdError::Domain(1.0));
    }

    #[test]
    fn zero_variance_target_detection_is_the_mean() {
        let s = state(1.5, 0.0, 4, 0.0, 1.0, 4);
        assert_eq!(threshold_target_detection(&s, &[2.0], 0.01).unwrap(), 3.0);
    }

    #[test]
    fn asymmetric_min_takes_the_smaller() {
        let s = state(2.0, 1.0, 5, 0.5, 1.0, 5);
        let t = threshold_target_detection(&s, &[1.0], 0.01).unwrap();
        let n = threshold_negative_mean(&s, &[1.0]).unwrap();
        let a = compute_threshold(ThresholdCriterion::AsymmetricMin { miss_rate: 0.01 }, &s, &[1.0]).unwrap();
        assert_eq!(a, t.min(n));
        assert_eq!(n, 0.5);
    }

    #[test]
    fn equal_density_criterion_falls_back() {
        let s = state(0.0, 1e-4, 3, 0.001, 100.0, 3);
        let t = compute_threshold(ThresholdCriterion::EqualDensity, &s, &[1.0]).unwrap();
        assert_eq!(t, 0.0005);
    }

    #[test]
    fn names_round_trip() {
        for c in [
            ThresholdCriterion::Fisher,
            ThresholdCriterion::EqualDensity,
            ThresholdCriterion::TargetDetection { miss_rate: 0.05 },
            ThresholdCriterion::NegativeMean,
            ThresholdCriterion::AsymmetricMin { miss_rate: 0.01 },
        ] {
            assert_eq!(c.to_string().parse::<ThresholdCriterion>().unwrap(), c);
        }
        assert_eq!(
            "asym-min".parse::<ThresholdCriterion>().unwrap(),
            ThresholdCriterion::AsymmetricMin { miss_rate: 0.01 }
        );
        assert!("fisher:3".parse::<ThresholdCriterion>().is_err());
        assert!("target-detect:2".parse::<ThresholdCriterion>().is_err());
        assert!("median".parse::<ThresholdCriterion>().is_err());
    }
}
