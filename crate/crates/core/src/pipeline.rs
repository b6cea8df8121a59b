//! End-to-end training on vector datasets: one stump per raw coordinate,
//! greedy selection, and online streaming of further samples.

use crate::error::Result;
use crate::gslda::{GreedyConfig, LinearModel};
use crate::io::Dataset;
use crate::label::Label;
use crate::ogslda::{online_insert, OnlineClassifier, ThresholdCriterion};
use crate::scalar::Real;
use crate::weak::{balanced_weights, train_feature_table, Stump};

fn as_real<T: Real>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::lit(v)).collect()
}

/// Fits a class-balanced stump on every coordinate of `train`, selects `t`
/// of them greedily and fits the discriminant.
pub fn train_vector_classifier<T: Real>(
    train: &Dataset,
    t: usize,
    greedy: GreedyConfig,
    criterion: ThresholdCriterion,
) -> Result<OnlineClassifier<T>> {
    let weights = balanced_weights::<T>(&train.labels);
    let value = |f: usize, j: usize| T::lit(train.samples[j][f]);
    let (fits, table) = train_feature_table(train.dim(), train.len(), value, &train.labels, &weights)?;
    let stumps: Vec<Stump<T>> = fits.iter().map(|f| f.stump).collect();
    let (model, sel) = LinearModel::train(&stumps, &table, t, greedy, criterion)?;
    Ok(OnlineClassifier::new(model, sel.state)?)
}

/// Inserts every sample of `stream` in order.
pub fn stream_insert<T: Real>(clf: &mut OnlineClassifier<T>, stream: &Dataset) -> Result<()> {
    for (x, &l) in stream.samples.iter().zip(&stream.labels) {
        online_insert(clf, &as_real::<T>(x), l)?;
    }
    Ok(())
}

/// Fraction of misclassified samples.
pub fn error_rate<T: Real>(model: &LinearModel<T>, test: &Dataset) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let wrong = test.samples.iter().zip(&test.labels).filter(|(x, &l)| model.classify(&as_real::<T>(x)) != l).count();
    wrong as f64 / test.len() as f64
}

/// Class predicted for each sample.
pub fn predict<T: Real>(model: &LinearModel<T>, data: &Dataset) -> Vec<Label> {
    data.samples.iter().map(|x| model.classify(&as_real::<T>(x))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gaussian_classes;

    #[test]
    fn separable_gaussians_are_learned() {
        let train = gaussian_classes(150, 150, 10, 3, 2.5, 1);
        let test = gaussian_classes(200, 200, 10, 3, 2.5, 2);
        let clf: OnlineClassifier<f64> =
            train_vector_classifier(&train, 5, GreedyConfig::default(), ThresholdCriterion::Fisher).unwrap();
        assert!(error_rate(&clf.model, &test) < 0.1);
        assert_eq!(predict(&clf.model, &test).len(), 400);
    }

    #[test]
    fn streaming_counts_inserts() {
        let train = gaussian_classes(60, 60, 6, 2, 2.0, 3);
        let more = gaussian_classes(20, 20, 6, 2, 2.0, 4);
        let mut clf: OnlineClassifier<f32> =
            train_vector_classifier(&train, 4, GreedyConfig::default(), ThresholdCriterion::Fisher).unwrap();
        stream_insert(&mut clf, &more).unwrap();
        assert_eq!(clf.insert_count, 40);
        assert_eq!(clf.state.n(), 160);
    }
}
