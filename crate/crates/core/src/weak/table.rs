use rayon::prelude::*;

use crate::label::Label;
use crate::scalar::Real;

use super::stump::{train_stump, Stump, StumpFit};
use super::{FeatureSource, WeakError};

/// Bit-packed binary responses of `M` weak learners on `N` labeled samples.
///
/// Row `i` holds learner `i`'s responses; bit `j` of a row is sample `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureTable {
    n_samples: usize,
    words: usize,
    rows: Vec<Vec<u64>>,
    labels: Vec<Label>,
    positive_mask: Vec<u64>,
    negative_mask: Vec<u64>,
}

fn masks(labels: &[Label]) -> (Vec<u64>, Vec<u64>) {
    let words = labels.len().div_ceil(64);
    let mut pos = vec![0u64; words];
    let mut neg = vec![0u64; words];
    for (j, l) in labels.iter().enumerate() {
        let bit = 1u64 << (j % 64);
        if l.is_positive() {
            pos[j / 64] |= bit;
        } else {
            neg[j / 64] |= bit;
        }
    }
    (pos, neg)
}

impl FeatureTable {
    pub fn new(labels: Vec<Label>) -> Self {
        let (positive_mask, negative_mask) = masks(&labels);
        Self {
            n_samples: labels.len(),
            words: labels.len().div_ceil(64),
            rows: Vec::new(),
            labels,
            positive_mask,
            negative_mask,
        }
    }

    /// Builds from dense `0/1` rows (one per learner). Any nonzero entry counts as 1.
    pub fn from_rows(rows: &[Vec<u8>], labels: Vec<Label>) -> Self {
        let mut t = Self::new(labels);
        for r in rows {
            t.push_row(r.iter().map(|&v| v != 0));
        }
        t
    }

    /// Appends one learner's responses; the iterator must yield exactly `N` values.
    pub fn push_row(&mut self, responses: impl IntoIterator<Item = bool>) {
        let mut row = vec![0u64; self.words];
        let mut count = 0;
        for (j, r) in responses.into_iter().enumerate() {
            assert!(j < self.n_samples, "row longer than sample count");
            if r {
                row[j / 64] |= 1u64 << (j % 64);
            }
            count += 1;
        }
        assert_eq!(count, self.n_samples, "row length must equal sample count");
        self.rows.push(row);
    }

    pub fn n_features(&self) -> usize {
        self.rows.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn class_count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    #[inline]
    pub fn get(&self, feature: usize, sample: usize) -> u8 {
        ((self.rows[feature][sample / 64] >> (sample % 64)) & 1) as u8
    }

    /// All learner responses for one sample.
    pub fn column(&self, sample: usize) -> Vec<u8> {
        (0..self.n_features()).map(|i| self.get(i, sample)).collect()
    }

    fn mask(&self, label: Label) -> &[u64] {
        if label.is_positive() {
            &self.positive_mask
        } else {
            &self.negative_mask
        }
    }

    /// Number of samples of `label` on which learner `i` fires.
    pub fn ones(&self, i: usize, label: Label) -> u64 {
        self.rows[i].iter().zip(self.mask(label)).map(|(r, m)| (r & m).count_ones() as u64).sum()
    }

    /// Number of samples of `label` on which learners `i` and `j` both fire.
    pub fn co_ones(&self, i: usize, j: usize, label: Label) -> u64 {
        self.rows[i]
            .iter()
            .zip(&self.rows[j])
            .zip(self.mask(label))
            .map(|((a, b), m)| (a & b & m).count_ones() as u64)
            .sum()
    }

    /// Table restricted to `features`, in that order.
    pub fn select_features(&self, features: &[usize]) -> Self {
        let mut t = Self::new(self.labels.clone());
        t.rows = features.iter().map(|&i| self.rows[i].clone()).collect();
        t
    }

    /// Table over the samples at `indices` (repeats allowed), in that order.
    pub fn select_samples(&self, indices: &[usize]) -> Self {
        let labels = indices.iter().map(|&j| self.labels[j]).collect();
        let mut t = Self::new(labels);
        for i in 0..self.n_features() {
            t.push_row(indices.iter().map(|&j| self.get(i, j) == 1));
        }
        t
    }
}

/// Evaluates trained stumps on every sample: `responses[i][j] = stumps[i](samples[j])`.
pub fn build_feature_table<T, S>(stumps: &[Stump<T>], samples: &[S], labels: Vec<Label>) -> FeatureTable
where
    T: Real,
    S: FeatureSource<T> + Sync,
{
    assert_eq!(samples.len(), labels.len());
    let rows: Vec<Vec<u8>> = stumps.par_iter().map(|s| samples.iter().map(|x| s.respond(x) as u8).collect()).collect();
    FeatureTable::from_rows(&rows, labels)
}

/// Trains one stump per feature (in parallel, assembled in feature order)
/// and returns them with their response table.
///
/// `value(feature, sample)` supplies raw feature values; they are computed
/// feature by feature so the full `M x N` value matrix is never materialized.
/// Features whose values are all identical keep their constant fallback stump.
pub fn train_feature_table<T, F>(
    n_features: usize,
    n_samples: usize,
    value: F,
    labels: &[Label],
    weights: &[T],
) -> Result<(Vec<StumpFit<T>>, FeatureTable), WeakError>
where
    T: Real,
    F: Fn(usize, usize) -> T + Sync,
{
    if labels.len() != n_samples || weights.len() != n_samples {
        return Err(WeakError::InvalidInput("labels/weights must match sample count".into()));
    }
    let trained: Vec<Result<(StumpFit<T>, Vec<u8>), WeakError>> = (0..n_features)
        .into_par_iter()
        .map(|f| {
            let values: Vec<T> = (0..n_samples).map(|j| value(f, j)).collect();
            let fit = match train_stump(f, &values, labels, weights) {
                Ok(fit) => fit,
                Err(WeakError::DegenerateInput { fallback, .. }) => StumpFit::from_f64(&fallback),
                Err(e) => return Err(e),
            };
            let row = values.iter().map(|&v| fit.stump.respond_value(v) as u8).collect();
            Ok((fit, row))
        })
        .collect();
    let mut fits = Vec::with_capacity(n_features);
    let mut table = FeatureTable::new(labels.to_vec());
    for r in trained {
        let (fit, row) = r?;
        table.push_row(row.into_iter().map(|v| v == 1));
        fits.push(fit);
    }
    Ok((fits, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weak::stump::Polarity;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use Label::{Negative as N, Positive as P};

    #[test]
    fn singleton_table() {
        let stump = Stump::new(0, 0.5, Polarity::Positive);
        let sample = vec![0.7f64];
        let t = build_feature_table(&[stump], std::slice::from_ref(&sample), vec![P]);
        assert_eq!(t.n_features(), 1);
        assert_eq!(t.n_samples(), 1);
        assert_eq!(t.get(0, 0), stump.respond(&sample[..]) as u8);
    }

    fn random_setup(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (Vec<Stump<f64>>, Vec<Vec<f64>>, Vec<Label>) {
        let stumps = (0..m)
            .map(|i| {
                let pol = if rng.gen_bool(0.5) { Polarity::Positive } else { Polarity::Negative };
                Stump::new(i % 5, rng.gen_range(-1.0..1.0), pol)
            })
            .collect();
        let samples = (0..n).map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let labels = (0..n).map(|_| if rng.gen_bool(0.5) { P } else { N }).collect();
        (stumps, samples, labels)
    }

    #[test]
    fn columns_match_reevaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (stumps, samples, labels) = random_setup(&mut rng, 9, 130);
        let t = build_feature_table(&stumps, &samples, labels);
        for (j, s) in samples.iter().enumerate() {
            let expected: Vec<u8> = stumps.iter().map(|st| st.respond(&s[..]) as u8).collect();
            assert_eq!(t.column(j), expected);
        }
    }

    #[test]
    fn permuting_samples_permutes_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (stumps, samples, labels) = random_setup(&mut rng, 6, 70);
        let t = build_feature_table(&stumps, &samples, labels.clone());
        let mut perm: Vec<usize> = (0..70).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&j| samples[j].clone()).collect();
        let plabels = perm.iter().map(|&j| labels[j]).collect();
        let tp = build_feature_table(&stumps, &permuted, plabels);
        assert_eq!(tp, t.select_samples(&perm));
        for (k, &j) in perm.iter().enumerate() {
            assert_eq!(tp.column(k), t.column(j));
        }
    }

    #[test]
    fn counts_match_dense_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<u8>> = (0..4).map(|_| (0..150).map(|_| rng.gen_range(0..2)).collect()).collect();
        let labels: Vec<Label> = (0..150).map(|_| if rng.gen_bool(0.3) { P } else { N }).collect();
        let t = FeatureTable::from_rows(&rows, labels.clone());
        for l in [P, N] {
            for i in 0..4 {
                let ones = (0..150).filter(|&j| labels[j] == l && rows[i][j] == 1).count() as u64;
                assert_eq!(t.ones(i, l), ones);
                for k in 0..4 {
                    let co = (0..150).filter(|&j| labels[j] == l && rows[i][j] == 1 && rows[k][j] == 1).count();
                    assert_eq!(t.co_ones(i, k, l), co as u64);
                }
            }
        }
    }

    #[test]
    fn trained_table_agrees_with_its_stumps() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let samples: Vec<Vec<f64>> = (0..80).map(|_| (0..7).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let labels: Vec<Label> = samples.iter().map(|s| if s[2] + 0.2 * s[4] > 0.6 { P } else { N }).collect();
        let weights = vec![1.0; 80];
        let mut with_constant = samples.clone();
        for s in &mut with_constant {
            s.push(3.0);
        }
        let (fits, table) = train_feature_table(8, 80, |f, j| with_constant[j][f], &labels, &weights).unwrap();
        assert_eq!(fits.len(), 8);
        for (i, fit) in fits.iter().enumerate() {
            assert_eq!(fit.stump.feature_id, i);
            for (j, s) in with_constant.iter().enumerate() {
                assert_eq!(table.get(i, j), fit.stump.respond(&s[..]) as u8);
            }
        }
        // Constant feature: a constant predictor row.
        let row: Vec<u8> = (0..80).map(|j| table.get(7, j)).collect();
        assert!(row.iter().all(|&v| v == row[0]));
    }
}
