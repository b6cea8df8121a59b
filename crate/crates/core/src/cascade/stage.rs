use crate::gslda::{GreedyConfig, GreedySelector, LinearModel};
use crate::label::Label;
use crate::linalg::dot;
use crate::ogslda::{OnlineClassifier, ThresholdCriterion, DEFAULT_MISS_RATE};
use crate::scalar::Real;
use crate::weak::{balanced_weights, train_feature_table, FeatureSource, FeatureTable};

use super::CascadeError;

/// Per-stage learning targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageGoal {
    pub min_detection: f64,
    pub max_false_positive: f64,
    pub max_learners: usize,
}

impl Default for StageGoal {
    fn default() -> Self {
        Self { min_detection: 0.99, max_false_positive: 0.5, max_learners: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageConfig {
    pub goal: StageGoal,
    pub greedy: GreedyConfig,
    /// Miss rate of the asymmetric offset rule.
    pub miss_rate: f64,
    /// Lower the formula offset when needed so the training detection goal holds.
    pub calibrate: bool,
}

impl Default for StageConfig {
    fn default() -> Self {
        Self {
            goal: StageGoal::default(),
            greedy: GreedyConfig::default(),
            miss_rate: DEFAULT_MISS_RATE,
            calibrate: true,
        }
    }
}

/// Training-pool rates recorded when a stage is frozen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageReport {
    pub learners: usize,
    pub positives: usize,
    pub negatives: usize,
    pub detection_rate: f64,
    pub false_positive_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage<T> {
    pub classifier: OnlineClassifier<T>,
    pub goal: StageGoal,
    pub report: StageReport,
}

impl<T: Real> Stage<T> {
    pub fn margin<S: FeatureSource<T> + ?Sized>(&self, sample: &S) -> T {
        self.classifier.model.margin(sample)
    }

    pub fn accepts<S: FeatureSource<T> + ?Sized>(&self, sample: &S) -> bool {
        self.margin(sample) > T::zero()
    }
}

/// Detection and false-positive rates of `scores > threshold`.
pub(crate) fn rates<T: Real>(scores: &[T], labels: &[Label], threshold: T) -> (f64, f64) {
    let (mut tp, mut fp, mut np, mut nn) = (0usize, 0usize, 0usize, 0usize);
    for (&s, l) in scores.iter().zip(labels) {
        let hit = s > threshold;
        if l.is_positive() {
            np += 1;
            tp += hit as usize;
        } else {
            nn += 1;
            fp += hit as usize;
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (frac(tp, np), frac(fp, nn))
}

/// Largest offset not above `formula` that keeps at least `min_detection`
/// of the positive scores strictly above it.
pub(crate) fn calibrated_threshold<T: Real>(formula: T, scores: &[T], labels: &[Label], min_detection: f64) -> T {
    let mut pos: Vec<T> = scores.iter().zip(labels).filter(|(_, l)| l.is_positive()).map(|(&s, _)| s).collect();
    if pos.is_empty() {
        return formula;
    }
    pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let allowed = ((1.0 - min_detection) * pos.len() as f64 + 1e-9).floor() as usize;
    if allowed >= pos.len() {
        return formula;
    }
    let target = pos[allowed];
    if formula < target {
        return formula;
    }
    let below =
        scores.iter().copied().filter(|&s| s < target).fold(None, |m: Option<T>, s| Some(m.map_or(s, |m| m.max(s))));
    let cut = match below {
        Some(b) => T::lit(0.5) * (b + target),
        None => target - target.abs().max(T::one()),
    };
    cut.min(formula)
}

fn scores<T: Real>(model: &LinearModel<T>, table: &FeatureTable, selected: &[usize]) -> Vec<T> {
    (0..table.n_samples())
        .map(|j| {
            let x: Vec<T> = selected.iter().map(|&i| if table.get(i, j) == 1 { T::one() } else { T::zero() }).collect();
            dot(&model.weights, &x)
        })
        .collect()
}

/// Trains one stage: adds greedily selected learners until the training
/// pools meet the goal, placing the offset with the asymmetric rule.
///
/// `value(feature, sample)` gives raw feature values; stumps are fit on all
/// `n_features` features with class-balanced weights first.
pub fn train_stage<T, F>(
    n_features: usize,
    labels: &[Label],
    value: F,
    config: &StageConfig,
) -> Result<Stage<T>, CascadeError>
where
    T: Real,
    F: Fn(usize, usize) -> T + Sync,
{
    let n1 = labels.iter().filter(|l| l.is_positive()).count();
    let n2 = labels.len() - n1;
    if n1 == 0 || n2 == 0 {
        return Err(CascadeError::EmptyPool);
    }
    let weights = balanced_weights::<T>(labels);
    let (fits, table) = train_feature_table(n_features, labels.len(), value, labels, &weights)?;
    let mut selector = GreedySelector::<T>::new(&table, config.greedy)?;
    let criterion = ThresholdCriterion::AsymmetricMin { miss_rate: config.miss_rate };
    let goal = config.goal;
    let mut last = None;
    while selector.selected().len() < goal.max_learners {
        if selector.step().is_none() {
            break;
        }
        let selected = selector.selected().to_vec();
        let state = selector.state();
        let learners = selected.iter().map(|&i| fits[i].stump).collect();
        let model = LinearModel::fit(learners, &state, criterion)?;
        let raw = scores(&model, &table, &selected);
        let threshold = if config.calibrate {
            calibrated_threshold(model.threshold, &raw, labels, goal.min_detection)
        } else {
            model.threshold
        };
        let (det, fp) = rates(&raw, labels, threshold);
        let report = StageReport {
            learners: selected.len(),
            positives: n1,
            negatives: n2,
            detection_rate: det,
            false_positive_rate: fp,
        };
        log::debug!("stage learner {}: detection {det:.4}, false positives {fp:.4}", selected.len());
        let done = det >= goal.min_detection && fp <= goal.max_false_positive;
        last = Some((model, state, threshold, report));
        if done {
            break;
        }
    }
    let Some((model, state, threshold, report)) = last else {
        return Err(CascadeError::Gslda(crate::gslda::GsldaError::InsufficientRank { requested: 1, available: 0 }));
    };
    if report.detection_rate < goal.min_detection || report.false_positive_rate > goal.max_false_positive {
        return Err(CascadeError::GoalUnreachable {
            learners: report.learners,
            detection_rate: report.detection_rate,
            false_positive_rate: report.false_positive_rate,
        });
    }
    let shift = threshold - model.threshold;
    let mut classifier = OnlineClassifier::new(model, state)?;
    classifier.threshold_offset = shift;
    classifier.model.threshold = threshold;
    Ok(Stage { classifier, goal, report })
}
