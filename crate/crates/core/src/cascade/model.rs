use std::collections::BTreeMap;

use crate::label::Label;
use crate::scalar::Real;
use crate::weak::{FeatureSource, HaarFeature, HaarWindow, IntegralImage, Window};

use super::stage::Stage;
use super::CascadeError;

/// Ordered stages over a shared Haar feature list; stump feature ids index
/// into `features`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cascade<T> {
    pub features: Vec<HaarFeature>,
    pub stages: Vec<Stage<T>>,
}

/// Outcome of running a sample through a cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict<T> {
    pub accepted: bool,
    /// Final-stage margin when accepted, the rejecting stage's margin
    /// otherwise, zero for an empty cascade.
    pub score: T,
    pub stages_evaluated: usize,
}

impl<T: Real> Cascade<T> {
    pub fn new(features: Vec<HaarFeature>) -> Self {
        Self { features, stages: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Feature view of a window, for classification.
    pub fn window<'a>(&'a self, ii: &'a IntegralImage, window: Window) -> Result<HaarWindow<'a>, CascadeError> {
        Ok(HaarWindow::new(ii, &self.features, window)?)
    }

    /// Same cascade keeping only the features some stage uses, in first-use
    /// order, with stump ids remapped.
    pub fn compact(&self) -> Self {
        let mut remap = BTreeMap::new();
        let mut features = Vec::new();
        let mut stages = self.stages.clone();
        for stage in &mut stages {
            for stump in &mut stage.classifier.model.learners {
                let id = *remap.entry(stump.feature_id).or_insert_with(|| {
                    features.push(self.features[stump.feature_id]);
                    features.len() - 1
                });
                stump.feature_id = id;
            }
        }
        Self { features, stages }
    }
}

/// Runs the stages in order, stopping at the first rejection.
pub fn cascade_classify<T: Real, S: FeatureSource<T> + ?Sized>(cascade: &Cascade<T>, sample: &S) -> Verdict<T> {
    let mut score = T::zero();
    for (i, stage) in cascade.stages.iter().enumerate() {
        score = stage.margin(sample);
        if !(score > T::zero()) {
            return Verdict { accepted: false, score, stages_evaluated: i + 1 };
        }
    }
    Verdict { accepted: true, score, stages_evaluated: cascade.stages.len() }
}

/// Online update of every stage the sample reaches.
///
/// Positives update all stages. A negative updates the stages up to and
/// including the first one that rejects it, judged by the cascade before
/// the update. Either every affected stage is updated or none is. Returns
/// the number of stages updated.
pub fn online_update_cascade<T: Real, S: FeatureSource<T> + ?Sized>(
    cascade: &mut Cascade<T>,
    sample: &S,
    label: Label,
) -> Result<usize, CascadeError> {
    let reach =
        if label.is_positive() { cascade.stages.len() } else { cascade_classify(cascade, sample).stages_evaluated };
    let mut updated = Vec::with_capacity(reach);
    for stage in &cascade.stages[..reach] {
        let mut clf = stage.classifier.clone();
        crate::ogslda::online_insert(&mut clf, sample, label)?;
        updated.push(clf);
    }
    for (stage, clf) in cascade.stages.iter_mut().zip(updated) {
        stage.classifier = clf;
    }
    Ok(reach)
}
