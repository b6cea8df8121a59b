use rayon::prelude::*;

use crate::label::Label;
use crate::scalar::Real;
use crate::weak::{FeatureSource, IntegralImage};

use super::model::Cascade;
use super::scan::{evaluate_detections, merge_detections, scan_windows, BBox, Detection, ScanConfig};
use super::CascadeError;

/// One operating point of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Final-stage offset; windows with `wᵀx` strictly above it are accepted.
    pub threshold: f64,
    pub false_positives: usize,
    pub detection_rate: f64,
}

/// Final-stage raw score `wᵀx` of a sample that passes every earlier stage.
fn survivor_score<T: Real, S: FeatureSource<T> + ?Sized>(cascade: &Cascade<T>, sample: &S) -> Option<f64> {
    let (last, earlier) = cascade.stages.split_last()?;
    if earlier.iter().all(|s| s.accepts(sample)) {
        Some(last.classifier.model.score(sample).as_f64())
    } else {
        None
    }
}

/// Sweeps the final stage's offset across all observed scores of labeled
/// windows, earlier stages fixed. Points run from the strictest offset
/// (nothing accepted) to the loosest, so false positives and detection rate
/// are both nondecreasing.
pub fn roc_curve<T, S>(cascade: &Cascade<T>, samples: &[(S, Label)]) -> Result<Vec<RocPoint>, CascadeError>
where
    T: Real,
    S: FeatureSource<T> + Sync,
{
    if cascade.is_empty() {
        return Err(CascadeError::InvalidConfig("ROC sweep needs at least one stage".into()));
    }
    let total_pos = samples.iter().filter(|(_, l)| l.is_positive()).count();
    if samples.is_empty() {
        return Err(CascadeError::EmptyPool);
    }
    let mut scored: Vec<(f64, Label)> =
        samples.par_iter().filter_map(|(s, l)| survivor_score(cascade, s).map(|v| (v, *l))).collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let rate = |tp: usize| if total_pos == 0 { 0.0 } else { tp as f64 / total_pos as f64 };
    let top = scored.first().map_or(0.0, |s| s.0);
    let mut points = vec![RocPoint { threshold: top, false_positives: 0, detection_rate: 0.0 }];
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < scored.len() {
        let v = scored[i].0;
        while i < scored.len() && scored[i].0 == v {
            if scored[i].1.is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // Offset just below `v`: the next lower score, or one unit below.
        let threshold = if i < scored.len() { scored[i].0 } else { v - v.abs().max(1.0) };
        points.push(RocPoint { threshold, false_positives: fp, detection_rate: rate(tp) });
    }
    Ok(points)
}

/// Best detection rate among points with at most `max_false_positives`.
pub fn detection_at_false_positives(points: &[RocPoint], max_false_positives: usize) -> f64 {
    points.iter().filter(|p| p.false_positives <= max_false_positives).map(|p| p.detection_rate).fold(0.0, f64::max)
}

/// Image-level sweep: windows surviving the earlier stages are thresholded
/// on the final-stage score at `levels` quantiles, merged, and matched
/// against ground truth.
pub fn roc_curve_images<T: Real>(
    cascade: &Cascade<T>,
    images: &[(IntegralImage, Vec<BBox>)],
    scan: &ScanConfig,
    min_neighbors: usize,
    levels: usize,
) -> Result<Vec<RocPoint>, CascadeError> {
    if cascade.is_empty() {
        return Err(CascadeError::InvalidConfig("ROC sweep needs at least one stage".into()));
    }
    let mut per_image: Vec<Vec<Detection>> = Vec::with_capacity(images.len());
    for (ii, _) in images {
        let windows = scan_windows(ii.width(), ii.height(), scan)?;
        let dets = windows
            .par_iter()
            .filter_map(|&w| {
                let view = cascade.window(ii, w).ok()?;
                survivor_score(cascade, &view).map(|score| Detection { bbox: BBox::from_window(w), score })
            })
            .collect();
        per_image.push(dets);
    }
    let mut all: Vec<f64> = per_image.iter().flatten().map(|d| d.score).collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let total_gt: usize = images.iter().map(|(_, g)| g.len()).sum();
    let mut thresholds: Vec<f64> = if all.is_empty() {
        vec![0.0]
    } else {
        let levels = levels.max(2);
        (0..levels).map(|q| all[q * (all.len() - 1) / (levels - 1)]).collect()
    };
    if let Some(&lo) = all.first() {
        thresholds.push(lo - lo.abs().max(1.0));
    }
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    thresholds.dedup();
    let mut points: Vec<RocPoint> = thresholds
        .iter()
        .map(|&t| {
            let (mut tp, mut fp) = (0, 0);
            for (dets, (_, gt)) in per_image.iter().zip(images) {
                let kept: Vec<Detection> = dets.iter().copied().filter(|d| d.score > t).collect();
                let e = evaluate_detections(&merge_detections(&kept, min_neighbors), gt);
                tp += e.true_positives;
                fp += e.false_positives;
            }
            RocPoint {
                threshold: t,
                false_positives: fp,
                detection_rate: if total_gt == 0 { 0.0 } else { tp as f64 / total_gt as f64 },
            }
        })
        .collect();
    points.sort_by(|a, b| {
        a.false_positives.cmp(&b.false_positives).then(a.detection_rate.partial_cmp(&b.detection_rate).unwrap())
    });
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::model::tests::threshold_stage;

    use Label::{Negative as N, Positive as P};

    fn data() -> Vec<(Vec<f64>, Label)> {
        // Feature 0 gates the first stage; the final stage scores feature 1.
        vec![
            (vec![1.0, 1.0], P),
            (vec![1.0, 0.0], P),
            (vec![0.0, 1.0], P),
            (vec![1.0, 1.0], N),
            (vec![1.0, 0.0], N),
            (vec![0.0, 0.0], N),
        ]
    }

    #[test]
    fn sweep_extremes_and_monotonicity() {
        let c = Cascade { features: vec![], stages: vec![threshold_stage(0, 0.5), threshold_stage(1, 0.5)] };
        let pts = roc_curve(&c, &data()).unwrap();
        let first = pts.first().unwrap();
        assert_eq!((first.false_positives, first.detection_rate), (0, 0.0));
        let last = pts.last().unwrap();
        // Everything that passes stage one is accepted: 2 of 3 positives, 2 negatives.
        assert_eq!(last.false_positives, 2);
        assert!((last.detection_rate - 2.0 / 3.0).abs() < 1e-15);
        for w in pts.windows(2) {
            assert!(w[1].false_positives >= w[0].false_positives);
            assert!(w[1].detection_rate >= w[0].detection_rate);
            assert!(w[1].threshold <= w[0].threshold);
        }
        assert_eq!(
            detection_at_false_positives(&pts, 1),
            pts.iter().filter(|p| p.false_positives <= 1).map(|p| p.detection_rate).fold(0.0, f64::max)
        );
    }

    #[test]
    fn empty_cascade_is_rejected() {
        let c = Cascade::<f64>::default();
        assert!(roc_curve(&c, &data()).is_err());
    }
}
