use rayon::prelude::*;

use crate::scalar::Real;
use crate::weak::{IntegralImage, Window, BASE_WINDOW};

use super::model::{cascade_classify, Cascade};
use super::CascadeError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    /// Ratio between consecutive window scales.
    pub scale_factor: f64,
    /// Shift at the base scale, in pixels; grows with the scale.
    pub step: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { scale_factor: 1.2, step: 1.0 }
    }
}

/// Axis-aligned box in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Self { x, y, width, height }
    }

    pub fn from_window(w: Window) -> Self {
        let side = w.side() as f64;
        Self::new(w.x as f64, w.y as f64, side, side)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let ix = (a.x + a.width).min(b.x + b.width) - a.x.max(b.x);
    let iy = (a.y + a.height).min(b.y + b.height) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a.area() + b.area() - inter)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
}

/// Every window position and scale that fits a `width x height` image:
/// scales `f^k` while the window side `round(24 f^k)` fits, positions on a
/// grid of pitch `max(1, round(step f^k))`.
pub fn scan_windows(width: u32, height: u32, cfg: &ScanConfig) -> Result<Vec<Window>, CascadeError> {
    if width < BASE_WINDOW || height < BASE_WINDOW {
        return Err(CascadeError::ImageTooSmall { width, height });
    }
    if !(cfg.scale_factor > 1.0) || !(cfg.step > 0.0) {
        return Err(CascadeError::InvalidConfig(format!("scale factor {} / step {}", cfg.scale_factor, cfg.step)));
    }
    let mut out = Vec::new();
    let mut scale = 1.0f64;
    loop {
        let w = Window { x: 0, y: 0, scale };
        let side = w.side();
        if side > width || side > height {
            break;
        }
        let pitch = ((cfg.step * scale).round() as u32).max(1);
        for y in (0..=height - side).step_by(pitch as usize) {
            for x in (0..=width - side).step_by(pitch as usize) {
                out.push(Window { x, y, scale });
            }
        }
        scale *= cfg.scale_factor;
    }
    Ok(out)
}

/// Windows of the image the cascade accepts, scored by the final-stage margin.
pub fn scan_image<T: Real>(
    cascade: &Cascade<T>,
    ii: &IntegralImage,
    cfg: &ScanConfig,
) -> Result<Vec<Detection>, CascadeError> {
    let windows = scan_windows(ii.width(), ii.height(), cfg)?;
    let out = windows
        .par_iter()
        .filter_map(|&w| {
            let view = cascade.window(ii, w).ok()?;
            let v = cascade_classify(cascade, &view);
            v.accepted.then(|| Detection { bbox: BBox::from_window(w), score: v.score.as_f64() })
        })
        .collect();
    Ok(out)
}

/// Highest-scoring detection only.
pub fn top1(detections: &[Detection]) -> Option<Detection> {
    detections.iter().copied().fold(None, |best: Option<Detection>, d| match best {
        Some(b) if b.score >= d.score => Some(b),
        _ => Some(d),
    })
}

/// Overlap at or above which two detections join a cluster.
pub const MERGE_IOU: f64 = 0.3;

fn merge_pass(raw: &[Detection], min_neighbors: usize) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[b].score.partial_cmp(&raw[a].score).unwrap_or(std::cmp::Ordering::Equal));
    let mut taken = vec![false; raw.len()];
    let mut out = Vec::new();
    for (pos, &seed) in order.iter().enumerate() {
        if taken[seed] {
            continue;
        }
        taken[seed] = true;
        let mut members = vec![seed];
        for &j in &order[pos + 1..] {
            if !taken[j] && iou(&raw[seed].bbox, &raw[j].bbox) >= MERGE_IOU {
                taken[j] = true;
                members.push(j);
            }
        }
        if members.len() < min_neighbors {
            continue;
        }
        let n = members.len() as f64;
        let mean = |f: fn(&BBox) -> f64| members.iter().map(|&m| f(&raw[m].bbox)).sum::<f64>() / n;
        let bbox = if members.len() == 1 {
            raw[seed].bbox
        } else {
            BBox::new(mean(|b| b.x), mean(|b| b.y), mean(|b| b.width), mean(|b| b.height))
        };
        out.push(Detection { bbox, score: raw[seed].score });
    }
    out
}

/// Greedy IoU clustering seeded in descending score order. Clusters with at
/// least `min_neighbors` members become one detection with the members'
/// average box and the best score. Clustering repeats on its own output
/// until nothing merges, so the result is stable under re-merging.
pub fn merge_detections(raw: &[Detection], min_neighbors: usize) -> Vec<Detection> {
    let mut current = merge_pass(raw, min_neighbors);
    loop {
        let next = merge_pass(&current, 1);
        if next.len() == current.len() {
            return next;
        }
        current = next;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEval {
    pub true_positives: usize,
    pub false_positives: usize,
    /// True positives over ground-truth boxes; zero when there are none.
    pub detection_rate: f64,
}

/// Overlap a detection must exceed to match a ground-truth box.
pub const MATCH_IOU: f64 = 0.5;

/// One-to-one greedy matching in descending score. Repeated detections of an
/// already matched box count as false positives.
pub fn evaluate_detections(detections: &[Detection], truth: &[BBox]) -> DetectionEval {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].score.partial_cmp(&detections[a].score).unwrap_or(std::cmp::Ordering::Equal));
    let mut matched = vec![false; truth.len()];
    let mut tp = 0;
    for &d in &order {
        let best =
            truth.iter().enumerate().filter(|(g, _)| !matched[*g]).map(|(g, t)| (g, iou(&detections[d].bbox, t))).fold(
                None,
                |acc: Option<(usize, f64)>, (g, o)| match acc {
                    Some((_, bo)) if bo >= o => acc,
                    _ => Some((g, o)),
                },
            );
        if let Some((g, o)) = best {
            if o > MATCH_IOU {
                matched[g] = true;
                tp += 1;
            }
        }
    }
    DetectionEval {
        true_positives: tp,
        false_positives: detections.len() - tp,
        detection_rate: if truth.is_empty() { 0.0 } else { tp as f64 / truth.len() as f64 },
    }
}
