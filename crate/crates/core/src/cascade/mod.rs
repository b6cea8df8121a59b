//! Cascaded detector: stage training with bootstrapped negatives, online
//! stage updates, sliding-window scanning, merging and evaluation.

mod model;
mod roc;
mod scan;
mod stage;
mod train;

use thiserror::Error;

use crate::gslda::GsldaError;
use crate::ogslda::OgsldaError;
use crate::weak::WeakError;

pub use model::{cascade_classify, online_update_cascade, Cascade, Verdict};
pub use roc::{detection_at_false_positives, roc_curve, roc_curve_images, RocPoint};
pub use scan::{
    evaluate_detections, iou, merge_detections, scan_image, scan_windows, top1, BBox, Detection, DetectionEval,
    ScanConfig, MATCH_IOU, MERGE_IOU,
};
pub use stage::{train_stage, Stage, StageConfig, StageGoal, StageReport};
pub use train::{bootstrap_negatives, train_cascade, CascadeConfig, CascadeTraining, StopReason, WindowSample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CascadeError {
    #[error("stage goal not met with {learners} learners: detection {detection_rate:.4}, false positives {false_positive_rate:.4}")]
    GoalUnreachable { learners: usize, detection_rate: f64, false_positive_rate: f64 },
    #[error("stage {stage}: {source}")]
    StageFailed { stage: usize, source: Box<CascadeError> },
    #[error("no negative window passes the current cascade")]
    PoolExhausted,
    #[error("a training pool is empty")]
    EmptyPool,
    #[error("image {width}x{height} is smaller than the base window")]
    ImageTooSmall { width: u32, height: u32 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Weak(#[from] WeakError),
    #[error(transparent)]
    Gslda(#[from] GsldaError),
    #[error(transparent)]
    Ogslda(#[from] OgsldaError),
}
