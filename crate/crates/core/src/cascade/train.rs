use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::label::Label;
use crate::scalar::Real;
use crate::weak::{haar_value, HaarFeature, IntegralImage, Window};

use super::model::{cascade_classify, Cascade};
use super::scan::{scan_windows, ScanConfig};
use super::stage::{train_stage, StageConfig};
use super::CascadeError;

/// A window of one image in a pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSample {
    pub image: usize,
    pub window: Window,
}

/// Collects up to `needed` windows from the pool that the cascade accepts.
///
/// Windows are visited image by image on the scan grid, or in a seeded
/// random order when `seed` is given. Returns fewer windows when the pool
/// runs dry and `PoolExhausted` when it yields none at all.
pub fn bootstrap_negatives<T: Real>(
    cascade: &Cascade<T>,
    pool: &[IntegralImage],
    needed: usize,
    scan: &ScanConfig,
    seed: Option<u64>,
) -> Result<Vec<WindowSample>, CascadeError> {
    if pool.is_empty() {
        return Err(CascadeError::EmptyPool);
    }
    let mut candidates = Vec::new();
    for (image, ii) in pool.iter().enumerate() {
        match scan_windows(ii.width(), ii.height(), scan) {
            Ok(ws) => candidates.extend(ws.into_iter().map(|window| WindowSample { image, window })),
            Err(CascadeError::ImageTooSmall { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if let Some(seed) = seed {
        candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut out = Vec::with_capacity(needed);
    // Classify in chunks so the scan stops soon after enough are found.
    for chunk in candidates.chunks(4096) {
        if out.len() >= needed {
            break;
        }
        let accepted: Vec<WindowSample> = chunk
            .par_iter()
            .filter(|s| {
                cascade
                    .window(&pool[s.image], s.window)
                    .map(|view| cascade_classify(cascade, &view).accepted)
                    .unwrap_or(false)
            })
            .copied()
            .collect();
        out.extend(accepted.into_iter().take(needed - out.len()));
    }
    if out.is_empty() && needed > 0 {
        return Err(CascadeError::PoolExhausted);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    pub stages: usize,
    pub stage: StageConfig,
    pub negatives_per_stage: usize,
    pub scan: ScanConfig,
    pub seed: u64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            stages: 10,
            stage: StageConfig::default(),
            negatives_per_stage: 1000,
            scan: ScanConfig::default(),
            seed: 0,
        }
    }
}

/// Why cascade training stopped before the requested number of stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// No window of the negative pool passes the current cascade.
    PoolExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeTraining<T> {
    pub cascade: Cascade<T>,
    pub stopped: Option<StopReason>,
    /// Negative windows each stage was trained on.
    pub negatives_used: Vec<usize>,
}

/// Trains stages in turn, each on all positives and on negatives
/// bootstrapped from the windows the stages so far still accept.
///
/// Positives are base-size (24x24) patches.
pub fn train_cascade<T: Real>(
    features: Vec<HaarFeature>,
    positives: &[IntegralImage],
    negative_pool: &[IntegralImage],
    config: &CascadeConfig,
) -> Result<CascadeTraining<T>, CascadeError> {
    if positives.is_empty() {
        return Err(CascadeError::EmptyPool);
    }
    let base = Window::base(0, 0);
    if let Some(p) = positives.iter().find(|p| !base.fits(p.width(), p.height())) {
        return Err(CascadeError::ImageTooSmall { width: p.width(), height: p.height() });
    }
    let mut cascade = Cascade::new(features);
    let mut negatives_used = Vec::new();
    let mut stopped = None;
    for s in 0..config.stages {
        let seed = config.seed.wrapping_add(s as u64);
        let negs =
            match bootstrap_negatives(&cascade, negative_pool, config.negatives_per_stage, &config.scan, Some(seed)) {
                Ok(n) => n,
                Err(CascadeError::PoolExhausted) => {
                    log::info!("negative pool exhausted after {s} stages");
                    stopped = Some(StopReason::PoolExhausted);
                    break;
                }
                Err(e) => return Err(e),
            };
        let n_pos = positives.len();
        let labels: Vec<Label> =
            (0..n_pos + negs.len()).map(|j| if j < n_pos { Label::Positive } else { Label::Negative }).collect();
        let feats = &cascade.features;
        let value = |f: usize, j: usize| -> T {
            let v = if j < n_pos {
                haar_value(&positives[j], &feats[f], base)
            } else {
                let n = negs[j - n_pos];
                haar_value(&negative_pool[n.image], &feats[f], n.window)
            };
            T::lit(v.expect("sample windows are validated before training"))
        };
        let stage = train_stage(feats.len(), &labels, value, &config.stage).map_err(|e| match e {
            CascadeError::GoalUnreachable { learners, detection_rate, false_positive_rate } => {
                log::warn!(
                    "stage {s} missed its goal with {learners} learners: detection {detection_rate:.4}, false positives {false_positive_rate:.4}"
                );
                CascadeError::StageFailed { stage: s, source: Box::new(e) }
            }
            other => CascadeError::StageFailed { stage: s, source: Box::new(other) },
        })?;
        log::info!(
            "stage {s}: {} learners, detection {:.4}, false positives {:.4} on {} negatives",
            stage.report.learners,
            stage.report.detection_rate,
            stage.report.false_positive_rate,
            negs.len()
        );
        negatives_used.push(negs.len());
        cascade.stages.push(stage);
    }
    Ok(CascadeTraining { cascade, stopped, negatives_used })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::model::tests::threshold_stage;
    use crate::weak::{HaarKind, HaarWindow};

    fn noise_pool(n: usize, size: u32, seed: u64) -> Vec<IntegralImage> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let px: Vec<f64> = (0..size * size).map(|_| rng.gen_range(0.0..255.0)).collect();
                IntegralImage::from_values(size, size, &px)
            })
            .collect()
    }

    #[test]
    fn empty_cascade_returns_first_grid_windows() {
        let pool = noise_pool(2, 30, 1);
        let c = Cascade::<f64>::default();
        let got = bootstrap_negatives(&c, &pool, 10, &ScanConfig::default(), None).unwrap();
        let grid = scan_windows(30, 30, &ScanConfig::default()).unwrap();
        let expected: Vec<WindowSample> =
            grid.iter().take(10).map(|&window| WindowSample { image: 0, window }).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn rejecting_cascade_exhausts_the_pool() {
        let pool = noise_pool(3, 26, 2);
        let f = HaarFeature::new(HaarKind::TwoHorizontal, 0, 0, 12, 24).unwrap();
        // Feature values on noise stay far below this cut.
        let c = Cascade { features: vec![f], stages: vec![threshold_stage(0, 1e6)] };
        assert_eq!(
            bootstrap_negatives(&c, &pool, 5, &ScanConfig::default(), Some(3)),
            Err(CascadeError::PoolExhausted)
        );
    }

    #[test]
    fn returned_windows_are_accepted() {
        let pool = noise_pool(4, 32, 4);
        let f = HaarFeature::new(HaarKind::TwoVertical, 2, 2, 10, 6).unwrap();
        let c = Cascade { features: vec![f], stages: vec![threshold_stage(0, 0.0)] };
        let got = bootstrap_negatives(&c, &pool, 50, &ScanConfig::default(), Some(9)).unwrap();
        assert!(!got.is_empty() && got.len() <= 50);
        for s in &got {
            let view = HaarWindow::new(&pool[s.image], &c.features, s.window).unwrap();
            assert!(cascade_classify(&c, &view).accepted);
        }
        let again = bootstrap_negatives(&c, &pool, 50, &ScanConfig::default(), Some(9)).unwrap();
        assert_eq!(got, again);
    }
}
