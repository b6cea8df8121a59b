use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cascade::{CascadeConfig, ScanConfig, StageConfig, StageGoal};
use crate::gslda::GreedyConfig;
use crate::ogslda::ThresholdCriterion;
use crate::weak::PoolConfig;

use super::IoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Batch,
    Online,
}

impl std::str::FromStr for Mode {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "batch" => Ok(Mode::Batch),
            "online" => Ok(Mode::Online),
            other => Err(IoError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeSection {
    pub stages: usize,
    pub negatives_per_stage: usize,
    pub min_detection: f64,
    pub max_false_positive: f64,
    pub max_learners: usize,
    /// Approximate number of Haar features in the candidate pool.
    pub feature_pool: usize,
}

impl Default for CascadeSection {
    fn default() -> Self {
        let goal = StageGoal::default();
        Self {
            stages: 10,
            negatives_per_stage: 1000,
            min_detection: goal.min_detection,
            max_false_positive: goal.max_false_positive,
            max_learners: goal.max_learners,
            feature_pool: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub scale_factor: f64,
    pub step: f64,
    pub min_neighbors: usize,
    pub top1: bool,
}

impl Default for ScanSection {
    fn default() -> Self {
        let s = ScanConfig::default();
        Self { scale_factor: s.scale_factor, step: s.step, min_neighbors: 1, top1: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    /// Learner counts of the error-vs-k table.
    pub learner_grid: Vec<usize>,
    /// Initial fractions of the error-vs-fraction table.
    pub fraction_grid: Vec<f64>,
    /// Test error is sampled every this many inserts.
    pub sample_interval: usize,
    /// Accumulated sample counts of the time-vs-N table.
    pub timing_sizes: Vec<usize>,
    pub timing_learners: usize,
    /// Timing repetitions; the median is reported.
    pub timing_repeats: usize,
    /// Inserts per timing repetition.
    pub timing_inserts: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            learner_grid: vec![10, 25, 50, 100],
            fraction_grid: vec![0.3, 0.5, 0.7],
            sample_interval: 50,
            timing_sizes: vec![500, 1000, 2000, 5000],
            timing_learners: 100,
            timing_repeats: 5,
            timing_inserts: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Everything a run depends on. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub learners: usize,
    pub initial_fraction: f64,
    pub criterion: String,
    pub seed: u64,
    pub repeats: usize,
    pub ridge_factor: f64,
    pub cascade: CascadeSection,
    pub scan: ScanSection,
    pub bench: BenchSection,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Batch,
            learners: 25,
            initial_fraction: 0.3,
            criterion: ThresholdCriterion::default().to_string(),
            seed: 0,
            repeats: 10,
            ridge_factor: GreedyConfig::default().ridge_factor,
            cascade: CascadeSection::default(),
            scan: ScanSection::default(),
            bench: BenchSection::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, IoError> {
        let cfg: Self = toml::from_str(text).map_err(|e| IoError::parse("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| IoError::parse(path.display().to_string(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let bad = |m: String| Err(IoError::Config(m));
        if self.learners == 0 {
            return bad("learners must be at least 1".into());
        }
        let frac_ok = |f: f64| f > 0.0 && f <= 1.0;
        if !frac_ok(self.initial_fraction) {
            return bad(format!("initial fraction {} outside (0, 1]", self.initial_fraction));
        }
        if let Some(f) = self.bench.fraction_grid.iter().find(|&&f| !(f > 0.0 && f < 1.0)) {
            return bad(format!("fraction grid value {f} outside (0, 1)"));
        }
        if self.bench.learner_grid.contains(&0) {
            return bad("learner grid values must be at least 1".into());
        }
        if self.repeats == 0 || self.bench.timing_repeats == 0 {
            return bad("repeat counts must be at least 1".into());
        }
        if !frac_ok(self.cascade.min_detection) || !frac_ok(self.cascade.max_false_positive) {
            return bad("stage goal rates must lie in (0, 1]".into());
        }
        if !(self.scan.scale_factor > 1.0) || !(self.scan.step > 0.0) {
            return bad(format!("scale factor {} / step {}", self.scan.scale_factor, self.scan.step));
        }
        if !(self.ridge_factor >= 0.0) {
            return bad(format!("ridge factor {}", self.ridge_factor));
        }
        self.criterion()?;
        Ok(())
    }

    /// First 8 bytes, in hex, of the SHA-256 of the canonical TOML form.
    /// The output directory is left out since it does not affect results.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.paths.out = None;
        let digest = Sha256::digest(canonical.to_toml_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn criterion(&self) -> Result<ThresholdCriterion, IoError> {
        self.criterion.parse().map_err(|e: crate::ogslda::ThresholdError| IoError::Config(e.to_string()))
    }

    pub fn greedy(&self) -> GreedyConfig {
        GreedyConfig { ridge_factor: self.ridge_factor, ..GreedyConfig::default() }
    }

    pub fn scan_config(&self) -> ScanConfig {
        ScanConfig { scale_factor: self.scan.scale_factor, step: self.scan.step }
    }

    pub fn feature_pool(&self) -> PoolConfig {
        PoolConfig::for_target(self.cascade.feature_pool)
    }

    pub fn cascade_config(&self) -> CascadeConfig {
        let goal = StageGoal {
            min_detection: self.cascade.min_detection,
            max_false_positive: self.cascade.max_false_positive,
            max_learners: self.cascade.max_learners,
        };
        CascadeConfig {
            stages: self.cascade.stages,
            stage: StageConfig { goal, greedy: self.greedy(), ..StageConfig::default() },
            negatives_per_stage: self.cascade.negatives_per_stage,
            scan: self.scan_config(),
            seed: self.seed,
        }
    }
}
