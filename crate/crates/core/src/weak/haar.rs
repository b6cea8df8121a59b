use std::fmt;
use std::str::FromStr;

use crate::scalar::Real;

use super::integral::IntegralImage;
use super::{FeatureSource, WeakError};

/// Side of the square detection window features are defined on.
pub const BASE_WINDOW: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HaarKind {
    /// Two blocks side by side: `+ | −`.
    TwoHorizontal,
    /// Two blocks stacked: `+` over `−`.
    TwoVertical,
    /// Three blocks side by side: `+ | −2 | +`.
    ThreeHorizontal,
    /// Two-by-two checkerboard: `+ −` over `− +`.
    Four,
}

impl HaarKind {
    pub const ALL: [HaarKind; 4] =
        [HaarKind::TwoHorizontal, HaarKind::TwoVertical, HaarKind::ThreeHorizontal, HaarKind::Four];

    /// Width and height in blocks.
    pub fn blocks(self) -> (u32, u32) {
        match self {
            HaarKind::TwoHorizontal => (2, 1),
            HaarKind::TwoVertical => (1, 2),
            HaarKind::ThreeHorizontal => (3, 1),
            HaarKind::Four => (2, 2),
        }
    }

    /// `(block column, block row, coefficient)` for each block; coefficients sum to zero.
    fn layout(self) -> &'static [(u32, u32, f64)] {
        match self {
            HaarKind::TwoHorizontal => &[(0, 0, 1.0), (1, 0, -1.0)],
            HaarKind::TwoVertical => &[(0, 0, 1.0), (0, 1, -1.0)],
            HaarKind::ThreeHorizontal => &[(0, 0, 1.0), (1, 0, -2.0), (2, 0, 1.0)],
            HaarKind::Four => &[(0, 0, 1.0), (1, 0, -1.0), (0, 1, -1.0), (1, 1, 1.0)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HaarKind::TwoHorizontal => "two-h",
            HaarKind::TwoVertical => "two-v",
            HaarKind::ThreeHorizontal => "three-h",
            HaarKind::Four => "four",
        }
    }
}

impl fmt::Display for HaarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HaarKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HaarKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown Haar kind {s:?}"))
    }
}

/// Rectangle feature anchored inside the 24x24 base window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HaarFeature {
    kind: HaarKind,
    x: u32,
    y: u32,
    block_w: u32,
    block_h: u32,
}

impl HaarFeature {
    pub fn new(kind: HaarKind, x: u32, y: u32, block_w: u32, block_h: u32) -> Result<Self, WeakError> {
        let (kw, kh) = kind.blocks();
        if block_w == 0 || block_h == 0 || x + kw * block_w > BASE_WINDOW || y + kh * block_h > BASE_WINDOW {
            return Err(WeakError::OutOfBounds(format!(
                "{kind} feature at ({x},{y}) with blocks {block_w}x{block_h} leaves the base window"
            )));
        }
        Ok(Self { kind, x, y, block_w, block_h })
    }

    pub fn kind(&self) -> HaarKind {
        self.kind
    }

    pub fn anchor(&self) -> (u32, u32) {
        (self.x, self.y)
    }

    pub fn block(&self) -> (u32, u32) {
        (self.block_w, self.block_h)
    }

    /// Weighted rectangle sum at window offset `(wx, wy)` and `scale`, before normalization.
    ///
    /// Offsets and block sizes are floored after scaling, so a feature inside
    /// the base window stays inside the scaled window and every block keeps
    /// the same area (the zero-sum property survives scaling).
    fn raw_sum(&self, ii: &IntegralImage, wx: u32, wy: u32, scale: f64) -> f64 {
        let bw = ((self.block_w as f64 * scale).floor() as u32).max(1);
        let bh = ((self.block_h as f64 * scale).floor() as u32).max(1);
        let ox = wx + (self.x as f64 * scale).floor() as u32;
        let oy = wy + (self.y as f64 * scale).floor() as u32;
        self.kind.layout().iter().map(|&(cx, cy, coef)| coef * ii.rect_sum(ox + cx * bw, oy + cy * bh, bw, bh)).sum()
    }
}

/// Placement of a detection window in an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x: u32,
    pub y: u32,
    pub scale: f64,
}

impl Window {
    pub fn base(x: u32, y: u32) -> Self {
        Self { x, y, scale: 1.0 }
    }

    /// Side length in pixels: `round(24 · scale)`.
    pub fn side(&self) -> u32 {
        (BASE_WINDOW as f64 * self.scale).round() as u32
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.scale >= 1.0 && self.x + self.side() <= width && self.y + self.side() <= height
    }
}

/// Feature value normalized by the window area, so values at different scales are comparable.
pub fn haar_value(ii: &IntegralImage, feature: &HaarFeature, window: Window) -> Result<f64, WeakError> {
    if !window.fits(ii.width(), ii.height()) {
        return Err(WeakError::OutOfBounds(format!(
            "window at ({}, {}) side {} outside {}x{} image",
            window.x,
            window.y,
            window.side(),
            ii.width(),
            ii.height()
        )));
    }
    let side = window.side() as f64;
    Ok(feature.raw_sum(ii, window.x, window.y, window.scale) / (side * side))
}

/// Subsampling knobs for the feature pool. Strides of 1 give the full pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolConfig {
    pub position_stride: u32,
    pub size_stride: u32,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self::for_target(20_000)
    }
}

impl PoolConfig {
    pub fn full() -> Self {
        Self { position_stride: 1, size_stride: 1 }
    }

    pub fn uniform(stride: u32) -> Self {
        Self { position_stride: stride.max(1), size_stride: stride.max(1) }
    }

    /// Stride pair whose pool size is closest to `target` without exceeding it
    /// (or the smallest pool, when even that exceeds the target).
    pub fn for_target(target: usize) -> Self {
        let mut best: Option<(Self, usize)> = None;
        for ps in 1..=BASE_WINDOW {
            for ss in 1..=BASE_WINDOW {
                let cfg = Self { position_stride: ps, size_stride: ss };
                let count = cfg.count();
                let better = match best {
                    None => true,
                    Some((_, b)) if b > target => count < b,
                    Some((_, b)) => count <= target && count > b,
                };
                if better {
                    best = Some((cfg, count));
                }
            }
        }
        best.map(|(c, _)| c).unwrap_or_else(Self::full)
    }

    /// Pool size by counting positions per block size.
    pub fn count(&self) -> usize {
        let steps = |n: u32, s: u32| n.div_ceil(s) as usize;
        HaarKind::ALL
            .iter()
            .map(|k| {
                let (kw, kh) = k.blocks();
                let xs: usize = (1..=BASE_WINDOW / kw)
                    .step_by(self.size_stride as usize)
                    .map(|bw| steps(BASE_WINDOW - kw * bw + 1, self.position_stride))
                    .sum();
                let ys: usize = (1..=BASE_WINDOW / kh)
                    .step_by(self.size_stride as usize)
                    .map(|bh| steps(BASE_WINDOW - kh * bh + 1, self.position_stride))
                    .sum();
                xs * ys
            })
            .sum()
    }
}

/// Deterministic enumeration: kind, block width, block height, row, column.
pub fn enumerate_haar_features(cfg: PoolConfig) -> Vec<HaarFeature> {
    let ps = cfg.position_stride.max(1) as usize;
    let ss = cfg.size_stride.max(1) as usize;
    let mut out = Vec::new();
    for kind in HaarKind::ALL {
        let (kw, kh) = kind.blocks();
        for bw in (1..=BASE_WINDOW / kw).step_by(ss) {
            for bh in (1..=BASE_WINDOW / kh).step_by(ss) {
                for y in (0..=BASE_WINDOW - kh * bh).step_by(ps) {
                    for x in (0..=BASE_WINDOW - kw * bw).step_by(ps) {
                        out.push(HaarFeature { kind, x, y, block_w: bw, block_h: bh });
                    }
                }
            }
        }
    }
    out
}

/// A window of an integral image seen as a feature vector over a Haar pool.
#[derive(Debug, Clone, Copy)]
pub struct HaarWindow<'a> {
    ii: &'a IntegralImage,
    features: &'a [HaarFeature],
    window: Window,
}

impl<'a> HaarWindow<'a> {
    pub fn new(ii: &'a IntegralImage, features: &'a [HaarFeature], window: Window) -> Result<Self, WeakError> {
        if !window.fits(ii.width(), ii.height()) {
            return Err(WeakError::OutOfBounds(format!(
                "window side {} at ({}, {}) does not fit a {}x{} image",
                window.side(),
                window.x,
                window.y,
                ii.width(),
                ii.height()
            )));
        }
        Ok(Self { ii, features, window })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn value(&self, id: usize) -> f64 {
        let side = self.window.side() as f64;
        self.features[id].raw_sum(self.ii, self.window.x, self.window.y, self.window.scale) / (side * side)
    }
}

impl<T: Real> FeatureSource<T> for HaarWindow<'_> {
    fn feature(&self, id: usize) -> T {
        T::lit(self.value(id))
    }
}
