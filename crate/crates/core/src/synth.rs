//! Seeded synthetic datasets: a stand-in for the USPS 3-vs-5 digit task,
//! face-like 24x24 patches with textured negatives, and Gaussian vectors.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::io::Dataset;
use crate::label::Label;

/// Class sizes of the digit stand-in: `(train 3s, train 5s, test 3s, test 5s)`.
pub const USPS_COUNTS: (usize, usize, usize, usize) = (406, 361, 418, 355);
pub const USPS_SIDE: u32 = 16;

type Stroke = &'static [(f64, f64)];

// Polylines in unit coordinates, y pointing down.
const THREE: &[Stroke] = &[
    &[(0.24, 0.22), (0.36, 0.1), (0.56, 0.08), (0.72, 0.18), (0.7, 0.34), (0.5, 0.47)],
    &[(0.38, 0.48), (0.5, 0.47), (0.7, 0.58), (0.76, 0.74), (0.62, 0.89), (0.4, 0.91), (0.22, 0.8)],
];
const FIVE: &[Stroke] = &[
    &[(0.74, 0.1), (0.32, 0.1), (0.28, 0.45)],
    &[(0.28, 0.45), (0.5, 0.38), (0.7, 0.5), (0.76, 0.7), (0.62, 0.88), (0.4, 0.91), (0.22, 0.8)],
];

fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// One distorted rendering of a stroke digit, intensities in `[0, 1]`.
fn render_digit(rng: &mut ChaCha8Rng, strokes: &[Stroke], side: u32) -> Vec<f64> {
    let rot: f64 = rng.gen_range(-0.2..0.2);
    let shear: f64 = rng.gen_range(-0.3..0.3);
    let (sx, sy): (f64, f64) = (rng.gen_range(0.8..1.1), rng.gen_range(0.85..1.1));
    let (tx, ty): (f64, f64) = (rng.gen_range(-0.07..0.07), rng.gen_range(-0.07..0.07));
    let jitter = 0.06;
    let (c, s) = (rot.cos(), rot.sin());
    let warp = |(x, y): (f64, f64), rng: &mut ChaCha8Rng| {
        let (x, y) = (x - 0.5 + rng.gen_range(-jitter..jitter), y - 0.5 + rng.gen_range(-jitter..jitter));
        let (x, y) = ((x + shear * y) * sx, y * sy);
        (c * x - s * y + 0.5 + tx, s * x + c * y + 0.5 + ty)
    };
    let lines: Vec<Vec<(f64, f64)>> = strokes.iter().map(|st| st.iter().map(|&p| warp(p, rng)).collect()).collect();
    let half_width = rng.gen_range(0.045..0.075);
    let pixel = 1.0 / side as f64;
    let mut out = Vec::with_capacity((side * side) as usize);
    for py in 0..side {
        for px in 0..side {
            let p = ((px as f64 + 0.5) * pixel, (py as f64 + 0.5) * pixel);
            let d = lines
                .iter()
                .flat_map(|l| l.windows(2).map(move |w| seg_dist(p, w[0], w[1])))
                .fold(f64::INFINITY, f64::min);
            let ink = (1.0 - (d - half_width) / pixel).clamp(0.0, 1.0);
            let noise: f64 = rng.gen_range(-0.15..0.15);
            out.push((ink + noise).clamp(0.0, 1.0));
        }
    }
    out
}

fn digits(rng: &mut ChaCha8Rng, n3: usize, n5: usize, source: &str) -> Dataset {
    let mut samples = Vec::with_capacity(n3 + n5);
    let mut labels = Vec::with_capacity(n3 + n5);
    for (n, strokes, label) in [(n3, THREE, Label::Positive), (n5, FIVE, Label::Negative)] {
        for _ in 0..n {
            samples.push(render_digit(rng, strokes, USPS_SIDE));
            labels.push(label);
        }
    }
    Dataset::new(samples, labels, source)
        .and_then(|d| d.with_raster(USPS_SIDE, USPS_SIDE))
        .expect("uniform synthetic rasters")
}

/// Stroke-rendered 3s (positive) and 5s (negative) on a 16x16 grid with the
/// class sizes of the USPS 3-vs-5 split. Returns `(train, test)`.
pub fn usps_surrogate(seed: u64) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, c, d) = USPS_COUNTS;
    let train = digits(&mut rng, a, b, "usps-surrogate-train");
    let test = digits(&mut rng, c, d, "usps-surrogate-test");
    (train, test)
}

/// Appearance of generated face patches. `shift` in `[0, 1]` moves the
/// distribution toward strong side lighting and lower contrast.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FaceStyle {
    pub shift: f64,
}

fn put(px: &mut [f64], x: i32, y: i32, v: f64) {
    if (0..24).contains(&x) && (0..24).contains(&y) {
        px[(y * 24 + x) as usize] = v;
    }
}

fn ellipse(px: &mut [f64], cx: f64, cy: f64, rx: f64, ry: f64, f: impl Fn(f64) -> f64) {
    for y in 0..24 {
        for x in 0..24 {
            let (dx, dy) = ((x as f64 + 0.5 - cx) / rx, (y as f64 + 0.5 - cy) / ry);
            if dx * dx + dy * dy <= 1.0 {
                let i = y * 24 + x;
                px[i] = f(px[i]);
            }
        }
    }
}

fn add_noise(rng: &mut ChaCha8Rng, px: &mut [f64], amp: f64) {
    for p in px.iter_mut() {
        *p = (*p + rng.gen_range(-amp..amp)).clamp(0.0, 255.0);
    }
}

/// One 24x24 face-like patch, row-major intensities in `[0, 255]`.
pub fn face_patch(rng: &mut ChaCha8Rng, style: FaceStyle) -> Vec<f64> {
    let bg: f64 = rng.gen_range(30.0..220.0);
    let mut px = vec![bg; 576];
    let skin: f64 = rng.gen_range(110.0..190.0);
    let contrast = rng.gen_range(0.7..1.2) * (1.0 - 0.35 * style.shift);
    let (dx, dy): (f64, f64) = (rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2));
    let (cx, cy) = (12.0 + dx, 12.5 + dy);
    ellipse(&mut px, cx, cy, rng.gen_range(9.0..11.0), rng.gen_range(10.5..12.0), |_| skin);
    let eye = skin - contrast * rng.gen_range(60.0..100.0);
    let eye_y = cy - rng.gen_range(2.5..4.0);
    let gap = rng.gen_range(4.0..5.2);
    for side in [-1.0, 1.0] {
        ellipse(&mut px, cx + side * gap, eye_y, rng.gen_range(1.8..2.6), rng.gen_range(1.0..1.6), |_| eye);
        // Brow above each eye.
        let brow = skin - contrast * rng.gen_range(20.0..50.0);
        ellipse(&mut px, cx + side * gap, eye_y - 2.6, 2.6, 0.7, |_| brow);
    }
    let nose = (skin + contrast * rng.gen_range(15.0..35.0)).min(255.0);
    ellipse(&mut px, cx, cy + 0.5, 1.0, 2.8, |_| nose);
    let mouth = skin - contrast * rng.gen_range(40.0..80.0);
    ellipse(&mut px, cx, cy + rng.gen_range(5.0..6.5), rng.gen_range(3.0..4.5), rng.gen_range(0.7..1.2), |_| mouth);
    // Side lighting; the shifted style leans strongly to one side.
    let g =
        rng.gen_range(-1.5..1.5) + style.shift * rng.gen_range(2.5..4.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    for y in 0..24 {
        for x in 0..24 {
            let i = y * 24 + x;
            px[i] = (px[i] + g * (x as f64 - 11.5)).clamp(0.0, 255.0);
        }
    }
    add_noise(rng, &mut px, 12.0);
    px
}

/// One 24x24 non-face patch drawn from a mix of textures.
pub fn texture_patch(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut px = vec![0.0; 576];
    match rng.gen_range(0..5) {
        0 => {
            // Smooth random field.
            let waves: Vec<(f64, f64, f64, f64)> = (0..4)
                .map(|_| {
                    (
                        rng.gen_range(0.05..0.8),
                        rng.gen_range(0.05..0.8),
                        rng.gen_range(0.0..6.3),
                        rng.gen_range(10.0..50.0),
                    )
                })
                .collect();
            let base = rng.gen_range(60.0..200.0);
            for y in 0..24 {
                for x in 0..24 {
                    let v: f64 =
                        waves.iter().map(|&(fx, fy, ph, a)| a * (fx * x as f64 + fy * y as f64 + ph).sin()).sum();
                    px[y * 24 + x] = base + v;
                }
            }
        }
        1 => {
            // Overlapping rectangles.
            px.fill(rng.gen_range(0.0..255.0));
            for _ in 0..rng.gen_range(2..7) {
                let (x0, y0) = (rng.gen_range(0..20), rng.gen_range(0..20));
                let (w, h) = (rng.gen_range(2..24), rng.gen_range(2..24));
                let v = rng.gen_range(0.0..255.0);
                for y in y0..(y0 + h).min(24) {
                    for x in x0..(x0 + w).min(24) {
                        px[y * 24 + x] = v;
                    }
                }
            }
        }
        2 => {
            // Stripes at a random angle.
            let (a, f) = (rng.gen_range(0.0..std::f64::consts::PI), rng.gen_range(0.3..1.6));
            let (lo, hi) = (rng.gen_range(0.0..120.0), rng.gen_range(130.0..255.0));
            for y in 0..24 {
                for x in 0..24 {
                    let t = (x as f64 * a.cos() + y as f64 * a.sin()) * f;
                    px[y * 24 + x] = if t.sin() > 0.0 { hi } else { lo };
                }
            }
        }
        3 => {
            // Random blobs, some of them eye-sized.
            px.fill(rng.gen_range(60.0..220.0));
            for _ in 0..rng.gen_range(1..6) {
                let v = rng.gen_range(0.0..255.0);
                ellipse(
                    &mut px,
                    rng.gen_range(0.0..24.0),
                    rng.gen_range(0.0..24.0),
                    rng.gen_range(1.5..7.0),
                    rng.gen_range(1.0..7.0),
                    |_| v,
                );
            }
        }
        _ => {
            // Plain gradient.
            let (gx, gy) = (rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0));
            let base = rng.gen_range(30.0..220.0);
            for y in 0..24 {
                for x in 0..24 {
                    put(&mut px, x, y, base + gx * (x as f64 - 11.5) + gy * (y as f64 - 11.5));
                }
            }
        }
    }
    let amp = rng.gen_range(3.0..25.0);
    add_noise(rng, &mut px, amp);
    px
}

/// `n_pos` faces of the given style and `n_neg` textures as 24x24 rasters.
pub fn face_dataset(n_pos: usize, n_neg: usize, style: FaceStyle, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_pos + n_neg);
    let mut labels = Vec::with_capacity(n_pos + n_neg);
    for _ in 0..n_pos {
        samples.push(face_patch(&mut rng, style));
        labels.push(Label::Positive);
    }
    for _ in 0..n_neg {
        samples.push(texture_patch(&mut rng));
        labels.push(Label::Negative);
    }
    Dataset::new(samples, labels, "synthetic-faces").and_then(|d| d.with_raster(24, 24)).expect("uniform patches")
}

/// Two Gaussian classes in `dim` dimensions; the first `informative`
/// coordinates of positives are shifted by `separation`.
pub fn gaussian_classes(
    n_pos: usize,
    n_neg: usize,
    dim: usize,
    informative: usize,
    separation: f64,
    seed: u64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };
    let mut samples = Vec::with_capacity(n_pos + n_neg);
    let mut labels = Vec::with_capacity(n_pos + n_neg);
    for j in 0..n_pos + n_neg {
        let pos = j < n_pos;
        samples.push((0..dim).map(|i| normal() + if pos && i < informative { separation } else { 0.0 }).collect());
        labels.push(if pos { Label::Positive } else { Label::Negative });
    }
    Dataset::new(samples, labels, "gaussian").expect("uniform vectors")
}
