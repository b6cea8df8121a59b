//! End-to-end acceptance checks. Runs without the libtest harness and
//! prints one PASS/FAIL line per criterion; any failure fails the target.
//!
//! `cargo test --test acceptance -- 3 5` runs only criteria 3 and 5.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ogslda::cascade::{detection_at_false_positives, online_update_cascade, roc_curve, train_cascade, CascadeConfig};
use ogslda::gslda::{
    default_ridge, fisher_criterion, greedy_select, lda_direction, scatter_from_data_with_ridge, scatter_from_samples,
    GreedyConfig, GsldaError, LinearModel, ScatterState, Selection, RIDGE_FACTOR,
};
use ogslda::io::{batch_error, online_error_curve, time_per_insert, Dataset, RunConfig};
use ogslda::linalg::{
    dot, mat_inverse, normal_pdf, rank_two_inverse_update_or_direct, rel_vec_error, SymMat, UpdatePath,
};
use ogslda::ogslda::{
    compute_threshold, covariance_update_vectors, online_insert, project_classes, threshold_equal_density,
    threshold_negative_mean, threshold_target_detection, MeanStep, OnlineClassifier, ThresholdCriterion,
};
use ogslda::synth::{face_dataset, gaussian_classes, usps_surrogate, FaceStyle};
use ogslda::weak::{
    balanced_weights, enumerate_haar_features, train_feature_table, FeatureTable, HaarWindow, IntegralImage,
    PoolConfig, Stump, Window,
};
use ogslda::Label;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Online statistics after streaming match a from-scratch recomputation.
fn batch_online_equivalence() -> Outcome {
    let mut worst = [0.0f64; 5];
    for d in 0..20u64 {
        let mut data = gaussian_classes(250, 250, 60, 20, 0.5, 100 + d);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(200 + d));
        data = data.subset(&order);
        let initial = data.subset(&(0..100).collect::<Vec<_>>());
        let weights = balanced_weights::<f64>(&initial.labels);
        let (fits, table) = train_feature_table(60, 100, |f, j| initial.samples[j][f], &initial.labels, &weights)
            .map_err(|e| e.to_string())?;
        let stumps: Vec<Stump<f64>> = fits.iter().map(|f| f.stump).collect();
        let (model, sel) = LinearModel::train(&stumps, &table, 25, GreedyConfig::default(), ThresholdCriterion::Fisher)
            .map_err(|e| e.to_string())?;
        let mut clf = OnlineClassifier::new(model, sel.state).map_err(|e| e.to_string())?;
        for j in 100..500 {
            online_insert(&mut clf, &data.samples[j], data.labels[j]).map_err(|e| e.to_string())?;
        }
        let xs: Vec<Vec<f64>> = data.samples.iter().map(|s| clf.model.project(s)).collect();
        let batch = scatter_from_samples(&xs, &data.labels, clf.state.ridge.clone()).map_err(|e| e.to_string())?;
        let s = &clf.state;
        let errs = [
            s.sb.rel_frobenius_error(&batch.sb),
            s.sigma1.rel_frobenius_error(&batch.sigma1),
            s.sigma2.rel_frobenius_error(&batch.sigma2),
            s.sw_inv.rel_frobenius_error(&batch.sw_inv),
            rel_vec_error(&clf.model.weights, &lda_direction(&batch)),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    check(
        max <= 1e-6,
        format!(
            "20 datasets, worst relative errors Sb {:.1e}, S1 {:.1e}, S2 {:.1e}, Sw^-1 {:.1e}, w {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    )
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SymMat<f64> {
    let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut a = SymMat::from_fn(n, |i, j| (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum());
    a.add_diag(&vec![0.5; n]);
    a
}

/// Rank-two inverse updates against direct inversion.
fn rank_two_inverse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=50);
        let sigma = random_spd(&mut rng, n);
        let inv = mat_inverse(&sigma).map_err(|e| e.to_string())?;
        // A scatter update from inserting one sample into a class of `count` samples.
        let count: u64 = rng.gen_range(2..200);
        let old: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let new: Vec<f64> = old.iter().zip(&x).map(|(m, xi)| m + (xi - m) / (count + 1) as f64).collect();
        let v = covariance_update_vectors(&x, &MeanStep { old, new, count_before: count });
        let (got, _) =
            rank_two_inverse_update_or_direct(&inv, &sigma, &v.p1, &v.q1, &v.p2, &v.q2).map_err(|e| e.to_string())?;
        let mut updated = sigma.clone();
        updated.add_outer(1.0, &v.p1, &v.q1);
        updated.add_outer(1.0, &v.p2, &v.q2);
        let direct = mat_inverse(&updated).map_err(|e| e.to_string())?;
        worst = worst.max(got.rel_frobenius_error(&direct));
    }
    // First factor nearly cancels: I − (1 − 1e-14) u uᵀ is numerically singular.
    let n = 6;
    let u: Vec<f64> = (0..n).map(|i| if i == 2 { 1.0 } else { 0.0 }).collect();
    let p1: Vec<f64> = u.iter().map(|v| -(1.0 - 1e-14) * v).collect();
    let p2: Vec<f64> = u.iter().map(|v| 1.5 * v).collect();
    let eye = SymMat::<f64>::identity(n);
    let (got, path) = rank_two_inverse_update_or_direct(&eye, &eye, &p1, &u, &p2, &u).map_err(|e| e.to_string())?;
    let mut expect = eye.clone();
    expect.add_outer(1.0, &p1, &u);
    expect.add_outer(1.0, &p2, &u);
    let fallback_err = got.rel_frobenius_error(&mat_inverse(&expect).map_err(|e| e.to_string())?);
    check(
        worst <= 1e-7 && path == UpdatePath::DirectFallback && fallback_err <= 1e-7,
        format!("1000 instances, worst relative error {worst:.1e}; near-singular case took {path:?} (error {fallback_err:.1e})"),
    )
}

/// Criterion at the discriminant direction, rebuilt from scratch.
fn subset_j(t: &FeatureTable, ids: &[usize]) -> f64 {
    let ridge = default_ridge::<f64>(t, ids, RIDGE_FACTOR);
    let s = scatter_from_data_with_ridge(t, ids, ridge).unwrap();
    match fisher_criterion(&s, &lda_direction(&s)) {
        Err(GsldaError::ZeroDenominator) => 0.0,
        r => r.unwrap(),
    }
}

fn exhaustive(t: &FeatureTable) -> f64 {
    let m = t.n_features();
    let mut best: f64 = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                best = best.max(subset_j(t, &[a, b, c]));
            }
        }
    }
    best
}

// GF(4) with elements 0, 1, a, a + 1 coded 0..3; addition is XOR.
fn gf4_mul(x: u8, y: u8) -> u8 {
    const T: [[u8; 4]; 4] = [[0, 0, 0, 0], [0, 1, 2, 3], [0, 2, 3, 1], [0, 3, 1, 2]];
    T[x as usize][y as usize]
}

/// Instance on which the criterion is additive over features: each class is
/// the 64-run orthogonal array over GF(4)^3, so any two features are
/// independent within a class and the within-class cross scatter vanishes.
/// Cuts stay inside 1..=3 so no feature is constant within a class.
fn benign_instance(rng: &mut ChaCha8Rng) -> FeatureTable {
    let mut points = Vec::new();
    for a in 0..4u8 {
        for b in 0..4u8 {
            for c in 0..4u8 {
                let v = [a, b, c];
                if v.iter().find(|&&x| x != 0) == Some(&1) {
                    points.push(v);
                }
            }
        }
    }
    points.shuffle(rng);
    let cols = &points[..12];
    let mut rows = vec![Vec::new(); 12];
    let mut labels = Vec::new();
    let cuts: Vec<[u8; 2]> = (0..12).map(|_| [rng.gen_range(1..=3), rng.gen_range(1..=3)]).collect();
    for (ci, label) in [Label::Positive, Label::Negative].into_iter().enumerate() {
        for code in 0..64u8 {
            let x = [code & 3, (code >> 2) & 3, code >> 4];
            for (f, col) in cols.iter().enumerate() {
                let v = (0..3).fold(0, |acc, k| acc ^ gf4_mul(x[k], col[k]));
                rows[f].push((v < cuts[f][ci]) as u8);
            }
            labels.push(label);
        }
    }
    FeatureTable::from_rows(&rows, labels)
}

fn random_instance(rng: &mut ChaCha8Rng) -> FeatureTable {
    let labels: Vec<Label> = (0..160).map(|j| if j % 2 == 0 { Label::Positive } else { Label::Negative }).collect();
    let rows: Vec<Vec<u8>> = (0..12)
        .map(|_| {
            let bias = rng.gen_range(-0.3..0.3);
            let shared = rng.gen_range(0.0..0.5);
            labels
                .iter()
                .enumerate()
                .map(|(j, l)| {
                    let z = if l.is_positive() { bias } else { -bias } + shared * ((j % 7) as f64 - 3.0) / 3.0;
                    (z + rng.gen_range(-1.0..1.0) > 0.0) as u8
                })
                .collect()
        })
        .collect();
    FeatureTable::from_rows(&rows, labels)
}

/// Greedy selection against exhaustive search over all 3-subsets of 12.
fn greedy_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut benign_gap: f64 = 0.0;
    let mut built = 0;
    while built < 10 {
        let t = benign_instance(&mut rng);
        // Skip draws with fewer than three informative features.
        if (0..12).filter(|&f| subset_j(&t, &[f]) > 1e-9).count() < 3 {
            continue;
        }
        built += 1;
        let s: Selection<f64> = greedy_select(&t, 3, GreedyConfig::default()).map_err(|e| e.to_string())?;
        let best = exhaustive(&t);
        benign_gap = benign_gap.max((best - s.criterion_trace[2]).abs() / best);
    }
    let mut random_ok = true;
    let mut random_gap: f64 = 0.0;
    for _ in 0..10 {
        let t = random_instance(&mut rng);
        let s: Selection<f64> = greedy_select(&t, 3, GreedyConfig::default()).map_err(|e| e.to_string())?;
        let best = exhaustive(&t);
        random_ok &= s.criterion_trace[2] <= best * (1.0 + 1e-9);
        random_gap = random_gap.max((best - s.criterion_trace[2]) / best);
    }
    check(
        benign_gap <= 1e-9 && random_ok,
        format!("constructed: worst relative gap {benign_gap:.1e}; random: greedy <= exhaustive always, largest gap {random_gap:.3}"),
    )
}

fn random_state(rng: &mut ChaCha8Rng, k: usize) -> ScatterState<f64> {
    let n = rng.gen_range(40..300);
    let labels: Vec<Label> = (0..n).map(|j| if j % 3 == 0 { Label::Positive } else { Label::Negative }).collect();
    let bias: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..0.9)).collect();
    let xs: Vec<Vec<f64>> = labels
        .iter()
        .map(|l| {
            (0..k)
                .map(|i| {
                    let p = if l.is_positive() { bias[i] } else { 1.0 - bias[i] * 0.8 };
                    rng.gen_bool(p) as u8 as f64
                })
                .collect()
        })
        .collect();
    scatter_from_samples(&xs, &labels, vec![1e-6; k]).unwrap()
}

/// Composite Simpson integral of the N(mu, sd) density over [a, b].
fn gaussian_mass(mu: f64, sd: f64, a: f64, b: f64) -> f64 {
    let n = 20_000;
    let h = (b - a) / n as f64;
    let f = |x: f64| normal_pdf((x - mu) / sd) / sd;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Closed-form offsets against their defining properties.
fn threshold_analytics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut density_gap, mut mass_gap): (f64, f64) = (0.0, 0.0);
    let mut between = true;
    let mut exact = true;
    let mut roots = 0;
    for _ in 0..200 {
        let k = rng.gen_range(2..8);
        let s = random_state(&mut rng, k);
        let w = lda_direction(&s);
        let p = project_classes(&s, &w);
        if let Ok(t) = threshold_equal_density(&s, &w) {
            roots += 1;
            let d1 = normal_pdf((t - p.mu1) / p.sigma1) / p.sigma1;
            let d2 = normal_pdf((t - p.mu2) / p.sigma2) / p.sigma2;
            density_gap = density_gap.max((d1 - d2).abs() / d1.max(d2));
            between &= (t - p.mu1) * (t - p.mu2) < 0.0;
        }
        for miss in [0.5, 0.1, 0.01] {
            let t = threshold_target_detection(&s, &w, miss).unwrap();
            let above = gaussian_mass(p.mu1, p.sigma1, t, p.mu1 + 12.0 * p.sigma1);
            mass_gap = mass_gap.max((above - (1.0 - miss)).abs());
        }
        exact &= threshold_negative_mean(&s, &w).unwrap() == dot(&w, &s.m2);
        exact &= compute_threshold(ThresholdCriterion::NegativeMean, &s, &w).unwrap() == dot(&w, &s.m2);
    }
    check(
        density_gap <= 1e-9 && between && roots >= 100 && mass_gap <= 1e-6 && exact,
        format!(
            "equal-density: {roots} roots, worst density mismatch {density_gap:.1e}, all between means: {between}; \
             target-detect: worst mass error {mass_gap:.1e}; neg-mean exact: {exact}"
        ),
    )
}

/// Online versus batch learning on the digit stand-in.
fn usps_learning_curves() -> Outcome {
    let (train, test) = usps_surrogate(5);
    let cfg = RunConfig::default();
    let seeds: Vec<u64> = (0..10).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let online_final = |t: usize, f: f64| -> Result<f64, String> {
        let errs: Result<Vec<f64>, String> = seeds
            .iter()
            .map(|&s| {
                online_error_curve(&train, &test, t, f, s, usize::MAX, &cfg)
                    .map(|c| c.last().unwrap().1)
                    .map_err(|e| e.to_string())
            })
            .collect();
        Ok(mean(&errs?))
    };
    // Closeness means nothing if both just predict the majority class.
    let minority = test.count(Label::Positive).min(test.count(Label::Negative)) as f64 / test.len() as f64;
    let mut detail = Vec::new();
    let mut ok = true;
    for t in [25, 100] {
        let batch = batch_error(&train, &test, t, &cfg).map_err(|e| e.to_string())?;
        let online = online_final(t, 0.3)?;
        ok &= (online - batch).abs() <= 0.02 && batch < 0.5 * minority;
        detail.push(format!("T={t} batch {:.2}% online {:.2}%", 100.0 * batch, 100.0 * online));
    }
    let curve: Vec<f64> = [0.3, 0.5, 0.7].iter().map(|&f| online_final(25, f)).collect::<Result<_, _>>()?;
    ok &= curve.windows(2).all(|w| w[1] <= w[0] + 0.005);
    detail.push(format!(
        "error at 30/50/70%: {:.2}/{:.2}/{:.2}%",
        100.0 * curve[0],
        100.0 * curve[1],
        100.0 * curve[2]
    ));
    check(ok, detail.join("; "))
}

/// Per-insert cost of the online update stays flat while batch retraining grows.
fn complexity_scaling() -> Outcome {
    let pts = time_per_insert(100, &[500, 5000], 7, 200, 6).map_err(|e| e.to_string())?;
    let online = pts[1].online_insert / pts[0].online_insert;
    let batch = pts[1].batch_retrain / pts[0].batch_retrain;
    check(
        online <= 2.0 && batch >= 5.0,
        format!(
            "T=100, N 500 -> 5000: online insert {:.1} -> {:.1} us (x{online:.2}), batch retrain {:.0} -> {:.0} us (x{batch:.1})",
            pts[0].online_insert * 1e6,
            pts[1].online_insert * 1e6,
            pts[0].batch_retrain * 1e6,
            pts[1].batch_retrain * 1e6
        ),
    )
}

fn integral(ds: &Dataset) -> Vec<IntegralImage> {
    ds.integral_images().unwrap()
}

/// Three-stage cascade on synthetic patches, then online positives.
fn mini_cascade() -> Outcome {
    let train = face_dataset(500, 5000, FaceStyle { shift: 0.0 }, 7);
    let positives = integral(&train.class(Label::Positive));
    let pool = integral(&train.class(Label::Negative));
    let features = enumerate_haar_features(PoolConfig::for_target(2000));
    let config = CascadeConfig { stages: 3, negatives_per_stage: 1000, seed: 7, ..CascadeConfig::default() };
    let trained = train_cascade::<f64>(features, &positives, &pool, &config).map_err(|e| e.to_string())?;
    let mut cascade = trained.cascade;
    let goals_met = cascade.len() == 3
        && cascade.stages.iter().all(|s| s.report.detection_rate >= 0.99 && s.report.false_positive_rate <= 0.5);
    let stage_info: Vec<String> = cascade
        .stages
        .iter()
        .map(|s| format!("{}L {:.3}/{:.3}", s.report.learners, s.report.detection_rate, s.report.false_positive_rate))
        .collect();

    let shift = FaceStyle { shift: 0.7 };
    let held_out = integral(&face_dataset(200, 0, shift, 8));
    let test_pos = integral(&face_dataset(400, 0, shift, 9));
    let test_neg = integral(&face_dataset(0, 2000, shift, 10));
    let base = Window::base(0, 0);
    let detection = |c: &ogslda::Cascade| -> Result<(f64, usize), String> {
        let samples: Vec<(HaarWindow<'_>, Label)> = test_pos
            .iter()
            .map(|ii| (HaarWindow::new(ii, &c.features, base).unwrap(), Label::Positive))
            .chain(test_neg.iter().map(|ii| (HaarWindow::new(ii, &c.features, base).unwrap(), Label::Negative)))
            .collect();
        let pts = roc_curve(c, &samples).map_err(|e| e.to_string())?;
        Ok((detection_at_false_positives(&pts, 20), pts.last().unwrap().false_positives))
    };
    let (before, _) = detection(&cascade)?;
    // Updates leave the feature list alone, so a snapshot can back the views.
    let features = cascade.features.clone();
    for ii in &held_out {
        let view = HaarWindow::new(ii, &features, base).unwrap();
        online_update_cascade(&mut cascade, &view, Label::Positive).map_err(|e| e.to_string())?;
    }
    let (after, _) = detection(&cascade)?;
    check(
        goals_met && after >= before - 0.01,
        format!(
            "stages [{}]; test detection at 20 false positives {:.2}% -> {:.2}% after 200 online positives",
            stage_info.join(", "),
            100.0 * before,
            100.0 * after
        ),
    )
}

fn main() {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 7] = [
        (1, "batch-online equivalence", batch_online_equivalence),
        (2, "rank-two inverse", rank_two_inverse),
        (3, "greedy optimality", greedy_optimality),
        (4, "threshold analytics", threshold_analytics),
        (5, "learning curves", usps_learning_curves),
        (6, "complexity scaling", complexity_scaling),
        (7, "mini cascade", mini_cascade),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {id} ({name}): PASS [{secs:.1}s] {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {id} ({name}): FAIL [{secs:.1}s] {d}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
