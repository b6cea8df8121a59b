use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::gslda::{lda_direction, scatter_from_samples, LinearModel, RIDGE_FACTOR};
use crate::label::Label;
use crate::ogslda::{compute_threshold, OnlineClassifier, ThresholdCriterion};
use crate::pipeline::{error_rate, stream_insert, train_vector_classifier};
use crate::weak::{Polarity, Stump};

use super::{split_stream, Dataset, IoError, RunConfig};

/// A comma-separated output table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(), IoError> {
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, self.to_csv()).map_err(|e| IoError::file(&path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub tables: Vec<Table>,
}

impl BenchReport {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

/// Test error of batch training on all of `train`.
pub fn batch_error(train: &Dataset, test: &Dataset, t: usize, cfg: &RunConfig) -> Result<f64> {
    let clf: OnlineClassifier<f64> = train_vector_classifier(train, t, cfg.greedy(), cfg.criterion()?)?;
    Ok(error_rate(&clf.model, test))
}

/// Trains on a seeded `fraction` of `train`, then streams the rest,
/// recording `(inserts, test error)` every `interval` inserts and at the end.
pub fn online_error_curve(
    train: &Dataset,
    test: &Dataset,
    t: usize,
    fraction: f64,
    seed: u64,
    interval: usize,
    cfg: &RunConfig,
) -> Result<Vec<(usize, f64)>> {
    let (initial, stream) =
        if fraction >= 1.0 { (train.clone(), train.subset(&[])) } else { split_stream(train, fraction, seed)? };
    let mut clf: OnlineClassifier<f64> = train_vector_classifier(&initial, t, cfg.greedy(), cfg.criterion()?)?;
    let interval = interval.max(1);
    let mut curve = vec![(0, error_rate(&clf.model, test))];
    let mut done = 0;
    while done < stream.len() {
        let end = (done + interval).min(stream.len());
        let idx: Vec<usize> = (done..end).collect();
        stream_insert(&mut clf, &stream.subset(&idx))?;
        done = end;
        curve.push((done, error_rate(&clf.model, test)));
    }
    Ok(curve)
}

/// Median per-insert cost at one accumulated sample count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingPoint {
    pub n: usize,
    pub learners: usize,
    /// Median seconds of one online insert.
    pub online_insert: f64,
    /// Median seconds of recomputing the statistics and the discriminant
    /// from all samples after one insert.
    pub batch_retrain: f64,
}

fn random_responses(rng: &mut ChaCha8Rng, k: usize, label: Label) -> Vec<f64> {
    (0..k)
        .map(|i| {
            let p = if label.is_positive() { 0.3 + 0.4 * (i % 3) as f64 / 2.0 } else { 0.4 };
            rng.gen_bool(p) as u8 as f64
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Times online inserts against a full batch recomputation on random
/// `learners`-dimensional responses, for each accumulated count in `sizes`.
pub fn time_per_insert(
    learners: usize,
    sizes: &[usize],
    repeats: usize,
    inserts: usize,
    seed: u64,
) -> Result<Vec<TimingPoint>> {
    let mut out = Vec::with_capacity(sizes.len());
    let criterion = ThresholdCriterion::Fisher;
    for &n in sizes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        let labels: Vec<Label> = (0..n).map(|j| if j % 2 == 0 { Label::Positive } else { Label::Negative }).collect();
        let mut xs: Vec<Vec<f64>> = labels.iter().map(|&l| random_responses(&mut rng, learners, l)).collect();
        let ridge = vec![RIDGE_FACTOR; learners];
        let state = scatter_from_samples(&xs, &labels, ridge.clone())?;
        let stumps = (0..learners).map(|i| Stump::new(i, 0.5, Polarity::Positive)).collect();
        let model = LinearModel::fit(stumps, &state, criterion)?;
        let base = OnlineClassifier::new(model, state)?;
        let fresh: Vec<(Vec<f64>, Label)> = (0..inserts.max(1))
            .map(|j| {
                let l = if j % 2 == 0 { Label::Positive } else { Label::Negative };
                (random_responses(&mut rng, learners, l), l)
            })
            .collect();
        let mut online = Vec::with_capacity(repeats);
        let mut batch = Vec::with_capacity(repeats);
        let mut all_labels = labels.clone();
        all_labels.push(fresh[0].1);
        xs.push(fresh[0].0.clone());
        for _ in 0..repeats {
            let mut clf = base.clone();
            let start = Instant::now();
            for (x, l) in &fresh {
                clf.insert_projected(x, *l)?;
            }
            online.push(start.elapsed().as_secs_f64() / fresh.len() as f64);

            let start = Instant::now();
            let state = scatter_from_samples(&xs, &all_labels, ridge.clone())?;
            let w = lda_direction(&state);
            let w0 = compute_threshold(criterion, &state, &w)?;
            batch.push(start.elapsed().as_secs_f64());
            std::hint::black_box((w, w0));
        }
        out.push(TimingPoint { n, learners, online_insert: median(online), batch_retrain: median(batch) });
    }
    Ok(out)
}

/// Facts about the machine and build that timings depend on.
pub fn capture_environment() -> Vec<(String, String)> {
    let cpus = std::thread::available_parallelism().map_or(0, |n| n.get());
    vec![
        ("crate_version".into(), env!("CARGO_PKG_VERSION").into()),
        ("cpu_count".into(), cpus.to_string()),
        ("rayon_threads".into(), rayon::current_num_threads().to_string()),
        ("os".into(), std::env::consts::OS.into()),
        ("arch".into(), std::env::consts::ARCH.into()),
        ("debug_assertions".into(), cfg!(debug_assertions).to_string()),
        ("target_avx2".into(), cfg!(target_feature = "avx2").to_string()),
    ]
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Runs every experiment of the configuration and returns its tables. With
/// `out`, each table is written as soon as it is complete, so an error
/// leaves the finished ones on disk.
///
/// Error tables are deterministic in the configuration; repeats use seeds
/// `seed, seed + 1, ...` and run in parallel.
pub fn run_benchmark(cfg: &RunConfig, train: &Dataset, test: &Dataset, out: Option<&Path>) -> Result<BenchReport> {
    cfg.validate()?;
    if train.dim() != test.dim() {
        return Err(IoError::DimensionMismatch {
            locus: test.meta.source.clone(),
            expected: train.dim(),
            found: test.dim(),
        }
        .into());
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
    }
    let hash = cfg.hash();
    let seed = cfg.seed.to_string();
    let seeds: Vec<u64> = (0..cfg.repeats as u64).map(|r| cfg.seed.wrapping_add(r)).collect();
    let mut report = BenchReport::default();
    let mut emit = |table: Table| -> Result<()> {
        if let Some(dir) = out {
            table.write(dir)?;
        }
        report.tables.push(table);
        Ok(())
    };
    let interval = cfg.bench.sample_interval;

    let mut t_k = Table::new(
        "error_vs_k",
        &[
            "config_hash",
            "seed",
            "learners",
            "initial_fraction",
            "batch_error",
            "online_error_mean",
            "online_error_min",
            "online_error_max",
            "runs",
        ],
    );
    for &t in &cfg.bench.learner_grid {
        let batch = batch_error(train, test, t, cfg)?;
        let online: Vec<f64> = seeds
            .par_iter()
            .map(|&s| {
                online_error_curve(train, test, t, cfg.initial_fraction, s, usize::MAX, cfg)
                    .map(|c| c.last().unwrap().1)
            })
            .collect::<Result<_>>()?;
        t_k.rows.push(vec![
            hash.clone(),
            seed.clone(),
            t.to_string(),
            cfg.initial_fraction.to_string(),
            fmt(batch),
            fmt(mean(&online)),
            fmt(online.iter().copied().fold(f64::INFINITY, f64::min)),
            fmt(online.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            online.len().to_string(),
        ]);
    }
    emit(t_k)?;

    let full = batch_error(train, test, cfg.learners, cfg)?;
    let mut t_f = Table::new(
        "error_vs_fraction",
        &[
            "config_hash",
            "seed",
            "learners",
            "fraction",
            "initial_batch_error_mean",
            "online_error_mean",
            "full_batch_error",
            "runs",
        ],
    );
    for &f in &cfg.bench.fraction_grid {
        let runs: Vec<(f64, f64)> = seeds
            .par_iter()
            .map(|&s| {
                let curve = online_error_curve(train, test, cfg.learners, f, s, usize::MAX, cfg)?;
                Ok((curve[0].1, curve.last().unwrap().1))
            })
            .collect::<Result<_>>()?;
        let initial: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let fin: Vec<f64> = runs.iter().map(|r| r.1).collect();
        t_f.rows.push(vec![
            hash.clone(),
            seed.clone(),
            cfg.learners.to_string(),
            f.to_string(),
            fmt(mean(&initial)),
            fmt(mean(&fin)),
            fmt(full),
            runs.len().to_string(),
        ]);
    }
    emit(t_f)?;

    let curves: Vec<Vec<(usize, f64)>> = seeds
        .par_iter()
        .map(|&s| online_error_curve(train, test, cfg.learners, cfg.initial_fraction, s, interval, cfg))
        .collect::<Result<_>>()?;
    let mut t_i =
        Table::new("error_vs_inserts", &["config_hash", "seed", "learners", "inserts", "online_error_mean", "runs"]);
    for (p, &(inserts, _)) in curves[0].iter().enumerate() {
        let errs: Vec<f64> = curves.iter().map(|c| c[p].1).collect();
        t_i.rows.push(vec![
            hash.clone(),
            seed.clone(),
            cfg.learners.to_string(),
            inserts.to_string(),
            fmt(mean(&errs)),
            errs.len().to_string(),
        ]);
    }
    emit(t_i)?;

    let b = &cfg.bench;
    let timing = time_per_insert(b.timing_learners, &b.timing_sizes, b.timing_repeats, b.timing_inserts, cfg.seed)?;
    let mut t_n = Table::new(
        "time_vs_n",
        &["config_hash", "seed", "n", "learners", "online_insert_median_us", "batch_retrain_median_us", "repeats"],
    );
    for p in timing {
        t_n.rows.push(vec![
            hash.clone(),
            seed.clone(),
            p.n.to_string(),
            p.learners.to_string(),
            format!("{:.3}", p.online_insert * 1e6),
            format!("{:.3}", p.batch_retrain * 1e6),
            b.timing_repeats.to_string(),
        ]);
    }
    emit(t_n)?;

    let mut env = Table::new("environment", &["key", "value"]);
    env.rows = capture_environment().into_iter().map(|(k, v)| vec![k, v]).collect();
    env.rows.push(vec!["config_hash".into(), hash.clone()]);
    env.rows.push(vec!["seed".into(), seed.clone()]);
    emit(env)?;

    let mut cfg_text = String::new();
    let _ = write!(cfg_text, "{}", cfg.to_toml_string());
    if let Some(dir) = out {
        let path = dir.join("config.toml");
        std::fs::write(&path, cfg_text).map_err(|e| IoError::file(&path, e))?;
    }
    Ok(report)
}
