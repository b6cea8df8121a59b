use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use ogslda::cascade::{
    detection_at_false_positives, merge_detections, online_update_cascade, roc_curve, roc_curve_images, scan_image,
    top1, train_cascade, BBox, RocPoint,
};
use ogslda::io::{
    convert_usps, deserialize_model, load_dataset, load_gray_images, run_benchmark, save_vector_table, serialize_model,
    split_stream, Artifact, DataFormat, Dataset, IoError, Mode, RunConfig,
};
use ogslda::pipeline::{error_rate, stream_insert, train_vector_classifier};
use ogslda::weak::{enumerate_haar_features, IntegralImage, Window};
use ogslda::{Cascade, Error, Label, OnlineClassifier};

type Result<T> = std::result::Result<T, Error>;

/// Greedy sparse LDA classifiers and detector cascades, trained in batch or online.
#[derive(Parser, Debug)]
#[command(name = "ogslda", version)]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Each overrides the config file.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// batch or online (bench always reports both).
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Number of weak learners T.
    #[arg(long, global = true)]
    learners: Option<usize>,
    /// Share of the training data used before streaming starts.
    #[arg(long, global = true)]
    initial_frac: Option<f64>,
    /// fisher, equal-density, target-detect[:p], neg-mean or asym-min[:p].
    #[arg(long, global = true)]
    criterion: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    repeats: Option<usize>,
    #[arg(long, global = true)]
    scale_factor: Option<f64>,
    #[arg(long, global = true)]
    step: Option<f64>,
    #[arg(long, global = true)]
    min_neighbors: Option<usize>,
    /// Keep only the highest-scoring detection per image.
    #[arg(long, global = true)]
    top1: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Training data; defaults to paths.train of the config.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Test data reported on after training; defaults to paths.test.
    #[arg(long)]
    test: Option<PathBuf>,
    /// vector-table or image-directory.
    #[arg(long, default_value = "vector-table")]
    format: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a classifier on all training data at once.
    TrainBatch {
        #[command(flatten)]
        data: DataArgs,
        /// Where to write the model.
        #[arg(long)]
        model: PathBuf,
    },
    /// Train on the initial fraction, then insert the rest one sample at a time.
    TrainOnline {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train a detector cascade on 24x24 positive patches and a pool of negative images.
    TrainCascade {
        /// Directory of positive patches, resized to 24x24.
        #[arg(long)]
        positives: PathBuf,
        /// Directory of images without the object; windows are drawn from them.
        #[arg(long)]
        negatives: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Insert labeled samples into a saved classifier or cascade.
    Update {
        #[arg(long)]
        model: PathBuf,
        /// Vector table for a classifier, image directory (pos/, neg/) for a cascade.
        #[arg(long)]
        data: PathBuf,
        /// Where to write the updated model; defaults to overwriting it.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Scan images with a cascade and write the merged detections as CSV.
    Detect {
        #[arg(long)]
        model: PathBuf,
        /// Images or directories of images.
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// ROC of a cascade by shifting its final-stage threshold.
    EvalRoc {
        #[arg(long)]
        model: PathBuf,
        /// Image directory (pos/, neg/) of 24x24 test patches.
        #[arg(long, conflicts_with_all = ["images", "annotations"])]
        data: Option<PathBuf>,
        /// Directory of full test images, scored with scanning and merging.
        #[arg(long, requires = "annotations")]
        images: Option<PathBuf>,
        /// CSV of ground-truth boxes: file,x,y,width,height.
        #[arg(long, requires = "images")]
        annotations: Option<PathBuf>,
        /// Number of threshold levels for the image sweep.
        #[arg(long, default_value_t = 50)]
        levels: usize,
    },
    /// Error-versus-learners, error-versus-fraction, error-versus-inserts and timing tables.
    Bench {
        /// Vector table; the packaged digit surrogate is used when absent.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Convert a LIBSVM-format USPS file into a two-class vector table.
    ConvertUsps {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Digit taken as the positive class.
        #[arg(long, default_value = "3")]
        positive: String,
        #[arg(long, default_value = "5")]
        negative: String,
    },
}

fn usage(msg: impl Into<String>) -> Error {
    IoError::Config(msg.into()).into()
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &args.mode {
        cfg.mode = m.parse::<Mode>()?;
    }
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = args.$flag.clone() { cfg.$($field).+ = v; })*
        };
    }
    set!(
        learners => learners,
        initial_frac => initial_fraction,
        criterion => criterion,
        seed => seed,
        repeats => repeats,
        scale_factor => scan.scale_factor,
        step => scan.step,
        min_neighbors => scan.min_neighbors,
    );
    if args.top1 {
        cfg.scan.top1 = true;
    }
    if args.out.is_some() {
        cfg.paths.out = args.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn data_path(flag: &Option<PathBuf>, cfg: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.clone())
        .ok_or_else(|| usage(format!("no {what} data given (--{what} or paths.{what})")))
}

fn load_train_test(data: &DataArgs, cfg: &RunConfig) -> Result<(Dataset, Option<Dataset>)> {
    let format: DataFormat = data.format.parse()?;
    let train = load_dataset(&data_path(&data.train, &cfg.paths.train, "train")?, format)?;
    let test = match data.test.clone().or_else(|| cfg.paths.test.clone()) {
        Some(p) => Some(load_dataset(&p, format)?),
        None => None,
    };
    Ok((train, test))
}

fn report_test(clf: &OnlineClassifier, test: Option<&Dataset>) {
    if let Some(test) = test {
        println!("test_error,{:.6}", error_rate(&clf.model, test));
    }
}

fn train_classifier(data: &DataArgs, model: &Path, cfg: &RunConfig, online: bool) -> Result<()> {
    let (train, test) = load_train_test(data, cfg)?;
    let clf = if online {
        let (initial, stream) = split_stream(&train, cfg.initial_fraction, cfg.seed)?;
        let mut clf: OnlineClassifier =
            train_vector_classifier(&initial, cfg.learners, cfg.greedy(), cfg.criterion()?)?;
        info!("initial model on {} samples, streaming {}", initial.len(), stream.len());
        stream_insert(&mut clf, &stream)?;
        clf
    } else {
        train_vector_classifier(&train, cfg.learners, cfg.greedy(), cfg.criterion()?)?
    };
    println!("train_error,{:.6}", error_rate(&clf.model, &train));
    report_test(&clf, test.as_ref());
    serialize_model(&Artifact::Classifier(clf), model)?;
    Ok(())
}

fn patches(dir: &Path) -> Result<Vec<IntegralImage>> {
    Ok(load_gray_images(dir)?
        .into_iter()
        .map(|(_, img)| {
            let img = image::imageops::resize(&img, 24, 24, image::imageops::FilterType::Triangle);
            IntegralImage::from_gray(&img)
        })
        .collect())
}

fn train_detector(positives: &Path, negatives: &Path, model: &Path, cfg: &RunConfig) -> Result<()> {
    let pos = patches(positives)?;
    let pool: Vec<IntegralImage> =
        load_gray_images(negatives)?.iter().map(|(_, img)| IntegralImage::from_gray(img)).collect();
    info!("{} positives, {} negative images", pos.len(), pool.len());
    let features = enumerate_haar_features(cfg.feature_pool());
    let trained = train_cascade::<f64>(features, &pos, &pool, &cfg.cascade_config())?;
    println!("stage,learners,positives,negatives,detection_rate,false_positive_rate");
    for (i, s) in trained.cascade.stages.iter().enumerate() {
        let r = &s.report;
        println!(
            "{},{},{},{},{:.6},{:.6}",
            i + 1,
            r.learners,
            r.positives,
            r.negatives,
            r.detection_rate,
            r.false_positive_rate
        );
    }
    if trained.stopped.is_some() {
        println!("# negative pool exhausted after {} stages", trained.cascade.len());
    }
    serialize_model(&Artifact::Cascade(trained.cascade), model)?;
    Ok(())
}

fn update(model: &Path, data: &Path, output: Option<&Path>) -> Result<()> {
    let artifact = match deserialize_model::<f64>(model)? {
        Artifact::Classifier(mut clf) => {
            let ds = load_dataset(data, DataFormat::VectorTable)?;
            stream_insert(&mut clf, &ds)?;
            println!("inserted,{}", ds.len());
            Artifact::Classifier(clf)
        }
        Artifact::Cascade(mut cascade) => {
            let ds = load_dataset(data, DataFormat::ImageDirectory)?;
            let features = cascade.features.clone();
            let mut stage_updates = 0;
            for (ii, &label) in ds.integral_images()?.iter().zip(&ds.labels) {
                let view = ogslda::weak::HaarWindow::new(ii, &features, Window::base(0, 0))?;
                stage_updates += online_update_cascade(&mut cascade, &view, label)?;
            }
            println!("inserted,{}", ds.len());
            println!("stage_updates,{stage_updates}");
            Artifact::Cascade(cascade)
        }
    };
    serialize_model(&artifact, output.unwrap_or(model))?;
    Ok(())
}

fn load_cascade(model: &Path) -> Result<Cascade> {
    match deserialize_model::<f64>(model)? {
        Artifact::Cascade(c) => Ok(c),
        Artifact::Classifier(_) => Err(usage(format!("{} holds a single classifier, not a cascade", model.display()))),
    }
}

fn image_files(inputs: &[PathBuf]) -> Result<Vec<(PathBuf, image::GrayImage)>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(load_gray_images(p)?);
        } else {
            let img = image::open(p).map_err(|e| IoError::parse(p.display().to_string(), e.to_string()))?;
            out.push((p.clone(), img.to_luma8()));
        }
    }
    Ok(out)
}

fn emit(cfg: &RunConfig, name: &str, text: &str) -> Result<()> {
    match &cfg.paths.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| IoError::file(&path, e))?;
            info!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn detect(model: &Path, images: &[PathBuf], cfg: &RunConfig) -> Result<()> {
    let cascade = load_cascade(model)?;
    let scan = cfg.scan_config();
    let mut csv = String::from("image,x,y,width,height,score\n");
    for (path, img) in image_files(images)? {
        let raw = scan_image(&cascade, &IntegralImage::from_gray(&img), &scan)?;
        let mut merged = merge_detections(&raw, cfg.scan.min_neighbors);
        if cfg.scan.top1 {
            merged = top1(&merged).into_iter().collect();
        }
        for d in merged {
            let b = d.bbox;
            let _ = writeln!(csv, "{},{},{},{},{},{:.6}", path.display(), b.x, b.y, b.width, b.height, d.score);
        }
    }
    emit(cfg, "detections.csv", &csv)
}

fn read_annotations(path: &Path) -> Result<BTreeMap<String, Vec<BBox>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| IoError::parse(path.display().to_string(), e.to_string()))?;
    let mut boxes: BTreeMap<String, Vec<BBox>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let locus = format!("{}: row {}", path.display(), i + 2);
        let rec = rec.map_err(|e| IoError::parse(&locus, e.to_string()))?;
        if rec.len() != 5 {
            return Err(IoError::parse(&locus, format!("expected 5 fields, found {}", rec.len())).into());
        }
        let v: Vec<f64> = (1..5)
            .map(|k| rec[k].trim().parse::<f64>().map_err(|e| IoError::parse(&locus, e.to_string())))
            .collect::<std::result::Result<_, _>>()?;
        boxes.entry(rec[0].trim().to_string()).or_default().push(BBox::new(v[0], v[1], v[2], v[3]));
    }
    Ok(boxes)
}

fn roc_csv(points: &[RocPoint]) -> String {
    let mut csv = String::from("threshold,false_positives,detection_rate\n");
    for p in points {
        let _ = writeln!(csv, "{:.9e},{},{:.6}", p.threshold, p.false_positives, p.detection_rate);
    }
    csv
}

fn eval_roc(
    model: &Path,
    data: Option<&Path>,
    images: Option<&Path>,
    annotations: Option<&Path>,
    levels: usize,
    cfg: &RunConfig,
) -> Result<()> {
    let cascade = load_cascade(model)?;
    let points = match (data, images, annotations) {
        (Some(dir), _, _) => {
            let ds = load_dataset(dir, DataFormat::ImageDirectory)?;
            let iis = ds.integral_images()?;
            let samples = iis
                .iter()
                .zip(&ds.labels)
                .map(|(ii, &l)| Ok((cascade.window(ii, Window::base(0, 0))?, l)))
                .collect::<Result<Vec<_>>>()?;
            let pts = roc_curve(&cascade, &samples)?;
            info!(
                "{} positives, {} negatives; detection at 0 false positives {:.4}",
                ds.count(Label::Positive),
                ds.count(Label::Negative),
                detection_at_false_positives(&pts, 0)
            );
            pts
        }
        (None, Some(dir), Some(ann)) => {
            let truth = read_annotations(ann)?;
            let set: Vec<(IntegralImage, Vec<BBox>)> = load_gray_images(dir)?
                .into_iter()
                .map(|(p, img)| {
                    let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    (IntegralImage::from_gray(&img), truth.get(&name).cloned().unwrap_or_default())
                })
                .collect();
            roc_curve_images(&cascade, &set, &cfg.scan_config(), cfg.scan.min_neighbors, levels)?
        }
        _ => return Err(usage("eval-roc needs --data, or --images with --annotations")),
    };
    emit(cfg, "roc.csv", &roc_csv(&points))
}

fn bench(train: Option<&Path>, test: Option<&Path>, cfg: &RunConfig) -> Result<()> {
    let train = train.map(Path::to_path_buf).or_else(|| cfg.paths.train.clone());
    let test = test.map(Path::to_path_buf).or_else(|| cfg.paths.test.clone());
    let (train, test) = match (train, test) {
        (Some(a), Some(b)) => (load_dataset(&a, DataFormat::VectorTable)?, load_dataset(&b, DataFormat::VectorTable)?),
        (None, None) => {
            info!("no data given, using the synthetic digit surrogate");
            ogslda::synth::usps_surrogate(cfg.seed)
        }
        _ => return Err(usage("bench needs both --train and --test, or neither")),
    };
    let report = run_benchmark(cfg, &train, &test, cfg.paths.out.as_deref())?;
    if cfg.paths.out.is_none() {
        for t in &report.tables {
            println!("# {}", t.name);
            print!("{}", t.to_csv());
        }
    }
    Ok(())
}

fn convert(input: &Path, output: &Path, positive: &str, negative: &str) -> Result<()> {
    let file = std::fs::File::open(input).map_err(|e| IoError::file(input, e))?;
    let ds = convert_usps(file, &input.display().to_string(), positive, negative)?;
    save_vector_table(&ds, output)?;
    println!("samples,{}", ds.len());
    println!("positives,{}", ds.count(Label::Positive));
    println!("negatives,{}", ds.count(Label::Negative));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.run)?;
    info!("config hash {} seed {}", cfg.hash(), cfg.seed);
    match cli.command {
        Command::TrainBatch { data, model } => train_classifier(&data, &model, &cfg, false),
        Command::TrainOnline { data, model } => train_classifier(&data, &model, &cfg, true),
        Command::TrainCascade { positives, negatives, model } => train_detector(&positives, &negatives, &model, &cfg),
        Command::Update { model, data, output } => update(&model, &data, output.as_deref()),
        Command::Detect { model, images } => detect(&model, &images, &cfg),
        Command::EvalRoc { model, data, images, annotations, levels } => {
            eval_roc(&model, data.as_deref(), images.as_deref(), annotations.as_deref(), levels, &cfg)
        }
        Command::Bench { train, test } => bench(train.as_deref(), test.as_deref(), &cfg),
        Command::ConvertUsps { input, output, positive, negative } => convert(&input, &output, &positive, &negative),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { ogslda::error::EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
