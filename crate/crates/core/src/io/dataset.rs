use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::imageops::FilterType;
use image::GrayImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::label::Label;
use crate::weak::IntegralImage;

use super::IoError;

/// Side of the square patches the image-directory loader produces.
pub const FACE_SIDE: u32 = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub source: String,
    pub dim: usize,
    /// `(width, height)` when every sample is a row-major raster.
    pub raster: Option<(u32, u32)>,
}

/// Labeled samples of uniform dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(samples: Vec<Vec<f64>>, labels: Vec<Label>, source: impl Into<String>) -> Result<Self, IoError> {
        let source = source.into();
        if samples.len() != labels.len() {
            return Err(IoError::parse(&source, format!("{} samples but {} labels", samples.len(), labels.len())));
        }
        let dim = samples.first().map_or(0, Vec::len);
        if let Some((j, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != dim) {
            return Err(IoError::DimensionMismatch {
                locus: format!("{source}: sample {j}"),
                expected: dim,
                found: s.len(),
            });
        }
        Ok(Self { samples, labels, meta: DatasetMeta { source, dim, raster: None } })
    }

    pub fn with_raster(mut self, width: u32, height: u32) -> Result<Self, IoError> {
        let dim = (width * height) as usize;
        if !self.samples.is_empty() && dim != self.meta.dim {
            return Err(IoError::DimensionMismatch {
                locus: self.meta.source.clone(),
                expected: dim,
                found: self.meta.dim,
            });
        }
        self.meta.dim = dim;
        self.meta.raster = Some((width, height));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            meta: self.meta.clone(),
        }
    }

    /// Samples of one class.
    pub fn class(&self, label: Label) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == label).collect();
        self.subset(&idx)
    }

    /// Integral images of raster samples.
    pub fn integral_images(&self) -> Result<Vec<IntegralImage>, IoError> {
        let (w, h) = self
            .meta
            .raster
            .ok_or_else(|| IoError::Config(format!("{} does not hold image rasters", self.meta.source)))?;
        Ok(self.samples.iter().map(|s| IntegralImage::from_values(w, h, s)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    /// Comma-separated numeric rows, class label in the last column.
    VectorTable,
    /// `pos/` and `neg/` subdirectories of grayscale images.
    ImageDirectory,
}

impl FromStr for DataFormat {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vector-table" | "csv" => Ok(Self::VectorTable),
            "image-directory" | "images" => Ok(Self::ImageDirectory),
            other => Err(IoError::Config(format!("unknown data format {other:?}"))),
        }
    }
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<Dataset, IoError> {
    match format {
        DataFormat::VectorTable => {
            let file = fs::File::open(path).map_err(|e| IoError::file(path, e))?;
            read_vector_table(file, &path.display().to_string())
        }
        DataFormat::ImageDirectory => load_image_directory(path, Some(FACE_SIDE)),
    }
}

/// Parses a vector table. Blank lines and `#` comments are skipped; a first
/// row that does not parse as numbers is taken as a header.
pub fn read_vector_table<R: Read>(reader: R, source: &str) -> Result<Dataset, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| IoError::parse(source, e.to_string()))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        let locus = || format!("{source}: row {line}");
        if record.len() < 2 {
            return Err(IoError::parse(locus(), "need at least one feature and a label"));
        }
        let values: Result<Vec<f64>, _> = record.iter().take(record.len() - 1).map(f64::from_str).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(e) => return Err(IoError::parse(locus(), e.to_string())),
        };
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(IoError::parse(locus(), format!("ragged row: {} columns, expected {w}", record.len())));
            }
            _ => {}
        }
        let label = record[record.len() - 1].parse::<Label>().map_err(|e| IoError::parse(locus(), e.to_string()))?;
        samples.push(values);
        labels.push(label);
    }
    Dataset::new(samples, labels, source)
}

/// Header row then one row per sample. Values use the shortest decimal
/// form that parses back to the same `f64`.
pub fn write_vector_table<W: Write>(ds: &Dataset, writer: W) -> Result<(), IoError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let to_io = |e: csv::Error| IoError::parse(&ds.meta.source, e.to_string());
    let mut header: Vec<String> = (0..ds.dim()).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(to_io)?;
    for (s, l) in ds.samples.iter().zip(&ds.labels) {
        let mut row: Vec<String> = s.iter().map(|v| v.to_string()).collect();
        row.push(l.to_string());
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush().map_err(|e| IoError::file(&ds.meta.source, e))
}

pub fn save_vector_table(ds: &Dataset, path: &Path) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(|e| IoError::file(path, e))?;
    write_vector_table(ds, std::io::BufWriter::new(file))
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "pgm" | "pnm" | "ppm" | "pbm")
    )
}

/// Grayscale images of a directory in file-name order.
pub fn load_gray_images(dir: &Path) -> Result<Vec<(PathBuf, GrayImage)>, IoError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| IoError::file(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_image(p))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let img = image::open(&p).map_err(|e| IoError::parse(p.display().to_string(), e.to_string()))?;
            Ok((p, img.to_luma8()))
        })
        .collect()
}

fn class_dir(root: &Path, names: &[&str]) -> Result<PathBuf, IoError> {
    names
        .iter()
        .map(|n| root.join(n))
        .find(|p| p.is_dir())
        .ok_or_else(|| IoError::parse(root.display().to_string(), format!("missing {} subdirectory", names[0])))
}

/// Loads `pos/` and `neg/` images as raster samples, resized to
/// `side x side` when given. Without resizing all images must share a size.
pub fn load_image_directory(root: &Path, side: Option<u32>) -> Result<Dataset, IoError> {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut size = side.map(|s| (s, s));
    for (names, label) in [(&["pos", "positive"][..], Label::Positive), (&["neg", "negative"][..], Label::Negative)] {
        for (path, img) in load_gray_images(&class_dir(root, names)?)? {
            let img = match side {
                Some(s) if img.dimensions() != (s, s) => image::imageops::resize(&img, s, s, FilterType::Triangle),
                _ => img,
            };
            match size {
                None => size = Some(img.dimensions()),
                Some((w, h)) if (w, h) != img.dimensions() => {
                    return Err(IoError::DimensionMismatch {
                        locus: path.display().to_string(),
                        expected: (w * h) as usize,
                        found: (img.width() * img.height()) as usize,
                    });
                }
                _ => {}
            }
            samples.push(img.as_raw().iter().map(|&p| p as f64).collect());
            labels.push(label);
        }
    }
    let (w, h) = size.unwrap_or((FACE_SIDE, FACE_SIDE));
    Dataset::new(samples, labels, root.display().to_string())?.with_raster(w, h)
}

/// Converts a LIBSVM-format file (the common USPS distribution) into a
/// two-class dataset, keeping rows labeled `positive` or `negative`.
/// Intensities are shifted so the smallest is at least zero and divided by
/// the largest, giving values in `[0, 1]`.
pub fn convert_usps<R: Read>(reader: R, source: &str, positive: &str, negative: &str) -> Result<Dataset, IoError> {
    let mut text = String::new();
    std::io::BufReader::new(reader).read_to_string(&mut text).map_err(|e| IoError::file(source, e))?;
    let mut rows: Vec<(Vec<(usize, f64)>, Label)> = Vec::new();
    let mut dim = 0;
    for (i, line) in text.lines().enumerate() {
        let locus = || format!("{source}: line {}", i + 1);
        let mut parts = line.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let label = if tag == positive {
            Label::Positive
        } else if tag == negative {
            Label::Negative
        } else {
            continue;
        };
        let mut entries = Vec::new();
        for p in parts {
            let (idx, val) = p.split_once(':').ok_or_else(|| IoError::parse(locus(), format!("bad entry {p:?}")))?;
            let idx: usize = idx.parse().map_err(|_| IoError::parse(locus(), format!("bad index {idx:?}")))?;
            let val: f64 = val.parse().map_err(|_| IoError::parse(locus(), format!("bad value {val:?}")))?;
            if idx == 0 {
                return Err(IoError::parse(locus(), "feature indices start at 1"));
            }
            dim = dim.max(idx);
            entries.push((idx - 1, val));
        }
        rows.push((entries, label));
    }
    let lo = rows.iter().flat_map(|(e, _)| e.iter().map(|&(_, v)| v)).fold(0.0f64, f64::min);
    let hi = rows.iter().flat_map(|(e, _)| e.iter().map(|&(_, v)| v - lo)).fold(0.0f64, f64::max);
    let scale = if hi > 0.0 { hi } else { 1.0 };
    let mut samples = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (entries, label) in rows {
        // Absent LIBSVM entries are zeros of the raw scale.
        let mut x = vec![-lo / scale; dim];
        for (i, v) in entries {
            x[i] = (v - lo) / scale;
        }
        samples.push(x);
        labels.push(label);
    }
    Dataset::new(samples, labels, source)
}

/// Seeded split into an initial set holding `round(fraction · N)` samples
/// (at least one) and the stream of the rest, in shuffled order.
pub fn split_stream(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset), IoError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(IoError::Config(format!("initial fraction {fraction} must lie in (0, 1)")));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = ((fraction * ds.len() as f64).round() as usize).clamp(1.min(ds.len()), ds.len());
    Ok((ds.subset(&order[..k]), ds.subset(&order[k..])))
}
