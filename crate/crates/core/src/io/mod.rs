//! Datasets, run configuration, model files and the benchmark harness.

mod bench;
mod config;
mod dataset;
mod serialize;

use std::path::PathBuf;

use thiserror::Error;

pub use bench::{
    batch_error, capture_environment, online_error_curve, run_benchmark, time_per_insert, BenchReport, Table,
    TimingPoint,
};
pub use config::{BenchSection, CascadeSection, Mode, Paths, RunConfig, ScanSection};
pub use dataset::{
    convert_usps, load_dataset, load_gray_images, load_image_directory, read_vector_table, save_vector_table,
    split_stream, write_vector_table, DataFormat, Dataset, DatasetMeta, FACE_SIDE,
};
pub use serialize::{
    deserialize_model, read_artifact, read_cascade, read_classifier, serialize_model, write_cascade, write_classifier,
    Artifact, FORMAT_VERSION,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{locus}: {message}")]
    Parse { locus: String, message: String },
    #[error("{locus}: expected dimension {expected}, found {found}")]
    DimensionMismatch { locus: String, expected: usize, found: usize },
    #[error("format version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: String, found: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl IoError {
    pub fn parse(locus: impl Into<String>, message: impl Into<String>) -> Self {
        IoError::Parse { locus: locus.into(), message: message.into() }
    }

    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::File { path: path.into(), source }
    }
}
