use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: unsupported NIfTI variant ({detail})")]
    UnsupportedVariant { path: PathBuf, detail: String },

    #[error("{path}: malformed NIfTI header, field `{field}`: {detail}")]
    MalformedHeader {
        path: PathBuf,
        field: &'static str,
        detail: String,
    },

    #[error("{path}: unsupported datatype code {code}")]
    UnsupportedDatatype { path: PathBuf, code: i16 },

    #[error("{path}: expected 3 spatial dimensions, header declares {ndim}")]
    DimensionCount { path: PathBuf, ndim: i16 },

    #[error("{path}: truncated payload, expected {expected} bytes after vox_offset, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("label value {value} at voxel {index} cannot be stored as uint8")]
    LabelOutOfRange { value: f64, index: usize },

    #[error("label value {value} at voxel {index} is not in the label scheme")]
    UnknownLabel { value: f64, index: usize },

    #[error("invalid volume: {0}")]
    InvalidVolume(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("case {case_id}: missing {what}")]
    MissingModality { case_id: String, what: String },

    #[error("case has no segmentation")]
    MissingSegmentation,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid phantom spec: {0}")]
    Phantom(String),

    #[error("slice {slice} out of range (nz = {nz})")]
    SliceOutOfRange { slice: usize, nz: usize },

    #[error("png encoding: {0}")]
    Png(#[from] png::EncodingError),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
