use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("image is MONO1; convert to MONO2 before masking or histogramming")]
    PhotometricNotNormalized,

    #[error("{}", empty_foreground_message(*.image))]
    EmptyForeground { image: Option<usize> },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("bit depth mismatch: {0}")]
    DepthMismatch(String),

    #[error("profile depth {profile} cannot be reconciled with image depth {image} under the {policy} policy")]
    ProfileDepthMismatch {
        profile: u8,
        image: u8,
        policy: &'static str,
    },

    #[error("intensity map is not monotone at index {index}")]
    NonMonotoneMap { index: usize },

    #[error("malformed profile: {0}")]
    MalformedProfile(String),

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    #[error("unsupported transfer syntax {0}")]
    UnsupportedTransferSyntax(String),

    #[error("unsupported photometric interpretation {0:?}")]
    UnsupportedPhotometric(String),

    #[error("unsupported pixel representation: {0}")]
    UnsupportedPixelRepresentation(String),

    #[error("missing DICOM tag {0}")]
    MissingTag(&'static str),

    #[error("invalid vendor style: {0}")]
    InvalidStyle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn empty_foreground_message(image: Option<usize>) -> String {
    match image {
        Some(i) => format!("image #{i} has no foreground pixels"),
        None => "no foreground pixels".to_string(),
    }
}

impl Error {
    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::MalformedFile {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the content of an input (as opposed to I/O
    /// or programming errors).
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
