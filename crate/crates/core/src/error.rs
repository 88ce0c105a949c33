// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced by the sketch, its components and the oracle tooling.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("coordinate {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("projection matrix is singular or ill-conditioned (|det| = {det:e})")]
    SingularProjection { det: f64 },

    #[error("could not draw a well-conditioned projection after {attempts} attempts")]
    ProjectionRetriesExhausted { attempts: usize },

    #[error("incompatible sketches: {field} differs")]
    Incompatible { field: &'static str },

    #[error("sketch is empty")]
    EmptySketch,

    #[error("heap holds no bins to sample from")]
    EmptyHeap,

    #[error("estimated total n_hat = {n_hat} is not positive")]
    DegenerateNormalizer { n_hat: f64 },

    #[error("could not place a sample inside bin after {attempts} attempts")]
    SampleRejected { attempts: usize },

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("input truncated: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("malformed sketch file: {0}")]
    Malformed(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks that `x` has dimension `dim` and only finite coordinates.
pub(crate) fn check_point(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: x.len(),
        });
    }
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    Ok(())
}
