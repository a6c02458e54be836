//! Residual vector quantisation reference codec.
//!
//! The "encoder" is framing: each non-overlapping frame of `frame_size`
//! samples, multiplied by the analysis window, is one latent vector. `K`
//! codebooks of `C` entries quantise it greedily stage by stage and the
//! "decoder" sums the selected entries, undoes the window and concatenates.
//! Codebooks come from per-stage k-means on the residuals of the previous
//! stages.

mod io;
mod kmeans;
mod model;

use std::path::PathBuf;

use thiserror::Error;

pub use kmeans::{kmeans, KMeansResult, KMEANS_MAX_ITER, KMEANS_TOLERANCE};
pub use model::{code_bitrate, train, CodeSequence, Codebook, Model, TrainConfig};

#[derive(Debug, Error)]
pub enum RvqError {
    #[error("corpus has {frames} frames; training needs at least {needed}")]
    InsufficientData { frames: usize, needed: usize },
    #[error("all training frames are identical; cannot fit {0} distinct entries")]
    DegenerateCorpus(usize),
    #[error("sample rate mismatch: model {0} Hz, input {1} Hz")]
    RateMismatch(u32, u32),
    #[error("stage count {k} outside 1..={max}")]
    StageOutOfRange { k: usize, max: usize },
    #[error("codes belong to model {codes}, not {model}")]
    ModelMismatch { codes: String, model: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("bad model file {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
