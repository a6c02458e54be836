//! Experiment orchestration: manifests, the condition x codec x mode grid
//! with its unencoded topline, linearity and frequency-response runs, and
//! report files.

mod config;
mod grid;
mod manifest;
mod probes;
mod report;
mod scores;
mod session;
pub mod smoke;

use thiserror::Error;

use crate::audio::AudioError;
use crate::codec::CodecError;
use crate::metrics::MetricError;
use crate::perturb::PerturbError;
use crate::rvq::RvqError;

pub use config::{
    CodecSpec, ConditionSpec, ExperimentConfig, ExternalScores, FreqRespSettings, LinearitySettings,
    ResolvedCodec, RvqSettings, DEFAULT_ALIGN_MAX_LAG, DEFAULT_METRIC_RATE,
};
pub use grid::{run_grid, GridRun, MetricReport, RowStatus, CORPUS_ID, MEL_METRIC, ORACLE_CODEC, ORACLE_MODE};
pub use manifest::{load_manifest, Dataset, Utterance};
pub use probes::{run_frequency_response, run_linearity, FreqRespRun, LinearityRun, RunFailure};
pub use report::{aggregate_grid, emit_reports, grid_csv_rows, Aggregate, Reports, GRID_HEADER};
pub use scores::normalize_text;
pub use session::{prepare_rvq, Session};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("malformed manifest {path} line {line}: {msg}")]
    MalformedManifest { path: String, line: usize, msg: String },
    #[error("manifest row {id}: cannot read {path}: {msg}")]
    MissingAudio { id: String, path: String, msg: String },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Rvq(#[from] RvqError),
    #[error("writing {path}: {msg}")]
    IoFailure { path: String, msg: String },
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        HarnessError::IoFailure {
            path: path.display().to_string(),
            msg: err.to_string(),
        }
    }
}
