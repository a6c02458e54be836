//! Objective metrics: log-mel distance computed natively, and WER, EER and
//! accuracy computed from externally produced transcripts, scores and
//! labels.

mod accuracy;
mod eer;
pub mod files;
pub mod mel;
mod wer;

use std::path::PathBuf;

use thiserror::Error;

pub use accuracy::accuracy;
pub use eer::{eer, ScoreRecord, TrialLabel};
pub use mel::{mel_distance, mel_distance_with, MelAnalyzer, MelConfig};
pub use wer::{edit_counts, wer, EditCounts, TranscriptPair};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("signal is empty")]
    EmptySignal,
    #[error("empty reference transcript for {0}")]
    EmptyReference(String),
    #[error("score list needs both genuine and impostor trials")]
    MissingClass,
    #[error("non-finite score for trial {0}")]
    NonFiniteScore(String),
    #[error("label id sets differ: {0}")]
    IdMismatch(String),
    #[error("invalid mel configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
