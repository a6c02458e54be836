//! Linearity probes and stepped-sine frequency response for black-box
//! codecs.

mod freqresp;
mod goertzel;
mod linearity;

use thiserror::Error;

use crate::audio::AudioError;
use crate::codec::CodecError;
use crate::metrics::MetricError;
use crate::perturb::PerturbError;

pub use freqresp::{
    default_probe_freqs, frequency_response, FrequencyPoint, FrequencyResponseCurve, ProbeSettings,
    DEFAULT_PROBE_AMPLITUDES, DEFAULT_PROBE_COUNT, SILENT_GAIN_DB,
};
pub use goertzel::goertzel_magnitude;
pub use linearity::{
    additivity_probe, homogeneity_probe, percentile, AdditivityResult, GainLevel, HomogeneityPoint,
    LinearityReport, Summary, ALIGN_MAX_LAG, DEFAULT_GAINS_DB,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error("frequency {freq} Hz is not inside (0, {nyquist}) Hz")]
    FrequencyAboveNyquist { freq: f64, nyquist: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl AnalysisError {
    /// Stable class name for reports.
    pub fn class(&self) -> &'static str {
        match self {
            AnalysisError::Codec(e) => e.class(),
            AnalysisError::Audio(_) => "AudioError",
            AnalysisError::Metric(_) => "MetricError",
            AnalysisError::Perturb(_) => "PerturbError",
            AnalysisError::FrequencyAboveNyquist { .. } => "FrequencyAboveNyquist",
            AnalysisError::InvalidArgument(_) => "InvalidArgument",
        }
    }
}
