//! Codecs as black-box waveform transforms `f(X)`.
//!
//! A [`Codec`] maps a waveform at its native rate to a reconstructed one.
//! [`CodecUnderTest`] wraps any implementation with the contract checks the
//! analysis code relies on: rate and mode validation, finite output and a
//! bounded length change.

mod builtin;
mod external;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Waveform;

pub use builtin::{builtin_catalog, builtin_codec, HardClip, Identity, MovingAverage, MuLaw, PureGain, RvqCodec, DEFAULT_NATIVE_RATE};
pub use external::{invoke_external, ExternalCodec, Permit, ProcessLimiter, MODE_ENV, TMPDIR_ENV};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("codec expects {expected} Hz input, got {got} Hz")]
    RateMismatch { expected: u32, got: u32 },
    #[error("unknown mode {0:?}")]
    UnknownMode(String),
    #[error("codec process exited with {status}: {stderr}")]
    CodecCrashed { status: String, stderr: String },
    #[error("codec timed out after {0} s")]
    Timeout(f64),
    #[error("malformed codec output: {0}")]
    MalformedOutput(String),
    #[error("codec produced non-finite samples")]
    NonFiniteOutput,
    #[error("could not start codec: {0}")]
    SpawnFailure(String),
    #[error("unknown codec {0:?}")]
    UnknownCodec(String),
    #[error("codec configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CodecError {
    /// Stable error class name used in reports.
    pub fn class(&self) -> &'static str {
        match self {
            CodecError::RateMismatch { .. } => "RateMismatch",
            CodecError::UnknownMode(_) => "UnknownMode",
            CodecError::CodecCrashed { .. } => "CodecCrashed",
            CodecError::Timeout(_) => "Timeout",
            CodecError::MalformedOutput(_) => "MalformedOutput",
            CodecError::NonFiniteOutput => "NonFiniteOutput",
            CodecError::SpawnFailure(_) => "SpawnFailure",
            CodecError::UnknownCodec(_) => "UnknownCodec",
            CodecError::Config(_) => "Config",
            CodecError::Io(_) => "Io",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodecKind {
    Builtin,
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitrateMode {
    pub mode_id: String,
    pub bits_per_second: f64,
}

fn default_timeout() -> f64 {
    600.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodecDescriptor {
    pub name: String,
    pub kind: CodecKind,
    pub native_rate: u32,
    pub bitrate_modes: Vec<BitrateMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command_template: Option<String>,
    /// Seconds allowed per external invocation.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    /// Output may differ from the input length by at most this many
    /// samples; unchecked when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_size: Option<usize>,
}

impl CodecDescriptor {
    pub fn mode(&self, mode_id: &str) -> Option<&BitrateMode> {
        self.bitrate_modes.iter().find(|m| m.mode_id == mode_id)
    }

    pub fn mode_ids(&self) -> impl Iterator<Item = &str> {
        self.bitrate_modes.iter().map(|m| m.mode_id.as_str())
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let bad = |m: &str| Err(CodecError::Config(format!("{}: {m}", self.name)));
        if self.name.is_empty() {
            return bad("empty name");
        }
        if self.native_rate == 0 {
            return bad("native_rate must be positive");
        }
        if self.bitrate_modes.is_empty() {
            return bad("at least one bitrate mode required");
        }
        if self.kind == CodecKind::External && self.command_template.is_none() {
            return bad("external codec needs command_template");
        }
        if !(self.timeout > 0.0) {
            return bad("timeout must be positive");
        }
        Ok(())
    }
}

/// A waveform-to-waveform codec. Implementations must be deterministic.
pub trait Codec: Send + Sync {
    fn descriptor(&self) -> &CodecDescriptor;

    /// Raw round trip; callers go through [`CodecUnderTest::process`].
    fn transform(&self, input: &Waveform, mode: &str) -> Result<Waveform, CodecError>;
}

/// Shareable handle to a codec with contract enforcement.
#[derive(Clone)]
pub struct CodecUnderTest {
    inner: Arc<dyn Codec>,
}

impl fmt::Debug for CodecUnderTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CodecUnderTest")
            .field("descriptor", self.descriptor())
            .finish()
    }
}

impl CodecUnderTest {
    pub fn new(codec: impl Codec + 'static) -> Self {
        Self {
            inner: Arc::new(codec),
        }
    }

    pub fn from_arc(codec: Arc<dyn Codec>) -> Self {
        Self { inner: codec }
    }

    pub fn descriptor(&self) -> &CodecDescriptor {
        self.inner.descriptor()
    }

    pub fn name(&self) -> &str {
        &self.descriptor().name
    }

    pub fn native_rate(&self) -> u32 {
        self.descriptor().native_rate
    }

    /// Runs the codec on `w`, which must already be at the native rate.
    pub fn process(&self, w: &Waveform, mode: &str) -> Result<Waveform, CodecError> {
        let desc = self.descriptor();
        if w.sample_rate() != desc.native_rate {
            return Err(CodecError::RateMismatch {
                expected: desc.native_rate,
                got: w.sample_rate(),
            });
        }
        if desc.mode(mode).is_none() {
            return Err(CodecError::UnknownMode(mode.to_string()));
        }
        let out = self.inner.transform(w, mode)?;
        if out.sample_rate() != desc.native_rate {
            return Err(CodecError::MalformedOutput(format!(
                "output at {} Hz, expected {} Hz",
                out.sample_rate(),
                desc.native_rate
            )));
        }
        if let Some(frame) = desc.frame_size {
            if out.len().abs_diff(w.len()) > frame {
                return Err(CodecError::MalformedOutput(format!(
                    "output length {} vs input {} exceeds one frame ({frame})",
                    out.len(),
                    w.len()
                )));
            }
        }
        Ok(out)
    }

    /// True when two runs on the same input agree bit for bit.
    pub fn is_repeatable(&self, w: &Waveform, mode: &str) -> Result<bool, CodecError> {
        let a = self.process(w, mode)?;
        let b = self.process(w, mode)?;
        Ok(a == b)
    }
}

/// Free-function form of [`CodecUnderTest::process`].
pub fn process(codec: &CodecUnderTest, w: &Waveform, mode: &str) -> Result<Waveform, CodecError> {
    codec.process(w, mode)
}
