//! Waveform representation and the signal plumbing every other module
//! consumes: WAV I/O, resampling, level measurement and delay alignment.

mod align;
mod resample;
mod wav;

use std::path::PathBuf;

use thiserror::Error;

use crate::Real;

pub use align::{align, Alignment};
pub use resample::{resample, RESAMPLE_BETA, RESAMPLE_CUTOFF, RESAMPLE_TAPS};
pub use wav::{probe_wav, read_wav, write_wav, WavEncoding, WavInfo};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("sample rate must be positive")]
    InvalidSampleRate,
    #[error("non-finite sample at index {0}")]
    NonFiniteSample(usize),
    #[error("no such file: {0}")]
    MissingFile(PathBuf),
    #[error("malformed WAV container: {0}")]
    MalformedContainer(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("expected mono input, found {0} channels")]
    MultichannelInput(u16),
    #[error("signal is empty")]
    EmptySignal,
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("lag {0} leaves no common support")]
    EmptyOverlap(isize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable mono sample buffer tagged with its sample rate.
///
/// Every sample is finite and the rate is positive; both are checked on
/// construction so downstream code never has to.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Real> Signal<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFiniteSample(i));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self, AudioError> {
        Self::new(vec![T::zero(); len], sample_rate)
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Largest absolute sample, zero for an empty signal.
    pub fn peak(&self) -> T {
        self.samples
            .iter()
            .fold(T::zero(), |acc, s| acc.max(s.abs()))
    }

    /// `alpha * self`. Panics if the product overflows to infinity.
    pub fn scaled(&self, alpha: T) -> Self {
        let samples: Vec<T> = self.samples.iter().map(|&s| s * alpha).collect();
        assert!(
            samples.iter().all(|s| s.is_finite()),
            "scaling produced non-finite samples"
        );
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    /// Elementwise sum, truncated to the shorter operand.
    pub fn add(&self, other: &Self) -> Result<Self, AudioError> {
        self.check_rate(other)?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| a + b)
            .collect();
        Self::new(samples, self.sample_rate)
    }

    /// First `len` samples (or all of them if shorter).
    pub fn truncated(&self, len: usize) -> Self {
        Self {
            samples: self.samples[..len.min(self.samples.len())].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        let end = end.min(self.samples.len());
        let start = start.min(end);
        Self {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn check_rate(&self, other: &Self) -> Result<(), AudioError> {
        if self.sample_rate != other.sample_rate {
            return Err(AudioError::RateMismatch(self.sample_rate, other.sample_rate));
        }
        Ok(())
    }

    /// Change sample precision. Values that do not fit the target type
    /// saturate to its largest finite magnitude.
    pub fn convert<U: Real>(&self) -> Signal<U> {
        let samples = self
            .samples
            .iter()
            .map(|&s| {
                let v = U::lit(s.as_f64());
                if v.is_finite() {
                    v
                } else {
                    U::max_value() * v.signum()
                }
            })
            .collect();
        Signal {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

/// Root-mean-square level, `sqrt(mean(x^2))`.
pub fn rms<T: Real>(w: &Signal<T>) -> Result<T, AudioError> {
    if w.is_empty() {
        return Err(AudioError::EmptySignal);
    }
    Ok(mean_square(w.samples()).sqrt())
}

pub(crate) fn mean_square<T: Real>(x: &[T]) -> T {
    if x.is_empty() {
        return T::zero();
    }
    energy(x) / T::from_usize_lossy(x.len())
}

pub(crate) fn energy<T: Real>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum()
}
