//! Codec-agnostic analysis of audio codecs treated as black-box waveform
//! transforms: noise robustness grids, empirical linearity probes and
//! stepped-sine frequency response, plus a residual-vector-quantization
//! reference codec so every path can be exercised without neural models.
//!
//! Signal-processing routines are generic over [`Real`] (`f32` or `f64`);
//! the harness and codec interfaces work in `f64`, exposed through the
//! aliases below.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod audio;
pub mod codec;
pub mod fft;
pub mod harness;
pub mod metrics;
pub mod perturb;
pub mod rvq;
pub mod scalar;

pub use scalar::Real;

/// Mono waveform with 64-bit samples; the currency of the codec interface.
pub type Waveform = audio::Signal<f64>;
/// Single-precision waveform for memory-bound analysis.
pub type Waveform32 = audio::Signal<f32>;
/// Room impulse response in 64-bit precision.
pub type RoomImpulseResponse = perturb::Rir<f64>;
/// Residual vector quantizer model in 64-bit precision.
pub type RvqModel = rvq::Model<f64>;
/// Mel-distance configuration for 64-bit signals.
pub type MelConfig = metrics::mel::MelConfig;
