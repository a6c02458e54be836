//! Deterministic signal generation and degradation: white noise, sine
//! probes, SNR-controlled additive mixing and DRR-controlled reverberation.

mod condition;
mod gen;
mod mix;
mod reverb;
pub mod rng;

use thiserror::Error;

pub use condition::{degrade, Condition, NoiseAsset, NoiseFamily};
pub use gen::{gen_sine, gen_sine_with_phase, gen_white_noise, WHITE_NOISE_RMS};
pub use mix::{fit_length, mix_at_snr, mix_components, MixComponents};
pub use reverb::{
    apply_reverb_at_drr, measure_drr, reverberate, Rir, DEFAULT_DIRECT_WINDOW,
};

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),
    #[error("input is silent; level ratio undefined")]
    SilentInput,
    #[error("frequency {freq} Hz is not inside (0, {nyquist}) Hz")]
    FrequencyAboveNyquist { freq: f64, nyquist: f64 },
    #[error("impulse response has no reverberant tail after the direct window")]
    EmptyTail,
    #[error("impulse response has no nonzero tap")]
    InvalidRir,
    #[error("invalid condition: {0}")]
    InvalidCondition(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub(crate) fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}
