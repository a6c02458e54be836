//! Additivity `f(X+Y) = f(X)+f(Y)` and homogeneity `f(aX) = a f(X)`
//! residuals, measured as mel distances between the two sides.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::audio::align;
use crate::codec::CodecUnderTest;
use crate::metrics::{mel_distance_with, MelAnalyzer, MelConfig};
use crate::Waveform;

/// Lag search range when aligning the two sides of a probe, in seconds.
pub const ALIGN_MAX_LAG: f64 = 0.1;

pub const DEFAULT_GAINS_DB: [f64; 7] = [-40.0, -20.0, -12.0, -6.0, 0.0, 6.0, 12.0];

// Headroom target when X+Y would exceed full scale.
const HEADROOM_PEAK: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainLevel {
    pub gain_db: f64,
    pub alpha: f64,
}

impl GainLevel {
    pub fn from_db(gain_db: f64) -> Result<Self, AnalysisError> {
        if !gain_db.is_finite() {
            return Err(AnalysisError::InvalidArgument(format!("gain {gain_db} dB")));
        }
        // Exact unity at 0 dB so both sides of the probe are the same computation.
        let alpha = if gain_db == 0.0 { 1.0 } else { 10f64.powf(gain_db / 20.0) };
        Ok(Self { gain_db, alpha })
    }

    pub fn defaults() -> Vec<Self> {
        DEFAULT_GAINS_DB.iter().map(|&g| Self::from_db(g).expect("finite")).collect()
    }
}

/// Linear-interpolated percentile (`q` in `[0, 100]`) of unsorted data.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub p05: f64,
    pub p95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { count: 0, mean: 0.0, p05: 0.0, p95: 0.0 };
        }
        Self {
            count: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            p05: percentile(values, 5.0).expect("non-empty"),
            p95: percentile(values, 95.0).expect("non-empty"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditivityResult {
    /// One distance per pair, in input order.
    pub distances: Vec<f64>,
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityPoint {
    pub gain: GainLevel,
    pub distances: Vec<f64>,
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearityReport {
    pub codec: String,
    pub mode: String,
    pub additivity: Option<AdditivityResult>,
    pub homogeneity: Vec<HomogeneityPoint>,
    pub pair_count: usize,
    pub utterance_count: usize,
}

fn aligned_distance(
    analyzer: &MelAnalyzer<f64>,
    a: &Waveform,
    b: &Waveform,
) -> Result<f64, AnalysisError> {
    let al = align(a, b, ALIGN_MAX_LAG)?;
    Ok(mel_distance_with(analyzer, &al.reference, &al.test)?)
}

fn check_rate(codec: &CodecUnderTest, w: &Waveform) -> Result<(), AnalysisError> {
    if w.sample_rate() != codec.native_rate() {
        return Err(crate::audio::AudioError::RateMismatch(codec.native_rate(), w.sample_rate()).into());
    }
    Ok(())
}

/// One additivity residual per pair. Pairs are truncated to their common
/// length; if `max|X+Y| > 1` both are scaled by `0.99 / max|X+Y|`.
pub fn additivity_probe(
    codec: &CodecUnderTest,
    mode: &str,
    pairs: &[(Waveform, Waveform)],
    cfg: &MelConfig,
) -> Result<AdditivityResult, AnalysisError> {
    let analyzer = MelAnalyzer::new(cfg, codec.native_rate())?;
    let distances = pairs
        .par_iter()
        .map(|(x, y)| {
            check_rate(codec, x)?;
            check_rate(codec, y)?;
            let n = x.len().min(y.len());
            let (mut x, mut y) = (x.truncated(n), y.truncated(n));
            let peak = x.add(&y)?.peak();
            if peak > 1.0 {
                let gamma = HEADROOM_PEAK / peak;
                x = x.scaled(gamma);
                y = y.scaled(gamma);
            }
            let a = codec.process(&x.add(&y)?, mode)?;
            let b = codec.process(&x, mode)?.add(&codec.process(&y, mode)?)?;
            aligned_distance(&analyzer, &a, &b)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let summary = Summary::of(&distances);
    Ok(AdditivityResult { distances, summary })
}

/// Homogeneity residual per gain, one distance per utterance.
pub fn homogeneity_probe(
    codec: &CodecUnderTest,
    mode: &str,
    utterances: &[Waveform],
    gains: &[GainLevel],
    cfg: &MelConfig,
) -> Result<Vec<HomogeneityPoint>, AnalysisError> {
    let analyzer = MelAnalyzer::new(cfg, codec.native_rate())?;
    let per_utt = utterances
        .par_iter()
        .map(|x| {
            check_rate(codec, x)?;
            let base = codec.process(x, mode)?;
            gains
                .iter()
                .map(|g| {
                    let lhs = codec.process(&x.scaled(g.alpha), mode)?;
                    let rhs = base.scaled(g.alpha);
                    aligned_distance(&analyzer, &lhs, &rhs)
                })
                .collect::<Result<Vec<_>, AnalysisError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(gains
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            let distances: Vec<f64> = per_utt.iter().map(|d| d[gi]).collect();
            HomogeneityPoint {
                gain: *g,
                summary: Summary::of(&distances),
                distances,
            }
        })
        .collect())
}
