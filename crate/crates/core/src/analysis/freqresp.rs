//! Stepped-sine frequency response: one steady tone per probe frequency,
//! fundamental gain measured with a single-bin DFT.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{goertzel_magnitude, AnalysisError, ALIGN_MAX_LAG};
use crate::audio::{align, Signal};
use crate::codec::CodecUnderTest;
use crate::perturb::gen_sine_with_phase;
use crate::Waveform;

/// Reported gain when the output has no energy at the probe frequency.
pub const SILENT_GAIN_DB: f64 = -180.0;
pub const DEFAULT_PROBE_COUNT: usize = 64;
pub const DEFAULT_PROBE_AMPLITUDES: [f64; 3] = [1.0, 0.5, 0.1];

const SILENT_MAGNITUDE: f64 = 1e-9;
const LOWEST_PROBE_HZ: f64 = 20.0;
const HIGHEST_PROBE_FRACTION: f64 = 0.45;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSettings {
    pub duration: f64,
    pub amplitude: f64,
    pub fade: f64,
    /// Seconds dropped from each end before measuring.
    pub discard: f64,
    /// Starting phase of the tone, radians.
    pub phase: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            duration: 1.0,
            amplitude: 1.0,
            fade: 0.01,
            discard: 0.1,
            phase: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub freq: f64,
    pub gain_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResponseCurve {
    pub codec: String,
    pub mode: String,
    pub probe_amplitude: f64,
    pub probe_duration: f64,
    pub points: Vec<FrequencyPoint>,
}

/// `count` log-spaced frequencies from 20 Hz to `0.45 * rate`.
pub fn default_probe_freqs(rate: u32, count: usize) -> Vec<f64> {
    let lo = LOWEST_PROBE_HZ.ln();
    let hi = (HIGHEST_PROBE_FRACTION * f64::from(rate)).ln();
    match count {
        0 => Vec::new(),
        1 => vec![LOWEST_PROBE_HZ],
        _ => (0..count)
            .map(|i| (lo + (hi - lo) * i as f64 / (count - 1) as f64).exp())
            .collect(),
    }
}

// Hann-weighted central region; the taper keeps the image component of a
// non-integer number of periods from leaking into the bin.
fn tapered_center(w: &Waveform, discard: usize) -> Option<Waveform> {
    if w.len() <= 2 * discard + 1 {
        return None;
    }
    let core = &w.samples()[discard..w.len() - discard];
    let n = core.len();
    let tapered = core
        .iter()
        .enumerate()
        .map(|(i, &x)| x * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect();
    Signal::new(tapered, w.sample_rate()).ok()
}

fn probe_gain(
    codec: &CodecUnderTest,
    mode: &str,
    freq: f64,
    probe: &ProbeSettings,
) -> Result<f64, AnalysisError> {
    let rate = codec.native_rate();
    let input: Waveform = gen_sine_with_phase(freq, probe.duration, rate, probe.amplitude, probe.fade, probe.phase)?;
    let output = codec.process(&input, mode)?;
    let al = align(&input, &output, ALIGN_MAX_LAG)?;
    let discard = (probe.discard * f64::from(rate)).round() as usize;
    let short = || AnalysisError::InvalidArgument(format!("probe too short for {} s discard", probe.discard));
    let x = tapered_center(&al.reference, discard).ok_or_else(short)?;
    let y = tapered_center(&al.test, discard).ok_or_else(short)?;
    let out_mag = goertzel_magnitude(&y, freq)?;
    if out_mag < SILENT_MAGNITUDE {
        return Ok(SILENT_GAIN_DB);
    }
    let in_mag = goertzel_magnitude(&x, freq)?;
    Ok(20.0 * (out_mag / in_mag).log10())
}

pub fn frequency_response(
    codec: &CodecUnderTest,
    mode: &str,
    freqs: &[f64],
    probe: &ProbeSettings,
) -> Result<FrequencyResponseCurve, AnalysisError> {
    let nyquist = f64::from(codec.native_rate()) / 2.0;
    for w in freqs.windows(2) {
        if !(w[0] < w[1]) {
            return Err(AnalysisError::InvalidArgument("probe frequencies must increase".into()));
        }
    }
    if let Some(&f) = freqs.iter().find(|&&f| !(f > 0.0 && f < nyquist)) {
        return Err(AnalysisError::FrequencyAboveNyquist { freq: f, nyquist });
    }
    if !(probe.amplitude > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("probe amplitude {}", probe.amplitude)));
    }
    let points = freqs
        .par_iter()
        .map(|&freq| {
            probe_gain(codec, mode, freq, probe).map(|gain_db| FrequencyPoint { freq, gain_db })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FrequencyResponseCurve {
        codec: codec.name().to_string(),
        mode: mode.to_string(),
        probe_amplitude: probe.amplitude,
        probe_duration: probe.duration,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{builtin_codec, MovingAverage};

    fn curve(name: &str, amplitude: f64) -> FrequencyResponseCurve {
        let codec = builtin_codec(name, 16000, None).unwrap();
        let probe = ProbeSettings { amplitude, ..Default::default() };
        frequency_response(&codec, "default", &default_probe_freqs(16000, 16), &probe).unwrap()
    }

    #[test]
    fn probe_grid() {
        let f = default_probe_freqs(16000, 64);
        assert_eq!(f.len(), 64);
        assert!((f[0] - 20.0).abs() < 1e-9);
        assert!((f[63] - 7200.0).abs() < 1e-6);
        assert!(f.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn identity_flat_and_gain_constant() {
        assert!(curve("identity", 1.0).points.iter().all(|p| p.gain_db.abs() < 0.01));
        let target = 20.0 * 0.5f64.log10();
        assert!(curve("gain-0.5", 1.0).points.iter().all(|p| (p.gain_db - target).abs() < 0.05));
    }

    #[test]
    fn moving_average_matches_transfer_function() {
        let reference = MovingAverage::new(16000);
        for p in curve("avg2", 0.5).points {
            let expected = 20.0 * reference.magnitude(p.freq).log10();
            assert!((p.gain_db - expected).abs() < 0.1, "{} Hz: {} vs {}", p.freq, p.gain_db, expected);
        }
    }

    #[test]
    fn phase_invariance() {
        let freqs = [37.0, 137.0, 2500.0, 6999.0];
        for name in ["identity", "gain-0.5", "avg2"] {
            let codec = builtin_codec(name, 16000, None).unwrap();
            let base = frequency_response(&codec, "default", &freqs, &ProbeSettings::default()).unwrap();
            for phase in [0.7, 2.0, 4.4] {
                let probe = ProbeSettings { phase, ..Default::default() };
                let shifted = frequency_response(&codec, "default", &freqs, &probe).unwrap();
                for (a, b) in base.points.iter().zip(&shifted.points) {
                    assert!((a.gain_db - b.gain_db).abs() < 0.01, "{name} {} Hz", a.freq);
                }
            }
        }
    }

    #[test]
    fn hardclip_attenuates_fundamental() {
        // Unit sine clipped at 0.5 keeps (2/pi)(asin(0.5) + 0.5 sqrt(0.75)) of its fundamental.
        let theta = 0.5f64.asin();
        let expected = 20.0 * ((2.0 / std::f64::consts::PI) * (theta + theta.sin() * theta.cos())).log10();
        for p in curve("hardclip-0.5", 1.0).points {
            assert!(p.gain_db < -0.9);
            assert!((p.gain_db - expected).abs() < 0.1, "{} Hz: {}", p.freq, p.gain_db);
        }
    }

    #[test]
    fn mulaw_mid_band_flat() {
        for amplitude in DEFAULT_PROBE_AMPLITUDES {
            for p in curve("mulaw-8", amplitude).points.iter().filter(|p| p.freq > 200.0 && p.freq < 5000.0) {
                assert!(p.gain_db.abs() < 0.5, "{amplitude} at {} Hz: {} dB", p.freq, p.gain_db);
            }
        }
    }

    #[test]
    fn rejects_bad_frequencies() {
        let codec = builtin_codec("identity", 16000, None).unwrap();
        let probe = ProbeSettings::default();
        assert!(matches!(
            frequency_response(&codec, "default", &[100.0, 9000.0], &probe),
            Err(AnalysisError::FrequencyAboveNyquist { .. })
        ));
        assert!(frequency_response(&codec, "default", &[200.0, 100.0], &probe).is_err());
    }
}
