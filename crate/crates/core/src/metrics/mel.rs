use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::audio::Signal;
use crate::Real;

/// Log-mel spectrogram settings. Slaney-style triangular filters with area
/// normalisation, periodic Hann window, no centre padding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub n_mels: usize,
    pub fft_size: usize,
    pub hop: usize,
    pub floor: f64,
    pub fmin: f64,
    /// Upper filter edge; Nyquist when absent.
    pub fmax: Option<f64>,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 80,
            fft_size: 1024,
            hop: 256,
            floor: 1e-5,
            fmin: 0.0,
            fmax: None,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        let bad = |m: String| Err(MetricError::InvalidConfig(m));
        if self.n_mels == 0 {
            return bad("n_mels must be at least 1".into());
        }
        if self.hop == 0 || self.fft_size < self.hop {
            return bad(format!("need fft_size {} >= hop {} > 0", self.fft_size, self.hop));
        }
        if !(self.floor > 0.0) {
            return bad(format!("floor {} must be positive", self.floor));
        }
        if !(self.fmin >= 0.0) || self.fmax.is_some_and(|f| !(f > self.fmin)) {
            return bad(format!("bad band {}..{:?}", self.fmin, self.fmax));
        }
        Ok(())
    }
}

pub(crate) fn hz_to_mel(hz: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if hz >= MIN_LOG_HZ {
        min_log_mel + (hz / MIN_LOG_HZ).ln() / logstep
    } else {
        hz / F_SP
    }
}

pub(crate) fn mel_to_hz(mel: f64) -> f64 {
    const F_SP: f64 = 200.0 / 3.0;
    const MIN_LOG_HZ: f64 = 1000.0;
    let min_log_mel = MIN_LOG_HZ / F_SP;
    let logstep = 6.4f64.ln() / 27.0;
    if mel >= min_log_mel {
        MIN_LOG_HZ * (logstep * (mel - min_log_mel)).exp()
    } else {
        F_SP * mel
    }
}

/// Reusable log-mel front end for one sample rate.
pub struct MelAnalyzer<T: Real> {
    cfg: MelConfig,
    sample_rate: u32,
    fft: Arc<dyn Fft<T>>,
    window: Vec<T>,
    // (first bin, weights) per mel band
    filters: Vec<(usize, Vec<T>)>,
}

impl<T: Real> MelAnalyzer<T> {
    pub fn new(cfg: &MelConfig, sample_rate: u32) -> Result<Self, MetricError> {
        cfg.validate()?;
        let n = cfg.fft_size;
        let sr = f64::from(sample_rate);
        let fmax = cfg.fmax.unwrap_or(sr / 2.0);
        let window = (0..n)
            .map(|i| {
                T::lit(0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            })
            .collect();

        let (mlo, mhi) = (hz_to_mel(cfg.fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (cfg.n_mels + 1) as f64))
            .collect();
        let bins = n / 2 + 1;
        let filters = edges
            .windows(3)
            .map(|e| {
                let norm = 2.0 / (e[2] - e[0]);
                let weights: Vec<f64> = (0..bins)
                    .map(|k| {
                        let f = k as f64 * sr / n as f64;
                        let up = (f - e[0]) / (e[1] - e[0]);
                        let down = (e[2] - f) / (e[2] - e[1]);
                        up.min(down).max(0.0) * norm
                    })
                    .collect();
                let first = weights.iter().position(|&w| w > 0.0).unwrap_or(0);
                let last = weights.iter().rposition(|&w| w > 0.0).map_or(first, |l| l + 1);
                (first, weights[first..last].iter().map(|&w| T::lit(w)).collect())
            })
            .collect();

        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(Self {
            cfg: cfg.clone(),
            sample_rate,
            fft,
            window,
            filters,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame_count(&self, len: usize) -> usize {
        if len <= self.cfg.fft_size {
            1
        } else {
            1 + (len - self.cfg.fft_size) / self.cfg.hop
        }
    }

    /// `log10(max(mel power, floor))`, frame-major, `n_mels` values per frame.
    pub fn log_mel(&self, x: &[T]) -> Vec<T> {
        let n = self.cfg.fft_size;
        let floor = T::lit(self.cfg.floor);
        let frames = self.frame_count(x.len());
        let mut out = Vec::with_capacity(frames * self.cfg.n_mels);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
        let mut power = vec![T::zero(); n / 2 + 1];
        for f in 0..frames {
            let start = f * self.cfg.hop;
            for (i, b) in buf.iter_mut().enumerate() {
                let v = x.get(start + i).copied().unwrap_or_else(T::zero);
                *b = Complex::new(v * self.window[i], T::zero());
            }
            self.fft.process(&mut buf);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            for (first, weights) in &self.filters {
                let e: T = weights
                    .iter()
                    .zip(&power[*first..])
                    .map(|(&w, &p)| w * p)
                    .sum();
                out.push(e.max(floor).log10());
            }
        }
        out
    }
}

/// Mean absolute difference of log-mel spectrograms over the common length.
pub fn mel_distance<T: Real>(
    reference: &Signal<T>,
    test: &Signal<T>,
    cfg: &MelConfig,
) -> Result<f64, MetricError> {
    let analyzer = MelAnalyzer::new(cfg, reference.sample_rate())?;
    mel_distance_with(&analyzer, reference, test)
}

pub fn mel_distance_with<T: Real>(
    analyzer: &MelAnalyzer<T>,
    reference: &Signal<T>,
    test: &Signal<T>,
) -> Result<f64, MetricError> {
    if reference.sample_rate() != test.sample_rate() {
        return Err(MetricError::RateMismatch(reference.sample_rate(), test.sample_rate()));
    }
    if reference.sample_rate() != analyzer.sample_rate() {
        return Err(MetricError::RateMismatch(analyzer.sample_rate(), reference.sample_rate()));
    }
    if reference.is_empty() || test.is_empty() {
        return Err(MetricError::EmptySignal);
    }
    let n = reference.len().min(test.len());
    let a = analyzer.log_mel(&reference.samples()[..n]);
    let b = analyzer.log_mel(&test.samples()[..n]);
    let total: f64 = a.iter().zip(&b).map(|(&x, &y)| (x - y).abs().as_f64()).sum();
    Ok(total / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::{gen_sine, gen_white_noise};
    use proptest::prelude::*;

    #[test]
    fn mel_scale_round_trip_and_anchors() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        assert!((hz_to_mel(1000.0) - 15.0).abs() < 1e-12);
        assert!((hz_to_mel(6400.0) - 42.0).abs() < 1e-12);
        for hz in [10.0, 500.0, 999.0, 1000.0, 4321.0, 12000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9 * hz.max(1.0));
        }
    }

    #[test]
    fn config_validation() {
        assert!(MelConfig::default().validate().is_ok());
        let bad = MelConfig { hop: 2048, ..MelConfig::default() };
        assert!(bad.validate().is_err());
        let bad = MelConfig { floor: 0.0, ..MelConfig::default() };
        assert!(bad.validate().is_err());
        let bad = MelConfig { n_mels: 0, ..MelConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn identical_signals_are_zero() {
        let w: Signal<f64> = gen_white_noise(0.3, 16000, 5);
        assert_eq!(mel_distance(&w, &w, &MelConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn half_amplitude_tone_shifts_tone_bins_by_log_gain() {
        let cfg = MelConfig::default();
        let a: Signal<f64> = gen_sine(1000.0, 0.5, 16000, 1.0, 0.0).unwrap();
        let b = a.scaled(0.5);
        let d = mel_distance(&a, &b, &cfg).unwrap();
        // Every bin moves by |log10(0.25)| unless the floor clips it.
        let shift = 0.25f64.log10().abs();
        let analyzer = MelAnalyzer::<f64>::new(&cfg, 16000).unwrap();
        let la = analyzer.log_mel(a.samples());
        let unclipped = la.iter().filter(|&&v| v + 0.25f64.log10() > cfg.floor.log10()).count();
        let expect_lower = shift * unclipped as f64 / la.len() as f64;
        assert!(d >= expect_lower - 1e-12 && d <= shift + 1e-12, "{d} vs {expect_lower}");
    }

    #[test]
    fn errors() {
        let a = Signal::new(vec![0.1f64; 2000], 16000).unwrap();
        let b = Signal::new(vec![0.1f64; 2000], 8000).unwrap();
        let e = Signal::<f64>::new(vec![], 16000).unwrap();
        let cfg = MelConfig::default();
        assert!(matches!(mel_distance(&a, &b, &cfg), Err(MetricError::RateMismatch(..))));
        assert!(matches!(mel_distance(&a, &e, &cfg), Err(MetricError::EmptySignal)));
    }

    #[test]
    fn short_signals_use_one_padded_frame() {
        let a: Signal<f64> = gen_white_noise(0.01, 16000, 1);
        let an = MelAnalyzer::<f64>::new(&MelConfig::default(), 16000).unwrap();
        assert_eq!(an.frame_count(a.len()), 1);
        assert_eq!(an.log_mel(a.samples()).len(), 80);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn metric_axioms(s1 in 0u64..10_000, s2 in 0u64..10_000, s3 in 0u64..10_000) {
            let cfg = MelConfig::default();
            let a: Signal<f64> = gen_white_noise(0.1, 16000, s1);
            let b: Signal<f64> = gen_white_noise(0.1, 16000, s2).scaled(0.3);
            let c: Signal<f64> = gen_white_noise(0.1, 16000, s3).scaled(2.0);
            let ab = mel_distance(&a, &b, &cfg).unwrap();
            let ba = mel_distance(&b, &a, &cfg).unwrap();
            let bc = mel_distance(&b, &c, &cfg).unwrap();
            let ac = mel_distance(&a, &c, &cfg).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
