use super::{db_to_amplitude, PerturbError};
use crate::audio::{energy, mean_square, Signal};
use crate::fft::convolve;
use crate::Real;

/// Default half-width of the direct-path window around the RIR peak.
pub const DEFAULT_DIRECT_WINDOW: f64 = 0.0025;

/// Room impulse response. The direct path is the largest-magnitude tap
/// (earliest on ties).
#[derive(Clone, Debug, PartialEq)]
pub struct Rir<T> {
    taps: Vec<T>,
    sample_rate: u32,
    direct_index: usize,
}

impl<T: Real> Rir<T> {
    pub fn new(taps: Vec<T>, sample_rate: u32) -> Result<Self, PerturbError> {
        if sample_rate == 0 || taps.iter().any(|t| !t.is_finite()) {
            return Err(PerturbError::InvalidRir);
        }
        let mut direct_index = 0;
        let mut peak = T::zero();
        for (i, &t) in taps.iter().enumerate() {
            if t.abs() > peak {
                peak = t.abs();
                direct_index = i;
            }
        }
        if peak == T::zero() {
            return Err(PerturbError::InvalidRir);
        }
        Ok(Self {
            taps,
            sample_rate,
            direct_index,
        })
    }

    pub fn from_signal(w: &Signal<T>) -> Result<Self, PerturbError> {
        Self::new(w.samples().to_vec(), w.sample_rate())
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn direct_index(&self) -> usize {
        self.direct_index
    }

    fn window_samples(&self, direct_window: f64) -> usize {
        (direct_window * f64::from(self.sample_rate)).round() as usize
    }

    /// Inclusive direct range and the first tail index.
    fn split(&self, direct_window: f64) -> (usize, usize) {
        let w = self.window_samples(direct_window);
        let start = self.direct_index.saturating_sub(w);
        let tail = (self.direct_index + w + 1).min(self.taps.len());
        (start, tail)
    }

    /// Copy with the tail scaled so the DRR equals `drr_db`.
    pub fn with_drr(&self, drr_db: f64, direct_window: f64) -> Result<Self, PerturbError> {
        let measured = measure_drr(self, direct_window)?;
        let beta = T::lit(db_to_amplitude(measured - drr_db));
        let (_, tail) = self.split(direct_window);
        let mut taps = self.taps.clone();
        for t in &mut taps[tail..] {
            *t = *t * beta;
        }
        Ok(Self {
            taps,
            sample_rate: self.sample_rate,
            direct_index: self.direct_index,
        })
    }
}

/// Direct-to-reverberant ratio in dB.
///
/// Direct energy covers taps within `±direct_window` seconds of the peak;
/// the tail is every later tap. Taps before the window are ignored.
pub fn measure_drr<T: Real>(rir: &Rir<T>, direct_window: f64) -> Result<f64, PerturbError> {
    if !(direct_window > 0.0) {
        return Err(PerturbError::InvalidArgument(format!("direct_window {direct_window}")));
    }
    let (start, tail) = rir.split(direct_window);
    let direct = energy(&rir.taps[start..tail]).as_f64();
    let rest = energy(&rir.taps[tail..]).as_f64();
    if !(rest > 0.0) {
        return Err(PerturbError::EmptyTail);
    }
    Ok(10.0 * (direct / rest).log10())
}

/// Reverberates `speech` with `rir` rescaled to `drr_db`, keeping the input
/// length and RMS level.
pub fn apply_reverb_at_drr<T: Real>(
    speech: &Signal<T>,
    rir: &Rir<T>,
    drr_db: f64,
    direct_window: f64,
) -> Result<Signal<T>, PerturbError> {
    reverberate(speech, rir, drr_db, direct_window, true)
}

/// As [`apply_reverb_at_drr`], with RMS renormalisation optional.
pub fn reverberate<T: Real>(
    speech: &Signal<T>,
    rir: &Rir<T>,
    drr_db: f64,
    direct_window: f64,
    renormalize: bool,
) -> Result<Signal<T>, PerturbError> {
    if speech.sample_rate() != rir.sample_rate() {
        return Err(PerturbError::RateMismatch(speech.sample_rate(), rir.sample_rate()));
    }
    if !drr_db.is_finite() {
        return Err(PerturbError::InvalidArgument(format!("drr {drr_db} dB")));
    }
    let modified = rir.with_drr(drr_db, direct_window)?;
    let mut wet = convolve(speech.samples(), modified.taps());
    wet.truncate(speech.len());
    if renormalize {
        let p_in = mean_square(speech.samples());
        let p_out = mean_square(&wet);
        if p_out > T::zero() {
            let g = (p_in / p_out).sqrt();
            wet.iter_mut().for_each(|v| *v = *v * g);
        }
    }
    Signal::new(wet, speech.sample_rate())
        .map_err(|e| PerturbError::InvalidArgument(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::rms;
    use crate::fft::convolve_direct;
    use crate::perturb::gen_white_noise;
    use crate::perturb::rng::CounterRng;

    const RATE: u32 = 16000;

    /// Exponentially decaying noise tail behind a unit direct path at 50.
    fn synthetic_rir(seed: u64) -> Rir<f64> {
        let mut rng = CounterRng::new(seed);
        let mut taps = vec![0.0; 4000];
        taps[50] = 1.0;
        for (i, t) in taps.iter_mut().enumerate().skip(100) {
            *t = 0.3 * rng.next_gaussian() * (-(i as f64) / 800.0).exp();
        }
        Rir::new(taps, RATE).unwrap()
    }

    #[test]
    fn direct_index_is_earliest_peak() {
        let r = Rir::new(vec![0.1f64, -0.9, 0.9, 0.2], RATE).unwrap();
        assert_eq!(r.direct_index(), 1);
        assert!(matches!(Rir::<f64>::new(vec![0.0; 4], RATE), Err(PerturbError::InvalidRir)));
    }

    #[test]
    fn drr_examples() {
        let delta = Rir::new(vec![1.0f64], RATE).unwrap();
        assert!(matches!(measure_drr(&delta, 0.0025), Err(PerturbError::EmptyTail)));

        // Window of 40 samples at 16 kHz; tail starts at 41.
        let mut taps = vec![0.0f64; 200];
        taps[0] = 1.0;
        taps[100] = 1.0 - 1e-12; // below the peak, tail energy ~1
        let r = Rir::new(taps.clone(), RATE).unwrap();
        assert!(measure_drr(&r, 0.0025).unwrap().abs() < 1e-10);

        taps[100] = 0.1f64.sqrt();
        let r = Rir::new(taps, RATE).unwrap();
        assert!((measure_drr(&r, 0.0025).unwrap() - 10.0).abs() < 1e-10);
    }

    #[test]
    fn tail_scaling_is_analytic() {
        let mut taps = vec![0.0f64; 200];
        taps[0] = 1.0;
        taps[100] = 0.5;
        taps[150] = -0.5;
        taps[180] = 0.5;
        taps[190] = -0.5; // tail energy 1.0 -> 0 dB
        let r = Rir::new(taps, RATE).unwrap();
        let m = r.with_drr(10.0, 0.0025).unwrap();
        assert!((m.taps()[100] - 0.5 * 10f64.powf(-0.5)).abs() < 1e-15);
        assert_eq!(m.taps()[0], 1.0);
    }

    #[test]
    fn re_measured_drr_is_exact() {
        let r = synthetic_rir(1);
        for drr in [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0] {
            let m = r.with_drr(drr, DEFAULT_DIRECT_WINDOW).unwrap();
            assert!((measure_drr(&m, DEFAULT_DIRECT_WINDOW).unwrap() - drr).abs() < 1e-6);
        }
    }

    #[test]
    fn unscaled_reverb_is_plain_convolution() {
        let r = synthetic_rir(2);
        let speech: Signal<f64> = gen_white_noise(0.1, RATE, 3);
        let measured = measure_drr(&r, DEFAULT_DIRECT_WINDOW).unwrap();
        let wet = reverberate(&speech, &r, measured, DEFAULT_DIRECT_WINDOW, false).unwrap();
        let reference = convolve_direct(speech.samples(), r.taps());
        assert_eq!(wet.len(), speech.len());
        for (a, b) in wet.samples().iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reverb_keeps_level() {
        let r = synthetic_rir(4);
        let speech: Signal<f64> = gen_white_noise(0.2, RATE, 5).scaled(3.0);
        let wet = apply_reverb_at_drr(&speech, &r, -5.0, DEFAULT_DIRECT_WINDOW).unwrap();
        let (a, b) = (rms(&speech).unwrap(), rms(&wet).unwrap());
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn reverb_errors() {
        let r = synthetic_rir(4);
        let other = Signal::new(vec![0.1f64; 10], 8000).unwrap();
        assert!(matches!(
            apply_reverb_at_drr(&other, &r, 0.0, DEFAULT_DIRECT_WINDOW),
            Err(PerturbError::RateMismatch(..))
        ));
        let delta = Rir::new(vec![1.0f64], RATE).unwrap();
        let speech = Signal::new(vec![0.1f64; 10], RATE).unwrap();
        assert!(matches!(
            apply_reverb_at_drr(&speech, &delta, 0.0, DEFAULT_DIRECT_WINDOW),
            Err(PerturbError::EmptyTail)
        ));
    }
}
