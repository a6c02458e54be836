use super::{db_to_amplitude, PerturbError};
use crate::audio::{mean_square, Signal};
use crate::Real;

/// The parts of an SNR mix, kept so callers can re-measure the level.
#[derive(Clone, Debug)]
pub struct MixComponents<T> {
    pub mixture: Signal<T>,
    pub speech: Signal<T>,
    pub scaled_noise: Signal<T>,
    pub gain: T,
}

/// Loops `noise` with wrap-around, or truncates it, to exactly `len` samples.
pub fn fit_length<T: Real>(noise: &Signal<T>, len: usize) -> Signal<T> {
    let src = noise.samples();
    let samples = if src.is_empty() {
        vec![T::zero(); len]
    } else {
        src.iter().copied().cycle().take(len).collect()
    };
    Signal::new(samples, noise.sample_rate()).expect("finite input")
}

/// Adds `noise` to `speech` at `snr_db`, measured on full-signal RMS.
pub fn mix_at_snr<T: Real>(
    speech: &Signal<T>,
    noise: &Signal<T>,
    snr_db: f64,
) -> Result<Signal<T>, PerturbError> {
    mix_components(speech, noise, snr_db).map(|m| m.mixture)
}

pub fn mix_components<T: Real>(
    speech: &Signal<T>,
    noise: &Signal<T>,
    snr_db: f64,
) -> Result<MixComponents<T>, PerturbError> {
    if speech.sample_rate() != noise.sample_rate() {
        return Err(PerturbError::RateMismatch(speech.sample_rate(), noise.sample_rate()));
    }
    if !snr_db.is_finite() {
        return Err(PerturbError::InvalidArgument(format!("snr {snr_db} dB")));
    }
    let fitted = fit_length(noise, speech.len());
    let ps = mean_square(speech.samples());
    let pn = mean_square(fitted.samples());
    if !(ps > T::zero()) || !(pn > T::zero()) {
        return Err(PerturbError::SilentInput);
    }
    let gain = (ps / pn).sqrt() * T::lit(db_to_amplitude(-snr_db));
    let scaled_noise = fitted.scaled(gain);
    let mixture = speech.add(&scaled_noise).expect("equal rates and lengths");
    Ok(MixComponents {
        mixture,
        speech: speech.clone(),
        scaled_noise,
        gain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::gen_white_noise;
    use proptest::prelude::*;

    fn measured_snr(m: &MixComponents<f64>) -> f64 {
        10.0 * (mean_square(m.speech.samples()) / mean_square(m.scaled_noise.samples())).log10()
    }

    fn constant(level: f64, len: usize) -> Signal<f64> {
        // Alternating sign so the signal is not DC; rms == level.
        Signal::new(
            (0..len).map(|i| if i % 2 == 0 { level } else { -level }).collect(),
            16000,
        )
        .unwrap()
    }

    #[test]
    fn analytic_gains() {
        let speech = constant(0.1, 100);
        let noise = constant(0.2, 100);
        let m = mix_components(&speech, &noise, 0.0).unwrap();
        assert!((m.gain - 0.5).abs() < 1e-15);
        let m = mix_components(&speech, &noise, 20.0).unwrap();
        assert!((m.gain - 0.05).abs() < 1e-15);
    }

    #[test]
    fn loops_short_noise() {
        let noise = Signal::new(vec![1.0f64, 2.0, 3.0], 8000).unwrap();
        assert_eq!(fit_length(&noise, 7).samples(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 1.0]);
        assert_eq!(fit_length(&noise, 2).samples(), &[1.0, 2.0]);
    }

    #[test]
    fn re_measured_snr_is_exact() {
        let speech: Signal<f64> = gen_white_noise(0.7, 16000, 1).scaled(0.37);
        let noise: Signal<f64> = gen_white_noise(0.3, 16000, 2);
        for snr in [-10.0, -5.0, 0.0, 5.0, 10.0, 20.0, 30.0] {
            let m = mix_components(&speech, &noise, snr).unwrap();
            assert!((measured_snr(&m) - snr).abs() < 1e-6);
        }
    }

    #[test]
    fn errors() {
        let a = constant(0.1, 10);
        let b = Signal::new(vec![0.1f64; 10], 8000).unwrap();
        assert!(matches!(mix_at_snr(&a, &b, 0.0), Err(PerturbError::RateMismatch(..))));
        let z = Signal::<f64>::zeros(10, 16000).unwrap();
        assert!(matches!(mix_at_snr(&a, &z, 0.0), Err(PerturbError::SilentInput)));
        assert!(matches!(mix_at_snr(&z, &a, 0.0), Err(PerturbError::SilentInput)));
    }

    proptest! {
        #[test]
        fn mixing_is_exactly_additive(seed in 0u64..1000, snr in -20.0f64..40.0) {
            let speech: Signal<f64> = gen_white_noise(0.05, 16000, seed);
            let noise: Signal<f64> = gen_white_noise(0.02, 16000, seed + 1);
            let m = mix_components(&speech, &noise, snr).unwrap();
            let fitted = fit_length(&noise, speech.len());
            for ((y, s), n) in m.mixture.samples().iter().zip(speech.samples()).zip(fitted.samples()) {
                prop_assert_eq!(*y, *s + m.gain * *n);
            }
        }

        #[test]
        fn snr_invariant_to_speech_prescaling(seed in 0u64..1000, alpha in 0.001f64..100.0, snr in -10.0f64..30.0) {
            let speech: Signal<f64> = gen_white_noise(0.05, 16000, seed);
            let noise: Signal<f64> = gen_white_noise(0.03, 16000, seed + 7);
            let m = mix_components(&speech.scaled(alpha), &noise, snr).unwrap();
            prop_assert!((measured_snr(&m) - snr).abs() < 1e-6);
        }
    }
}
