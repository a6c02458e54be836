use super::AnalysisError;
use crate::audio::Signal;
use crate::Real;

/// Magnitude of the DTFT of the whole buffer at `freq`, via the Goertzel
/// recurrence. `freq` need not be bin-aligned.
pub fn goertzel_magnitude<T: Real>(w: &Signal<T>, freq: f64) -> Result<f64, AnalysisError> {
    let rate = f64::from(w.sample_rate());
    let nyquist = rate / 2.0;
    if !(freq > 0.0 && freq < nyquist) {
        return Err(AnalysisError::FrequencyAboveNyquist { freq, nyquist });
    }
    let omega = 2.0 * std::f64::consts::PI * freq / rate;
    let coeff = 2.0 * omega.cos();
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for x in w.samples() {
        let s0 = x.as_f64() + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    let power = s1 * s1 + s2 * s2 - coeff * s1 * s2;
    Ok(power.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Waveform;
    use proptest::prelude::*;

    fn naive_dft(x: &[f64], omega: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, v) in x.iter().enumerate() {
            re += v * (omega * n as f64).cos();
            im -= v * (omega * n as f64).sin();
        }
        re.hypot(im)
    }

    #[test]
    fn integer_period_sine() {
        let (rate, n, f, a) = (8000u32, 8000usize, 250.0, 0.7);
        let x: Vec<f64> = (0..n)
            .map(|i| a * (2.0 * std::f64::consts::PI * f * i as f64 / f64::from(rate)).sin())
            .collect();
        let m = goertzel_magnitude(&Waveform::new(x, rate).unwrap(), f).unwrap();
        let expected = a * n as f64 / 2.0;
        assert!((m - expected).abs() / expected < 1e-3);
    }

    #[test]
    fn zeros_and_range() {
        let z = Waveform::zeros(100, 8000).unwrap();
        assert_eq!(goertzel_magnitude(&z, 1000.0).unwrap(), 0.0);
        assert!(matches!(
            goertzel_magnitude(&z, 4000.0),
            Err(AnalysisError::FrequencyAboveNyquist { .. })
        ));
        assert!(goertzel_magnitude(&z, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn matches_direct_dft(x in prop::collection::vec(-1.0f64..1.0, 16..256), f in 10.0f64..3990.0) {
            let w = Waveform::new(x.clone(), 8000).unwrap();
            let g = goertzel_magnitude(&w, f).unwrap();
            let d = naive_dft(&x, 2.0 * std::f64::consts::PI * f / 8000.0);
            prop_assert!((g - d).abs() <= 1e-9 * (1.0 + d));
        }
    }
}
