use super::rng::CounterRng;
use super::PerturbError;
use crate::audio::Signal;
use crate::Real;

/// RMS level (−20 dBFS) of generated white noise.
pub const WHITE_NOISE_RMS: f64 = 0.1;

fn sample_count(duration: f64, rate: u32) -> usize {
    (duration * f64::from(rate)).round() as usize
}

/// Seeded Gaussian white noise scaled to RMS [`WHITE_NOISE_RMS`].
///
/// Samples are consecutive standard normals from [`CounterRng`].
///
/// # Panics
///
/// If `duration` is not positive or `rate` is zero.
pub fn gen_white_noise<T: Real>(duration: f64, rate: u32, seed: u64) -> Signal<T> {
    assert!(duration > 0.0 && duration.is_finite(), "duration must be positive");
    assert!(rate > 0, "rate must be positive");
    let n = sample_count(duration, rate).max(1);
    let mut rng = CounterRng::new(seed);
    let raw: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
    let level = (raw.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    let scale = if level > 0.0 { WHITE_NOISE_RMS / level } else { 0.0 };
    let samples = raw.into_iter().map(|x| T::lit(x * scale)).collect();
    Signal::new(samples, rate).expect("finite noise")
}

/// `amplitude * sin(2 pi f t)` with raised-cosine fades of `fade` seconds.
pub fn gen_sine<T: Real>(
    freq: f64,
    duration: f64,
    rate: u32,
    amplitude: f64,
    fade: f64,
) -> Result<Signal<T>, PerturbError> {
    gen_sine_with_phase(freq, duration, rate, amplitude, fade, 0.0)
}

pub fn gen_sine_with_phase<T: Real>(
    freq: f64,
    duration: f64,
    rate: u32,
    amplitude: f64,
    fade: f64,
    phase: f64,
) -> Result<Signal<T>, PerturbError> {
    let nyquist = f64::from(rate) / 2.0;
    if !(freq > 0.0 && freq < nyquist) {
        return Err(PerturbError::FrequencyAboveNyquist { freq, nyquist });
    }
    if !(duration > 0.0) || !(fade >= 0.0) || 2.0 * fade > duration || !amplitude.is_finite() {
        return Err(PerturbError::InvalidArgument(format!(
            "duration {duration}, fade {fade}, amplitude {amplitude}"
        )));
    }
    let n = sample_count(duration, rate);
    let fade_len = sample_count(fade, rate).min(n / 2);
    let w = 2.0 * std::f64::consts::PI * freq / f64::from(rate);
    let ramp = |i: usize| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / fade_len as f64).cos());
    let samples = (0..n)
        .map(|i| {
            let mut v = amplitude * (w * i as f64 + phase).sin();
            if fade_len > 0 {
                if i < fade_len {
                    v *= ramp(i);
                } else if i >= n - fade_len {
                    v *= ramp(n - 1 - i);
                }
            }
            T::lit(v)
        })
        .collect();
    Signal::new(samples, rate).map_err(|e| PerturbError::InvalidArgument(e.to_string()))
}
