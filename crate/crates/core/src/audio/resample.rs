use super::{AudioError, Signal};
use crate::Real;

/// Taps in the interpolation kernel.
pub const RESAMPLE_TAPS: usize = 64;
/// Kaiser window shape parameter.
pub const RESAMPLE_BETA: f64 = 8.6;
/// Cutoff as a fraction of the lower of the two rates.
pub const RESAMPLE_CUTOFF: f64 = 0.45;

/// Zeroth-order modified Bessel function of the first kind (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Band-limited resampling with a 64-tap Kaiser-windowed sinc kernel.
///
/// Output length is `round(len * target / source)`. Samples outside the
/// input are treated as zero; each output is normalised by the kernel's
/// total weight so DC passes with unit gain.
pub fn resample<T: Real>(w: &Signal<T>, target_rate: u32) -> Result<Signal<T>, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidSampleRate);
    }
    let src = w.sample_rate();
    if src == target_rate {
        return Ok(w.clone());
    }
    let len = w.len();
    let out_len = ((len as u128 * target_rate as u128 + src as u128 / 2) / src as u128) as usize;

    let fc = RESAMPLE_CUTOFF * f64::from(src.min(target_rate)) / f64::from(src);
    let half = (RESAMPLE_TAPS / 2) as f64;
    let i0_beta = bessel_i0(RESAMPLE_BETA);
    let kernel = |tau: f64| -> f64 {
        let r = tau / half;
        if r.abs() > 1.0 {
            return 0.0;
        }
        let win = bessel_i0(RESAMPLE_BETA * (1.0 - r * r).sqrt()) / i0_beta;
        2.0 * fc * sinc(2.0 * fc * tau) * win
    };

    let x = w.samples();
    let ratio = f64::from(src) / f64::from(target_rate);
    let mut out = Vec::with_capacity(out_len);
    let mut weights = [0.0f64; RESAMPLE_TAPS];
    for m in 0..out_len {
        let pos = m as f64 * ratio;
        let base = pos.floor() as isize - (RESAMPLE_TAPS as isize / 2 - 1);
        let mut total = 0.0;
        for (j, wt) in weights.iter_mut().enumerate() {
            *wt = kernel(pos - (base + j as isize) as f64);
            total += *wt;
        }
        let mut acc = T::zero();
        for (j, &wt) in weights.iter().enumerate() {
            let n = base + j as isize;
            if n >= 0 && (n as usize) < len {
                acc = acc + x[n as usize] * T::lit(wt / total);
            }
        }
        out.push(acc);
    }
    Signal::new(out, target_rate)
}
